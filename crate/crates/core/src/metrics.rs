//! Reconstruction quality metrics.

use crate::error::{Error, Result};

/// Value written in place of `+∞` dB when a report is serialized.
pub const SNR_CAP_DB: f64 = 300.0;

/// `20·log10(‖reference‖₂ / ‖estimate − reference‖₂)`.
///
/// A perfect reconstruction returns `f64::INFINITY`; see [`cap_snr`] for the
/// serialized form.
pub fn snr_db(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_lengths(reference, estimate)?;
    let signal = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if signal == 0.0 {
        return Err(Error::invalid("SNR reference has zero energy"));
    }
    let err = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (e - r).powi(2))
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (signal / err).log10())
}

/// `sqrt(mean((estimate − reference)²))`.
pub fn rmse(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_lengths(reference, estimate)?;
    if reference.is_empty() {
        return Err(Error::invalid("RMSE of empty sequences"));
    }
    let sse: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (e - r).powi(2))
        .sum();
    Ok((sse / reference.len() as f64).sqrt())
}

/// Clamp an SNR to [`SNR_CAP_DB`] so it stays numeric in CSV/JSON.
pub fn cap_snr(snr: f64) -> f64 {
    snr.min(SNR_CAP_DB)
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
