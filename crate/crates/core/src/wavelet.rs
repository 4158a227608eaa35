//! Wavelet shrinkage with an orthogonal, periodized Daubechies-4 transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Spectrum;

/// Daubechies-4 scaling (reconstruction low-pass) filter, 8 taps.
const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

/// Gaussian MAD-to-sigma factor.
const MAD_SCALE: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    /// Universal threshold `σ̂·√(2 ln n)`, `σ̂ = median(|finest detail|) / 0.6745`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub levels: usize,
    pub mode: ThresholdMode,
    pub threshold: Threshold,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            levels: 5,
            mode: ThresholdMode::Soft,
            threshold: Threshold::Auto,
        }
    }
}

/// Multilevel decomposition: `details[0]` is the finest scale.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

impl WaveletCoeffs {
    pub fn energy(&self) -> f64 {
        self.approx
            .iter()
            .chain(self.details.iter().flatten())
            .map(|v| v * v)
            .sum()
    }
}

fn highpass() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (m, gm) in g.iter_mut().enumerate() {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        *gm = sign * DB4[7 - m];
    }
    g
}

fn analysis_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let g = highpass();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        for m in 0..DB4.len() {
            let v = x[(2 * k + m) % n];
            sa += DB4[m] * v;
            sd += g[m] * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64]) -> Vec<f64> {
    let n = 2 * a.len();
    let g = highpass();
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        for m in 0..DB4.len() {
            x[(2 * k + m) % n] += DB4[m] * a[k] + g[m] * d[k];
        }
    }
    x
}

fn check_levels(n: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::invalid("wavelet levels must be ≥ 1"));
    }
    if levels >= usize::BITS as usize || (1usize << levels) > n {
        return Err(Error::invalid(format!(
            "{levels} wavelet levels is too deep for length {n}"
        )));
    }
    Ok(())
}

/// Forward transform. `x.len()` must be a multiple of `2^levels`.
pub fn dwt(x: &[f64], levels: usize) -> Result<WaveletCoeffs> {
    check_levels(x.len(), levels)?;
    if !x.len().is_multiple_of(1 << levels) {
        return Err(Error::invalid(format!(
            "length {} is not a multiple of 2^{levels}",
            x.len()
        )));
    }
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx);
        details.push(d);
        approx = a;
    }
    Ok(WaveletCoeffs { approx, details })
}

/// Inverse of [`dwt`].
pub fn idwt(coeffs: &WaveletCoeffs) -> Vec<f64> {
    coeffs
        .details
        .iter()
        .rev()
        .fold(coeffs.approx.clone(), |a, d| synthesis_step(&a, d))
}

/// Universal threshold from the finest detail band.
pub fn universal_threshold(finest: &[f64], n: usize) -> f64 {
    let mut mags: Vec<f64> = finest.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let m = mags.len();
    let median = if m % 2 == 1 {
        mags[m / 2]
    } else {
        0.5 * (mags[m / 2 - 1] + mags[m / 2])
    };
    median / MAD_SCALE * (2.0 * (n as f64).ln()).sqrt()
}

/// Apply the threshold to every detail band in place.
pub fn threshold_details(coeffs: &mut WaveletCoeffs, threshold: f64, mode: ThresholdMode) {
    for v in coeffs.details.iter_mut().flatten() {
        *v = match mode {
            ThresholdMode::Soft => v.signum() * (v.abs() - threshold).max(0.0),
            ThresholdMode::Hard => {
                if v.abs() > threshold {
                    *v
                } else {
                    0.0
                }
            }
        };
    }
}

/// Symmetric (edge-excluded) extension on the right up to a multiple of `block`.
fn reflect_pad(x: &[f64], block: usize) -> Vec<f64> {
    let n = x.len();
    let target = n.div_ceil(block) * block;
    let mut out = x.to_vec();
    for i in 0..target - n {
        out.push(x[n - 2 - i]);
    }
    out
}

pub fn wavelet_denoise(y: &Spectrum, cfg: &WaveletConfig) -> Result<Spectrum> {
    Spectrum::new(wavelet_denoise_values(y.values(), cfg)?)
}

pub fn wavelet_denoise_values(y: &[f64], cfg: &WaveletConfig) -> Result<Vec<f64>> {
    let n = y.len();
    check_levels(n, cfg.levels)?;
    if n < 2 {
        return Err(Error::invalid("wavelet denoising needs at least 2 samples"));
    }
    let padded = reflect_pad(y, 1 << cfg.levels);
    let mut coeffs = dwt(&padded, cfg.levels)?;
    let threshold = match cfg.threshold {
        Threshold::Auto => universal_threshold(&coeffs.details[0], n),
        Threshold::Fixed(t) if t.is_finite() && t >= 0.0 => t,
        Threshold::Fixed(t) => {
            return Err(Error::invalid(format!("threshold must be finite and ≥ 0, got {t}")))
        }
    };
    threshold_details(&mut coeffs, threshold, cfg.mode);
    let mut out = idwt(&coeffs);
    out.truncate(n);
    Ok(out)
}
