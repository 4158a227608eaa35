//! Synthetic FIDs, the measurement model, and the Fourier pipeline.
//!
//! A clean FID is a sum of damped complex exponentials. Noise is circular
//! complex Gaussian, rescaled so that the FID-domain SNR
//! `20·log10(‖x‖₂/‖e‖₂)` hits the requested level exactly. Spectra are the
//! real part of the unitary DFT, normalized to zero mean and unit population
//! standard deviation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest FID length accepted by [`Fid::new`].
pub const MIN_FID_LEN: usize = 8;

/// One damped complex exponential component of an FID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub amplitude: f64,
    /// Cycles per sample, in `[-0.5, 0.5)`.
    pub frequency: f64,
    /// Per-sample damping.
    pub decay_rate: f64,
    /// Radians.
    pub phase: f64,
}

impl PeakParams {
    pub fn new(amplitude: f64, frequency: f64, decay_rate: f64, phase: f64) -> Self {
        Self {
            amplitude,
            frequency,
            decay_rate,
            phase,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self;
        if ![p.amplitude, p.frequency, p.decay_rate, p.phase]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::invalid(format!("non-finite peak parameter: {p:?}")));
        }
        if p.amplitude < 0.0 {
            return Err(Error::invalid(format!("negative amplitude {}", p.amplitude)));
        }
        if p.decay_rate < 0.0 {
            return Err(Error::invalid(format!("negative decay rate {}", p.decay_rate)));
        }
        if !(-0.5..0.5).contains(&p.frequency) {
            return Err(Error::invalid(format!(
                "frequency {} outside [-0.5, 0.5)",
                p.frequency
            )));
        }
        Ok(())
    }
}

/// Complex time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Fid {
    samples: Vec<Complex64>,
}

impl Fid {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() < MIN_FID_LEN {
            return Err(Error::invalid(format!(
                "FID length {} is below the minimum of {MIN_FID_LEN}",
                samples.len()
            )));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("FID contains non-finite samples"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.samples)
    }

    pub fn scaled(&self, alpha: f64) -> Fid {
        Fid {
            samples: self.samples.iter().map(|z| z * alpha).collect(),
        }
    }
}

/// Real-valued frequency-domain signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite spectrum value at index {i}")));
        }
        Ok(Self { values })
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AsRef<[f64]> for Spectrum {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Requested FID-domain noise level and the seed of its noise draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub input_snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(input_snr_db: f64, seed: u64) -> Self {
        Self { input_snr_db, seed }
    }
}

/// Sum of damped complex exponentials sampled at `t = 0..n`.
pub fn synth_fid(peaks: &[PeakParams], n: usize) -> Result<Fid> {
    if peaks.is_empty() {
        return Err(Error::invalid("peak list is empty"));
    }
    if n < MIN_FID_LEN {
        return Err(Error::invalid(format!("n = {n} is below {MIN_FID_LEN}")));
    }
    for p in peaks {
        p.validate()?;
    }
    let mut samples = vec![Complex64::new(0.0, 0.0); n];
    for p in peaks {
        let start = Complex64::from_polar(p.amplitude, p.phase);
        let rate = Complex64::new(-p.decay_rate, 2.0 * PI * p.frequency);
        for (t, s) in samples.iter_mut().enumerate() {
            // exp evaluated per sample rather than by recurrence, so long
            // FIDs do not accumulate rounding drift.
            *s += start * (rate * t as f64).exp();
        }
    }
    Fid::new(samples)
}

/// Number of 32-bit ChaCha words consumed by one complex normal draw.
const WORDS_PER_SAMPLE: u128 = 4;

fn unit_open_closed(bits: u64) -> f64 {
    // (0, 1]: never zero, so ln() below stays finite.
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(rng: &mut impl RngCore) -> Complex64 {
    let u1 = unit_open_closed(rng.next_u64());
    let u2 = unit_open_closed(rng.next_u64());
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * PI * u2;
    Complex64::new(r * theta.cos(), r * theta.sin())
}

/// Standard complex normal draw (unit variance per component) for sample
/// index `t` of the stream keyed by `seed`. Independent of any other index,
/// so noise vectors can be generated in any order.
pub fn complex_normal_at(seed: u64, t: usize) -> Complex64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(WORDS_PER_SAMPLE * t as u128);
    box_muller(&mut rng)
}

/// Standard complex normal vector of length `n` for `seed`; element `t`
/// equals `complex_normal_at(seed, t)`.
pub fn complex_normal_vec(seed: u64, n: usize) -> Vec<Complex64> {
    // A linear walk through the stream lands on the same word positions as
    // random access, without re-keying the cipher per sample.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| box_muller(&mut rng)).collect()
}

/// Add circular complex Gaussian noise at exactly `spec.input_snr_db`.
///
/// Returns the noisy FID and the per-component standard deviation of the
/// noise that was added.
pub fn add_noise(fid: &Fid, spec: NoiseSpec) -> Result<(Fid, f64)> {
    if !spec.input_snr_db.is_finite() {
        return Err(Error::invalid("input SNR must be finite"));
    }
    let signal_norm = fid.norm();
    if signal_norm == 0.0 {
        return Err(Error::invalid("FID has zero energy"));
    }
    let mut noise = complex_normal_vec(spec.seed, fid.len());
    let target = signal_norm * 10f64.powf(-spec.input_snr_db / 20.0);
    let scale = target / l2_norm(&noise);
    noise.iter_mut().for_each(|z| *z *= scale);
    let sigma = l2_norm(&noise) / ((2 * fid.len()) as f64).sqrt();
    let noisy = fid
        .samples
        .iter()
        .zip(&noise)
        .map(|(x, e)| x + e)
        .collect();
    Ok((Fid::new(noisy)?, sigma))
}

/// Realized FID-domain SNR of `noisy` against `clean`, in dB.
pub fn fid_snr_db(clean: &Fid, noisy: &Fid) -> f64 {
    let err: f64 = clean
        .samples
        .iter()
        .zip(&noisy.samples)
        .map(|(a, b)| (b - a).norm_sqr())
        .sum::<f64>()
        .sqrt();
    20.0 * (clean.norm() / err).log10()
}

/// Unitary forward DFT: `X[k] = n^{-1/2} Σ_t x[t]·exp(-2πi·kt/n)`.
pub fn unitary_dft(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}

/// Unitary inverse DFT.
pub fn unitary_idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let n = spectrum.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}

/// Real part of the unitary DFT, before normalization.
pub fn real_spectrum(fid: &Fid) -> Vec<f64> {
    unitary_dft(fid.samples()).into_iter().map(|z| z.re).collect()
}

/// FID to normalized real spectrum.
///
/// A real part whose spread is at rounding level relative to the FID's own
/// magnitude (for example a purely imaginary constant FID) is degenerate.
pub fn fid_to_spectrum(fid: &Fid) -> Result<Spectrum> {
    let raw = real_spectrum(fid);
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let std = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std <= 1e-12 * fid.norm() / n.sqrt() {
        return Err(Error::DegenerateInput(
            "real spectrum has no variance at FID scale".into(),
        ));
    }
    normalize(&raw)
}

/// Zero-mean, unit population standard deviation.
pub fn normalize(values: &[f64]) -> Result<Spectrum> {
    if values.is_empty() {
        return Err(Error::DegenerateInput("empty sequence".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in sequence"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if std == 0.0 || std <= scale * 1e-14 {
        return Err(Error::DegenerateInput("sequence has zero variance".into()));
    }
    Spectrum::new(values.iter().map(|v| (v - mean) / std).collect())
}

pub(crate) fn l2_norm(z: &[Complex64]) -> f64 {
    z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Generator for random peak lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakModel {
    pub min_peaks: usize,
    pub max_peaks: usize,
    pub min_amplitude: f64,
    pub max_amplitude: f64,
    pub min_decay: f64,
    pub max_decay: f64,
    /// When false every peak has phase 0 (pure absorption lines).
    pub random_phase: bool,
}

impl Default for PeakModel {
    fn default() -> Self {
        Self {
            min_peaks: 3,
            max_peaks: 30,
            min_amplitude: 0.1,
            max_amplitude: 1.0,
            min_decay: 0.001,
            max_decay: 0.05,
            random_phase: false,
        }
    }
}

impl PeakModel {
    pub fn validate(&self) -> Result<()> {
        if self.min_peaks == 0 || self.min_peaks > self.max_peaks {
            return Err(Error::invalid("peak count range must satisfy 1 ≤ min ≤ max"));
        }
        if !(0.0 <= self.min_amplitude && self.min_amplitude <= self.max_amplitude) {
            return Err(Error::invalid("amplitude range must satisfy 0 ≤ min ≤ max"));
        }
        if !(0.0 <= self.min_decay && self.min_decay <= self.max_decay) {
            return Err(Error::invalid("decay range must satisfy 0 ≤ min ≤ max"));
        }
        Ok(())
    }

    /// Draw one peak list from `rng`.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<PeakParams> {
        let count = rng.random_range(self.min_peaks..=self.max_peaks);
        (0..count)
            .map(|_| {
                let amplitude = uniform(rng, self.min_amplitude, self.max_amplitude);
                let frequency = rng.random::<f64>() - 0.5;
                let decay_rate = uniform(rng, self.min_decay, self.max_decay);
                let phase = if self.random_phase {
                    uniform(rng, -PI, PI)
                } else {
                    0.0
                };
                PeakParams::new(amplitude, frequency, decay_rate, phase)
            })
            .collect()
    }

    /// `count` peak lists; list `i` depends only on `(seed, i)`.
    pub fn sample_sets(&self, count: usize, seed: u64) -> Vec<Vec<PeakParams>> {
        (0..count)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                self.sample(&mut rng)
            })
            .collect()
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}
