//! Exact 1D total-variation denoising.
//!
//! [`tv_prox`] returns the unique minimizer of
//! `½‖y − x‖₂² + τ·Σ|x[i+1] − x[i]|` using a direct, non-iterative solver
//! from the taut-string family (running lower/upper bounds on the current
//! segment value, with the dual variable kept inside `[-τ, τ]`). Expected
//! cost is linear in the signal length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::snr_db;
use crate::par::Exec;
use crate::signal::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvConfig {
    pub tau: f64,
}

impl TvConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::invalid(format!("tau must be finite and ≥ 0, got {tau}")));
        }
        Ok(Self { tau })
    }
}

/// Strictly increasing list of candidate regularization strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TauGrid {
    values: Vec<f64>,
}

impl TauGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("tau grid is empty"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("tau grid values must be finite and ≥ 0"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tau grid must be strictly increasing"));
        }
        Ok(Self { values })
    }

    /// `count` log-spaced points from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || count < 2 {
            return Err(Error::invalid("log grid needs 0 < lo < hi and count ≥ 2"));
        }
        let (a, b) = (lo.log10(), hi.log10());
        let step = (b - a) / (count - 1) as f64;
        let mut values: Vec<f64> = (0..count).map(|i| 10f64.powf(a + step * i as f64)).collect();
        values[0] = lo;
        values[count - 1] = hi;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// 25 log-spaced points over `[1e-3, 1e1]`.
impl Default for TauGrid {
    fn default() -> Self {
        Self::log_spaced(1e-3, 1e1, 25).expect("static grid is valid")
    }
}

impl TryFrom<Vec<f64>> for TauGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TauGrid> for Vec<f64> {
    fn from(g: TauGrid) -> Self {
        g.values
    }
}

/// `Σ |x[i+1] − x[i]|`.
pub fn tv_value(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::invalid("total variation needs at least 2 samples"));
    }
    Ok(x.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// TV proximal operator on a spectrum.
pub fn tv_prox(y: &Spectrum, cfg: TvConfig) -> Result<Spectrum> {
    Spectrum::new(tv_prox_values(y.values(), cfg.tau)?)
}

/// TV proximal operator on a raw slice.
pub fn tv_prox_values(y: &[f64], tau: f64) -> Result<Vec<f64>> {
    if y.len() < 2 {
        return Err(Error::invalid("TV denoising needs at least 2 samples"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input to TV denoising"));
    }
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::invalid(format!("tau must be finite and ≥ 0, got {tau}")));
    }
    if tau == 0.0 || y.iter().all(|&v| v == y[0]) {
        return Ok(y.to_vec());
    }
    Ok(taut_string(y, tau))
}

/// Direct solver. `y.len() ≥ 2`, `lambda > 0`.
fn taut_string(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    let last = n - 1;
    let mut out = vec![0.0; n];

    // k: current position; k0: start of the open segment.
    let (mut k, mut k0) = (0usize, 0usize);
    // Last positions where the dual variable touched -λ / +λ.
    let (mut kplus, mut kminus) = (0usize, 0usize);
    // Dual variable bounds and segment value bounds.
    let (mut umin, mut umax) = (lambda, -lambda);
    let (mut vmin, mut vmax) = (y[0] - lambda, y[0] + lambda);

    // Writes `value` to out[k0..=end] and advances k0 past end.
    let fill = |out: &mut [f64], k0: &mut usize, end: usize, value: f64| {
        out[*k0..=end].fill(value);
        *k0 = end + 1;
    };

    loop {
        while k == last {
            if umin < 0.0 {
                // vmin too high: negative jump
                fill(&mut out, &mut k0, kminus, vmin);
                k = k0;
                kminus = k0;
                vmin = y[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                // vmax too low: positive jump
                fill(&mut out, &mut k0, kplus, vmax);
                k = k0;
                kplus = k0;
                vmax = y[k0];
                umax = -lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                fill(&mut out, &mut k0, k, vmin);
                return out;
            }
        }

        umin += y[k + 1] - vmin;
        if umin < -lambda {
            fill(&mut out, &mut k0, kminus, vmin);
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = y[k0];
            vmax = vmin + 2.0 * lambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        umax += y[k + 1] - vmax;
        if umax > lambda {
            fill(&mut out, &mut k0, kplus, vmax);
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = y[k0];
            vmin = vmax - 2.0 * lambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (k - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= -lambda {
            kplus = k;
            vmax += (umax + lambda) / (k - k0 + 1) as f64;
            umax = -lambda;
        }
    }
}

/// Index of the largest score; ties resolve to the lowest index.
fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Output SNR of `tv_prox(y, τ)` against `clean` for each grid τ.
fn grid_snrs(y: &[f64], clean: &[f64], grid: &TauGrid, exec: Exec) -> Result<Vec<f64>> {
    exec.map(grid.values().len(), |j| {
        let x = tv_prox_values(y, grid.values()[j])?;
        snr_db(clean, &x)
    })
    .into_iter()
    .collect()
}

/// Grid τ with the best output SNR against the clean target, and its
/// denoised spectrum. Ties go to the smaller τ.
pub fn tune_tau_oracle(
    y: &Spectrum,
    x_clean: &Spectrum,
    grid: &TauGrid,
    exec: Exec,
) -> Result<(f64, Spectrum)> {
    if y.len() != x_clean.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            y.len(),
            x_clean.len()
        )));
    }
    let scores = grid_snrs(y.values(), x_clean.values(), grid, exec)?;
    let tau = grid.values()[argmax_first(&scores)];
    let denoised = tv_prox(y, TvConfig { tau })?;
    Ok((tau, denoised))
}

/// Single grid τ with the best mean output SNR over all pairs.
pub fn tune_tau_validation(
    pairs: &[(Spectrum, Spectrum)],
    grid: &TauGrid,
    exec: Exec,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    for (y, x) in pairs {
        if y.len() != x.len() {
            return Err(Error::invalid("validation pair length mismatch"));
        }
    }
    let per_tau: Vec<Result<f64>> = exec.map(grid.values().len(), |j| {
        let tau = grid.values()[j];
        let mut total = 0.0;
        for (y, x) in pairs {
            let d = tv_prox_values(y.values(), tau)?;
            total += snr_db(x.values(), &d)?;
        }
        Ok(total / pairs.len() as f64)
    });
    let scores = per_tau.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(grid.values()[argmax_first(&scores)])
}
