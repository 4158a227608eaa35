//! Hankel embedding and Cadzow low-rank signal enhancement.
//!
//! A sum of `r` damped exponentials has a rank-`r` Hankel embedding. Cadzow
//! alternates between the rank-`r` matrices (truncated SVD) and the Hankel
//! matrices (anti-diagonal averaging).

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Fid;

pub type ComplexMatrix = Mat<Complex64>;

/// Relative singular-value cutoff used by [`estimate_rank`].
pub const RANK_GAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HankelConfig {
    pub rank: usize,
    pub iterations: usize,
    /// Hankel row count `L`; `None` means `⌊n/2⌋ + 1`.
    pub window: Option<usize>,
}

impl HankelConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            iterations: 10,
            window: None,
        }
    }

    pub fn window_for(&self, n: usize) -> usize {
        self.window.unwrap_or(default_window(n))
    }
}

pub fn default_window(n: usize) -> usize {
    n / 2 + 1
}

/// `L × (n−L+1)` matrix with `H[i][j] = x[i+j]`.
pub fn build_hankel(x: &[Complex64], window: usize) -> Result<ComplexMatrix> {
    let n = x.len();
    if window < 2 || window + 1 > n {
        return Err(Error::invalid(format!(
            "Hankel window {window} outside [2, {}]",
            n.saturating_sub(1)
        )));
    }
    let cols = n - window + 1;
    Ok(ComplexMatrix::from_fn(window, cols, |i, j| x[i + j]))
}

/// Anti-diagonal averaging: `x[t] = mean{H[i][j] : i + j = t}`.
pub fn hankel_to_fid(h: &ComplexMatrix) -> Vec<Complex64> {
    let (rows, cols) = h.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let len = rows + cols - 1;
    let mut sum = vec![Complex64::new(0.0, 0.0); len];
    let mut count = vec![0usize; len];
    for j in 0..cols {
        for i in 0..rows {
            sum[i + j] += h[(i, j)];
            count[i + j] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &c)| s / c as f64)
        .collect()
}

/// Best rank-`rank` Frobenius approximation via SVD.
pub fn low_rank_approx(h: &ComplexMatrix, rank: usize) -> Result<ComplexMatrix> {
    let min_dim = h.nrows().min(h.ncols());
    if rank == 0 || rank > min_dim {
        return Err(Error::invalid(format!(
            "rank {rank} outside [1, {min_dim}]"
        )));
    }
    if rank == min_dim {
        return Ok(h.clone());
    }
    let svd = h
        .thin_svd()
        .map_err(|_| Error::DegenerateInput("SVD did not converge".into()))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut order: Vec<usize> = (0..min_dim).collect();
    order.sort_by(|&a, &b| s[b].re.total_cmp(&s[a].re));
    order.truncate(rank);
    let us = ComplexMatrix::from_fn(h.nrows(), rank, |i, k| u[(i, order[k])] * s[order[k]]);
    let vr = ComplexMatrix::from_fn(h.ncols(), rank, |j, k| v[(j, order[k])]);
    Ok(&us * vr.adjoint())
}

/// Singular values in descending order.
pub fn singular_values(h: &ComplexMatrix) -> Result<Vec<f64>> {
    let mut s = h
        .singular_values()
        .map_err(|_| Error::DegenerateInput("SVD did not converge".into()))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values at or above `RANK_GAP · σ₁` of the Hankel
/// embedding, for picking a Cadzow rank when the peak count is unknown.
pub fn estimate_rank(fid: &Fid, window: Option<usize>) -> Result<usize> {
    let l = window.unwrap_or(default_window(fid.len()));
    let s = singular_values(&build_hankel(fid.samples(), l)?)?;
    let cutoff = RANK_GAP * s[0];
    Ok(s.iter().filter(|&&v| v >= cutoff).count().max(1))
}

/// Cadzow enhancement: `iterations` rounds of Hankel embedding, rank
/// truncation, and anti-diagonal averaging.
pub fn cadzow_denoise(fid: &Fid, cfg: &HankelConfig) -> Result<Fid> {
    let n = fid.len();
    let window = cfg.window_for(n);
    if cfg.iterations == 0 {
        return Err(Error::invalid("Cadzow needs at least one iteration"));
    }
    let min_dim = window.min(n.saturating_sub(window) + 1);
    if cfg.rank == 0 || cfg.rank > min_dim {
        return Err(Error::invalid(format!(
            "rank {} outside [1, {min_dim}] for window {window}",
            cfg.rank
        )));
    }
    let mut x = fid.samples().to_vec();
    for _ in 0..cfg.iterations {
        let h = build_hankel(&x, window)?;
        x = hankel_to_fid(&low_rank_approx(&h, cfg.rank)?);
    }
    Fid::new(x)
}
