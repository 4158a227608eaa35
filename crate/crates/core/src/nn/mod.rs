//! Inference for the residual 1D U-Net, with or without the TV condition
//! channel.
//!
//! The network predicts the noise `R(y, c) ≈ y − x`; the denoised spectrum
//! is `y − R(y, c)`. Training happens elsewhere; weights arrive as TVCW1
//! files (see [`weights`]).

pub mod arch;
pub mod forward;
pub mod weights;

pub use arch::{canonical_tensors, ArchConfig, TensorSpec};
pub use forward::{denoise, forward};
pub use weights::{load_weights, save_weights, Model, Tensor};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::par::Exec;

/// Residual loss `(1/2K) Σ_i ‖R(Y_i, C_i) − (Y_i − X_i)‖²` over a dataset.
pub fn eval_loss(model: &Model, ds: &Dataset, exec: Exec) -> Result<f64> {
    let k = ds.len();
    if k == 0 {
        return Err(Error::invalid("dataset is empty"));
    }
    let uses_condition = model.arch().in_channels == 2;
    let per_example: Vec<Result<f64>> = exec.map(k, |i| {
        let y = ds.noisy_row(i);
        let x = ds.clean_row(i);
        let c = ds.condition_row(i);
        let cond = uses_condition.then_some(c.as_slice());
        let r = forward(model, &y, cond)?;
        Ok(r.iter()
            .zip(y.iter().zip(&x))
            .map(|(ri, (yi, xi))| (ri - (yi - xi)).powi(2))
            .sum())
    });
    let mut total = 0.0;
    for v in per_example {
        total += v?;
    }
    Ok(total / (2.0 * k as f64))
}
