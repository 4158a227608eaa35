//! Denoising toolkit for 1D NMR spectra.
//!
//! The pipeline: synthesize a clean FID, inject complex Gaussian noise at an
//! exact FID-domain SNR, transform to a normalized real spectrum, and denoise
//! it with exact total variation ([`tv`]), wavelet shrinkage ([`wavelet`]),
//! Cadzow low-rank Hankel enhancement ([`hankel`]), or a TV-conditioned
//! residual U-Net ([`nn`]). [`bench`] scores the methods and [`report`] /
//! [`plot`] emit the results.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod hankel;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod plot;
pub mod report;
pub mod signal;
pub mod tv;
pub mod wavelet;

pub use error::{Error, Result};
pub use par::Exec;
pub use signal::{Fid, NoiseSpec, PeakParams, Spectrum};
