use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the 1D U-Net residual mapping.
///
/// Only `in_channels` varies: 2 for the TV-conditioned network (noisy
/// spectrum stacked with its TV solution), 1 for the plain U-Net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub in_channels: usize,
    pub depth: usize,
    pub base_channels: usize,
    pub kernel: usize,
}

impl ArchConfig {
    pub const DEPTH: usize = 3;
    pub const BASE_CHANNELS: usize = 16;
    pub const KERNEL: usize = 3;

    pub fn tvcondnet() -> Self {
        Self::with_inputs(2)
    }

    pub fn unet() -> Self {
        Self::with_inputs(1)
    }

    fn with_inputs(in_channels: usize) -> Self {
        Self {
            in_channels,
            depth: Self::DEPTH,
            base_channels: Self::BASE_CHANNELS,
            kernel: Self::KERNEL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.in_channels) {
            return Err(Error::invalid(format!(
                "in_channels must be 1 or 2, got {}",
                self.in_channels
            )));
        }
        if (self.depth, self.base_channels, self.kernel)
            != (Self::DEPTH, Self::BASE_CHANNELS, Self::KERNEL)
        {
            return Err(Error::invalid(format!(
                "unsupported architecture (depth {}, base {}, kernel {}); expected ({}, {}, {})",
                self.depth,
                self.base_channels,
                self.kernel,
                Self::DEPTH,
                Self::BASE_CHANNELS,
                Self::KERNEL
            )));
        }
        Ok(())
    }

    /// Channel width at encoder level `level`; `level == depth` is the bottleneck.
    pub fn width(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Input lengths are padded up to a multiple of this.
    pub fn length_multiple(&self) -> usize {
        1 << self.depth
    }
}

/// Name and shape of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    fn new(name: String, shape: Vec<usize>) -> Self {
        Self { name, shape }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

fn conv(out: &mut Vec<TensorSpec>, prefix: &str, c_out: usize, c_in: usize, k: usize) {
    out.push(TensorSpec::new(format!("{prefix}.weight"), vec![c_out, c_in, k]));
    out.push(TensorSpec::new(format!("{prefix}.bias"), vec![c_out]));
}

/// Parameter tensors in file order.
///
/// ```text
/// enc{l}.conv1, enc{l}.conv2            l = 0..depth
/// bottleneck.conv1, bottleneck.conv2
/// dec{l}.up, dec{l}.conv1, dec{l}.conv2 l = depth-1..=0
/// head                                  1×1, to one channel
/// ```
///
/// Each convolution contributes `.weight` of shape (out, in, taps) followed
/// by `.bias` of shape (out).
pub fn canonical_tensors(arch: &ArchConfig) -> Vec<TensorSpec> {
    let k = arch.kernel;
    let mut specs = Vec::new();
    let mut c_in = arch.in_channels;
    for l in 0..arch.depth {
        let w = arch.width(l);
        conv(&mut specs, &format!("enc{l}.conv1"), w, c_in, k);
        conv(&mut specs, &format!("enc{l}.conv2"), w, w, k);
        c_in = w;
    }
    let wb = arch.width(arch.depth);
    conv(&mut specs, "bottleneck.conv1", wb, c_in, k);
    conv(&mut specs, "bottleneck.conv2", wb, wb, k);
    for l in (0..arch.depth).rev() {
        let w = arch.width(l);
        conv(&mut specs, &format!("dec{l}.up"), w, arch.width(l + 1), k);
        conv(&mut specs, &format!("dec{l}.conv1"), w, 2 * w, k);
        conv(&mut specs, &format!("dec{l}.conv2"), w, w, k);
    }
    conv(&mut specs, "head", 1, arch.width(0), 1);
    specs
}
