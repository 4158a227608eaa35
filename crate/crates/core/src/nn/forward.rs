//! Forward pass of the canonical 1D U-Net.
//!
//! Activations are channel-major `f32` buffers (`[channel][position]`).
//! Every 3-tap convolution uses reflect padding of 1; a length-1 signal
//! reflects onto itself. The decoder concatenates `[upsampled, skip]`.

use super::weights::{Model, Tensor};
use crate::error::{Error, Result};

/// Channel-major activation map.
#[derive(Debug, Clone)]
struct Activation {
    channels: usize,
    len: usize,
    data: Vec<f32>,
}

impl Activation {
    fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.len..(c + 1) * self.len]
    }
}

/// Mirror index for positions just outside `0..len`.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let last = len as isize - 1;
    let r = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    r as usize
}

fn conv1d(x: &Activation, weight: &Tensor, bias: &Tensor, relu: bool) -> Activation {
    let (c_out, c_in, taps) = (weight.shape[0], weight.shape[1], weight.shape[2]);
    debug_assert_eq!(c_in, x.channels);
    let len = x.len;
    let pad = taps / 2;
    // Pre-pad every input channel once.
    let padded_len = len + 2 * pad;
    let mut padded = vec![0.0f32; c_in * padded_len];
    for c in 0..c_in {
        let src = x.channel(c);
        let dst = &mut padded[c * padded_len..(c + 1) * padded_len];
        for (j, d) in dst.iter_mut().enumerate() {
            *d = src[reflect(j as isize - pad as isize, len)];
        }
    }
    let mut out = vec![0.0f32; c_out * len];
    for o in 0..c_out {
        let acc = &mut out[o * len..(o + 1) * len];
        acc.fill(bias.data[o]);
        for i in 0..c_in {
            let row = &padded[i * padded_len..(i + 1) * padded_len];
            for k in 0..taps {
                let w = weight.data[(o * c_in + i) * taps + k];
                for (a, v) in acc.iter_mut().zip(&row[k..k + len]) {
                    *a += w * v;
                }
            }
        }
        if relu {
            acc.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    Activation {
        channels: c_out,
        len,
        data: out,
    }
}

fn max_pool2(x: &Activation) -> Activation {
    let len = x.len / 2;
    let mut data = Vec::with_capacity(x.channels * len);
    for c in 0..x.channels {
        let ch = x.channel(c);
        data.extend((0..len).map(|t| ch[2 * t].max(ch[2 * t + 1])));
    }
    Activation {
        channels: x.channels,
        len,
        data,
    }
}

fn upsample2(x: &Activation) -> Activation {
    let len = x.len * 2;
    let mut data = Vec::with_capacity(x.channels * len);
    for c in 0..x.channels {
        for &v in x.channel(c) {
            data.push(v);
            data.push(v);
        }
    }
    Activation {
        channels: x.channels,
        len,
        data,
    }
}

fn concat(a: Activation, b: &Activation) -> Activation {
    debug_assert_eq!(a.len, b.len);
    let mut data = a.data;
    data.extend_from_slice(&b.data);
    Activation {
        channels: a.channels + b.channels,
        len: a.len,
        data,
    }
}

/// Walks the tensors in canonical order.
struct Params<'a> {
    tensors: std::slice::Iter<'a, Tensor>,
}

impl<'a> Params<'a> {
    fn conv(&mut self) -> (&'a Tensor, &'a Tensor) {
        let w = self.tensors.next().expect("canonical layout");
        let b = self.tensors.next().expect("canonical layout");
        (w, b)
    }
}

/// Evaluate the network on a channel-stacked, already padded input.
fn unet(model: &Model, input: Activation) -> Vec<f32> {
    let depth = model.arch().depth;
    let mut params = Params {
        tensors: model.tensors().iter(),
    };
    let mut skips = Vec::with_capacity(depth);
    let mut x = input;
    for _ in 0..depth {
        let (w, b) = params.conv();
        x = conv1d(&x, w, b, true);
        let (w, b) = params.conv();
        x = conv1d(&x, w, b, true);
        let pooled = max_pool2(&x);
        skips.push(x);
        x = pooled;
    }
    for _ in 0..2 {
        let (w, b) = params.conv();
        x = conv1d(&x, w, b, true);
    }
    for skip in skips.iter().rev() {
        let (w, b) = params.conv();
        x = conv1d(&upsample2(&x), w, b, true);
        x = concat(x, skip);
        for _ in 0..2 {
            let (w, b) = params.conv();
            x = conv1d(&x, w, b, true);
        }
    }
    let (w, b) = params.conv();
    conv1d(&x, w, b, false).data
}

/// Residual `R(y, c)` predicted by the network; same length as `y`.
///
/// Inputs are rounded to `f32`, which is the precision the network runs at.
/// The input is reflect-padded on the right to a multiple of `2^depth` and
/// the output cropped back.
pub fn forward(model: &Model, y: &[f64], condition: Option<&[f64]>) -> Result<Vec<f64>> {
    let arch = model.arch();
    let n = y.len();
    match (arch.in_channels, condition) {
        (1, None) => {}
        (2, Some(c)) if c.len() == n => {}
        (2, Some(c)) => {
            return Err(Error::invalid(format!(
                "condition length {} differs from spectrum length {n}",
                c.len()
            )))
        }
        (2, None) => return Err(Error::invalid("network expects a TV condition channel")),
        _ => return Err(Error::invalid("network takes no condition channel")),
    }
    let multiple = arch.length_multiple();
    if n < multiple {
        return Err(Error::invalid(format!(
            "spectrum length {n} is shorter than {multiple}"
        )));
    }
    let padded_len = n.div_ceil(multiple) * multiple;
    let mut data = Vec::with_capacity(arch.in_channels * padded_len);
    for ch in std::iter::once(y).chain(condition) {
        data.extend(ch.iter().map(|&v| v as f32));
        data.extend((0..padded_len - n).map(|i| ch[n - 2 - i] as f32));
    }
    let input = Activation {
        channels: arch.in_channels,
        len: padded_len,
        data,
    };
    let mut out = unet(model, input);
    out.truncate(n);
    Ok(out.into_iter().map(f64::from).collect())
}

/// `y − R(y, c)`.
///
/// `denoised + residual == y` holds exactly whenever `y` is representable in
/// `f32` (as every stored spectrum is) and no `|y|` is more than 2^29 times
/// smaller than its residual.
pub fn denoise(model: &Model, y: &[f64], condition: Option<&[f64]>) -> Result<Vec<f64>> {
    let r = forward(model, y, condition)?;
    Ok(y.iter().zip(&r).map(|(a, b)| a - b).collect())
}
