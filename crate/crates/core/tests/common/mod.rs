//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code)]

use num_complex::Complex64;

/// TV minimizer by projected gradient on the box-constrained dual
/// `min_{|u|≤τ} ½‖y − Dᵀu‖²`, where `(Dx)_i = x[i+1] − x[i]`.
/// The dual is strongly convex (DDᵀ is positive definite), so plain
/// projected gradient with step 1/4 converges linearly.
pub fn tv_dual_oracle(y: &[f64], tau: f64) -> Vec<f64> {
    let n = y.len();
    let mut u = vec![0.0; n - 1];
    let primal = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|j| {
                let left = if j > 0 { u[j - 1] } else { 0.0 };
                let right = if j < n - 1 { u[j] } else { 0.0 };
                y[j] - (left - right)
            })
            .collect()
    };
    for _ in 0..200_000 {
        let x = primal(&u);
        let mut delta = 0.0f64;
        for i in 0..n - 1 {
            let next = (u[i] + 0.25 * (x[i + 1] - x[i])).clamp(-tau, tau);
            delta = delta.max((next - u[i]).abs());
            u[i] = next;
        }
        if delta < 1e-15 {
            break;
        }
    }
    primal(&u)
}

/// TV objective `½‖y − x‖² + τ·Σ|x[i+1] − x[i]|`.
pub fn tv_objective(y: &[f64], x: &[f64], tau: f64) -> f64 {
    let fit: f64 = y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * 0.5;
    let tv: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    fit + tau * tv
}

/// Exhaustive grid search for 3-sample TV problems, followed by a local
/// refinement grid around the coarse optimum.
pub fn tv_grid_oracle3(y: &[f64; 3], tau: f64, lo: f64, hi: f64) -> [f64; 3] {
    fn search(
        y: &[f64; 3],
        tau: f64,
        start: [f64; 3],
        step: f64,
        count: usize,
        mut best: ([f64; 3], f64),
    ) -> ([f64; 3], f64) {
        for a in 0..count {
            for b in 0..count {
                for c in 0..count {
                    let x = [
                        start[0] + a as f64 * step,
                        start[1] + b as f64 * step,
                        start[2] + c as f64 * step,
                    ];
                    let f = tv_objective(y, &x, tau);
                    if f < best.1 {
                        best = (x, f);
                    }
                }
            }
        }
        best
    }
    let coarse = 0.02;
    let best = search(
        y,
        tau,
        [lo; 3],
        coarse,
        ((hi - lo) / coarse) as usize + 1,
        ([0.0; 3], f64::INFINITY),
    );
    let c = best.0;
    let fine = 1e-4;
    search(
        y,
        tau,
        [c[0] - coarse, c[1] - coarse, c[2] - coarse],
        fine,
        (2.0 * coarse / fine) as usize + 1,
        best,
    )
    .0
}

/// Dual certificate `u_j = Σ_{k≤j} (x − y)_k`. Returns the largest violation of
/// the optimality conditions: `|u| ≤ τ`, `u_{n−1} = 0`, and `u_j = τ·sign(Δx_j)`
/// wherever `Δx_j ≠ 0`.
pub fn kkt_violation(y: &[f64], x: &[f64], tau: f64) -> f64 {
    let n = y.len();
    let mut u = 0.0;
    let mut worst = 0.0f64;
    for j in 0..n {
        u += x[j] - y[j];
        if j == n - 1 {
            worst = worst.max(u.abs());
            break;
        }
        worst = worst.max(u.abs() - tau);
        let d = x[j + 1] - x[j];
        if d != 0.0 {
            worst = worst.max((u - tau * d.signum()).abs());
        }
    }
    worst
}

/// O(n²) unitary DFT.
pub fn naive_unitary_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| {
                    let angle = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, angle)
                })
                .sum::<Complex64>()
                * scale
        })
        .collect()
}

/// Singular values of a complex matrix given row-major, by one-sided
/// (Hestenes) Jacobi: columns are rotated pairwise until mutually
/// orthogonal, then their norms are the singular values. Works on the
/// matrix itself, so small singular values keep absolute accuracy near
/// `eps·σ₁`. Descending order.
pub fn singular_values(rows: &[Vec<Complex64>]) -> Vec<f64> {
    let (m, k) = (rows.len(), rows[0].len());
    // Column storage, with the short side as the column count.
    let mut cols: Vec<Vec<Complex64>> = if k <= m {
        (0..k).map(|j| (0..m).map(|i| rows[i][j]).collect()).collect()
    } else {
        (0..m).map(|i| rows[i].iter().map(|z| z.conj()).collect()).collect()
    };
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    };
    let sq = |a: &[Complex64]| a.iter().map(|z| z.norm_sqr()).sum::<f64>();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols.len() {
            for q in p + 1..cols.len() {
                let alpha = sq(&cols[p]);
                let beta = sq(&cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let (ap, aq) = (&mut left[p], &mut right[0]);
                for (x, y) in ap.iter_mut().zip(aq.iter_mut()) {
                    let yq = *y * phase.conj();
                    let xp = *x;
                    *x = xp * c - yq * s;
                    *y = (xp * s + yq * c) * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| sq(c).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Deterministic test-only uniform stream (SplitMix64).
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Plain f64 U-Net forward, tensors looked up by name. Channels are
/// `Vec<Vec<f64>>`; padding is resolved per access.
pub fn reference_forward(
    tensors: &[(String, Vec<usize>, Vec<f32>)],
    depth: usize,
    inputs: &[Vec<f64>],
) -> Vec<f64> {
    let find = |name: &str| {
        tensors
            .iter()
            .find(|t| t.0 == name)
            .unwrap_or_else(|| panic!("no tensor {name}"))
    };
    let conv = |x: &[Vec<f64>], prefix: &str, relu: bool| -> Vec<Vec<f64>> {
        let (_, shape, w) = find(&format!("{prefix}.weight"));
        let (_, _, b) = find(&format!("{prefix}.bias"));
        let (co, ci, k) = (shape[0], shape[1], shape[2]);
        let len = x[0].len();
        let half = (k / 2) as isize;
        let at = |c: usize, i: isize| -> f64 {
            let last = len as isize - 1;
            let j = if len == 1 {
                0
            } else if i < 0 {
                -i
            } else if i > last {
                2 * last - i
            } else {
                i
            };
            x[c][j as usize]
        };
        (0..co)
            .map(|o| {
                (0..len)
                    .map(|t| {
                        let mut s = f64::from(b[o]);
                        for c in 0..ci {
                            for q in 0..k {
                                let tap = t as isize + q as isize - half;
                                s += f64::from(w[(o * ci + c) * k + q]) * at(c, tap);
                            }
                        }
                        if relu {
                            s.max(0.0)
                        } else {
                            s
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let n = inputs[0].len();
    let m = 1 << depth;
    let padded = n.div_ceil(m) * m;
    let mut x: Vec<Vec<f64>> = inputs
        .iter()
        .map(|ch| {
            (0..padded)
                .map(|i| if i < n { ch[i] } else { ch[2 * (n - 1) - i] })
                .collect()
        })
        .collect();
    let mut skips = Vec::new();
    for l in 0..depth {
        x = conv(&x, &format!("enc{l}.conv1"), true);
        x = conv(&x, &format!("enc{l}.conv2"), true);
        skips.push(x.clone());
        x = x
            .iter()
            .map(|ch| ch.chunks(2).map(|p| p[0].max(p[1])).collect())
            .collect();
    }
    x = conv(&x, "bottleneck.conv1", true);
    x = conv(&x, "bottleneck.conv2", true);
    for l in (0..depth).rev() {
        let up: Vec<Vec<f64>> = x
            .iter()
            .map(|ch| ch.iter().flat_map(|&v| [v, v]).collect())
            .collect();
        let mut cat = conv(&up, &format!("dec{l}.up"), true);
        cat.extend(skips[l].iter().cloned());
        x = conv(&cat, &format!("dec{l}.conv1"), true);
        x = conv(&x, &format!("dec{l}.conv2"), true);
    }
    let mut out = conv(&x, "head", false).remove(0);
    out.truncate(n);
    out
}
