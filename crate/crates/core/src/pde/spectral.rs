//! Fast inverse of the constant-coefficient operator `c (-Delta_h) + massive`
//! on the free cells of a torus, slab or box, used as a CG preconditioner.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{Domain, DomainKind, FarBoundary};

#[derive(Clone)]
enum AxisKind {
    /// Periodic line, diagonalised by the DFT.
    Periodic {
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
    },
    /// Dirichlet at both ends, diagonalised by DST-I via an odd extension.
    Sine { fft: Arc<dyn Fft<f64>> },
    /// Dirichlet below, Neumann above; solved by a tridiagonal sweep.
    Tridiagonal,
}

#[derive(Clone)]
struct Axis {
    kind: AxisKind,
    start: usize,
    len: usize,
    eig: Vec<f64>,
}

#[derive(Clone)]
pub struct SpectralPreconditioner {
    d: usize,
    n: [usize; 3],
    axes: Vec<Axis>,
    c: f64,
    massive: f64,
    inv_h2: f64,
}

impl SpectralPreconditioner {
    /// Returns `None` when the domain has a custom mask (not separable).
    pub fn new(domain: &Domain, c: f64, massive: f64) -> Option<Self> {
        if domain.has_mask() {
            return None;
        }
        let g = domain.grid();
        let h = g.spacing();
        let inv_h2 = 1.0 / (h * h);
        let mut planner = FftPlanner::new();
        let mut axes = Vec::new();
        for k in 0..g.dim() {
            let n = g.extent(k);
            let axis = match (domain.kind(), k) {
                (DomainKind::Torus, _) | (DomainKind::Slab { .. }, 1..) => {
                    let eig = (0..n)
                        .map(|j| {
                            4.0 * inv_h2
                                * (std::f64::consts::PI * j as f64 / n as f64).sin().powi(2)
                        })
                        .collect();
                    Axis {
                        kind: AxisKind::Periodic {
                            fwd: planner.plan_fft_forward(n),
                            inv: planner.plan_fft_inverse(n),
                        },
                        start: 0,
                        len: n,
                        eig,
                    }
                }
                (
                    DomainKind::Slab {
                        far: FarBoundary::Neumann,
                    },
                    0,
                ) => Axis {
                    kind: AxisKind::Tridiagonal,
                    start: 1,
                    len: n - 1,
                    eig: Vec::new(),
                },
                _ => {
                    let m = n - 2;
                    let eig = (0..m)
                        .map(|j| {
                            4.0 * inv_h2
                                * (std::f64::consts::PI * (j + 1) as f64 / (2.0 * (m + 1) as f64))
                                    .sin()
                                    .powi(2)
                        })
                        .collect();
                    Axis {
                        kind: AxisKind::Sine {
                            fft: planner.plan_fft_forward(2 * (m + 1)),
                        },
                        start: 1,
                        len: m,
                        eig,
                    }
                }
            };
            axes.push(axis);
        }
        Some(Self {
            d: g.dim(),
            n: g.extents(),
            axes,
            c,
            massive,
            inv_h2,
        })
    }

    fn block_len(&self) -> [usize; 3] {
        let mut m = [1usize; 3];
        for k in 0..self.d {
            m[k] = self.axes[k].len;
        }
        m
    }

    /// Transforms every line of `buf` (block layout) along axis `k`.
    fn transform_axis(&self, buf: &mut [Complex64], k: usize, forward: bool) {
        let m = self.block_len();
        let stride: usize = (k + 1..3).map(|j| m[j]).product();
        let len = m[k];
        let n_lines = buf.len() / len;
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let mut ext = match &self.axes[k].kind {
            AxisKind::Sine { .. } => vec![Complex64::new(0.0, 0.0); 2 * (len + 1)],
            _ => Vec::new(),
        };
        for l in 0..n_lines {
            let outer = l / stride;
            let inner = l % stride;
            let base = outer * len * stride + inner;
            for j in 0..len {
                line[j] = buf[base + j * stride];
            }
            match &self.axes[k].kind {
                AxisKind::Periodic { fwd, inv } => {
                    if forward {
                        fwd.process(&mut line);
                    } else {
                        inv.process(&mut line);
                        let s = 1.0 / len as f64;
                        line.iter_mut().for_each(|v| *v *= s);
                    }
                }
                AxisKind::Sine { fft } => {
                    let zero = Complex64::new(0.0, 0.0);
                    ext[0] = zero;
                    ext[len + 1] = zero;
                    for j in 0..len {
                        ext[j + 1] = line[j];
                        ext[2 * (len + 1) - 1 - j] = -line[j];
                    }
                    fft.process(&mut ext);
                    let s = if forward { 1.0 } else { 2.0 / (len + 1) as f64 };
                    let half_i = Complex64::new(0.0, 0.5 * s);
                    for j in 0..len {
                        line[j] = half_i * ext[j + 1];
                    }
                }
                AxisKind::Tridiagonal => unreachable!("tridiagonal axes are not transformed"),
            }
            for j in 0..len {
                buf[base + j * stride] = line[j];
            }
        }
    }

    /// `z = P^{-1} r` on free cells; Dirichlet entries of `z` are zero.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let m = self.block_len();
        let total = m[0] * m[1] * m[2];
        let start = [
            self.axes[0].start,
            self.axes.get(1).map_or(0, |a| a.start),
            self.axes.get(2).map_or(0, |a| a.start),
        ];
        let full_index = |b: [usize; 3]| {
            ((b[0] + start[0]) * self.n[1] + b[1] + start[1]) * self.n[2] + b[2] + start[2]
        };
        let block_index = |b: [usize; 3]| (b[0] * m[1] + b[1]) * m[2] + b[2];

        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for b0 in 0..m[0] {
            for b1 in 0..m[1] {
                for b2 in 0..m[2] {
                    buf[block_index([b0, b1, b2])] =
                        Complex64::new(r[full_index([b0, b1, b2])], 0.0);
                }
            }
        }
        let tri_axis0 = matches!(self.axes[0].kind, AxisKind::Tridiagonal);
        let first = if tri_axis0 { 1 } else { 0 };
        for k in first..self.d {
            self.transform_axis(&mut buf, k, true);
        }

        let tangential = |b1: usize, b2: usize| {
            let mut mu = 0.0;
            if self.d > 1 {
                mu += self.axes[1].eig[b1];
            }
            if self.d > 2 {
                mu += self.axes[2].eig[b2];
            }
            mu
        };
        if tri_axis0 {
            let n0 = m[0];
            let off = -self.c * self.inv_h2;
            let mut cp = vec![0.0; n0];
            let mut dp = vec![Complex64::new(0.0, 0.0); n0];
            for b1 in 0..m[1] {
                for b2 in 0..m[2] {
                    let shift = self.c * tangential(b1, b2) + self.massive;
                    // Thomas algorithm; the last row has a single neighbour (Neumann).
                    for i in 0..n0 {
                        let diag = if i + 1 == n0 {
                            self.c * self.inv_h2
                        } else {
                            2.0 * self.c * self.inv_h2
                        } + shift;
                        let rhs = buf[block_index([i, b1, b2])];
                        if i == 0 {
                            cp[0] = off / diag;
                            dp[0] = rhs / diag;
                        } else {
                            let denom = diag - off * cp[i - 1];
                            cp[i] = off / denom;
                            dp[i] = (rhs - dp[i - 1] * off) / denom;
                        }
                    }
                    for i in (0..n0).rev() {
                        let v = if i + 1 == n0 {
                            dp[i]
                        } else {
                            dp[i] - buf[block_index([i + 1, b1, b2])] * cp[i]
                        };
                        buf[block_index([i, b1, b2])] = v;
                    }
                }
            }
        } else {
            for b0 in 0..m[0] {
                for b1 in 0..m[1] {
                    for b2 in 0..m[2] {
                        let lam =
                            self.c * (self.axes[0].eig[b0] + tangential(b1, b2)) + self.massive;
                        let i = block_index([b0, b1, b2]);
                        buf[i] = if lam > 0.0 {
                            buf[i] / lam
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                    }
                }
            }
        }

        for k in (first..self.d).rev() {
            self.transform_axis(&mut buf, k, false);
        }
        z.iter_mut().for_each(|v| *v = 0.0);
        for b0 in 0..m[0] {
            for b1 in 0..m[1] {
                for b2 in 0..m[2] {
                    z[full_index([b0, b1, b2])] = buf[block_index([b0, b1, b2])].re;
                }
            }
        }
    }
}
