use rayon::prelude::*;

use super::field::CoefficientField;
use super::rng::SampleRng;
use super::spec::{EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::pde::Grid;

/// Guards `floor` against representation error at exact cell boundaries.
const EDGE: f64 = 1e-9;

/// C² piecewise-polynomial step from 0 to 1 on `[0, 1]`.
#[inline]
pub fn smootherstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Compactly supported C² bump, `(1 - (r / rho)^2)^3` for `r < rho`.
#[inline]
pub fn bump(r: f64, rho: f64) -> f64 {
    if r >= rho {
        0.0
    } else {
        let s = 1.0 - (r / rho) * (r / rho);
        s * s * s
    }
}

/// Stencil of the gaussian-clipped smoothing kernel: offsets and weights
/// normalised to unit sum of squares, so the smoothed noise has unit variance.
pub fn gaussian_kernel(d: usize, h: f64, correlation_length: f64) -> Vec<([i64; 3], f64)> {
    let rho = 0.5 * correlation_length;
    let r = (rho / h).floor() as i64;
    let mut taps = Vec::new();
    let zr = if d == 3 { r } else { 0 };
    for i in -r..=r {
        for j in -r..=r {
            for k in -zr..=zr {
                let dist = h * ((i * i + j * j + k * k) as f64).sqrt();
                let w = bump(dist, rho);
                if w > 0.0 {
                    taps.push(([i, j, k], w));
                }
            }
        }
    }
    if taps.is_empty() {
        taps.push(([0, 0, 0], 1.0));
    }
    let norm = taps.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| t.1 /= norm);
    taps
}

/// Draws the coefficient field of sample `sample_index` on `grid`.
///
/// Every value depends only on the spec, the global cell coordinates and the
/// sample index, so overlapping grids see identical values.
pub fn sample_field(
    spec: &EnsembleSpec,
    grid: &Grid,
    sample_index: u64,
) -> Result<CoefficientField> {
    spec.validate()?;
    let d = grid.dim();
    if d != 2 && d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    let rng = SampleRng::new(spec.master_seed, sample_index);
    let h = grid.spacing();
    let ell = spec.correlation_length;
    let lam = spec.lambda;
    let n = grid.len();

    let values: Vec<f64> = match spec.kind {
        EnsembleKind::Constant { value } => vec![value; n],
        EnsembleKind::Checkerboard {
            low,
            high,
            periodic,
        } => (0..n)
            .into_par_iter()
            .map(|c| {
                let g = grid.global(c);
                let mut unit = [0i64; 3];
                for k in 0..d {
                    unit[k] = ((g[k] as f64 * h) / ell + EDGE).floor() as i64;
                }
                let up = if periodic {
                    unit.iter().sum::<i64>().rem_euclid(2) == 1
                } else {
                    rng.bernoulli(unit, 1)
                };
                if up {
                    high
                } else {
                    low
                }
            })
            .collect(),
        EnsembleKind::Laminate { low, high, period } => (0..n)
            .map(|c| {
                let x1 = grid.global(c)[0] as f64 * h;
                let t = (x1 / period + EDGE).rem_euclid(1.0);
                if t < 0.5 {
                    low
                } else {
                    high
                }
            })
            .collect(),
        EnsembleKind::PeriodicSmooth { random_shift } => {
            let mut shift = [0.0; 3];
            if random_shift {
                for (k, s) in shift.iter_mut().enumerate().take(d) {
                    *s = ell * rng.uniform([k as i64, 0, 0], 2);
                }
            }
            (0..n)
                .map(|c| {
                    let x = grid.center(c);
                    let mut s = 0.0;
                    for k in 0..d {
                        s += (2.0 * std::f64::consts::PI * (x[k] + shift[k]) / ell).cos();
                    }
                    let t = 0.5 * (1.0 + s / d as f64);
                    lam + (1.0 - lam) * t
                })
                .collect()
        }
        EnsembleKind::GaussianClipped { z_scale } => {
            let taps = gaussian_kernel(d, h, ell);
            let r = taps.iter().map(|t| t.0[0].abs()).max().unwrap_or(0);
            let off = grid.offset();
            let ext = grid.extents();
            // Noise on the grid window enlarged by the kernel radius.
            let mut we = [1usize; 3];
            for k in 0..d {
                we[k] = ext[k] + 2 * r as usize;
            }
            let wlen = we[0] * we[1] * we[2];
            let noise: Vec<f64> = (0..wlen)
                .into_par_iter()
                .map(|w| {
                    let i2 = w % we[2];
                    let rest = w / we[2];
                    let (i0, i1) = (rest / we[1], rest % we[1]);
                    let mut g = [i0 as i64, i1 as i64, i2 as i64];
                    for k in 0..d {
                        g[k] += off[k] - r;
                    }
                    rng.normal(g, 3)
                })
                .collect();
            let zr = if d == 3 { r } else { 0 };
            (0..n)
                .into_par_iter()
                .map(|c| {
                    let ci = grid.coords(c);
                    let mut z = 0.0;
                    for (o, w) in &taps {
                        let a = (ci[0] as i64 + r + o[0]) as usize;
                        let b = (ci[1] as i64 + r + o[1]) as usize;
                        let e = (ci[2] as i64 + zr + o[2]) as usize;
                        z += w * noise[(a * we[1] + b) * we[2] + e];
                    }
                    let t = 0.5 * (z / z_scale + 1.0);
                    lam + (1.0 - lam) * smootherstep(t)
                })
                .collect()
        }
    };
    CoefficientField::scalar(*grid, &values, lam)
}
