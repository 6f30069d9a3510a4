use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use super::field::CoefficientField;
use super::sample::sample_field;
use super::spec::EnsembleSpec;
use crate::error::{invalid, Result};
use crate::pde::{cells_in_ball, Domain, Grid, SolveOptions};
use crate::stats::{mean_stderr, variance_stderr};

/// Finite-difference step for the coefficient derivative.
pub const H_PERT: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapFunctional {
    /// Mean of `a_11` over the unit ball around the centre of a torus of side 4.
    BallAverage,
    /// `abar_11` of a torus of side 2 (energy of the corrector solve).
    SmallTorusEnergy,
}

impl GapFunctional {
    pub fn name(&self) -> &'static str {
        match self {
            GapFunctional::BallAverage => "ball-average",
            GapFunctional::SmallTorusEnergy => "small-torus-energy",
        }
    }

    fn grid(&self) -> Grid {
        match self {
            GapFunctional::BallAverage => Grid::cube(2, 16, 0.25).expect("valid grid"),
            GapFunctional::SmallTorusEnergy => Grid::cube(2, 8, 0.25).expect("valid grid"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub n_samples: usize,
    pub mean: f64,
    pub variance_estimate: f64,
    pub variance_stderr: f64,
    pub rhs_estimate: f64,
    pub rhs_stderr: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    /// Perturbations that left the ellipticity class and were clipped.
    pub clipped: usize,
}

struct Evaluator {
    functional: GapFunctional,
    domain: Domain,
    /// Cells the functional reads; derivatives vanish elsewhere.
    support: Vec<usize>,
    opts: SolveOptions,
}

impl Evaluator {
    fn new(functional: GapFunctional) -> Result<Self> {
        let grid = functional.grid();
        let domain = Domain::torus(grid)?;
        let support = match functional {
            GapFunctional::BallAverage => {
                let c = grid.center(grid.index([8, 8, 0]));
                cells_in_ball(&domain, &c, 1.0, true)
            }
            GapFunctional::SmallTorusEnergy => (0..grid.len()).collect(),
        };
        Ok(Self {
            functional,
            domain,
            support,
            opts: SolveOptions::with_tol(1e-12),
        })
    }

    fn eval(&self, a: &CoefficientField) -> Result<f64> {
        match self.functional {
            GapFunctional::BallAverage => {
                Ok(self.support.iter().map(|&c| a.get(c, 0, 0)).sum::<f64>()
                    / self.support.len() as f64)
            }
            GapFunctional::SmallTorusEnergy => {
                let phi = crate::correctors::solve_corrector(a, 0, &self.opts)?;
                let set_abar = crate::correctors::effective_coefficient_entry(a, &phi, 0, 0)?;
                Ok(set_abar)
            }
        }
    }
}

fn in_class(m: &[[f64; 3]; 3], d: usize, lambda: f64) -> bool {
    let (lo, hi) = sym_eigen_range(m, d);
    lo >= lambda - 1e-15 && hi <= 1.0 + 1e-15
}

fn sym_eigen_range(m: &[[f64; 3]; 3], d: usize) -> (f64, f64) {
    if d == 2 {
        let mid = 0.5 * (m[0][0] + m[1][1]);
        let r = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[0][1]).sqrt();
        (mid - r, mid + r)
    } else {
        let ev = SymmetricEigen::new(Matrix3::from_fn(|i, j| m[i][j])).eigenvalues;
        (ev.min(), ev.max())
    }
}

/// Projects eigenvalues onto `[lambda, 1]`.
fn project(m: &[[f64; 3]; 3], d: usize, lambda: f64) -> [[f64; 3]; 3] {
    let mut full = Matrix3::zeros();
    for i in 0..d {
        for j in 0..d {
            full[(i, j)] = m[i][j];
        }
    }
    let mut e = SymmetricEigen::new(full);
    for i in 0..d {
        e.eigenvalues[i] = e.eigenvalues[i].clamp(lambda, 1.0);
    }
    if d == 2 {
        e.eigenvalues[2] = 0.0;
    }
    let r = e.recompose();
    let mut out = [[0.0; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            out[i][j] = 0.5 * (r[(i, j)] + r[(j, i)]);
        }
    }
    out
}

fn nuclear_norm(m: &[[f64; 3]; 3], d: usize) -> f64 {
    if d == 2 {
        let mid = 0.5 * (m[0][0] + m[1][1]);
        let r = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[0][1]).sqrt();
        (mid - r).abs() + (mid + r).abs()
    } else {
        SymmetricEigen::new(Matrix3::from_fn(|i, j| m[i][j]))
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .sum()
    }
}

fn with_cell(a: &CoefficientField, c: usize, m: &[[f64; 3]; 3]) -> CoefficientField {
    let mut b = a.clone();
    let d = a.grid().dim();
    let e = b.entries_mut();
    for k in 0..d {
        for l in 0..d {
            e[c * d * d + k * d + l] = m[k][l];
        }
    }
    b
}

/// Per-cell dual norm of `d xi / d a`, plus the number of clipped perturbations.
fn sensitivities(ev: &Evaluator, a: &CoefficientField, lambda: f64) -> Result<(Vec<f64>, usize)> {
    let d = a.grid().dim();
    let mut s = vec![0.0; a.grid().len()];
    let mut clipped = 0;
    for &c in &ev.support {
        let base = a.matrix(c);
        let mut deriv = [[0.0; 3]; 3];
        for k in 0..d {
            for l in k..d {
                let mut up = base;
                let mut dn = base;
                up[k][l] += H_PERT;
                dn[k][l] -= H_PERT;
                if k != l {
                    up[l][k] += H_PERT;
                    dn[l][k] -= H_PERT;
                }
                let ok_up = in_class(&up, d, lambda);
                let ok_dn = in_class(&dn, d, lambda);
                let dq = match (ok_up, ok_dn) {
                    (true, true) => {
                        (ev.eval(&with_cell(a, c, &up))? - ev.eval(&with_cell(a, c, &dn))?)
                            / (2.0 * H_PERT)
                    }
                    (true, false) => {
                        clipped += 1;
                        (ev.eval(&with_cell(a, c, &up))? - ev.eval(a)?) / H_PERT
                    }
                    (false, true) => {
                        clipped += 1;
                        (ev.eval(a)? - ev.eval(&with_cell(a, c, &dn))?) / H_PERT
                    }
                    (false, false) => {
                        clipped += 1;
                        let pu = project(&up, d, lambda);
                        let pd = project(&dn, d, lambda);
                        (ev.eval(&with_cell(a, c, &pu))? - ev.eval(&with_cell(a, c, &pd))?)
                            / (2.0 * H_PERT)
                    }
                };
                if k == l {
                    deriv[k][k] = dq;
                } else {
                    // The symmetric direction moves both entries.
                    deriv[k][l] = 0.5 * dq;
                    deriv[l][k] = 0.5 * dq;
                }
            }
        }
        s[c] = nuclear_norm(&deriv, d);
    }
    Ok((s, clipped))
}

/// Discrete `int (int_{B_1(x)} |d xi / d a|)^2 dx`.
fn gap_rhs(dom: &Domain, s: &[f64]) -> f64 {
    let g = dom.grid();
    let vol = g.cell_volume();
    let nonzero: Vec<usize> = (0..s.len()).filter(|&c| s[c] != 0.0).collect();
    if nonzero.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for x in 0..g.len() {
        let cx = g.center(x);
        let local: f64 = cells_in_ball(dom, &cx, 1.0, true)
            .iter()
            .map(|&c| s[c])
            .sum();
        total += vol * local * local;
    }
    total
}

/// Monte Carlo estimate of both sides of the spectral gap inequality.
pub fn spectral_gap_probe(
    spec: &EnsembleSpec,
    functional: GapFunctional,
    n_samples: usize,
) -> Result<GapReport> {
    spec.validate()?;
    if n_samples < 100 {
        return invalid(format!(
            "spectral gap probe needs at least 100 samples, got {n_samples}"
        ));
    }
    let ev = Evaluator::new(functional)?;
    let grid = functional.grid();
    let per_sample = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, usize)> {
            let a = sample_field(spec, &grid, i)?;
            let xi = ev.eval(&a)?;
            let (s, clipped) = sensitivities(&ev, &a, spec.lambda)?;
            Ok((xi, gap_rhs(&ev.domain, &s), clipped))
        })
        .collect::<Result<Vec<_>>>()?;
    let xis: Vec<f64> = per_sample.iter().map(|t| t.0).collect();
    let rhs: Vec<f64> = per_sample.iter().map(|t| t.1).collect();
    let clipped = per_sample.iter().map(|t| t.2).sum();
    let (mean, _) = mean_stderr(&xis);
    let (mut var, var_se) = variance_stderr(&xis);
    if xis.iter().all(|&x| x == xis[0]) {
        var = 0.0;
    }
    let (r, r_se) = mean_stderr(&rhs);
    let ratio = if var == 0.0 { 0.0 } else { var / r };
    let ratio_se = if var == 0.0 {
        0.0
    } else {
        ratio * ((var_se / var).powi(2) + (r_se / r).powi(2)).sqrt()
    };
    Ok(GapReport {
        n_samples,
        mean,
        variance_estimate: var,
        variance_stderr: var_se,
        rhs_estimate: r,
        rhs_stderr: r_se,
        ratio,
        ratio_stderr: ratio_se,
        clipped,
    })
}
