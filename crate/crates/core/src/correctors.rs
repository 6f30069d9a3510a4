//! Periodised correctors, flux correctors and the effective coefficient.

use rayon::prelude::*;

use crate::ensemble::{holder_constant_radius, CoefficientField, Mat3};
use crate::error::{invalid, Error, Result};
use crate::pde::{
    assemble_operator, cell_vector, flux, gradient, gradient_transpose, Domain, Grid,
    LinearOperator, Point, ScalarField, SolveOptions, VecField,
};
use crate::profile::DecayProfile;
use crate::stats::Quantiles;

/// Unit slope `e_i` as a face field.
fn unit_slope(grid: Grid, i: usize) -> VecField {
    let mut e = VecField::zeros(grid);
    e.comps[i].iter_mut().for_each(|v| *v = 1.0);
    e
}

fn torus_of(a: &CoefficientField) -> Result<Domain> {
    Domain::torus(*a.grid())
}

/// Solves `-div(a (e_i + grad phi_i)) = 0` on the torus, mean-zero.
pub fn solve_corrector(a: &CoefficientField, i: usize, opts: &SolveOptions) -> Result<ScalarField> {
    let dom = torus_of(a)?;
    let op = assemble_operator(a, &dom, 0.0)?;
    corrector_with_operator(a, &dom, &op, i, opts)
}

fn corrector_with_operator(
    a: &CoefficientField,
    dom: &Domain,
    op: &LinearOperator,
    i: usize,
    opts: &SolveOptions,
) -> Result<ScalarField> {
    let grid = *dom.grid();
    if i >= grid.dim() {
        return invalid(format!("direction {i} out of range"));
    }
    let q0 = flux(a, dom, &unit_slope(grid, i));
    let rhs: Vec<f64> = gradient_transpose(&q0, dom)
        .into_iter()
        .map(|v| -v)
        .collect();
    let (phi, _) = crate::pde::solve(op, &ScalarField { grid, data: rhs }, None, opts)?;
    Ok(phi)
}

/// Face flux `a (e_i + grad phi_i)`.
pub fn corrected_flux(a: &CoefficientField, dom: &Domain, phi: &ScalarField, i: usize) -> VecField {
    let mut g = gradient(phi, dom);
    g.comps[i].iter_mut().for_each(|v| *v += 1.0);
    flux(a, dom, &g)
}

/// `abar e_i` as the face-average of `a (e_i + grad phi_i)`; column `i` of the result.
pub fn effective_coefficient(a: &CoefficientField, phi: &[ScalarField]) -> Result<Mat3> {
    let dom = torus_of(a)?;
    let d = a.grid().dim();
    if phi.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "{} correctors for dimension {d}",
            phi.len()
        )));
    }
    let mut abar = [[0.0; 3]; 3];
    for (i, p) in phi.iter().enumerate() {
        let q = corrected_flux(a, &dom, p, i);
        for k in 0..d {
            abar[k][i] = q.comps[k].iter().sum::<f64>() / q.comps[k].len() as f64;
        }
    }
    Ok(abar)
}

/// Single entry `abar_{ki}` from the corrector `phi_i`.
pub fn effective_coefficient_entry(
    a: &CoefficientField,
    phi_i: &ScalarField,
    k: usize,
    i: usize,
) -> Result<f64> {
    let dom = torus_of(a)?;
    let q = corrected_flux(a, &dom, phi_i, i);
    Ok(q.comps[k].iter().sum::<f64>() / q.comps[k].len() as f64)
}

/// Flux corrector of one direction: the independent components `sigma_{ijk}`, `j < k`,
/// each stored on the staggered nodes `c + (e_j + e_k) / 2`.
#[derive(Clone, Debug)]
pub struct FluxCorrector {
    d: usize,
    comps: Vec<ScalarField>,
}

fn pair_index(d: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < d);
    match (d, j, k) {
        (2, 0, 1) => 0,
        (3, 0, 1) => 0,
        (3, 0, 2) => 1,
        (3, 1, 2) => 2,
        _ => unreachable!(),
    }
}

impl FluxCorrector {
    /// Value of `sigma_{ijk}` at node `c`; antisymmetry is exact by construction.
    pub fn get(&self, j: usize, k: usize, c: usize) -> f64 {
        match j.cmp(&k) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.comps[pair_index(self.d, j, k)].data[c],
            std::cmp::Ordering::Greater => -self.comps[pair_index(self.d, k, j)].data[c],
        }
    }

    pub fn component(&self, j: usize, k: usize) -> Option<&ScalarField> {
        (j < k).then(|| &self.comps[pair_index(self.d, j, k)])
    }

    /// Discrete divergence `(div sigma_i)_j` on the `j`-faces.
    pub fn divergence(&self, dom: &Domain) -> VecField {
        let grid = *dom.grid();
        let h = grid.spacing();
        let mut out = VecField::zeros(grid);
        for j in 0..self.d {
            for c in 0..grid.len() {
                let mut s = 0.0;
                for k in 0..self.d {
                    if k == j {
                        continue;
                    }
                    let lo = dom.neighbor(c, k, false).expect("torus");
                    s += (self.get(j, k, c) - self.get(j, k, lo)) / h;
                }
                out.comps[j][c] = s;
            }
        }
        out
    }

    /// Pointwise `|sigma_i|^2 = sum_{j,k} sigma_{ijk}^2`.
    pub fn norm_sq(&self, c: usize) -> f64 {
        2.0 * self
            .comps
            .iter()
            .map(|f| f.data[c] * f.data[c])
            .sum::<f64>()
    }
}

/// Solves `-Delta sigma_{ijk} = d_j (q_i)_k - d_k (q_i)_j` for `j < k`, mean-zero.
pub fn solve_flux_corrector(
    q: &VecField,
    dom: &Domain,
    opts: &SolveOptions,
) -> Result<FluxCorrector> {
    let grid = *dom.grid();
    if dom.kind() != crate::pde::DomainKind::Torus {
        return invalid("flux correctors are computed on a torus");
    }
    let d = grid.dim();
    let lap = assemble_operator(&CoefficientField::identity(grid), dom, 0.0)?;
    let h = grid.spacing();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
        .collect();
    let comps = pairs
        .par_iter()
        .map(|&(j, k)| {
            let mut rhs = vec![0.0; grid.len()];
            for (c, r) in rhs.iter_mut().enumerate() {
                let cj = dom.neighbor(c, j, true).expect("torus");
                let ck = dom.neighbor(c, k, true).expect("torus");
                *r = (q.comps[k][cj] - q.comps[k][c]) / h - (q.comps[j][ck] - q.comps[j][c]) / h;
            }
            crate::pde::solve(&lap, &ScalarField { grid, data: rhs }, None, opts).map(|s| s.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FluxCorrector { d, comps })
}

#[derive(Clone, Debug)]
pub struct CorrectorSet {
    pub domain: Domain,
    pub phi: Vec<ScalarField>,
    /// Flux fluctuation `q_i = a (e_i + grad phi_i) - abar e_i` on faces.
    pub q: Vec<VecField>,
    pub sigma: Vec<FluxCorrector>,
    pub abar: Mat3,
}

impl CorrectorSet {
    /// All correctors of one realisation on its own (periodic) grid.
    pub fn compute(a: &CoefficientField, opts: &SolveOptions) -> Result<Self> {
        Self::compute_with(a, opts, true)
    }

    /// Correctors and `abar` only; `sigma` is left empty.
    pub fn compute_phi(a: &CoefficientField, opts: &SolveOptions) -> Result<Self> {
        Self::compute_with(a, opts, false)
    }

    fn compute_with(a: &CoefficientField, opts: &SolveOptions, with_sigma: bool) -> Result<Self> {
        let dom = torus_of(a)?;
        let d = dom.grid().dim();
        let op = assemble_operator(a, &dom, 0.0)?;
        let phi = (0..d)
            .into_par_iter()
            .map(|i| corrector_with_operator(a, &dom, &op, i, opts))
            .collect::<Result<Vec<_>>>()?;
        let abar = effective_coefficient(a, &phi)?;
        let q: Vec<VecField> = (0..d)
            .map(|i| {
                let mut f = corrected_flux(a, &dom, &phi[i], i);
                for k in 0..d {
                    f.comps[k].iter_mut().for_each(|v| *v -= abar[k][i]);
                }
                f
            })
            .collect();
        let sigma = if !with_sigma {
            Vec::new()
        } else {
            q.par_iter()
                .map(|qi| solve_flux_corrector(qi, &dom, opts))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self {
            domain: dom,
            phi,
            q,
            sigma,
            abar,
        })
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    /// `max_{i,j} ||(div sigma_i)_j - (q_i)_j||_inf`.
    pub fn flux_identity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (s, q) in self.sigma.iter().zip(&self.q) {
            let div = s.divergence(&self.domain);
            for j in 0..self.dim() {
                for (a, b) in div.comps[j].iter().zip(&q.comps[j]) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Worst antisymmetry defect `|sigma_{ijk} + sigma_{ikj}|` (zero by construction).
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.domain.grid().len();
        let d = self.dim();
        let mut worst = 0.0f64;
        for s in &self.sigma {
            for j in 0..d {
                for k in 0..d {
                    for c in 0..n {
                        worst = worst.max((s.get(j, k, c) + s.get(k, j, c)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Cell gradients of `phi_i`.
    pub fn cell_gradients(&self, i: usize) -> Vec<[f64; 3]> {
        let g = gradient(&self.phi[i], &self.domain);
        (0..self.domain.grid().len())
            .map(|c| cell_vector(&g, &self.domain, c))
            .collect()
    }
}

/// Root ball averages `(avg_{B_r} |phi|^2 + |sigma|^2)^{1/2}` per radius.
/// The supremum is [`DecayProfile::max_value`].
pub fn corrector_growth_profile(
    set: &CorrectorSet,
    center: &Point,
    radii: &[f64],
) -> Result<DecayProfile> {
    let n = set.domain.grid().len();
    let density: Vec<f64> = (0..n)
        .map(|c| {
            let p: f64 = set.phi.iter().map(|f| f.data[c] * f.data[c]).sum();
            let s: f64 = set.sigma.iter().map(|f| f.norm_sq(c)).sum();
            p + s
        })
        .collect();
    let half = (0..set.dim())
        .map(|k| 0.5 * set.domain.period(k))
        .fold(f64::INFINITY, f64::min);
    let mut values = Vec::with_capacity(radii.len());
    for &r in radii {
        if r > half * (1.0 + 1e-12) {
            return invalid(format!("radius {r} exceeds half the torus"));
        }
        values.push(crate::pde::ball_average(&density, &set.domain, center, r)?.sqrt());
    }
    DecayProfile::new(radii.to_vec(), values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport {
    pub alpha: f64,
    pub values: Vec<f64>,
    pub quantiles: Quantiles,
}

/// Hölder constants of `grad phi_i` over balls of radius `radius` around `centers`.
pub fn corrector_holder_check(
    set: &CorrectorSet,
    alpha: f64,
    centers: &[Point],
    radius: f64,
) -> Result<HolderReport> {
    let grads: Vec<Vec<[f64; 3]>> = (0..set.dim()).map(|i| set.cell_gradients(i)).collect();
    let mut values = Vec::with_capacity(centers.len());
    for x in centers {
        let mut best = 0.0f64;
        for g in &grads {
            best = best.max(holder_constant_radius(
                g.as_slice(),
                &set.domain,
                x,
                radius,
                alpha,
            )?);
        }
        values.push(best);
    }
    Ok(HolderReport {
        alpha,
        quantiles: Quantiles::of(&values),
        values,
    })
}

/// Verdict of an `h -> h/2` refinement of the corrector Hölder constant.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderRefinement {
    /// Ratio of the fine-grid to the coarse-grid median.
    pub growth: f64,
    /// Growth compatible with `h^{-alpha}` blow-up rather than a finite limit.
    pub outside_a4: bool,
}

pub fn holder_refinement(coarse: &HolderReport, fine: &HolderReport) -> HolderRefinement {
    let growth = fine.quantiles.q50 / coarse.quantiles.q50;
    HolderRefinement {
        growth,
        outside_a4: growth > 2f64.powf(0.5 * coarse.alpha),
    }
}
