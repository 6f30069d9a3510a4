//! Massive boundary-layer correctors on half-space slabs, their decay
//! diagnostics, the localized energy estimate and two-scale expansion errors.

mod localization;
mod profiles;
mod two_scale;

pub use localization::{
    exp_weighted_energy_check, gamma_search, localization_suite, GammaSearch, LocalizationCase,
    LocalizationSuite,
};
pub use profiles::{
    averaged_decay_profile, layer_energies, pointwise_decay_profile, ray_energy, trend_violations,
};
pub use two_scale::{two_scale_error, two_scale_periodic, TwoScaleErrors, TwoScaleRun};

pub use crate::profile::{DecayProfile, PowerFit};

use rayon::prelude::*;

use crate::correctors::CorrectorSet;
use crate::ensemble::{sample_field, CoefficientField, EnsembleSpec, Mat3};
use crate::error::{invalid, Error, Result};
use crate::pde::{
    assemble_operator, cell_vector, gradient, local_density, solve, Domain, DomainKind,
    FarBoundary, Grid, ScalarField, SolveOptions,
};

/// Boundary-layer correctors `theta_i` on a slab.
///
/// `theta_i` carries the micro-scale corrector values as its trace, so
/// `eps * grad theta_i` (physical gradient) is the dimensionless quantity
/// the decay estimates are phrased in.
#[derive(Clone, Debug)]
pub struct BoundaryLayerSet {
    pub domain: Domain,
    pub theta: Vec<ScalarField>,
    /// Massive parameter; infinite when the massive term is dropped.
    pub t: f64,
    pub eps: f64,
    pub flags: Vec<String>,
}

impl BoundaryLayerSet {
    /// Wraps given fields (synthetic profiles, external solves).
    pub fn from_fields(domain: Domain, theta: Vec<ScalarField>, t: f64, eps: f64) -> Result<Self> {
        for th in &theta {
            if !th.grid.same_shape(domain.grid()) {
                return Err(Error::ShapeMismatch(
                    "boundary layer field does not match the slab".into(),
                ));
            }
        }
        Ok(Self {
            domain,
            theta,
            t,
            eps,
            flags: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Local cell quadrature of `sum_i |eps grad theta_i|^2` (zero on Dirichlet cells).
    pub fn scaled_energy_density(&self) -> Vec<f64> {
        let n = self.domain.grid().len();
        let e2 = self.eps * self.eps;
        let mut out = vec![0.0; n];
        for th in &self.theta {
            let e = local_density(&gradient(th, &self.domain), &self.domain);
            for c in 0..n {
                out[c] += e2 * e[c];
            }
        }
        out
    }

    /// Pointwise `|eps grad theta|` from face-averaged cell gradients.
    pub fn scaled_gradient_magnitude(&self) -> Vec<f64> {
        let n = self.domain.grid().len();
        let grads: Vec<_> = self
            .theta
            .iter()
            .map(|th| gradient(th, &self.domain))
            .collect();
        (0..n)
            .map(|c| {
                let mut s = 0.0;
                for g in &grads {
                    let v = cell_vector(g, &self.domain, c);
                    s += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                }
                self.eps * s.sqrt()
            })
            .collect()
    }

    /// Largest `|theta_i - phi_i|` over the Dirichlet layer.
    pub fn trace_defect(&self, phi: &[ScalarField]) -> f64 {
        let mut worst = 0.0f64;
        for (th, ph) in self.theta.iter().zip(phi) {
            for c in 0..th.data.len() {
                if self.domain.is_dirichlet(c) {
                    worst = worst.max((th.data[c] - ph.data[c]).abs());
                }
            }
        }
        worst
    }

    /// Slab depth `L_1` from the Dirichlet layer to the last cell.
    pub fn depth(&self) -> f64 {
        let (lo, hi) = self.domain.axis_bounds(0);
        hi - lo
    }
}

fn massive_of(t: f64) -> Result<f64> {
    if t.is_infinite() && t > 0.0 {
        Ok(0.0)
    } else if t > 0.0 && t.is_finite() {
        Ok(1.0 / t)
    } else {
        invalid(format!("massive parameter T must be positive, got {t}"))
    }
}

/// Solves `-div(a grad theta_i) + theta_i / T = 0` in the slab with
/// `theta_i = phi_i` on the Dirichlet layer(s).
pub fn solve_boundary_layer(
    a: &CoefficientField,
    phi: &[ScalarField],
    slab: &Domain,
    t: f64,
    eps: f64,
    opts: &SolveOptions,
) -> Result<BoundaryLayerSet> {
    if !matches!(slab.kind(), DomainKind::Slab { .. }) {
        return invalid("boundary layers are solved on a slab");
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid(format!("eps must lie in (0, 1], got {eps}"));
    }
    let massive = massive_of(t)?;
    let grid = *slab.grid();
    if phi.iter().any(|p| !p.grid.same_shape(&grid)) {
        return Err(Error::ShapeMismatch(
            "corrector traces do not match the slab".into(),
        ));
    }
    let op = assemble_operator(a, slab, massive)?;
    let theta = phi
        .par_iter()
        .map(|p| solve(&op, &ScalarField::zeros(grid), Some(p), opts).map(|s| s.0))
        .collect::<Result<Vec<_>>>()?;
    let mut bl = BoundaryLayerSet::from_fields(slab.clone(), theta, t, eps)?;
    let (lo, hi) = slab.axis_bounds(0);
    let depth = hi - lo;
    if t.is_finite() {
        let need = t.sqrt() * (1.0 / opts.rel_tol).ln();
        if depth < need {
            bl.flags.push(format!(
                "slab depth {depth:.4} below sqrt(T) ln(1/tol) = {need:.4}; truncation error not controlled"
            ));
        }
    } else if slab.kind()
        == (DomainKind::Slab {
            far: FarBoundary::Neumann,
        })
    {
        bl.flags
            .push("no massive term: far boundary is a Neumann truncation".into());
    }
    Ok(bl)
}

/// Geometry of a slab sample: the micro lattice has spacing `h_micro` (in
/// correlation lengths) and is viewed at scale `eps`, so the physical spacing
/// is `eps * h_micro`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabConfig {
    pub d: usize,
    /// Cells per axis, including the Dirichlet layer at `x_1 = 0`.
    pub cells: Vec<usize>,
    pub eps: f64,
    pub h_micro: f64,
    /// Massive parameter; `None` selects `(L_1 / 8)^2`, infinity drops the term.
    pub t: Option<f64>,
    pub far: FarBoundary,
}

impl SlabConfig {
    pub fn square(d: usize, n: usize, eps: f64, h_micro: f64) -> Self {
        Self {
            d,
            cells: vec![n; d],
            eps,
            h_micro,
            t: None,
            far: FarBoundary::Neumann,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.eps * self.h_micro
    }

    pub fn depth(&self) -> f64 {
        (self.cells[0] - 1) as f64 * self.spacing()
    }

    pub fn massive_t(&self) -> f64 {
        self.t.unwrap_or_else(|| (self.depth() / 8.0).powi(2))
    }

    pub fn micro_grid(&self) -> Result<Grid> {
        Grid::new(self.d, &self.cells, self.h_micro)
    }

    pub fn physical_domain(&self) -> Result<Domain> {
        let g = Grid::new(self.d, &self.cells, self.spacing())?;
        Domain::new(g, DomainKind::Slab { far: self.far })
    }
}

/// One realisation on a slab: the coefficient, the corrector values on the
/// slab cells (micro units) and the boundary layer.
#[derive(Clone, Debug)]
pub struct SlabSample {
    pub a: CoefficientField,
    pub domain: Domain,
    pub phi: Vec<ScalarField>,
    pub abar: Mat3,
    pub bl: BoundaryLayerSet,
}

/// Torus window used for the slab correctors: the slab plus a buffer of half
/// its depth on both sides in the normal direction.
pub fn corrector_window(cfg: &SlabConfig) -> Result<Grid> {
    let n0 = cfg.cells[0];
    let buf = n0 / 2;
    let mut ext = cfg.cells.clone();
    ext[0] = n0 + 2 * buf;
    Ok(Grid::new(cfg.d, &ext, cfg.h_micro)?.with_offset(&[-(buf as i64)]))
}

pub fn realize_slab(
    spec: &EnsembleSpec,
    cfg: &SlabConfig,
    sample_index: u64,
    opts: &SolveOptions,
) -> Result<SlabSample> {
    let window = corrector_window(cfg)?;
    let a_win = sample_field(spec, &window, sample_index)?;
    let set = CorrectorSet::compute_phi(&a_win, opts)?;
    let micro = cfg.micro_grid()?;
    let domain = cfg.physical_domain()?;
    let pgrid = *domain.grid();
    let a = a_win.restrict(micro)?.with_grid(pgrid)?;
    let phi = set
        .phi
        .iter()
        .map(|p| {
            let mut data = vec![0.0; micro.len()];
            for (c, v) in data.iter_mut().enumerate() {
                let src = window
                    .locate_global(micro.global(c))
                    .expect("window covers the slab");
                *v = p.data[src];
            }
            ScalarField { grid: pgrid, data }
        })
        .collect::<Vec<_>>();
    let bl = solve_boundary_layer(&a, &phi, &domain, cfg.massive_t(), cfg.eps, opts)?;
    Ok(SlabSample {
        a,
        domain,
        phi,
        abar: set.abar,
        bl,
    })
}
