//! Empirical large-scale regularity: excess decay against the corrected
//! affine frame, mean-value ratios and the minimal radius, pointwise gradient
//! bounds, the dual kernel bound and the weighted Hardy estimate.

mod green;
mod hardy;

pub use green::{green_kernel_bound_check, GreenReport};
pub use hardy::{hardy_check, hardy_suite, HardyCase, HardySuite};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::boundary_layer::{realize_slab, SlabConfig};
use crate::ensemble::{CoefficientField, EnsembleSpec};
use crate::error::{invalid, Error, Result};
use crate::pde::{
    assemble_operator, cell_vector, cells_in_ball, gradient, local_density, local_inner, solve,
    Domain, DomainKind, FarBoundary, Point, ScalarField, SolveOptions, VecField,
};
use crate::profile::{DecayProfile, PowerFit};

/// Mean-value threshold defining the empirical minimal radius.
pub const DEFAULT_C0: f64 = 8.0;
/// Gram matrices above this condition number fall back to the affine frame.
pub const MAX_FRAME_CONDITION: f64 = 1e8;

/// Cells of the flat boundary portion, where harmonic samples vanish.
pub fn is_flat(domain: &Domain, c: usize) -> bool {
    let x = domain.grid().coords(c);
    match domain.kind() {
        DomainKind::CornerBox => (0..domain.grid().dim()).any(|k| x[k] == 0),
        DomainKind::Torus => false,
        _ => x[0] == 0,
    }
}

/// Solves `-div(a grad u) = 0` with `u = 0` on the flat portion and
/// `u = outer_bc` on the remaining Dirichlet cells.
pub fn harmonic_sample(
    a: &CoefficientField,
    domain: &Domain,
    outer_bc: &ScalarField,
    opts: &SolveOptions,
) -> Result<ScalarField> {
    if !domain.is_bounded() && domain.kind() == DomainKind::Torus {
        return invalid("harmonic samples need a Dirichlet boundary");
    }
    let grid = *domain.grid();
    if !outer_bc.grid.same_shape(&grid) {
        return Err(Error::ShapeMismatch(
            "boundary data does not match the domain".into(),
        ));
    }
    let mut bc = outer_bc.clone();
    for c in 0..grid.len() {
        if is_flat(domain, c) {
            bc.data[c] = 0.0;
        }
    }
    let op = assemble_operator(a, domain, 0.0)?;
    Ok(solve(&op, &ScalarField::zeros(grid), Some(&bc), opts)?.0)
}

/// Gradients `grad psi_j` of a frame on faces.
#[derive(Clone, Debug)]
pub struct Frame {
    pub domain: Domain,
    pub grads: Vec<VecField>,
}

impl Frame {
    /// `psi_j = x_j`.
    pub fn affine(domain: &Domain) -> Self {
        let grid = *domain.grid();
        let grads = (0..grid.dim())
            .map(|j| {
                let mut v = VecField::zeros(grid);
                v.comps[j].iter_mut().for_each(|x| *x = 1.0);
                v
            })
            .collect();
        Self {
            domain: domain.clone(),
            grads,
        }
    }

    /// `psi_j = x_j + eps (phi_j - theta_j)` from micro-valued correctors.
    pub fn corrected(
        domain: &Domain,
        phi: &[ScalarField],
        theta: &[ScalarField],
        eps: f64,
    ) -> Result<Self> {
        let grid = *domain.grid();
        if phi.len() != grid.dim() || theta.len() != grid.dim() {
            return invalid("frame needs one corrector and one boundary layer per direction");
        }
        let mut f = Self::affine(domain);
        for j in 0..grid.dim() {
            let diff = ScalarField {
                grid,
                data: phi[j]
                    .data
                    .iter()
                    .zip(&theta[j].data)
                    .map(|(p, t)| eps * (p - t))
                    .collect(),
            };
            let g = gradient(&diff, domain);
            for k in 0..grid.dim() {
                for (a, b) in f.grads[j].comps[k].iter_mut().zip(&g.comps[k]) {
                    *a += b;
                }
            }
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.grads.len()
    }
}

/// Per-cell inner products between `grad u` and the frame, so that many
/// radii can be evaluated without recomputing face sums.
struct Products {
    gram: Vec<Vec<Vec<f64>>>,
    cross: Vec<Vec<f64>>,
    uu: Vec<f64>,
}

impl Products {
    fn new(du: &VecField, frame: &Frame) -> Self {
        let dom = &frame.domain;
        let d = frame.dim();
        let mut gram = vec![vec![Vec::new(); d]; d];
        for j in 0..d {
            for l in j..d {
                let p = local_inner(&frame.grads[j], &frame.grads[l], dom);
                if l != j {
                    gram[l][j] = p.clone();
                }
                gram[j][l] = p;
            }
        }
        let cross = (0..d)
            .map(|j| local_inner(du, &frame.grads[j], dom))
            .collect();
        Self {
            gram,
            cross,
            uu: local_density(du, dom),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcessValue {
    pub value: f64,
    pub slope: Vec<f64>,
    /// The corrected frame was degenerate on this ball and the affine frame was used.
    pub degenerate: bool,
}

fn excess_from(p: &Products, cells: &[usize], d: usize) -> Option<(f64, Vec<f64>)> {
    let m = cells.len() as f64;
    let mut g = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    let mut uu = 0.0;
    for &c in cells {
        for j in 0..d {
            b[j] += p.cross[j][c];
            for l in 0..d {
                g[(j, l)] += p.gram[j][l][c];
            }
        }
        uu += p.uu[c];
    }
    g /= m;
    b /= m;
    uu /= m;
    let ev = SymmetricEigen::new(g.clone()).eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    if !(lo > 0.0) || hi / lo > MAX_FRAME_CONDITION {
        return None;
    }
    let a = g.cholesky()?.solve(&b);
    let value = (uu - b.dot(&a)).max(0.0);
    Some((value, a.iter().copied().collect()))
}

/// `inf_A avg_{B_r(x0) cap O} |grad u - A_j grad psi_j|^2` with the exact
/// minimiser from the normal equations.
pub fn excess(u: &ScalarField, frame: &Frame, x0: &Point, r: f64) -> Result<ExcessValue> {
    let du = gradient(u, &frame.domain);
    let p = Products::new(&du, frame);
    excess_with(&p, &du, frame, x0, r)
}

fn excess_with(
    p: &Products,
    du: &VecField,
    frame: &Frame,
    x0: &Point,
    r: f64,
) -> Result<ExcessValue> {
    let cells = cells_in_ball(&frame.domain, x0, r, false);
    if cells.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no free cells in B_{r}({x0:?})"
        )));
    }
    let d = frame.dim();
    if let Some((value, slope)) = excess_from(p, &cells, d) {
        return Ok(ExcessValue {
            value,
            slope,
            degenerate: false,
        });
    }
    let affine = Frame::affine(&frame.domain);
    let pa = Products::new(du, &affine);
    let (value, slope) = excess_from(&pa, &cells, d)
        .ok_or_else(|| Error::Degenerate("affine frame Gram matrix is singular".into()))?;
    Ok(ExcessValue {
        value,
        slope,
        degenerate: true,
    })
}

/// Value of the excess functional at a given slope (no minimisation).
pub fn excess_at(u: &ScalarField, frame: &Frame, x0: &Point, r: f64, slope: &[f64]) -> Result<f64> {
    let dom = &frame.domain;
    let grid = *dom.grid();
    let mut resid = gradient(u, dom);
    for (j, g) in frame.grads.iter().enumerate() {
        for k in 0..grid.dim() {
            for (a, b) in resid.comps[k].iter_mut().zip(&g.comps[k]) {
                *a -= slope[j] * b;
            }
        }
    }
    let cells = cells_in_ball(dom, x0, r, false);
    if cells.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no free cells in B_{r}({x0:?})"
        )));
    }
    let e = local_density(&resid, dom);
    Ok(cells.iter().map(|&c| e[c]).sum::<f64>() / cells.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanValueReport {
    pub x0: Point,
    pub radii: Vec<f64>,
    /// `avg_{B_r cap O} |grad u|^2` per radius.
    pub averages: Vec<f64>,
    /// `ratios[i][j] = averages[i] / averages[j]`.
    pub ratios: Vec<Vec<f64>>,
    pub c0: f64,
    pub r_star: Option<f64>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a / b
    }
}

/// Gradient-energy averages and the smallest measured radius `r` with
/// `avg(r) / avg(R) <= c0` for every measured `R >= r`. The largest radius is
/// not a candidate (the condition would hold trivially there).
pub fn mean_value_report(
    u: &ScalarField,
    domain: &Domain,
    x0: &Point,
    radii: &[f64],
    c0: f64,
) -> Result<MeanValueReport> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("radii must be nonempty and strictly increasing");
    }
    if !(c0 >= 1.0) {
        return invalid(format!("threshold C0 must be at least 1, got {c0}"));
    }
    let e = local_density(&gradient(u, domain), domain);
    let averages = radii
        .iter()
        .map(|&r| {
            let cells = cells_in_ball(domain, x0, r, false);
            if cells.is_empty() {
                return Err(Error::EmptyRegion(format!(
                    "no free cells in B_{r}({x0:?})"
                )));
            }
            Ok(cells.iter().map(|&c| e[c]).sum::<f64>() / cells.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = radii.len();
    let ratios: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| ratio(averages[i], averages[j])).collect())
        .collect();
    let candidates = if n == 1 { 1 } else { n - 1 };
    let r_star = (0..candidates)
        .find(|&i| (i..n).all(|j| ratios[i][j] <= c0))
        .map(|i| radii[i]);
    Ok(MeanValueReport {
        x0: *x0,
        radii: radii.to_vec(),
        averages,
        ratios,
        c0,
        r_star,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcessReport {
    pub x0: Point,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<Vec<f64>>,
    pub r_star: Option<f64>,
    pub fit: Option<PowerFit>,
    pub flags: Vec<String>,
}

impl ExcessReport {
    pub fn exponent(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.exponent)
    }
}

/// Excess per radius with a log-log fit over `[r_star, R_max]`, `r_star`
/// taken from [`mean_value_report`] at threshold `c0`.
pub fn excess_decay_report(
    u: &ScalarField,
    frame: &Frame,
    x0: &Point,
    radii: &[f64],
    c0: f64,
) -> Result<ExcessReport> {
    let mv = mean_value_report(u, &frame.domain, x0, radii, c0)?;
    let du = gradient(u, &frame.domain);
    let p = Products::new(&du, frame);
    let mut values = Vec::with_capacity(radii.len());
    let mut slopes = Vec::with_capacity(radii.len());
    let mut flags = Vec::new();
    for &r in radii {
        let ev = excess_with(&p, &du, frame, x0, r)?;
        if ev.degenerate {
            flags.push(format!("degenerate frame at r = {r}; affine frame used"));
        }
        values.push(ev.value);
        slopes.push(ev.slope);
    }
    let rmax = *radii.last().expect("nonempty radii");
    let lo = match mv.r_star {
        Some(r) => r,
        None => {
            flags.push("no minimal radius found; fit over all radii".into());
            radii[0]
        }
    };
    let prof = DecayProfile::new(radii.to_vec(), values.clone())?.with_fit(lo, rmax);
    flags.extend(prof.flags);
    Ok(ExcessReport {
        x0: *x0,
        radii: radii.to_vec(),
        values,
        slopes,
        r_star: mv.r_star,
        fit: prof.fit,
        flags,
    })
}

/// `|grad u(x0)| / (avg_{B_r(x0) cap O} |grad u|^2)^{1/2}` with the cell
/// gradient averaged from the adjacent faces. Zero when both vanish.
pub fn pointwise_bound_check(u: &ScalarField, domain: &Domain, x0: &Point, r: f64) -> Result<f64> {
    let grid = domain.grid();
    let du = gradient(u, domain);
    let v = cell_vector(&du, domain, grid.nearest_cell(x0));
    let top = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let e = local_density(&du, domain);
    let cells = cells_in_ball(domain, x0, r, false);
    if cells.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no free cells in B_{r}({x0:?})"
        )));
    }
    let avg = cells.iter().map(|&c| e[c]).sum::<f64>() / cells.len() as f64;
    Ok(if top == 0.0 && avg == 0.0 {
        0.0
    } else {
        top / avg.sqrt()
    })
}

/// A realisation on a half-slab: Dirichlet at `x_1 = 0` and at the far layer,
/// periodic tangentially. `u` vanishes on `x_1 = 0` and matches the frame
/// element `psi_1` plus a tangential mode on the far layer.
#[derive(Clone, Debug)]
pub struct HalfSlabSample {
    pub a: CoefficientField,
    pub domain: Domain,
    pub frame: Frame,
    pub psi1: ScalarField,
    pub u: ScalarField,
    pub eps: f64,
}

pub fn half_slab_sample(
    spec: &EnsembleSpec,
    cfg: &SlabConfig,
    sample_index: u64,
    mode_amplitude: f64,
    opts: &SolveOptions,
) -> Result<HalfSlabSample> {
    let layer_cfg = SlabConfig {
        t: Some(f64::INFINITY),
        far: FarBoundary::Neumann,
        ..cfg.clone()
    };
    let s = realize_slab(spec, &layer_cfg, sample_index, opts)?;
    let grid = *s.domain.grid();
    let domain = Domain::new(
        grid,
        DomainKind::Slab {
            far: FarBoundary::Dirichlet,
        },
    )?;
    let frame = Frame::corrected(&domain, &s.phi, &s.bl.theta, cfg.eps)?;
    let psi1 = ScalarField {
        grid,
        data: (0..grid.len())
            .map(|c| grid.center(c)[0] + cfg.eps * (s.phi[0].data[c] - s.bl.theta[0].data[c]))
            .collect(),
    };
    let period = domain.period(1);
    let shift = (sample_index as f64 * 0.618_033_988_75).fract();
    let bc = ScalarField {
        grid,
        data: (0..grid.len())
            .map(|c| {
                let x = grid.center(c);
                psi1.data[c]
                    + mode_amplitude * (std::f64::consts::TAU * (x[1] / period + shift)).cos()
            })
            .collect(),
    };
    let u = harmonic_sample(&s.a, &domain, &bc, opts)?;
    Ok(HalfSlabSample {
        a: s.a,
        domain,
        frame,
        psi1,
        u,
        eps: cfg.eps,
    })
}
