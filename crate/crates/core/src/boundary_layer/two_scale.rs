use rayon::prelude::*;

use crate::correctors::CorrectorSet;
use crate::ensemble::{sample_field, CoefficientField, EnsembleKind, EnsembleSpec, Mat3};
use crate::error::{invalid, Error, Result};
use crate::pde::{
    assemble_operator, cell_vector, energy_density, gradient, solve, Domain, DomainKind, Grid,
    ScalarField, SolveOptions,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoScaleErrors {
    /// `||grad(u_eps - ubar - phi^eps_i d_i ubar)||_{L^2}`.
    pub h1_plain: f64,
    /// Same with `phi^eps_i - eps theta^eps_i` in place of `phi^eps_i`.
    pub h1_corrected: f64,
}

/// Energy-norm errors of the plain and boundary-adjusted two-scale
/// expansions. `phi` and `theta` carry micro-scale values; they are scaled
/// by `eps` here.
pub fn two_scale_error(
    domain: &Domain,
    ueps: &ScalarField,
    ubar: &ScalarField,
    phi: &[ScalarField],
    theta: &[ScalarField],
    eps: f64,
) -> Result<TwoScaleErrors> {
    let grid = *domain.grid();
    let d = grid.dim();
    let all = [ueps, ubar].into_iter().chain(phi).chain(theta);
    if phi.len() != d || theta.len() != d || all.into_iter().any(|f| !f.grid.same_shape(&grid)) {
        return Err(Error::ShapeMismatch(
            "two-scale inputs live on different grids".into(),
        ));
    }
    let gbar = gradient(ubar, domain);
    let dbar: Vec<[f64; 3]> = (0..grid.len())
        .map(|c| cell_vector(&gbar, domain, c))
        .collect();
    let norm_of = |with_theta: bool| -> f64 {
        let data = (0..grid.len())
            .map(|c| {
                let mut w = ubar.data[c];
                for i in 0..d {
                    let corr = if with_theta {
                        phi[i].data[c] - theta[i].data[c]
                    } else {
                        phi[i].data[c]
                    };
                    w += eps * corr * dbar[c][i];
                }
                ueps.data[c] - w
            })
            .collect();
        let e = ScalarField { grid, data };
        let dens = energy_density(&gradient(&e, domain), domain);
        (dens.iter().sum::<f64>() * grid.cell_volume()).sqrt()
    };
    Ok(TwoScaleErrors {
        h1_plain: norm_of(false),
        h1_corrected: norm_of(true),
    })
}

#[derive(Clone, Debug)]
pub struct TwoScaleRun {
    pub eps: f64,
    pub spacing: f64,
    pub abar: Mat3,
    pub errors: TwoScaleErrors,
}

/// Cells of one period of a periodic ensemble on a lattice of spacing `h`.
fn period_cells(spec: &EnsembleSpec, h: f64) -> Option<usize> {
    let p = match spec.kind {
        EnsembleKind::Constant { .. } => return Some(1),
        EnsembleKind::Laminate { period, .. } => period,
        EnsembleKind::PeriodicSmooth { .. } => spec.correlation_length,
        EnsembleKind::Checkerboard { periodic: true, .. } => 2.0 * spec.correlation_length,
        _ => return None,
    };
    let n = (p / h).round();
    ((n * h - p).abs() < 1e-9 * p && n >= 1.0).then_some(n as usize)
}

/// Full two-scale comparison on the unit box for `-div(a(x/eps) grad u) = 1`
/// with zero Dirichlet data. The micro lattice has spacing `h_micro`, so the
/// box has `1 / (eps h_micro) + 1` cells per axis. The coefficient must be
/// periodic with a period resolved by the lattice, which keeps the torus
/// correctors exact on the box.
pub fn two_scale_periodic(
    spec: &EnsembleSpec,
    d: usize,
    eps: f64,
    h_micro: f64,
    opts: &SolveOptions,
) -> Result<TwoScaleRun> {
    let Some(pc) = period_cells(spec, h_micro) else {
        return invalid("two-scale runs need a periodic coefficient resolved by the micro lattice");
    };
    let h = eps * h_micro;
    let inv = 1.0 / h;
    if (inv - inv.round()).abs() > 1e-9 {
        return invalid(format!("eps * h_micro = {h} does not divide the unit box"));
    }
    let n = inv.round() as usize + 1;
    let m = n.div_ceil(pc) * pc;
    let torus = Grid::new(d, &vec![m; d], h_micro)?;
    let a_torus = sample_field(spec, &torus, 0)?;
    let set = CorrectorSet::compute_phi(&a_torus, opts)?;
    let micro_box = Grid::new(d, &vec![n; d], h_micro)?;
    let box_grid = micro_box.with_spacing(h);
    let dom = Domain::new(box_grid, DomainKind::Box)?;
    let a = a_torus.restrict(micro_box)?.with_grid(box_grid)?;
    let phi: Vec<ScalarField> = set
        .phi
        .iter()
        .map(|p| {
            let data = (0..micro_box.len())
                .map(|c| {
                    p.data[torus
                        .locate_global(micro_box.global(c))
                        .expect("torus covers the box")]
                })
                .collect();
            ScalarField {
                grid: box_grid,
                data,
            }
        })
        .collect();
    let abar = set.abar;
    let mut entries = Vec::with_capacity(box_grid.len() * d * d);
    for _ in 0..box_grid.len() {
        for k in 0..d {
            for l in 0..d {
                entries.push(0.5 * (abar[k][l] + abar[l][k]));
            }
        }
    }
    let a_bar = CoefficientField::new(box_grid, entries, a.lambda())?;
    let op = assemble_operator(&a, &dom, 0.0)?;
    let op_bar = assemble_operator(&a_bar, &dom, 0.0)?;
    let mut rhs = ScalarField::from_fn(box_grid, |_| 1.0);
    for c in 0..box_grid.len() {
        if dom.is_dirichlet(c) {
            rhs.data[c] = 0.0;
        }
    }
    let (ueps, _) = solve(&op, &rhs, None, opts)?;
    let (ubar, _) = solve(&op_bar, &rhs, None, opts)?;
    let zero = ScalarField::zeros(box_grid);
    let theta = phi
        .par_iter()
        .map(|p| solve(&op, &zero, Some(p), opts).map(|s| s.0))
        .collect::<Result<Vec<_>>>()?;
    let errors = two_scale_error(&dom, &ueps, &ubar, &phi, &theta, eps)?;
    Ok(TwoScaleRun {
        eps,
        spacing: h,
        abar,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_no_two_scale_error() {
        let r = two_scale_periodic(
            &EnsembleSpec::constant(1.0),
            2,
            1.0 / 8.0,
            0.125,
            &SolveOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!(
            r.errors.h1_plain < 1e-9 && r.errors.h1_corrected < 1e-9,
            "{:?}",
            r.errors
        );
    }

    #[test]
    fn boundary_adjustment_helps_on_laminate() {
        let spec = EnsembleSpec::laminate(0.5, 1.0, 1.0);
        let opts = SolveOptions::with_tol(1e-11);
        let coarse = two_scale_periodic(&spec, 2, 1.0 / 8.0, 0.125, &opts).unwrap();
        let fine = two_scale_periodic(&spec, 2, 1.0 / 16.0, 0.125, &opts).unwrap();
        assert!((coarse.abar[0][0] - 2.0 / 3.0).abs() < 1e-8);
        for r in [&coarse, &fine] {
            assert!(r.errors.h1_corrected < r.errors.h1_plain, "{:?}", r.errors);
        }
        assert!(fine.errors.h1_plain < coarse.errors.h1_plain);
        assert!(fine.errors.h1_corrected < coarse.errors.h1_corrected);
    }

    #[test]
    fn random_ensemble_is_rejected() {
        let r = two_scale_periodic(
            &EnsembleSpec::checkerboard(0.5, 1),
            2,
            0.125,
            0.125,
            &SolveOptions::default(),
        );
        assert!(r.is_err());
    }
}
