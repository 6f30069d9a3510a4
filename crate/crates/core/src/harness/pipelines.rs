//! Per-kind sample pipelines: the columns they report and how one sample
//! index turns into a row.

use crate::boundary_layer::{
    pointwise_decay_profile, ray_energy, realize_slab, two_scale_periodic, SlabConfig,
};
use crate::cone::{cone_excess_profile, corner_sample, diagonal_probes, edge_gradient_decay_check};
use crate::correctors::CorrectorSet;
use crate::ensemble::{bump, sample_field, EnsembleSpec, GapReport};
use crate::error::Result;
use crate::meyers::{weighted_meyers_check, MeyersData};
use crate::pde::{Domain, DomainKind, Grid, Point, ScalarField, VecField};
use crate::profile::geometric_radii;
use crate::regularity::{
    excess_decay_report, half_slab_sample, hardy_suite, mean_value_report, HardySuite, DEFAULT_C0,
};

use super::config::{ExperimentConfig, ExperimentKind};
use super::Column;

/// Units used in column headers.
pub const UNITS: [&str; 4] = ["1", "length", "count", "1/length^2"];

pub struct SampleOutput {
    pub values: Vec<f64>,
    pub fields: Vec<(String, ScalarField, DomainKind)>,
}

/// Data computed once per run and shared by all samples.
pub enum Shared {
    None,
    Hardy(HardySuite),
    Gap(GapReport),
    /// Pointwise gradient exponent of the constant-coefficient corner sample.
    ConeDelta(f64),
}

pub fn effective_samples(cfg: &ExperimentConfig) -> usize {
    match cfg.kind {
        ExperimentKind::TwoScale | ExperimentKind::SpectralGap => 1,
        _ => cfg.n_samples,
    }
}

fn eps_list(cfg: &ExperimentConfig, default: &[f64]) -> Vec<f64> {
    cfg.list("eps", default)
}

fn slab_cfg(cfg: &ExperimentConfig, eps: f64) -> SlabConfig {
    let mut s = SlabConfig::square(cfg.d, cfg.n, eps, cfg.h);
    if let Some(t) = cfg.param("t") {
        s.t = Some(t[0]);
    }
    s
}

fn slab_radii(cfg: &ExperimentConfig) -> Vec<f64> {
    let eps = cfg.scalar("eps", 1.0 / 16.0);
    cfg.list(
        "radii",
        &geometric_radii(2.0 * eps * cfg.h, slab_cfg(cfg, eps).depth() / 4.0, 6),
    )
}

fn corner_h(cfg: &ExperimentConfig) -> f64 {
    1.0 / (cfg.n - 1) as f64
}

fn corner_radii(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.list("radii", &geometric_radii(4.0 * corner_h(cfg), 0.5, 6))
}

pub fn columns(cfg: &ExperimentConfig) -> Vec<Column> {
    let d = cfg.d;
    match cfg.kind {
        ExperimentKind::Correctors => {
            let mut c = Vec::new();
            for k in 0..d {
                for l in 0..d {
                    c.push(Column::new(format!("abar_{}{}", k + 1, l + 1), "1"));
                }
            }
            c.push(Column::new("flux_residual", "1"));
            c.push(Column::new("antisymmetry_defect", "1"));
            c
        }
        ExperimentKind::BoundaryLayer => eps_list(cfg, &[1.0 / 16.0])
            .iter()
            .flat_map(|e| {
                [
                    Column::new(format!("ray_energy@eps={e}"), "length"),
                    Column::new(format!("pointwise_exponent@eps={e}"), "1"),
                    Column::new(format!("max_scaled_gradient@eps={e}"), "1"),
                ]
            })
            .collect(),
        ExperimentKind::Excess => {
            let mut c = vec![
                Column::new("r_star", "length"),
                Column::new("excess_exponent", "1"),
            ];
            c.extend(
                slab_radii(cfg)
                    .iter()
                    .map(|r| Column::new(format!("excess@r={r}"), "1")),
            );
            c
        }
        ExperimentKind::MeanValue => {
            let mut c = vec![Column::new("r_star", "length")];
            c.extend(
                slab_radii(cfg)
                    .iter()
                    .map(|r| Column::new(format!("energy_average@r={r}"), "1")),
            );
            c
        }
        ExperimentKind::Hardy => cfg
            .list("kappa", &[0.25])
            .iter()
            .map(|k| Column::new(format!("ratio@kappa={k}"), "1"))
            .collect(),
        ExperimentKind::Meyers => cfg
            .list("p", &[1.0, 1.05])
            .iter()
            .map(|p| Column::new(format!("ratio@p={p}"), "1"))
            .collect(),
        ExperimentKind::Cone => {
            let mut c = vec![
                Column::new("energy_exponent", "1"),
                Column::new("max_edge_ratio", "1"),
            ];
            for k in 0..cfg.scalar("probes", 16.0) as usize {
                c.push(Column::new(format!("edge_ratio@probe={k}"), "1"));
            }
            c
        }
        ExperimentKind::TwoScale => eps_list(cfg, &[1.0 / 8.0, 1.0 / 16.0])
            .iter()
            .flat_map(|e| {
                [
                    Column::new(format!("h1_plain@eps={e}"), "1"),
                    Column::new(format!("h1_corrected@eps={e}"), "1"),
                ]
            })
            .collect(),
        ExperimentKind::SpectralGap => [
            "mean",
            "variance",
            "variance_stderr",
            "rhs",
            "rhs_stderr",
            "ratio",
            "ratio_stderr",
            "clipped",
        ]
        .iter()
        .map(|n| Column::new(*n, if *n == "clipped" { "count" } else { "1" }))
        .collect(),
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Shared> {
    Ok(match cfg.kind {
        ExperimentKind::Hardy => Shared::Hardy(hardy_suite(
            cfg.h,
            cfg.n_samples,
            cfg.master_seed,
            &cfg.solver,
        )?),
        ExperimentKind::SpectralGap => Shared::Gap(crate::ensemble::spectral_gap_probe(
            &cfg.ensemble,
            cfg.gap_functional(),
            cfg.n_samples,
        )?),
        ExperimentKind::Cone => match cfg.param("delta") {
            Some(d) => Shared::ConeDelta(d[0]),
            None => {
                let s = corner_sample(
                    &EnsembleSpec::constant(1.0),
                    cfg.d,
                    cfg.n,
                    1.0,
                    0,
                    &cfg.solver,
                )?;
                let p = cone_excess_profile(
                    &s.u,
                    &s.domain,
                    &s.domain.corner_vertex(),
                    &corner_radii(cfg),
                )?;
                Shared::ConeDelta(p.exponent().unwrap_or(f64::NAN) / 2.0)
            }
        },
        _ => Shared::None,
    })
}

fn slab_center(domain: &Domain) -> Point {
    let mut x = [0.0; 3];
    for (k, xk) in x.iter_mut().enumerate().take(domain.grid().dim()).skip(1) {
        *xk = 0.5 * domain.period(k);
    }
    x
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

pub fn run_sample(cfg: &ExperimentConfig, shared: &Shared, i: usize) -> Result<SampleOutput> {
    let idx = i as u64;
    let opts = &cfg.solver;
    let mut fields = Vec::new();
    let values = match cfg.kind {
        ExperimentKind::Correctors => {
            let grid = Grid::cube(cfg.d, cfg.n, cfg.h)?;
            let a = sample_field(&cfg.ensemble, &grid, idx)?;
            let set = CorrectorSet::compute(&a, opts)?;
            let mut v = Vec::new();
            for k in 0..cfg.d {
                for l in 0..cfg.d {
                    v.push(set.abar[k][l]);
                }
            }
            v.push(set.flux_identity_residual());
            v.push(set.antisymmetry_defect());
            for (j, p) in set.phi.iter().enumerate() {
                fields.push((format!("phi{}", j + 1), p.clone(), DomainKind::Torus));
            }
            v
        }
        ExperimentKind::BoundaryLayer => {
            let mut v = Vec::new();
            for (k, eps) in eps_list(cfg, &[1.0 / 16.0]).into_iter().enumerate() {
                let s = realize_slab(&cfg.ensemble, &slab_cfg(cfg, eps), idx, opts)?;
                let x0 = slab_center(&s.domain);
                v.push(ray_energy(&s.bl, &x0)?);
                v.push(
                    pointwise_decay_profile(&s.bl)?
                        .exponent()
                        .unwrap_or(f64::NAN),
                );
                v.push(max_of(&s.bl.scaled_gradient_magnitude()));
                for (j, t) in s.bl.theta.iter().enumerate() {
                    fields.push((format!("theta{}_eps{k}", j + 1), t.clone(), s.domain.kind()));
                }
            }
            v
        }
        ExperimentKind::Excess | ExperimentKind::MeanValue => {
            let eps = cfg.scalar("eps", 1.0 / 16.0);
            let s = half_slab_sample(
                &cfg.ensemble,
                &slab_cfg(cfg, eps),
                idx,
                cfg.scalar("amplitude", 1.0),
                opts,
            )?;
            let x0 = slab_center(&s.domain);
            let radii = slab_radii(cfg);
            let c0 = cfg.scalar("c0", DEFAULT_C0);
            fields.push(("u".to_string(), s.u.clone(), s.domain.kind()));
            if cfg.kind == ExperimentKind::Excess {
                let r = excess_decay_report(&s.u, &s.frame, &x0, &radii, c0)?;
                let mut v = vec![
                    r.r_star.unwrap_or(f64::NAN),
                    r.exponent().unwrap_or(f64::NAN),
                ];
                v.extend(&r.values);
                v
            } else {
                let r = mean_value_report(&s.u, &s.domain, &x0, &radii, c0)?;
                let mut v = vec![r.r_star.unwrap_or(f64::NAN)];
                v.extend(&r.averages);
                v
            }
        }
        ExperimentKind::Hardy => {
            let Shared::Hardy(suite) = shared else {
                unreachable!("hardy suite prepared")
            };
            let c = &suite.cases[i];
            cfg.list("kappa", &[0.25])
                .iter()
                .map(|&k| {
                    crate::regularity::hardy_check(
                        &suite.domain,
                        &c.u,
                        &c.g,
                        &c.f,
                        &suite.x0,
                        suite.r,
                        k,
                    )
                })
                .collect::<Result<Vec<_>>>()?
        }
        ExperimentKind::Meyers => {
            let domain = Domain::new(Grid::cube(cfg.d, cfg.n, corner_h(cfg))?, DomainKind::Box)?;
            let grid = *domain.grid();
            let eps = cfg.scalar("eps", 1.0 / 16.0);
            let a = sample_field(&cfg.ensemble, &grid.with_spacing(grid.spacing() / eps), idx)?
                .with_grid(grid)?;
            let mut x0 = [0.0; 3];
            x0[..cfg.d].fill(0.5);
            let r = cfg.scalar("r", 0.125);
            let g = VecField::from_fn(&domain, |x| {
                let rr: f64 = (0..cfg.d).map(|k| (x[k] - 0.5).powi(2)).sum();
                let b = bump(rr.sqrt(), 2.0 * r);
                [b, 0.5 * b, 0.25 * b]
            });
            let data = MeyersData::Flux(g);
            let (a0, a1) = (cfg.scalar("alpha0", 0.5), cfg.scalar("alpha1", 1.0));
            cfg.list("p", &[1.0, 1.05])
                .iter()
                .map(|&p| {
                    weighted_meyers_check(&a, &domain, &data, p, a0, a1, r, &x0, opts)
                        .map(|m| m.ratio)
                })
                .collect::<Result<Vec<_>>>()?
        }
        ExperimentKind::Cone => {
            let Shared::ConeDelta(delta) = shared else {
                unreachable!("cone exponent prepared")
            };
            let eps = cfg.scalar("eps", 1.0 / 16.0);
            let s = corner_sample(&cfg.ensemble, cfg.d, cfg.n, eps, idx, opts)?;
            let vertex = s.domain.corner_vertex();
            let prof = cone_excess_profile(&s.u, &s.domain, &vertex, &corner_radii(cfg))?;
            let h = corner_h(cfg);
            let probes = diagonal_probes(
                &s.domain,
                4.0 * h,
                0.25,
                cfg.scalar("probes", 16.0) as usize,
            );
            let ratios = edge_gradient_decay_check(
                &s.u,
                &s.domain,
                &probes,
                cfg.scalar("rho", 0.5),
                *delta,
            )?;
            let rs: Vec<f64> = ratios.iter().map(|e| e.ratio).collect();
            fields.push(("u".to_string(), s.u, DomainKind::CornerBox));
            let mut v = vec![prof.exponent().unwrap_or(f64::NAN), max_of(&rs)];
            v.extend(rs);
            v
        }
        ExperimentKind::TwoScale => {
            let mut v = Vec::new();
            for eps in eps_list(cfg, &[1.0 / 8.0, 1.0 / 16.0]) {
                let r = two_scale_periodic(&cfg.ensemble, cfg.d, eps, cfg.h, opts)?;
                v.push(r.errors.h1_plain);
                v.push(r.errors.h1_corrected);
            }
            v
        }
        ExperimentKind::SpectralGap => {
            let Shared::Gap(g) = shared else {
                unreachable!("gap report prepared")
            };
            vec![
                g.mean,
                g.variance_estimate,
                g.variance_stderr,
                g.rhs_estimate,
                g.rhs_stderr,
                g.ratio,
                g.ratio_stderr,
                g.clipped as f64,
            ]
        }
    };
    Ok(SampleOutput { values, fields })
}
