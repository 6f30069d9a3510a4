use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ensemble::{bump, sample_field, CoefficientField, EnsembleSpec};
use crate::error::{invalid, Result};
use crate::pde::{
    assemble_operator, energy_density, gradient, gradient_transpose, solve, Domain, DomainKind,
    FarBoundary, Grid, ScalarField, SolveOptions, VecField,
};

/// Weighted LHS / RHS of the localized energy estimate with weight
/// `exp(-gamma |x| / L)`, `|x|` measured from the origin (minimum image on
/// periodic axes). Zero when both sides vanish.
pub fn exp_weighted_energy_check(
    domain: &Domain,
    u: &ScalarField,
    g: &ScalarField,
    f: &VecField,
    t: f64,
    l: f64,
    gamma: f64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return invalid(format!("gamma must be positive, got {gamma}"));
    }
    if !(t > 0.0) || l < t.sqrt() * (1.0 - 1e-12) {
        return invalid(format!("need T > 0 and L >= sqrt(T), got T = {t}, L = {l}"));
    }
    let grid = *domain.grid();
    let eu = energy_density(&gradient(u, domain), domain);
    let eg = energy_density(&gradient(g, domain), domain);
    let ef = energy_density(f, domain);
    let origin = [0.0; 3];
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for c in 0..grid.len() {
        if domain.is_dirichlet(c) {
            continue;
        }
        let w = (-gamma * domain.distance(&grid.center(c), &origin) / l).exp();
        lhs += w * (eu[c] + u.data[c] * u.data[c] / t);
        rhs += w * (eg[c] + g.data[c] * g.data[c] / t + ef[c]);
    }
    Ok(match (lhs == 0.0, rhs == 0.0) {
        (true, true) => 0.0,
        (false, true) => f64::INFINITY,
        _ => lhs / rhs,
    })
}

/// One data set `(g, F)` and the solution `u` of
/// `-div(a grad u) + u / T = div F`, `u = g` on `x_1 = 0`.
#[derive(Clone, Debug)]
pub struct LocalizationCase {
    pub a: CoefficientField,
    pub g: ScalarField,
    pub f: VecField,
    pub u: ScalarField,
}

#[derive(Clone, Debug)]
pub struct LocalizationSuite {
    pub domain: Domain,
    pub t: f64,
    pub l: f64,
    pub cases: Vec<LocalizationCase>,
}

impl LocalizationSuite {
    pub fn ratios(&self, gamma: f64) -> Result<Vec<f64>> {
        self.cases
            .iter()
            .map(|c| {
                exp_weighted_energy_check(&self.domain, &c.u, &c.g, &c.f, self.t, self.l, gamma)
            })
            .collect()
    }

    pub fn max_ratio(&self, gamma: f64) -> Result<f64> {
        Ok(self.ratios(gamma)?.into_iter().fold(0.0, f64::max))
    }
}

/// Continuum description of one case, so that the suite can be rebuilt on
/// refined grids.
#[derive(Clone, Debug)]
struct CaseData {
    coef_index: u64,
    trace_amp: f64,
    trace_freq: f64,
    trace_phase: f64,
    trace_bump: Option<(f64, f64)>,
    flux_amp: f64,
    flux_center: [f64; 2],
    flux_radius: f64,
    flux_dir: [f64; 2],
}

fn case_data(rng: &mut ChaCha8Rng, k: usize, period: f64, depth: f64) -> CaseData {
    let mode = k % 4;
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    CaseData {
        coef_index: k as u64,
        trace_amp: if mode == 1 {
            0.0
        } else {
            rng.random_range(0.5..2.0)
        },
        trace_freq: rng.random_range(1..4) as f64 * std::f64::consts::TAU / period,
        trace_phase: rng.random_range(0.0..std::f64::consts::TAU),
        trace_bump: (mode == 3).then(|| {
            (
                rng.random_range(-0.4..0.4) * period,
                rng.random_range(0.5..1.5),
            )
        }),
        flux_amp: if mode == 0 || mode == 3 {
            0.0
        } else {
            rng.random_range(0.5..2.0)
        },
        flux_center: [
            rng.random_range(0.5..0.6 * depth),
            rng.random_range(-0.45..0.45) * period,
        ],
        flux_radius: rng.random_range(0.5..1.0),
        flux_dir: [theta.cos(), theta.sin()],
    }
}

impl CaseData {
    fn g(&self, x: &[f64; 3]) -> f64 {
        let profile = (-x[0] * x[0]).exp();
        match self.trace_bump {
            Some((c, rho)) => self.trace_amp * bump(((x[1] - c).powi(2) + x[0] * x[0]).sqrt(), rho),
            None => self.trace_amp * (self.trace_freq * x[1] + self.trace_phase).cos() * profile,
        }
    }

    fn f(&self, x: &[f64; 3]) -> [f64; 3] {
        let r =
            ((x[0] - self.flux_center[0]).powi(2) + (x[1] - self.flux_center[1]).powi(2)).sqrt();
        let b = self.flux_amp * bump(r, self.flux_radius);
        [b * self.flux_dir[0], b * self.flux_dir[1], 0.0]
    }
}

/// Slab of depth 4 and tangential period 8 (centred at the origin) with
/// `T = L = 1`, periodic-smooth coefficients at scale 1/2, and `n_cases`
/// seeded data sets of trace, flux and mixed type.
pub fn localization_suite(
    h: f64,
    n_cases: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<LocalizationSuite> {
    let (depth, period, t, l) = (4.0, 8.0, 1.0, 1.0);
    let n0 = (depth / h).round() as usize + 1;
    let n1 = (period / h).round() as usize;
    if (n1 as f64 * h - period).abs() > 1e-9 {
        return invalid(format!("spacing {h} does not divide the period"));
    }
    let grid = Grid::new(2, &[n0, n1], h)?.with_offset(&[0, -(n1 as i64 / 2)]);
    let domain = Domain::new(
        grid,
        DomainKind::Slab {
            far: FarBoundary::Neumann,
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<CaseData> = (0..n_cases)
        .map(|k| case_data(&mut rng, k, period, depth))
        .collect();
    let spec = EnsembleSpec::periodic_smooth(0.25, true, seed).with_correlation_length(0.5);
    let cases = data
        .par_iter()
        .map(|cd| -> Result<LocalizationCase> {
            let a = sample_field(&spec, &grid, cd.coef_index)?;
            let g = ScalarField::from_fn(grid, |x| cd.g(x));
            let f = VecField::from_fn(&domain, |x| cd.f(x));
            let op = assemble_operator(&a, &domain, 1.0 / t)?;
            let rhs: Vec<f64> = gradient_transpose(&f, &domain)
                .into_iter()
                .map(|v| -v)
                .collect();
            let (u, _) = solve(&op, &ScalarField::from_vec(grid, rhs)?, Some(&g), opts)?;
            Ok(LocalizationCase { a, g, f, u })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalizationSuite {
        domain,
        t,
        l,
        cases,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaSearch {
    /// Increasing dyadic sweep.
    pub gammas: Vec<f64>,
    pub max_ratios: Vec<f64>,
    /// Largest swept gamma whose suite maximum stays within twice the
    /// small-gamma plateau.
    pub gamma: f64,
}

pub fn gamma_search(suite: &LocalizationSuite) -> Result<GammaSearch> {
    let gammas: Vec<f64> = (0..8).rev().map(|k| 2f64.powi(-k)).collect();
    let max_ratios = gammas
        .iter()
        .map(|&g| suite.max_ratio(g))
        .collect::<Result<Vec<_>>>()?;
    let plateau = max_ratios[0];
    let mut gamma = gammas[0];
    for (g, m) in gammas.iter().zip(&max_ratios) {
        if *m <= 2.0 * plateau {
            gamma = *g;
        } else {
            break;
        }
    }
    Ok(GammaSearch {
        gammas,
        max_ratios,
        gamma,
    })
}
