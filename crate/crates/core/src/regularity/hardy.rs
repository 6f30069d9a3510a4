use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ensemble::{bump, sample_field, CoefficientField, EnsembleSpec};
use crate::error::{invalid, Result};
use crate::pde::{
    assemble_operator, energy_density, gradient, gradient_transpose, solve, Domain, DomainKind,
    Grid, Point, Preconditioner, ScalarField, SolveOptions, VecField,
};

/// Weighted energy ratio with weight `(1 - |x - x0| / r)^kappa`:
/// `int w |grad u|^2 / int w (|g|^2 + r^2 f^2)` over free cells of the ball.
pub fn hardy_check(
    domain: &Domain,
    u: &ScalarField,
    g: &VecField,
    f: &ScalarField,
    x0: &Point,
    r: f64,
    kappa: f64,
) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return invalid(format!("kappa must lie in (0, 1], got {kappa}"));
    }
    if !(r > 0.0) {
        return invalid(format!("radius must be positive, got {r}"));
    }
    let grid = *domain.grid();
    let eu = energy_density(&gradient(u, domain), domain);
    let eg = energy_density(g, domain);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for c in 0..grid.len() {
        if domain.is_dirichlet(c) {
            continue;
        }
        let t = 1.0 - domain.distance(&grid.center(c), x0) / r;
        if t <= 0.0 {
            continue;
        }
        let w = t.powf(kappa);
        lhs += w * eu[c];
        rhs += w * (eg[c] + r * r * f.data[c] * f.data[c]);
    }
    Ok(match (lhs == 0.0, rhs == 0.0) {
        (true, true) => 0.0,
        (false, true) => f64::INFINITY,
        _ => lhs / rhs,
    })
}

#[derive(Clone, Debug)]
pub struct HardyCase {
    pub a: CoefficientField,
    pub g: VecField,
    pub f: ScalarField,
    pub u: ScalarField,
}

/// Half disc `B_1^+(0)` (cells outside the open disc are Dirichlet) with
/// seeded smooth data and `u` solving `-div(a grad u) = div g + f`, `u = 0`
/// on the boundary.
#[derive(Clone, Debug)]
pub struct HardySuite {
    pub domain: Domain,
    pub x0: Point,
    pub r: f64,
    pub cases: Vec<HardyCase>,
}

impl HardySuite {
    pub fn ratios(&self, kappa: f64) -> Result<Vec<f64>> {
        self.cases
            .iter()
            .map(|c| hardy_check(&self.domain, &c.u, &c.g, &c.f, &self.x0, self.r, kappa))
            .collect()
    }

    pub fn max_ratio(&self, kappa: f64) -> Result<f64> {
        Ok(self.ratios(kappa)?.into_iter().fold(0.0, f64::max))
    }
}

struct HardyData {
    g_amp: f64,
    g_center: [f64; 2],
    g_radius: f64,
    g_dir: [f64; 2],
    f_amp: f64,
    f_freq: [f64; 2],
}

impl HardyData {
    fn g(&self, x: &[f64; 3]) -> [f64; 3] {
        let r = ((x[0] - self.g_center[0]).powi(2) + (x[1] - self.g_center[1]).powi(2)).sqrt();
        let b = self.g_amp * bump(r, self.g_radius);
        [b * self.g_dir[0], b * self.g_dir[1], 0.0]
    }

    fn f(&self, x: &[f64; 3]) -> f64 {
        self.f_amp * (self.f_freq[0] * x[0]).cos() * (self.f_freq[1] * x[1]).sin()
    }
}

pub fn hardy_suite(h: f64, n_cases: usize, seed: u64, opts: &SolveOptions) -> Result<HardySuite> {
    let n = (1.0 / h).round() as usize;
    if (n as f64 * h - 1.0).abs() > 1e-9 || n < 4 {
        return invalid(format!("spacing {h} must divide the unit radius"));
    }
    let grid = Grid::new(2, &[n + 2, 2 * n + 3], h)?.with_offset(&[0, -(n as i64) - 1]);
    let x0 = [0.0; 3];
    let mask: Vec<bool> = (0..grid.len())
        .map(|c| {
            let x = grid.center(c);
            (x[0] * x[0] + x[1] * x[1]).sqrt() >= 1.0 - 1e-12
        })
        .collect();
    let domain = Domain::new(grid, DomainKind::Box)?.with_extra_dirichlet(mask)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<HardyData> = (0..n_cases)
        .map(|k| {
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            HardyData {
                g_amp: if k % 3 == 1 {
                    0.0
                } else {
                    rng.random_range(0.5..2.0)
                },
                g_center: [rng.random_range(0.1..0.6), rng.random_range(-0.5..0.5)],
                g_radius: rng.random_range(0.25..0.6),
                g_dir: [th.cos(), th.sin()],
                f_amp: if k % 3 == 0 {
                    0.0
                } else {
                    rng.random_range(0.5..2.0)
                },
                f_freq: [rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)],
            }
        })
        .collect();
    let spec = EnsembleSpec::periodic_smooth(0.25, true, seed).with_correlation_length(0.25);
    let opts = SolveOptions {
        preconditioner: Preconditioner::Jacobi,
        ..*opts
    };
    let cases = data
        .par_iter()
        .enumerate()
        .map(|(k, hd)| -> Result<HardyCase> {
            let a = sample_field(&spec, &grid, k as u64)?;
            let g = VecField::from_fn(&domain, |x| hd.g(x));
            let mut f = ScalarField::from_fn(grid, |x| hd.f(x));
            for c in 0..grid.len() {
                if domain.is_dirichlet(c) {
                    f.data[c] = 0.0;
                }
            }
            let div = gradient_transpose(&g, &domain);
            let rhs = ScalarField {
                grid,
                data: div.iter().zip(&f.data).map(|(dv, fv)| fv - dv).collect(),
            };
            let op = assemble_operator(&a, &domain, 0.0)?;
            let (u, _) = solve(&op, &rhs, None, &opts)?;
            Ok(HardyCase { a, g, f, u })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HardySuite {
        domain,
        x0,
        r: 1.0,
        cases,
    })
}
