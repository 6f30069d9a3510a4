//! Weighted Meyers estimates: polynomial weights, the dyadic decomposition
//! around a point and the annulus-to-annulus duality decay.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ensemble::CoefficientField;
use crate::error::{invalid, Result};
use crate::pde::{
    assemble_operator, energy_density, gradient, gradient_transpose, solve, Domain, Point,
    ScalarField, SolveOptions, VecField,
};

/// `omega(x) = (|x - x0| / R + 1)^alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightSpec {
    pub alpha: f64,
    pub r: f64,
    pub x0: Point,
}

impl WeightSpec {
    pub fn new(alpha: f64, r: f64, x0: Point) -> Result<Self> {
        if !(alpha >= 0.0) || !(r > 0.0) {
            return invalid(format!(
                "weight needs alpha >= 0 and R > 0, got {alpha}, {r}"
            ));
        }
        Ok(Self { alpha, r, x0 })
    }
}

/// Euclidean (not minimum image) evaluation of the weight.
pub fn weight_eval(w: &WeightSpec, x: &Point) -> f64 {
    let d = ((x[0] - w.x0[0]).powi(2) + (x[1] - w.x0[1]).powi(2) + (x[2] - w.x0[2]).powi(2)).sqrt();
    (d / w.r + 1.0).powf(w.alpha)
}

fn weight_on(domain: &Domain, w: &WeightSpec, c: usize) -> f64 {
    let d = domain.distance(&domain.grid().center(c), &w.x0);
    (d / w.r + 1.0).powf(w.alpha)
}

/// Annuli `A_0 = {|x - x0| <= 2 rbar}`, `A_j = {2^j rbar < |x - x0| <= 2^{j+1} rbar}`
/// and `A_J = {|x - x0| > 2^J rbar}` over the free cells.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicDecomposition {
    pub x0: Point,
    pub rbar: f64,
    pub levels: usize,
    /// Annulus index per cell; `None` on Dirichlet cells.
    pub annulus: Vec<Option<usize>>,
}

impl DyadicDecomposition {
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.levels + 1];
        for j in self.annulus.iter().flatten() {
            c[*j] += 1;
        }
        c
    }

    pub fn cells(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.annulus
            .iter()
            .enumerate()
            .filter_map(move |(c, a)| (*a == Some(j)).then_some(c))
    }
}

/// Dyadic decomposition with `rbar ~ R`: on bounded domains `rbar` is the
/// unique `diam / (3 * 2^k)` in `(R/2, R]`, on slabs `rbar = R`. The outer
/// shell index is `J = max(1, floor(log2(D / rbar)) - 1)` with `D` the
/// diameter (bounded) or the largest distance from `x0` to a free cell.
pub fn dyadic_decompose(domain: &Domain, x0: &Point, r: f64) -> Result<DyadicDecomposition> {
    let grid = domain.grid();
    let h = grid.spacing();
    if r < 2.0 * h * (1.0 - 1e-12) {
        return invalid(format!("R = {r} is below two cells ({})", 2.0 * h));
    }
    let maxdist = (0..grid.len())
        .filter(|&c| !domain.is_dirichlet(c))
        .map(|c| domain.distance(&grid.center(c), x0))
        .fold(0.0, f64::max);
    let (rbar, span) = if domain.is_bounded() {
        let diam = domain.diameter();
        if r > diam {
            return invalid(format!("R = {r} exceeds the diameter {diam}"));
        }
        let k = (diam / (3.0 * r)).log2().ceil().max(0.0);
        (diam / (3.0 * 2f64.powf(k)), diam)
    } else {
        (r, maxdist)
    };
    let levels = (((span / rbar).log2().floor() as i64) - 1).max(1) as usize;
    let annulus = (0..grid.len())
        .map(|c| {
            if domain.is_dirichlet(c) {
                return None;
            }
            let t = domain.distance(&grid.center(c), x0) / rbar;
            let j = if t <= 2.0 {
                0
            } else {
                // 2^j < t <= 2^{j+1}
                ((t.log2() - 1e-12).ceil() as usize - 1).max(1)
            };
            Some(j.min(levels))
        })
        .collect();
    Ok(DyadicDecomposition {
        x0: *x0,
        rbar,
        levels,
        annulus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualMode {
    /// Divergence data `g`; envelope `2^{-|k-j| d}`.
    Flux,
    /// Source data `f`; envelope `((k-j)_+ + 1)^2 |A_0|^{2/d} 2^{-|k-j| d + 2 max(k, j)}`
    /// (with `2^{max(k,j)}` measured in units of `rbar`).
    Source,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnulusProfile {
    pub k: usize,
    pub mode: DualMode,
    /// `int_{A_j} |grad v|^2` per annulus.
    pub energies: Vec<f64>,
    pub envelope: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Solves the dual problem with seeded unit-norm data in `A_k` and reports the
/// annulus energies against the predicted envelope.
pub fn annulus_duality_profile(
    a: &CoefficientField,
    domain: &Domain,
    dec: &DyadicDecomposition,
    k: usize,
    mode: DualMode,
    seed: u64,
    opts: &SolveOptions,
) -> Result<AnnulusProfile> {
    if k > dec.levels {
        return invalid(format!("source annulus {k} beyond J = {}", dec.levels));
    }
    let grid = *domain.grid();
    let d = grid.dim();
    let vol = grid.cell_volume();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = VecField::zeros(grid);
    let mut f = ScalarField::zeros(grid);
    for c in dec.cells(k) {
        match mode {
            DualMode::Flux => {
                for comp in g.comps.iter_mut().take(d) {
                    comp[c] = StandardNormal.sample(&mut rng);
                }
            }
            DualMode::Source => f.data[c] = StandardNormal.sample(&mut rng),
        }
    }
    // Faces without a partner cell carry no data.
    for kk in 0..d {
        for c in 0..grid.len() {
            if domain.neighbor(c, kk, true).is_none() {
                g.comps[kk][c] = 0.0;
            }
        }
    }
    let norm = match mode {
        DualMode::Flux => (energy_density(&g, domain).iter().sum::<f64>() * vol).sqrt(),
        DualMode::Source => (f.data.iter().map(|v| v * v).sum::<f64>() * vol).sqrt(),
    };
    if norm == 0.0 {
        let n = dec.levels + 1;
        return Ok(AnnulusProfile {
            k,
            mode,
            energies: vec![0.0; n],
            envelope: envelope(dec, k, mode, d, vol),
            normalized: vec![0.0; n],
        });
    }
    let g = g.scaled(1.0 / norm);
    let f = f.scaled(1.0 / norm);
    let v = solve_dual(a, domain, Some(&g), Some(&f), opts)?;
    let e = energy_density(&gradient(&v, domain), domain);
    let mut energies = vec![0.0; dec.levels + 1];
    for (c, j) in dec.annulus.iter().enumerate() {
        if let Some(j) = j {
            energies[*j] += vol * e[c];
        }
    }
    let env = envelope(dec, k, mode, d, vol);
    let normalized = energies.iter().zip(&env).map(|(e, w)| e / w).collect();
    Ok(AnnulusProfile {
        k,
        mode,
        energies,
        envelope: env,
        normalized,
    })
}

fn envelope(dec: &DyadicDecomposition, k: usize, mode: DualMode, d: usize, vol: f64) -> Vec<f64> {
    let a0 = dec.counts()[0] as f64 * vol;
    (0..=dec.levels)
        .map(|j| {
            let gap = (k as i64 - j as i64).unsigned_abs() as f64;
            let base = 2f64.powf(-gap * d as f64);
            match mode {
                DualMode::Flux => base,
                DualMode::Source => {
                    let lead = (k.saturating_sub(j) + 1) as f64;
                    lead * lead * a0.powf(2.0 / d as f64) * base * 4f64.powi(k.max(j) as i32)
                }
            }
        })
        .collect()
}

/// `-div(a^* grad v) = div g + f`, `v = 0` on the Dirichlet cells.
fn solve_dual(
    a: &CoefficientField,
    domain: &Domain,
    g: Option<&VecField>,
    f: Option<&ScalarField>,
    opts: &SolveOptions,
) -> Result<ScalarField> {
    let grid = *domain.grid();
    let mut rhs = ScalarField::zeros(grid);
    if let Some(g) = g {
        for (r, v) in rhs.data.iter_mut().zip(gradient_transpose(g, domain)) {
            *r -= v;
        }
    }
    if let Some(f) = f {
        for (r, v) in rhs.data.iter_mut().zip(&f.data) {
            *r += v;
        }
    }
    for c in 0..grid.len() {
        if domain.is_dirichlet(c) {
            rhs.data[c] = 0.0;
        }
    }
    let at = a.transpose();
    let op = assemble_operator(&at, domain, 0.0)?;
    Ok(solve(&op, &rhs, None, opts)?.0)
}

#[derive(Clone, Debug)]
pub enum MeyersData {
    Flux(VecField),
    Source(ScalarField),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeyersReport {
    pub p: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// False for the relaxed `alpha0 = alpha1 = 0` energy check.
    pub valid: bool,
}

/// Checks the parameter constraints; `Ok(false)` marks the relaxed plain
/// energy case `alpha0 = alpha1 = 0`.
pub fn meyers_parameters_valid(
    p: f64,
    alpha0: f64,
    alpha1: f64,
    d: usize,
    source: bool,
) -> Result<bool> {
    if !(1.0..=1.1).contains(&p) {
        return invalid(format!("p must lie in [1, 1.1], got {p}"));
    }
    if alpha0 == 0.0 && alpha1 == 0.0 {
        return Ok(false);
    }
    let top = d as f64 * (2.0 * p - 1.0);
    let ok =
        0.0 <= alpha0 && alpha0 < alpha1 && alpha1 < top && (!source || alpha0 < alpha1 - 2.0 * p);
    if ok {
        Ok(true)
    } else {
        invalid(format!(
            "weights violate 0 <= alpha0 < alpha1{} < d(2p-1) = {top}: alpha0 = {alpha0}, alpha1 = {alpha1}",
            if source { " - 2p" } else { "" }
        ))
    }
}

/// Weighted `L^{2p}` norms of the dual solution against the data. Cell values
/// of `|grad v|^2` and `|g|^2` use the face quadrature of the energy norm, so
/// `p = 1` with zero weights is the discrete energy estimate exactly.
#[allow(clippy::too_many_arguments)]
pub fn weighted_meyers_check(
    a: &CoefficientField,
    domain: &Domain,
    data: &MeyersData,
    p: f64,
    alpha0: f64,
    alpha1: f64,
    r: f64,
    x0: &Point,
    opts: &SolveOptions,
) -> Result<MeyersReport> {
    let grid = *domain.grid();
    let source = matches!(data, MeyersData::Source(_));
    let valid = meyers_parameters_valid(p, alpha0, alpha1, grid.dim(), source)?;
    let w0 = WeightSpec::new(alpha0, r, *x0)?;
    let w1 = WeightSpec::new(alpha1, r, *x0)?;
    let v = match data {
        MeyersData::Flux(g) => solve_dual(a, domain, Some(g), None, opts)?,
        MeyersData::Source(f) => solve_dual(a, domain, None, Some(f), opts)?,
    };
    let vol = grid.cell_volume();
    let ev = energy_density(&gradient(&v, domain), domain);
    let data_sq: Vec<f64> = match data {
        MeyersData::Flux(g) => energy_density(g, domain),
        MeyersData::Source(f) => (0..grid.len())
            .map(|c| {
                if domain.is_dirichlet(c) {
                    0.0
                } else {
                    f.data[c] * f.data[c]
                }
            })
            .collect(),
    };
    let (mut l, mut rr) = (0.0, 0.0);
    for c in 0..grid.len() {
        if domain.is_dirichlet(c) {
            continue;
        }
        l += vol * ev[c].powf(p) * weight_on(domain, &w0, c);
        rr += vol * data_sq[c].powf(p) * weight_on(domain, &w1, c);
    }
    let lhs = l.powf(0.5 / p);
    let mut rhs = rr.powf(0.5 / p);
    if source {
        rhs *= r;
    }
    let ratio = if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    };
    Ok(MeyersReport {
        p,
        alpha0,
        alpha1,
        r,
        lhs,
        rhs,
        ratio,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{bump, sample_field, EnsembleSpec};
    use crate::pde::{DomainKind, Grid};

    fn unit_box(n: usize) -> Domain {
        Domain::new(
            Grid::cube(2, n, 1.0 / (n - 1) as f64).unwrap(),
            DomainKind::Box,
        )
        .unwrap()
    }

    #[test]
    fn weight_anchors() {
        let x0 = [0.2, 0.3, 0.0];
        let w = WeightSpec::new(2.0, 0.5, x0).unwrap();
        assert_eq!(weight_eval(&w, &x0), 1.0);
        assert!((weight_eval(&w, &[0.7, 0.3, 0.0]) - 4.0).abs() < 1e-15);
        let flat = WeightSpec::new(0.0, 0.5, x0).unwrap();
        assert_eq!(weight_eval(&flat, &[9.0, -3.0, 0.0]), 1.0);
        assert!(WeightSpec::new(-1.0, 1.0, x0).is_err());
    }

    #[test]
    fn decomposition_partitions_and_grows() {
        let dom = unit_box(129);
        let x0 = [0.5, 0.5, 0.0];
        let dec = dyadic_decompose(&dom, &x0, 1.0 / 16.0).unwrap();
        let diam = dom.diameter();
        assert!((dec.levels as f64 - (diam / dec.rbar).log2()).abs() <= 2.0);
        let free = dom.free_count();
        let counts = dec.counts();
        assert_eq!(counts.iter().sum::<usize>(), free);
        for j in 1..dec.levels {
            let q = counts[j] as f64 / (counts[0] as f64 * 4f64.powi(j as i32));
            assert!((0.25..=4.0).contains(&q), "j = {j}: {q}");
        }
        assert_eq!(dec, dyadic_decompose(&dom, &x0, 1.0 / 16.0).unwrap());
        assert!(dyadic_decompose(&dom, &x0, 0.5 / 128.0).is_err());
    }

    #[test]
    fn energy_identity_at_p_one() {
        let dom = unit_box(33);
        let grid = *dom.grid();
        let a = CoefficientField::identity(grid);
        let g = VecField::from_fn(&dom, |x| {
            let b = bump(((x[0] - 0.4).powi(2) + (x[1] - 0.6).powi(2)).sqrt(), 0.3);
            [b, 0.3 * b, 0.0]
        });
        let r = weighted_meyers_check(
            &a,
            &dom,
            &MeyersData::Flux(g),
            1.0,
            0.0,
            0.0,
            0.25,
            &[0.5, 0.5, 0.0],
            &SolveOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!(!r.valid);
        assert!(r.ratio <= 1.0 + 1e-6 && r.ratio > 0.1, "{r:?}");
    }

    #[test]
    fn parameter_constraints() {
        assert!(meyers_parameters_valid(1.05, 0.5, 1.0, 2, false).unwrap());
        assert!(meyers_parameters_valid(1.05, 1.0, 0.5, 2, false).is_err());
        assert!(meyers_parameters_valid(1.05, 0.5, 3.0, 2, false).is_err());
        assert!(meyers_parameters_valid(1.05, 0.5, 1.0, 2, true).is_err());
        assert!(meyers_parameters_valid(1.2, 0.5, 1.0, 2, false).is_err());
    }

    #[test]
    fn zero_data_and_scaling() {
        let dom = unit_box(33);
        let grid = *dom.grid();
        let a = sample_field(
            &EnsembleSpec::checkerboard(0.25, 3).with_correlation_length(1.0 / 16.0),
            &grid,
            0,
        )
        .unwrap();
        let opts = SolveOptions::with_tol(1e-12);
        let x0 = [0.5, 0.5, 0.0];
        let zero = MeyersData::Flux(VecField::zeros(grid));
        let r0 = weighted_meyers_check(&a, &dom, &zero, 1.05, 0.5, 1.0, 0.125, &x0, &opts).unwrap();
        assert_eq!((r0.lhs, r0.ratio), (0.0, 0.0));
        let g = VecField::from_fn(&dom, |x| [(6.0 * x[1]).sin(), (4.0 * x[0]).cos(), 0.0]);
        let base = weighted_meyers_check(
            &a,
            &dom,
            &MeyersData::Flux(g.clone()),
            1.05,
            0.5,
            1.0,
            0.125,
            &x0,
            &opts,
        )
        .unwrap();
        let scaled = weighted_meyers_check(
            &a,
            &dom,
            &MeyersData::Flux(g.scaled(-4.0)),
            1.05,
            0.5,
            1.0,
            0.125,
            &x0,
            &opts,
        )
        .unwrap();
        assert!((base.ratio - scaled.ratio).abs() <= 1e-10 * base.ratio);
        assert!(base.ratio.is_finite() && base.valid);
    }

    #[test]
    fn transpose_of_symmetric_field_is_identical() {
        let grid = Grid::cube(2, 16, 0.1).unwrap();
        let a = sample_field(&EnsembleSpec::checkerboard(0.25, 3), &grid, 0).unwrap();
        assert_eq!(a.transpose().raw(), a.raw());
    }

    #[test]
    fn duality_profile_decays() {
        let dom = unit_box(129);
        let grid = *dom.grid();
        let a = CoefficientField::identity(grid);
        let dec = dyadic_decompose(&dom, &[0.5, 0.5, 0.0], 2.0 * grid.spacing()).unwrap();
        let opts = SolveOptions::with_tol(1e-11);
        let p = annulus_duality_profile(&a, &dom, &dec, 2, DualMode::Flux, 7, &opts).unwrap();
        let c_env = (0..=dec.levels)
            .filter(|&j| j.abs_diff(2) <= 1)
            .map(|j| p.normalized[j])
            .fold(0.0, f64::max);
        for j in 0..=dec.levels {
            if (2..=4).contains(&j.abs_diff(2)) {
                assert!(p.normalized[j] <= c_env, "{p:?}");
            }
        }
        let q = annulus_duality_profile(&a, &dom, &dec, 2, DualMode::Source, 7, &opts).unwrap();
        assert!(q.normalized.iter().all(|v| v.is_finite()));
    }
}
