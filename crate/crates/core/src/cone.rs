//! Homogeneity exponents of harmonic functions on convex cones and corner
//! decay checks on grids.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::ensemble::{sample_field, CoefficientField, EnsembleSpec};
use crate::error::{invalid, Error, Result};
use crate::pde::{
    cell_vector, cells_in_ball, gradient, local_density, Domain, DomainKind, Grid, Point,
    ScalarField, SolveOptions,
};
use crate::profile::DecayProfile;
use crate::regularity::harmonic_sample;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConeGeometry {
    /// Planar sector `0 < arg x < omega`.
    Sector { omega: f64 },
    /// Spherical cap of the given polar angle around the last axis. Only the
    /// half-sphere (`angle = pi/2`) has a closed-form spectrum here.
    Cap { angle: f64 },
    /// The orthant at the minimum corner of a corner box.
    Orthant,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSpec {
    pub d: usize,
    pub geometry: ConeGeometry,
    pub vertex: Point,
}

impl ConeSpec {
    pub fn sector(omega: f64, vertex: Point) -> Result<Self> {
        if !(omega > 0.0 && omega < 2.0 * PI) {
            return invalid(format!("sector angle must lie in (0, 2pi), got {omega}"));
        }
        Ok(Self {
            d: 2,
            geometry: ConeGeometry::Sector { omega },
            vertex,
        })
    }

    pub fn cap(angle: f64, vertex: Point) -> Result<Self> {
        if !(angle > 0.0 && angle < PI) {
            return invalid(format!("cap angle must lie in (0, pi), got {angle}"));
        }
        Ok(Self {
            d: 3,
            geometry: ConeGeometry::Cap { angle },
            vertex,
        })
    }

    pub fn orthant(domain: &Domain) -> Result<Self> {
        if domain.kind() != DomainKind::CornerBox {
            return invalid("orthant cones live on corner boxes");
        }
        Ok(Self {
            d: domain.grid().dim(),
            geometry: ConeGeometry::Orthant,
            vertex: domain.corner_vertex(),
        })
    }

    /// Whether the closed cone minus the vertex sits in an open half-space.
    pub fn strictly_convex(&self) -> bool {
        match self.geometry {
            ConeGeometry::Sector { omega } => omega < PI,
            ConeGeometry::Cap { angle } => angle < PI / 2.0,
            ConeGeometry::Orthant => true,
        }
    }

    /// The first `count` cross-section eigenvalues.
    pub fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        match self.geometry {
            ConeGeometry::Sector { omega } => sector_eigenvalues(omega, count),
            ConeGeometry::Cap { angle } if (angle - PI / 2.0).abs() < 1e-12 => {
                // Dirichlet spectrum of the half-sphere: l(l+1), l >= 1.
                Ok((1..=count).map(|l| (l * (l + 1)) as f64).collect())
            }
            ConeGeometry::Orthant if self.d == 2 => sector_eigenvalues(PI / 2.0, count),
            _ => invalid("no closed-form spectrum for this cone"),
        }
    }

    pub fn spectral_data(&self, count: usize) -> Result<SpectralData> {
        homogeneity_exponents(&self.eigenvalues(count)?, self.d)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub lambdas: Vec<f64>,
    pub exponents: Vec<f64>,
}

impl SpectralData {
    /// Largest residual of `b(b - 1) + (d - 1) b = lambda`.
    pub fn residual(&self, d: usize) -> f64 {
        self.lambdas
            .iter()
            .zip(&self.exponents)
            .map(|(l, b)| (b * (b - 1.0) + (d as f64 - 1.0) * b - l).abs())
            .fold(0.0, f64::max)
    }
}

/// Positive roots `b = (2 - d)/2 + sqrt(lambda + (d - 2)^2 / 4)`.
pub fn homogeneity_exponents(lambdas: &[f64], d: usize) -> Result<SpectralData> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return invalid(format!("eigenvalues must be positive, got {l}"));
    }
    let s = (d as f64 - 2.0) / 2.0;
    let exponents = lambdas.iter().map(|l| -s + (l + s * s).sqrt()).collect();
    Ok(SpectralData {
        lambdas: lambdas.to_vec(),
        exponents,
    })
}

/// Dirichlet eigenvalues `(k pi / omega)^2` of an arc of length `omega`.
pub fn sector_eigenvalues(omega: f64, count: usize) -> Result<Vec<f64>> {
    if !(omega > 0.0 && omega < 2.0 * PI) {
        return invalid(format!("sector angle must lie in (0, 2pi), got {omega}"));
    }
    Ok((1..=count)
        .map(|k| (k as f64 * PI / omega).powi(2))
        .collect())
}

fn sector_omega(spec: &ConeSpec) -> Result<f64> {
    match spec.geometry {
        ConeGeometry::Sector { omega } => Ok(omega),
        ConeGeometry::Orthant if spec.d == 2 => Ok(PI / 2.0),
        _ => invalid("series expansions are implemented for planar sectors"),
    }
}

/// Polar coordinates relative to the vertex, `theta` in `[0, omega]`.
fn polar(spec: &ConeSpec, omega: f64, x: &Point) -> Result<(f64, f64)> {
    let y = [x[0] - spec.vertex[0], x[1] - spec.vertex[1]];
    let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
    if r == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut th = y[1].atan2(y[0]);
    if th < -1e-12 {
        th += 2.0 * PI;
    }
    if th > omega + 1e-12 {
        return invalid(format!("point {x:?} lies outside the sector"));
    }
    Ok((r, th.clamp(0.0, omega)))
}

/// `sum_k a_k (r / rho)^{b_k} sin(k pi theta / omega)`.
pub fn series_eval(coeffs: &[f64], spec: &ConeSpec, rho: f64, x: &Point) -> Result<f64> {
    let omega = sector_omega(spec)?;
    let (r, th) = polar(spec, omega, x)?;
    let b = spec.spectral_data(coeffs.len())?.exponents;
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(i, a)| a * (r / rho).powf(b[i]) * ((i + 1) as f64 * PI * th / omega).sin())
        .sum())
}

/// Sine coefficients of `u(rho, .)` on the arc, by the midpoint rule with
/// `quad` nodes. The sines are not normalized, so a pure mode returns 1.
pub fn series_coefficients(
    u: impl Fn(&Point) -> f64,
    spec: &ConeSpec,
    rho: f64,
    count: usize,
    quad: usize,
) -> Result<Vec<f64>> {
    let omega = sector_omega(spec)?;
    if quad == 0 || !(rho > 0.0) {
        return invalid("need a positive radius and quadrature size");
    }
    let vals: Vec<(f64, f64)> = (0..quad)
        .map(|q| {
            let th = (q as f64 + 0.5) * omega / quad as f64;
            let x = [
                spec.vertex[0] + rho * th.cos(),
                spec.vertex[1] + rho * th.sin(),
                0.0,
            ];
            (th, u(&x))
        })
        .collect();
    Ok((1..=count)
        .map(|k| {
            let s: f64 = vals
                .iter()
                .map(|(th, v)| v * (k as f64 * PI * th / omega).sin())
                .sum();
            2.0 * s / quad as f64
        })
        .collect())
}

/// Largest ball radius around `vertex` that stays inside the grid.
fn max_radius(domain: &Domain, vertex: &Point) -> f64 {
    let mut m = f64::INFINITY;
    for k in 0..domain.grid().dim() {
        if domain.periodic(k) {
            m = m.min(0.5 * domain.period(k));
        } else {
            let (lo, hi) = domain.axis_bounds(k);
            m = m.min((hi - vertex[k]).max(vertex[k] - lo));
        }
    }
    m
}

/// Gradient-energy averages over the free cells of `B_r(vertex)` with a
/// power-law fit over all radii.
pub fn cone_excess_profile(
    u: &ScalarField,
    domain: &Domain,
    vertex: &Point,
    radii: &[f64],
) -> Result<DecayProfile> {
    let grid = domain.grid();
    if !u.grid.same_shape(grid) {
        return Err(Error::ShapeMismatch(
            "field does not match the domain".into(),
        ));
    }
    let rmax = max_radius(domain, vertex);
    if let Some(r) = radii
        .iter()
        .find(|r| **r > rmax * (1.0 + 1e-12) || **r < grid.spacing())
    {
        return invalid(format!("radius {r} outside [h, {rmax}]"));
    }
    let e = local_density(&gradient(u, domain), domain);
    let values = radii
        .iter()
        .map(|&r| {
            let cells = cells_in_ball(domain, vertex, r, false);
            if cells.is_empty() {
                return Err(Error::EmptyRegion(format!(
                    "no free cells within {r} of the vertex"
                )));
            }
            Ok(cells.iter().map(|&c| e[c]).sum::<f64>() / cells.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = (radii[0], *radii.last().unwrap_or(&radii[0]));
    Ok(DecayProfile::new(radii.to_vec(), values)?.with_fit(lo, hi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRatio {
    pub probe: Point,
    pub distance: f64,
    pub gradient: f64,
    pub ratio: f64,
}

/// `|grad u(x0)| / ((dist(x0, E) / rho)^delta * rms)` per probe (evaluated at
/// the nearest cell centre), with `rms`
/// the root mean gradient energy over `B_rho(vertex)` and `delta` the
/// pointwise gradient exponent.
pub fn edge_gradient_decay_check(
    u: &ScalarField,
    domain: &Domain,
    probes: &[Point],
    rho: f64,
    delta: f64,
) -> Result<Vec<EdgeRatio>> {
    if domain.kind() != DomainKind::CornerBox {
        return invalid("edge checks need a corner box");
    }
    let grid = domain.grid();
    let vertex = domain.corner_vertex();
    let e = local_density(&gradient(u, domain), domain);
    let cells = cells_in_ball(domain, &vertex, rho, false);
    if cells.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no free cells within {rho} of the vertex"
        )));
    }
    let rms = (cells.iter().map(|&c| e[c]).sum::<f64>() / cells.len() as f64).sqrt();
    let gu = gradient(u, domain);
    probes
        .iter()
        .map(|x0| {
            let c = grid.nearest_cell(x0);
            let dist = domain.edge_distance(&grid.center(c));
            if dist < 0.5 * grid.spacing() {
                return invalid(format!("probe {x0:?} lies on the edge set"));
            }
            let v = cell_vector(&gu, domain, c);
            let g = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let den = (dist / rho).powf(delta) * rms;
            let ratio = if g == 0.0 && den == 0.0 { 0.0 } else { g / den };
            Ok(EdgeRatio {
                probe: *x0,
                distance: dist,
                gradient: g,
                ratio,
            })
        })
        .collect()
}

/// Unit corner box with `n` cells per axis and an `a`-harmonic sample that
/// vanishes on the faces through the vertex and equals `2 x_1 x_2` (plus
/// `x_3` factors in 3d) on the far faces.
#[derive(Clone, Debug)]
pub struct CornerSample {
    pub a: CoefficientField,
    pub domain: Domain,
    pub u: ScalarField,
}

pub fn corner_domain(d: usize, n: usize) -> Result<Domain> {
    Domain::new(
        Grid::cube(d, n, 1.0 / (n - 1) as f64)?,
        DomainKind::CornerBox,
    )
}

pub fn corner_data(x: &Point, d: usize) -> f64 {
    if d == 2 {
        2.0 * x[0] * x[1]
    } else {
        x[0] * x[1] * x[2]
    }
}

/// Harmonic corner sample; `spec` is sampled at correlation length `eps`.
pub fn corner_sample(
    spec: &EnsembleSpec,
    d: usize,
    n: usize,
    eps: f64,
    idx: u64,
    opts: &SolveOptions,
) -> Result<CornerSample> {
    let domain = corner_domain(d, n)?;
    let grid = *domain.grid();
    let micro = grid.with_spacing(grid.spacing() / eps);
    let a = sample_field(spec, &micro, idx)?.with_grid(grid)?;
    let bc = ScalarField::from_fn(grid, |x| corner_data(x, d));
    let u = harmonic_sample(&a, &domain, &bc, opts)?;
    Ok(CornerSample { a, domain, u })
}

/// `count` probes on the diagonal at geometric distances in `[lo, hi]` from the vertex.
pub fn diagonal_probes(domain: &Domain, lo: f64, hi: f64, count: usize) -> Vec<Point> {
    let v = domain.corner_vertex();
    let d = domain.grid().dim();
    let s = 1.0 / (d as f64).sqrt();
    crate::profile::geometric_radii(lo, hi, count)
        .into_iter()
        .map(|t| {
            let mut p = v;
            for k in 0..d {
                p[k] += t * s;
            }
            p
        })
        .collect()
}

/// Ratio tables for `n_samples` corner samples. `delta` is the pointwise
/// exponent used in the denominator.
#[allow(clippy::too_many_arguments)]
pub fn edge_decay_suite(
    spec: &EnsembleSpec,
    d: usize,
    n: usize,
    eps: f64,
    n_samples: usize,
    probes: &[Point],
    rho: f64,
    delta: f64,
    opts: &SolveOptions,
) -> Result<Vec<Vec<EdgeRatio>>> {
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = corner_sample(spec, d, n, eps, i, opts)?;
            edge_gradient_decay_check(&s.u, &s.domain, probes, rho, delta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{assemble_operator, dense_solve, solve};

    #[test]
    fn exponent_anchors() {
        let s = homogeneity_exponents(&[2.0], 3).unwrap();
        assert!((s.exponents[0] - 1.0).abs() < 1e-12);
        for d in [2, 3] {
            let s = homogeneity_exponents(&[d as f64 - 1.0], d).unwrap();
            assert!((s.exponents[0] - 1.0).abs() < 1e-12);
        }
        assert!((homogeneity_exponents(&[4.0], 2).unwrap().exponents[0] - 2.0).abs() < 1e-12);
        assert!(homogeneity_exponents(&[0.0], 2).is_err());
        let hs = ConeSpec::cap(PI / 2.0, [0.0; 3])
            .unwrap()
            .spectral_data(4)
            .unwrap();
        assert!(hs.residual(3) < 1e-12 && (hs.exponents[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sector_spectrum() {
        assert!((sector_eigenvalues(PI, 1).unwrap()[0] - 1.0).abs() < 1e-12);
        let q = sector_eigenvalues(PI / 2.0, 5).unwrap();
        assert!((q[0] - 4.0).abs() < 1e-12);
        assert!(q.windows(2).all(|w| w[1] > w[0]));
        for omega in [0.3, 1.0, 2.0, 3.0] {
            let c = ConeSpec::sector(omega, [0.0; 3]).unwrap();
            let sd = c.spectral_data(3).unwrap();
            assert!(sd.residual(2) < 1e-12);
            assert_eq!(c.strictly_convex(), sd.exponents[0] > 1.0);
        }
    }

    #[test]
    fn single_mode_is_xy() {
        let c = ConeSpec::sector(PI / 2.0, [0.0; 3]).unwrap();
        for x in [[0.3, 0.7, 0.0], [1.2, 0.1, 0.0], [0.0, 0.5, 0.0]] {
            let v = series_eval(&[1.0], &c, 1.0, &x).unwrap();
            assert!((v - 2.0 * x[0] * x[1]).abs() < 1e-12);
        }
        assert_eq!(
            series_eval(&[0.0, 0.0], &c, 1.0, &[0.2, 0.2, 0.0]).unwrap(),
            0.0
        );
        assert!(series_eval(&[1.0], &c, 1.0, &[-0.2, 0.2, 0.0]).is_err());
        let a = series_coefficients(|x| 2.0 * x[0] * x[1], &c, 1.0, 3, 400).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-9 && a[1].abs() < 1e-9 && a[2].abs() < 1e-9);
    }

    #[test]
    fn truncation_error_decreases() {
        let omega = PI / 2.0;
        let c = ConeSpec::sector(omega, [0.0; 3]).unwrap();
        let g = |x: &Point| {
            let th = x[1].atan2(x[0]);
            th * (omega - th)
        };
        let coeffs = series_coefficients(g, &c, 1.0, 7, 2000).unwrap();
        let err = |m: usize| {
            let mut s = 0.0;
            for q in 0..500 {
                let th = (q as f64 + 0.5) * omega / 500.0;
                let x = [th.cos(), th.sin(), 0.0];
                s += (series_eval(&coeffs[..m], &c, 1.0, &x).unwrap() - g(&x)).powi(2);
            }
            s.sqrt()
        };
        let (e1, e3, e5) = (err(1), err(3), err(5));
        assert!(e1 > e3 && e3 > e5, "{e1} {e3} {e5}");
    }

    fn masked_sector(n: usize, omega: f64) -> Domain {
        let dom = corner_domain(2, n).unwrap();
        let grid = *dom.grid();
        let mask = (0..grid.len())
            .map(|c| {
                let x = grid.center(c);
                x[1].atan2(x[0]) > omega + 1e-12
                    || (x[0] * x[0] + x[1] * x[1]).sqrt() >= 1.0 - 1e-12
            })
            .collect();
        dom.with_extra_dirichlet(mask).unwrap()
    }

    #[test]
    fn two_modes_match_dense_solve() {
        let dom = masked_sector(30, PI / 2.0);
        let grid = *dom.grid();
        let c = ConeSpec::sector(PI / 2.0, [0.0; 3]).unwrap();
        let coeffs = [1.0, 0.5];
        let exact = ScalarField::from_fn(grid, |x| series_eval(&coeffs, &c, 1.0, x).unwrap_or(0.0));
        let op = assemble_operator(&CoefficientField::identity(grid), &dom, 0.0).unwrap();
        let u = dense_solve(&op, &ScalarField::zeros(grid), Some(&exact)).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..grid.len() {
            if !dom.is_dirichlet(i) {
                num += (u.data[i] - exact.data[i]).powi(2);
                den += exact.data[i].powi(2);
            }
        }
        assert!((num / den).sqrt() < 0.01, "{}", (num / den).sqrt());
    }

    #[test]
    fn manufactured_modes_give_exact_exponents() {
        let n = 257;
        for (omega, k) in [(0.75 * PI, 1usize), (PI / 2.0, 2)] {
            let dom = masked_sector(n, omega);
            let grid = *dom.grid();
            let c = ConeSpec::sector(omega, [0.0; 3]).unwrap();
            let mut coeffs = vec![0.0; k];
            coeffs[k - 1] = 1.0;
            let u = ScalarField::from_fn(grid, |x| series_eval(&coeffs, &c, 1.0, x).unwrap_or(0.0));
            let h = grid.spacing();
            let radii = crate::profile::geometric_radii(8.0 * h, 0.5, 8);
            let p = cone_excess_profile(&u, &dom, &[0.0; 3], &radii).unwrap();
            let b = c.spectral_data(k).unwrap().exponents[k - 1];
            let fit = p.fit.clone().unwrap();
            assert!(
                (fit.exponent - (2.0 * b - 2.0)).abs() <= 0.05 * (2.0 * b - 2.0),
                "{fit:?}"
            );
            assert!(fit.residual <= 0.05, "{fit:?}");
        }
    }

    #[test]
    fn half_plane_affine_has_flat_profile() {
        let grid = Grid::new(2, &[65, 128], 1.0 / 64.0)
            .unwrap()
            .with_offset(&[0, -64]);
        let dom = Domain::new(
            grid,
            DomainKind::Slab {
                far: crate::pde::FarBoundary::Dirichlet,
            },
        )
        .unwrap();
        let u = ScalarField::from_fn(grid, |x| x[0]);
        let radii = crate::profile::geometric_radii(2.0 / 64.0, 0.5, 6);
        let p = cone_excess_profile(&u, &dom, &[0.0; 3], &radii).unwrap();
        assert!(p.exponent().unwrap().abs() < 1e-10);
        assert!(cone_excess_profile(&u, &dom, &[0.0; 3], &[2.0]).is_err());
    }

    #[test]
    fn quadrant_identity_profile_and_edge_ratios() {
        let opts = SolveOptions::with_tol(1e-11);
        let s = corner_sample(&EnsembleSpec::constant(1.0), 2, 65, 1.0, 0, &opts).unwrap();
        let h = s.domain.grid().spacing();
        let radii = crate::profile::geometric_radii(4.0 * h, 0.5, 6);
        let p = cone_excess_profile(&s.u, &s.domain, &[0.0; 3], &radii).unwrap();
        let delta = p.exponent().unwrap() / 2.0;
        assert!((p.exponent().unwrap() - 2.0).abs() < 0.3);
        let probes = diagonal_probes(&s.domain, 4.0 * h, 0.25, 8);
        let r = edge_gradient_decay_check(&s.u, &s.domain, &probes, 0.5, delta).unwrap();
        let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), e| {
            (a.min(e.ratio), b.max(e.ratio))
        });
        assert!(hi / lo < 1.1, "{r:?}");
        assert!(edge_gradient_decay_check(&s.u, &s.domain, &[[0.0; 3]], 0.5, delta).is_err());
    }

    #[test]
    fn corner_sample_is_harmonic_and_vanishes_at_axes() {
        let opts = SolveOptions::with_tol(1e-12);
        let s = corner_sample(
            &EnsembleSpec::checkerboard(0.25, 4),
            2,
            33,
            1.0 / 8.0,
            1,
            &opts,
        )
        .unwrap();
        let grid = *s.domain.grid();
        let op = assemble_operator(&s.a, &s.domain, 0.0).unwrap();
        let bc = ScalarField::from_fn(grid, |x| {
            if x[0] == 0.0 || x[1] == 0.0 {
                0.0
            } else {
                corner_data(x, 2)
            }
        });
        let (v, _) = solve(&op, &ScalarField::zeros(grid), Some(&bc), &opts).unwrap();
        for i in 0..grid.len() {
            assert!((v.data[i] - s.u.data[i]).abs() < 1e-9);
        }
    }
}
