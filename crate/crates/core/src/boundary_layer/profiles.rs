use super::BoundaryLayerSet;
use crate::error::{invalid, Result};
use crate::pde::{ball_average, Point};
use crate::profile::DecayProfile;

fn fit_range(bl: &BoundaryLayerSet) -> (f64, f64) {
    (2.0 * bl.eps, bl.depth() / 4.0)
}

/// Half-ball averages `avg_{B_r(x0) cap O} |eps grad theta|^2`, averaged again over
/// the given boundary points.
pub fn averaged_decay_profile(
    bl: &BoundaryLayerSet,
    boundary_points: &[Point],
    radii: &[f64],
) -> Result<DecayProfile> {
    if boundary_points.is_empty() {
        return invalid("no boundary points");
    }
    let dom = &bl.domain;
    let g = dom.grid();
    let (lo, _) = dom.axis_bounds(0);
    for x in boundary_points {
        if (x[0] - lo).abs() > 0.5 * g.spacing() {
            return invalid(format!(
                "point {x:?} is not on the Dirichlet face x_1 = {lo}"
            ));
        }
    }
    let mut reach = bl.depth();
    for k in 1..g.dim() {
        reach = reach.min(0.5 * dom.period(k));
    }
    for &r in radii {
        if r > reach * (1.0 + 1e-12) {
            return invalid(format!(
                "radius {r} exceeds the slab (largest admissible {reach})"
            ));
        }
        if r < bl.eps * (1.0 - 1e-12) {
            return invalid(format!("radius {r} below eps = {}", bl.eps));
        }
    }
    let e = bl.scaled_energy_density();
    let mut values = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut s = 0.0;
        for x in boundary_points {
            s += ball_average(&e, dom, x, r)?;
        }
        values.push(s / boundary_points.len() as f64);
    }
    let (flo, fhi) = fit_range(bl);
    Ok(DecayProfile::new(radii.to_vec(), values)?.with_fit(flo, fhi))
}

/// Maximum of `|eps grad theta|` over free cells in distance bins of width
/// `eps`; bin `k` covers `(k eps, (k+1) eps]` and is reported at its midpoint.
pub fn pointwise_decay_profile(bl: &BoundaryLayerSet) -> Result<DecayProfile> {
    let dom = &bl.domain;
    let g = dom.grid();
    let (lo, _) = dom.axis_bounds(0);
    let nbins = (bl.depth() / bl.eps).ceil().max(1.0) as usize;
    let mag = bl.scaled_gradient_magnitude();
    let mut best = vec![f64::NAN; nbins];
    for c in 0..g.len() {
        if dom.is_dirichlet(c) {
            continue;
        }
        let dist = g.center(c)[0] - lo;
        let k = (((dist / bl.eps) * (1.0 - 1e-12)).ceil() as usize)
            .saturating_sub(1)
            .min(nbins - 1);
        if best[k].is_nan() || mag[c] > best[k] {
            best[k] = mag[c];
        }
    }
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for (k, v) in best.into_iter().enumerate() {
        if !v.is_nan() {
            radii.push((k as f64 + 0.5) * bl.eps);
            values.push(v);
        }
    }
    let (flo, fhi) = fit_range(bl);
    Ok(DecayProfile::new(radii, values)?.with_fit(flo, fhi))
}

/// Trapezoidal `int_0^{L_1} |eps grad theta(x0 + z e_1)|^2 dz` along the cell
/// column through `x0`.
pub fn ray_energy(bl: &BoundaryLayerSet, x0: &Point) -> Result<f64> {
    let dom = &bl.domain;
    let g = dom.grid();
    let h = g.spacing();
    let (lo, _) = dom.axis_bounds(0);
    if (x0[0] - lo).abs() > 0.5 * h {
        return invalid(format!("ray base {x0:?} is not on the Dirichlet face"));
    }
    let base = g.coords(g.nearest_cell(x0));
    let mag = bl.scaled_gradient_magnitude();
    let n0 = g.extent(0);
    let vals: Vec<f64> = (0..n0)
        .map(|i| {
            let m = mag[g.index([i, base[1], base[2]])];
            m * m
        })
        .collect();
    if n0 < 2 {
        return Ok(0.0);
    }
    let inner: f64 = vals[1..n0 - 1].iter().sum();
    Ok(h * (inner + 0.5 * (vals[0] + vals[n0 - 1])))
}

/// `(x_1, int_{x_1 = c} |grad theta|^2)` per cell layer (energy density
/// quadrature, so the Dirichlet layer reports zero).
pub fn layer_energies(bl: &BoundaryLayerSet) -> Vec<(f64, f64)> {
    let dom = &bl.domain;
    let g = dom.grid();
    let e = bl.scaled_energy_density();
    let e2 = bl.eps * bl.eps;
    let area = g.cell_volume() / g.spacing();
    let layer = g.len() / g.extent(0);
    (0..g.extent(0))
        .map(|i| {
            let s: f64 = e[i * layer..(i + 1) * layer].iter().sum();
            (g.center(i * layer)[0], s * area / e2)
        })
        .collect()
}

/// Number of increases in a sequence that should be nonincreasing.
pub fn trend_violations(values: &[f64]) -> usize {
    values
        .windows(2)
        .filter(|w| w[1] > w[0] * (1.0 + 1e-12) + 1e-300)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_layer::PowerFit;
    use crate::pde::{Domain, DomainKind, FarBoundary, Grid, ScalarField};
    use crate::profile::geometric_radii;

    fn slab(n0: usize, n1: usize, h: f64) -> Domain {
        let g = Grid::new(2, &[n0, n1], h).unwrap();
        Domain::new(
            g,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
        )
        .unwrap()
    }

    /// theta with `eps d_1 theta = (1 + x_1/eps)^{-q}` exactly on normal faces.
    fn synthetic(dom: &Domain, eps: f64, q: f64) -> BoundaryLayerSet {
        let g = *dom.grid();
        let h = g.spacing();
        let n0 = g.extent(0);
        let mut col = vec![0.0; n0];
        for i in 1..n0 {
            let xm = (i as f64 - 0.5) * h;
            col[i] = col[i - 1] + h / eps * (1.0 + xm / eps).powf(-q);
        }
        let data = (0..g.len()).map(|c| col[g.coords(c)[0]]).collect();
        let th = ScalarField::from_vec(g, data).unwrap();
        let zero = ScalarField::zeros(g);
        BoundaryLayerSet::from_fields(dom.clone(), vec![th, zero], 1.0, eps).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_profiles() {
        let dom = slab(64, 64, 1.0 / 64.0);
        let g = *dom.grid();
        let bl =
            BoundaryLayerSet::from_fields(dom, vec![ScalarField::zeros(g); 2], 1.0, 1.0 / 16.0)
                .unwrap();
        let p = averaged_decay_profile(&bl, &[[0.0, 0.5, 0.0]], &[0.0625, 0.125, 0.25]).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert!(p.fit.is_none() && !p.flags.is_empty());
        let q = pointwise_decay_profile(&bl).unwrap();
        assert!(q.values.iter().all(|&v| v == 0.0));
        assert_eq!(ray_energy(&bl, &[0.0, 0.5, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn synthetic_inverse_profile_fits_minus_one() {
        let eps = 1.0 / 64.0;
        let dom = slab(1024, 2048, 1.0 / 512.0);
        let bl = synthetic(&dom, eps, 1.0);
        let radii = geometric_radii(eps, 1.0, 13);
        let p = averaged_decay_profile(&bl, &[[0.0, 2.0, 0.0]], &radii).unwrap();
        let f: &PowerFit = p.fit.as_ref().unwrap();
        let oracle: Vec<f64> = radii
            .iter()
            .map(|&r| half_disc_average(eps, 1.0, r))
            .collect();
        let o = DecayProfile::new(radii.clone(), oracle)
            .unwrap()
            .with_fit(2.0 * eps, bl.depth() / 4.0);
        assert!(
            (f.exponent - o.exponent().unwrap()).abs() < 0.05,
            "{f:?} vs {:?}",
            o.fit
        );
        // The small-radius correction fades; the tail slope approaches -1.
        let n = radii.len();
        let tail = (p.values[n - 1] / p.values[n - 3]).ln() / (radii[n - 1] / radii[n - 3]).ln();
        assert!((tail + 1.0).abs() < 0.1, "tail slope {tail}");
        let q = pointwise_decay_profile(&bl).unwrap();
        assert!((q.exponent().unwrap() + 1.0).abs() < 0.1, "{:?}", q.fit);
    }

    /// Continuum half-disc average of `(1 + t/eps)^{-2q}` by Simpson quadrature.
    fn half_disc_average(eps: f64, q: f64, r: f64) -> f64 {
        let n = 20000;
        let dt = r / n as f64;
        let f = |t: f64| (1.0 + t / eps).powf(-2.0 * q) * 2.0 * (r * r - t * t).max(0.0).sqrt();
        let mut s = f(0.0) + f(r);
        for i in 1..n {
            s += f(i as f64 * dt) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * dt / 3.0 / (0.5 * std::f64::consts::PI * r * r)
    }

    #[test]
    fn synthetic_root_profile_matches_continuum_oracle() {
        let eps = 1.0 / 64.0;
        let dom = slab(1024, 2048, 1.0 / 512.0);
        let bl = synthetic(&dom, eps, 0.5);
        let radii = geometric_radii(eps, 1.0, 13);
        let p = averaged_decay_profile(&bl, &[[0.0, 2.0, 0.0]], &radii).unwrap();
        let oracle: Vec<f64> = radii
            .iter()
            .map(|&r| half_disc_average(eps, 0.5, r))
            .collect();
        let o = DecayProfile::new(radii.clone(), oracle.clone())
            .unwrap()
            .with_fit(2.0 * eps, bl.depth() / 4.0);
        let (pe, oe) = (p.exponent().unwrap(), o.exponent().unwrap());
        assert!((pe - oe).abs() < 0.05, "{pe} vs {oe}");
        for (v, w) in p.values.iter().zip(&oracle) {
            assert!((v - w).abs() < 0.1 * w, "{v} vs {w}");
        }
    }

    #[test]
    fn synthetic_ray_energy_matches_integral() {
        let eps = 1.0 / 32.0;
        let h = 1.0 / 1024.0;
        let dom = slab(1025, 8, h);
        let bl = synthetic(&dom, eps, 0.5);
        let e = ray_energy(&bl, &[0.0, 4.0 * h, 0.0]).unwrap();
        let l = 1.0;
        let exact = eps * (1.0 + l / eps).ln();
        assert!((e - exact).abs() < 2e-3 * exact, "{e} vs {exact}");
    }

    #[test]
    fn radius_beyond_slab_is_rejected() {
        let dom = slab(32, 32, 1.0 / 32.0);
        let g = *dom.grid();
        let bl = BoundaryLayerSet::from_fields(dom, vec![ScalarField::zeros(g); 2], 1.0, 1.0 / 8.0)
            .unwrap();
        assert!(averaged_decay_profile(&bl, &[[0.0, 0.5, 0.0]], &[0.75]).is_err());
        assert!(averaged_decay_profile(&bl, &[[0.3, 0.5, 0.0]], &[0.25]).is_err());
    }

    #[test]
    fn layer_energy_of_synthetic_profile_decreases() {
        let eps = 1.0 / 16.0;
        let dom = slab(128, 16, 1.0 / 128.0);
        let bl = synthetic(&dom, eps, 0.5);
        let layers: Vec<f64> = layer_energies(&bl).iter().skip(2).map(|p| p.1).collect();
        assert_eq!(trend_violations(&layers), 0);
    }
}
