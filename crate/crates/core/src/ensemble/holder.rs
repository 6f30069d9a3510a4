use nalgebra::{Matrix3, SymmetricEigen};

use super::field::CoefficientField;
use crate::error::{invalid, Error, Result};
use crate::pde::{cells_in_ball, Domain, Point};

/// Cell-indexed values with a norm of differences.
pub trait FieldValues {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn diff_norm(&self, i: usize, j: usize) -> f64;
}

impl FieldValues for [f64] {
    fn len(&self) -> usize {
        <[f64]>::len(self)
    }
    fn diff_norm(&self, i: usize, j: usize) -> f64 {
        (self[i] - self[j]).abs()
    }
}

impl FieldValues for Vec<f64> {
    fn len(&self) -> usize {
        Vec::len(self)
    }
    fn diff_norm(&self, i: usize, j: usize) -> f64 {
        (self[i] - self[j]).abs()
    }
}

impl FieldValues for [[f64; 3]] {
    fn len(&self) -> usize {
        <[[f64; 3]]>::len(self)
    }
    fn diff_norm(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self[i], self[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}

impl FieldValues for Vec<[f64; 3]> {
    fn len(&self) -> usize {
        Vec::len(self)
    }
    fn diff_norm(&self, i: usize, j: usize) -> f64 {
        self.as_slice().diff_norm(i, j)
    }
}

/// Spectral norm of the matrix difference.
impl FieldValues for CoefficientField {
    fn len(&self) -> usize {
        self.grid().len()
    }
    fn diff_norm(&self, i: usize, j: usize) -> f64 {
        let d = self.grid().dim();
        let (a, b) = (self.matrix(i), self.matrix(j));
        if d == 2 {
            let (p, q, r) = (a[0][0] - b[0][0], a[1][1] - b[1][1], a[0][1] - b[0][1]);
            let m = 0.5 * (p + q);
            let s = (0.25 * (p - q) * (p - q) + r * r).sqrt();
            (m.abs() + s).max((m - s).abs())
        } else {
            let diff = Matrix3::from_fn(|k, l| a[k][l] - b[k][l]);
            SymmetricEigen::new(diff).eigenvalues.amax()
        }
    }
}

/// Largest discrete Hölder quotient `|f(y) - f(z)| / |y - z|^alpha` over
/// pairs of cell centres in the closed unit ball around `x`.
pub fn holder_constant_field<F: FieldValues + ?Sized>(
    f: &F,
    domain: &Domain,
    x: &Point,
    alpha: f64,
) -> Result<f64> {
    holder_constant_radius(f, domain, x, 1.0, alpha)
}

/// As [`holder_constant_field`] on a ball of radius `r`.
pub fn holder_constant_radius<F: FieldValues + ?Sized>(
    f: &F,
    domain: &Domain,
    x: &Point,
    r: f64,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("holder exponent {alpha} outside (0, 1]"));
    }
    if f.len() != domain.grid().len() {
        return Err(Error::ShapeMismatch(
            "field does not match the domain grid".into(),
        ));
    }
    let cells = cells_in_ball(domain, x, r, true);
    if cells.len() < 2 {
        return Err(Error::EmptyRegion(format!(
            "fewer than two cells within {r} of {x:?}"
        )));
    }
    let g = domain.grid();
    let centers: Vec<Point> = cells.iter().map(|&c| g.center(c)).collect();
    let mut best = 0.0f64;
    for a in 0..cells.len() {
        for b in a + 1..cells.len() {
            let dist = domain.distance(&centers[a], &centers[b]);
            let q = f.diff_norm(cells[a], cells[b]) / dist.powf(alpha);
            best = best.max(q);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{DomainKind, Grid};

    #[test]
    fn constant_field_has_zero_constant() {
        let g = Grid::cube(2, 20, 0.1).unwrap();
        let dom = Domain::torus(g).unwrap();
        let a = CoefficientField::constant(g, 0.7);
        assert_eq!(
            holder_constant_field(&a, &dom, &[1.0, 1.0, 0.0], 0.5).unwrap(),
            0.0
        );
    }

    #[test]
    fn sine_field_bounded_by_lipschitz_constant() {
        let g = Grid::cube(2, 64, 1.0 / 32.0).unwrap();
        let dom = Domain::torus(g).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|c| 1.0 + 0.25 * (2.0 * std::f64::consts::PI * g.center(c)[0]).sin())
            .collect();
        let v = holder_constant_field(&f, &dom, &[1.0, 1.0, 0.0], 1.0).unwrap();
        let lip = 0.5 * std::f64::consts::PI;
        assert!(v <= lip * 1.001 && v > 0.95 * lip, "{v}");
    }

    #[test]
    fn jump_gives_inverse_spacing() {
        let h = 1.0 / 16.0;
        let g = Grid::cube(2, 32, h).unwrap();
        let dom = Domain::new(g, DomainKind::Box).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|c| if g.coords(c)[0] < 16 { 0.25 } else { 1.0 })
            .collect();
        let v = holder_constant_field(&f, &dom, &[1.0, 1.0, 0.0], 1.0).unwrap();
        assert!(v >= 0.75 / h * (1.0 - 1e-12));
    }

    #[test]
    fn too_small_ball_is_an_error() {
        let g = Grid::cube(2, 4, 2.0).unwrap();
        let dom = Domain::torus(g).unwrap();
        let f = vec![0.0; g.len()];
        assert!(holder_constant_field(&f, &dom, &[0.0, 0.0, 0.0], 1.0).is_err());
    }
}
