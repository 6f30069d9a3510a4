use super::grid::{Domain, Grid};
use crate::error::{Error, Result};

/// Cell-centred scalar values.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            data: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} cells",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        Self { grid, data }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }
}

/// Face-centred vector field: `comps[k][c]` lives on the face between cell `c`
/// and its `+e_k` neighbour. Faces that do not exist hold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct VecField {
    pub grid: Grid,
    pub comps: Vec<Vec<f64>>,
}

impl VecField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            comps: vec![vec![0.0; grid.len()]; grid.dim()],
            grid,
        }
    }

    /// Samples a vector function at face midpoints of the faces that exist.
    pub fn from_fn(domain: &Domain, f: impl Fn(&[f64; 3]) -> [f64; 3]) -> Self {
        let grid = *domain.grid();
        let h = grid.spacing();
        let mut v = Self::zeros(grid);
        for k in 0..grid.dim() {
            for c in 0..grid.len() {
                if domain.neighbor(c, k, true).is_some() {
                    let mut x = grid.center(c);
                    x[k] += 0.5 * h;
                    v.comps[k][c] = f(&x)[k];
                }
            }
        }
        v
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .map(|comp| comp.iter().map(|v| c * v).collect())
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Face-centred first differences `(u(c + e_k) - u(c)) / h`.
pub fn gradient(u: &ScalarField, domain: &Domain) -> VecField {
    let grid = *domain.grid();
    assert!(u.grid.same_shape(&grid), "field and domain grids differ");
    let inv_h = 1.0 / grid.spacing();
    let mut g = VecField::zeros(grid);
    for k in 0..grid.dim() {
        let comp = &mut g.comps[k];
        for (c, out) in comp.iter_mut().enumerate() {
            if let Some(nb) = domain.neighbor(c, k, true) {
                *out = (u.data[nb] - u.data[c]) * inv_h;
            }
        }
    }
    g
}

/// Transpose of [`gradient`]: `(G^T q)(c) = sum_k (q_k(c - e_k) - q_k(c)) / h`,
/// i.e. minus the discrete divergence.
pub fn gradient_transpose(q: &VecField, domain: &Domain) -> Vec<f64> {
    let grid = *domain.grid();
    let inv_h = 1.0 / grid.spacing();
    let mut out = vec![0.0; grid.len()];
    for k in 0..grid.dim() {
        let comp = &q.comps[k];
        for c in 0..grid.len() {
            if let Some(nb) = domain.neighbor(c, k, true) {
                out[c] -= comp[c] * inv_h;
                out[nb] += comp[c] * inv_h;
            }
        }
    }
    out
}

/// Per-cell quadrature of `|v|^2` for a face field: each face adjacent to a
/// free cell contributes half to each free neighbour, or fully to the free
/// cell when the other side is Dirichlet. Summing over free cells therefore
/// reproduces the face norm exactly. Dirichlet cells get zero.
pub fn energy_density(v: &VecField, domain: &Domain) -> Vec<f64> {
    cell_inner(v, v, domain)
}

/// Polarised form of [`energy_density`]: per-cell quadrature of `v . w`.
pub fn cell_inner(v: &VecField, w: &VecField, domain: &Domain) -> Vec<f64> {
    let grid = *domain.grid();
    let mut e = vec![0.0; grid.len()];
    let dir = domain.dirichlet_mask();
    for c in 0..grid.len() {
        if dir[c] {
            continue;
        }
        let mut s = 0.0;
        for k in 0..grid.dim() {
            let (a, b) = (&v.comps[k], &w.comps[k]);
            if let Some(nb) = domain.neighbor(c, k, true) {
                let wt = if dir[nb] { 1.0 } else { 0.5 };
                s += wt * a[c] * b[c];
            }
            if let Some(nb) = domain.neighbor(c, k, false) {
                let wt = if dir[nb] { 1.0 } else { 0.5 };
                s += wt * a[nb] * b[nb];
            }
        }
        e[c] = s;
    }
    e
}

/// Local quadrature for ball averages: every free cell takes half of each of
/// its faces, so a constant gradient has constant density up to the boundary.
pub fn local_inner(v: &VecField, w: &VecField, domain: &Domain) -> Vec<f64> {
    let grid = *domain.grid();
    let mut e = vec![0.0; grid.len()];
    for (c, out) in e.iter_mut().enumerate() {
        if domain.is_dirichlet(c) {
            continue;
        }
        let mut s = 0.0;
        for k in 0..grid.dim() {
            let (a, b) = (&v.comps[k], &w.comps[k]);
            if domain.neighbor(c, k, true).is_some() {
                s += 0.5 * a[c] * b[c];
            }
            if let Some(nb) = domain.neighbor(c, k, false) {
                s += 0.5 * a[nb] * b[nb];
            }
        }
        *out = s;
    }
    e
}

pub fn local_density(v: &VecField, domain: &Domain) -> Vec<f64> {
    local_inner(v, v, domain)
}

/// Cell value of a face field: the mean of the two faces normal to each axis,
/// or the single existing face on a boundary.
pub fn cell_vector(v: &VecField, domain: &Domain, c: usize) -> [f64; 3] {
    let grid = domain.grid();
    let mut out = [0.0; 3];
    for k in 0..grid.dim() {
        let comp = &v.comps[k];
        let hi = domain.neighbor(c, k, true).map(|_| comp[c]);
        let lo = domain.neighbor(c, k, false).map(|nb| comp[nb]);
        out[k] = match (lo, hi) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.0,
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::{DomainKind, FarBoundary};

    fn slab() -> Domain {
        let g = Grid::new(2, &[8, 6], 0.5).unwrap();
        Domain::new(
            g,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
        )
        .unwrap()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let dom = slab();
        let u = ScalarField::from_fn(*dom.grid(), |_| 2.5);
        assert_eq!(gradient(&u, &dom).max_abs(), 0.0);
    }

    #[test]
    fn gradient_exact_on_affine_and_quadratic() {
        let dom = slab();
        let g = *dom.grid();
        let u = ScalarField::from_fn(g, |x| x[0]);
        let gu = gradient(&u, &dom);
        let q = ScalarField::from_fn(g, |x| x[0] * x[0]);
        let gq = gradient(&q, &dom);
        for c in 0..g.len() {
            if dom.neighbor(c, 0, true).is_some() {
                assert!((gu.comps[0][c] - 1.0).abs() < 1e-14);
                let mid = g.center(c)[0] + 0.25;
                assert!((gq.comps[0][c] - 2.0 * mid).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let dom = slab();
        let g = *dom.grid();
        let u = ScalarField::from_fn(g, |x| (x[0] * 1.3).sin() + x[1] * x[1]);
        let q = VecField::from_fn(&dom, |x| [x[1].cos(), x[0] * x[1], 0.0]);
        let gu = gradient(&u, &dom);
        let lhs: f64 = (0..2)
            .map(|k| {
                gu.comps[k]
                    .iter()
                    .zip(&q.comps[k])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .sum();
        let gt = gradient_transpose(&q, &dom);
        let rhs: f64 = gt.iter().zip(&u.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn energy_density_sums_to_face_norm() {
        let dom = slab();
        let g = *dom.grid();
        let u = ScalarField::from_fn(g, |x| (x[0] - 0.0) * (x[1] + 1.0).sin());
        let gu = gradient(&u, &dom);
        let e = energy_density(&gu, &dom);
        let dir = dom.dirichlet_mask();
        let mut faces = 0.0;
        for k in 0..2 {
            for c in 0..g.len() {
                if let Some(nb) = dom.neighbor(c, k, true) {
                    if !(dir[c] && dir[nb]) {
                        faces += gu.comps[k][c].powi(2);
                    }
                }
            }
        }
        let cells: f64 = e.iter().sum();
        assert!((faces - cells).abs() < 1e-12 * faces);
    }
}
