use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::pde::Grid;

pub type Mat3 = [[f64; 3]; 3];

/// A symmetric matrix per cell. Only the leading `d x d` block is used.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    grid: Grid,
    entries: Vec<f64>,
    lambda: f64,
}

impl CoefficientField {
    /// `entries` holds the full `d x d` matrix of each cell in row-major order.
    pub fn new(grid: Grid, entries: Vec<f64>, lambda: f64) -> Result<Self> {
        let d = grid.dim();
        if entries.len() != grid.len() * d * d {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficient entries for {} cells of dimension {d}",
                entries.len(),
                grid.len()
            )));
        }
        for c in 0..grid.len() {
            let m = &entries[c * d * d..(c + 1) * d * d];
            for k in 0..d {
                for l in 0..k {
                    if m[k * d + l] != m[l * d + k] {
                        return invalid(format!("coefficient at cell {c} is not symmetric"));
                    }
                }
            }
        }
        Ok(Self {
            grid,
            entries,
            lambda,
        })
    }

    /// `a(x) = s(x) Id`.
    pub fn scalar(grid: Grid, values: &[f64], lambda: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} scalar values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        let d = grid.dim();
        let mut entries = vec![0.0; grid.len() * d * d];
        for (c, &v) in values.iter().enumerate() {
            for k in 0..d {
                entries[c * d * d + k * d + k] = v;
            }
        }
        Ok(Self {
            grid,
            entries,
            lambda,
        })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self::scalar(grid, &vec![value; grid.len()], value.min(1.0)).expect("shape is consistent")
    }

    pub fn identity(grid: Grid) -> Self {
        Self::constant(grid, 1.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn raw(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, c: usize, k: usize, l: usize) -> f64 {
        let d = self.grid.dim();
        self.entries[c * d * d + k * d + l]
    }

    pub fn matrix(&self, c: usize) -> Mat3 {
        let d = self.grid.dim();
        let mut m = [[0.0; 3]; 3];
        for k in 0..d {
            for l in 0..d {
                m[k][l] = self.get(c, k, l);
            }
        }
        m
    }

    /// Values of one entry over all cells.
    pub fn component(&self, k: usize, l: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|c| self.get(c, k, l)).collect()
    }

    pub fn has_off_diagonal(&self) -> bool {
        let d = self.grid.dim();
        (0..self.grid.len())
            .any(|c| (0..d).any(|k| (0..d).any(|l| k != l && self.get(c, k, l) != 0.0)))
    }

    /// Smallest and largest eigenvalue of the cell matrix.
    pub fn eigen_bounds(&self, c: usize) -> (f64, f64) {
        let d = self.grid.dim();
        if d == 2 {
            let (a, b, e) = (self.get(c, 0, 0), self.get(c, 1, 1), self.get(c, 0, 1));
            let m = 0.5 * (a + b);
            let r = (0.25 * (a - b) * (a - b) + e * e).sqrt();
            (m - r, m + r)
        } else {
            let m = self.matrix(c);
            let mat = Matrix3::from_fn(|i, j| m[i][j]);
            let ev = SymmetricEigen::new(mat).eigenvalues;
            (ev.min(), ev.max())
        }
    }

    /// Global eigenvalue range over all cells.
    pub fn eigen_scan(&self) -> (f64, f64) {
        (0..self.grid.len())
            .map(|c| self.eigen_bounds(c))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                (lo.min(a), hi.max(b))
            })
    }

    /// Transposed field `a*`. Cell matrices are symmetric, so this is a copy.
    pub fn transpose(&self) -> Self {
        self.clone()
    }

    /// Same cell values viewed on a grid of the same shape with different
    /// spacing (the `a(x / eps)` rescaling).
    pub fn with_grid(&self, grid: Grid) -> Result<Self> {
        if !grid.same_shape(&self.grid) {
            return Err(Error::ShapeMismatch(
                "rescaled grid must keep its shape".into(),
            ));
        }
        Ok(Self {
            grid,
            entries: self.entries.clone(),
            lambda: self.lambda,
        })
    }

    /// Copies the cells of `target` out of this field by global coordinates.
    pub fn restrict(&self, target: Grid) -> Result<Self> {
        let d = self.grid.dim();
        if target.dim() != d {
            return Err(Error::ShapeMismatch("dimension differs".into()));
        }
        let dd = d * d;
        let mut entries = vec![0.0; target.len() * dd];
        for c in 0..target.len() {
            let src = self.grid.locate_global(target.global(c)).ok_or_else(|| {
                Error::ShapeMismatch(format!(
                    "cell {:?} is outside the source field",
                    target.global(c)
                ))
            })?;
            entries[c * dd..(c + 1) * dd].copy_from_slice(&self.entries[src * dd..(src + 1) * dd]);
        }
        Ok(Self {
            grid: target,
            entries,
            lambda: self.lambda,
        })
    }

    /// Cell-wise map of every entry (used for perturbations).
    pub(crate) fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }
}
