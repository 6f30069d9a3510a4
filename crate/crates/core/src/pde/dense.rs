//! Dense LU reference solve for small problems.

use nalgebra::{DMatrix, DVector};

use super::field::ScalarField;
use super::operator::LinearOperator;
use crate::error::{invalid, Error, Result};

/// Largest number of free unknowns accepted by [`dense_solve`].
pub const DENSE_LIMIT: usize = 6000;

/// Solves the same system as [`super::solve`] by dense factorisation.
/// A singular torus problem is regularised by the mean-zero constraint.
pub fn dense_solve(
    op: &LinearOperator,
    rhs: &ScalarField,
    dirichlet: Option<&ScalarField>,
) -> Result<ScalarField> {
    let n = op.len();
    let mask = op.dirichlet();
    let free: Vec<usize> = (0..n).filter(|&c| !mask[c]).collect();
    let m = free.len();
    if m > DENSE_LIMIT {
        return invalid(format!("{m} unknowns exceed the dense oracle limit"));
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &c) in free.iter().enumerate() {
        pos[c] = i;
    }
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (i, &c) in free.iter().enumerate() {
        for (col, v) in op.system().row(c) {
            a[(i, pos[col])] += v;
        }
    }
    let mut ud = vec![0.0; n];
    if let Some(d) = dirichlet {
        for c in 0..n {
            if mask[c] {
                ud[c] = d.data[c];
            }
        }
    }
    let bu = op.boundary().matvec(&ud);
    let mut b = DVector::<f64>::from_iterator(m, free.iter().map(|&c| rhs.data[c] - bu[c]));
    let singular = op.is_singular();
    if singular {
        let mean = b.sum() / m as f64;
        b.add_scalar_mut(-mean);
        let w = 1.0 / m as f64;
        a.add_scalar_mut(w);
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Degenerate("dense system is singular".into()))?;
    let mut out = ud;
    for (i, &c) in free.iter().enumerate() {
        out[c] = x[i];
    }
    if singular {
        let mean = out.iter().sum::<f64>() / n as f64;
        out.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(ScalarField {
        grid: *op.domain().grid(),
        data: out,
    })
}
