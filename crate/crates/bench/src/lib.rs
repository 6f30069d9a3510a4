//! Shared fixtures for the solver benchmarks.

use homog_core::ensemble::{sample_field, CoefficientField, EnsembleSpec};
use homog_core::pde::{Domain, DomainKind, Grid, ScalarField};

/// A checkerboard sample on an `n^d` torus of unit micro spacing.
pub fn checkerboard_torus(d: usize, n: usize) -> (CoefficientField, Domain) {
    let grid = Grid::cube(d, n, 1.0).expect("valid grid");
    let a = sample_field(&EnsembleSpec::checkerboard(0.25, 1), &grid, 0).expect("valid sample");
    (a, Domain::torus(grid).expect("valid torus"))
}

/// The same coefficient on a box with smooth right-hand side.
pub fn checkerboard_box(n: usize) -> (CoefficientField, Domain, ScalarField) {
    let grid = Grid::cube(2, n, 1.0 / (n - 1) as f64).expect("valid grid");
    let micro = grid.with_spacing(1.0);
    let a = sample_field(&EnsembleSpec::checkerboard(0.25, 1), &micro, 0)
        .and_then(|a| a.with_grid(grid))
        .expect("valid sample");
    let dom = Domain::new(grid, DomainKind::Box).expect("valid box");
    let mut rhs = ScalarField::from_fn(grid, |x| (3.0 * x[0]).sin() + x[1]);
    for c in 0..grid.len() {
        if dom.is_dirichlet(c) {
            rhs.data[c] = 0.0;
        }
    }
    (a, dom, rhs)
}
