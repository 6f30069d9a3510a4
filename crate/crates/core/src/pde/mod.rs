//! Grids, domains, finite-difference assembly and solvers.

pub mod dense;
pub mod field;
pub mod grid;
pub mod operator;
pub mod solver;
pub mod spectral;

pub use dense::dense_solve;
pub use field::{
    cell_inner, cell_vector, energy_density, gradient, gradient_transpose, local_density,
    local_inner, ScalarField, VecField,
};
pub use grid::{
    ball_average, cells_in_ball, norm, Domain, DomainKind, FarBoundary, Grid, Point, DEFAULT_CAP,
};
pub use operator::{assemble_operator, flux, Csr, LinearOperator};
pub use solver::{solve, solve_with_guess, Preconditioner, SolveOptions, SolveStats};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::CoefficientField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scalar(grid: Grid, seed: u64) -> CoefficientField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..grid.len())
            .map(|_| rng.random_range(0.25..1.0))
            .collect();
        CoefficientField::scalar(grid, &v, 0.25).unwrap()
    }

    fn random_rhs(grid: Grid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField {
            grid,
            data: (0..grid.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        }
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid::new(2, &[16, 16], 1.0 / 16.0).unwrap();
        let dom = Domain::new(g, DomainKind::Box).unwrap();
        let op = assemble_operator(&random_scalar(g, 1), &dom, 0.0).unwrap();
        let (u, st) = solve(&op, &ScalarField::zeros(g), None, &SolveOptions::default()).unwrap();
        assert_eq!(st.iterations, 0);
        assert!(u.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn torus_fourier_mode() {
        let n = 32;
        let g = Grid::new(2, &[n, n], 1.0 / n as f64).unwrap();
        let dom = Domain::torus(g).unwrap();
        let op = assemble_operator(&CoefficientField::identity(g), &dom, 0.0).unwrap();
        let f = ScalarField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let h = 1.0 / n as f64;
        let lam = 4.0 / (h * h) * (std::f64::consts::PI / n as f64).sin().powi(2);
        for pc in [Preconditioner::Jacobi, Preconditioner::Spectral] {
            let opts = SolveOptions {
                rel_tol: 1e-12,
                preconditioner: pc,
                ..Default::default()
            };
            let (u, _) = solve(&op, &f, None, &opts).unwrap();
            let expect: Vec<f64> = f.data.iter().map(|v| v / lam).collect();
            assert!(rel_err(&u.data, &expect) < 1e-10, "{pc:?}");
        }
    }

    #[test]
    fn rejects_incompatible_torus_rhs() {
        let g = Grid::cube(2, 8, 0.125).unwrap();
        let dom = Domain::torus(g).unwrap();
        let op = assemble_operator(&CoefficientField::identity(g), &dom, 0.0).unwrap();
        let f = ScalarField::from_fn(g, |_| 1.0);
        assert!(matches!(
            solve(&op, &f, None, &SolveOptions::default()),
            Err(crate::Error::IncompatibleRhs(_))
        ));
    }

    #[test]
    fn matches_dense_on_every_domain() {
        let kinds = [
            DomainKind::Torus,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
            DomainKind::Slab {
                far: FarBoundary::Dirichlet,
            },
            DomainKind::Box,
            DomainKind::CornerBox,
        ];
        for (s, kind) in kinds.into_iter().enumerate() {
            for massive in [0.0, 0.5] {
                let g = Grid::new(2, &[16, 16], 1.0 / 16.0).unwrap();
                let dom = Domain::new(g, kind).unwrap();
                let a = random_scalar(g, 10 + s as u64);
                let op = assemble_operator(&a, &dom, massive).unwrap();
                let mut f = random_rhs(g, 20 + s as u64);
                if op.is_singular() {
                    let m = f.mean();
                    f.data.iter_mut().for_each(|v| *v -= m);
                }
                let bc = random_rhs(g, 30 + s as u64);
                let opts = SolveOptions::with_tol(1e-13);
                let (u, _) = solve(&op, &f, Some(&bc), &opts).unwrap();
                let ud = dense_solve(&op, &f, Some(&bc)).unwrap();
                assert!(
                    rel_err(&u.data, &ud.data) < 1e-8,
                    "{kind:?} massive {massive}"
                );
            }
        }
    }

    #[test]
    fn spectral_and_jacobi_agree_in_3d() {
        let g = Grid::new(3, &[10, 8, 6], 0.2).unwrap();
        for kind in [
            DomainKind::Torus,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
            DomainKind::Box,
        ] {
            let dom = Domain::new(g, kind).unwrap();
            let op = assemble_operator(&random_scalar(g, 5), &dom, 0.1).unwrap();
            let f = random_rhs(g, 6);
            let mut sols = Vec::new();
            for pc in [Preconditioner::Jacobi, Preconditioner::Spectral] {
                let opts = SolveOptions {
                    rel_tol: 1e-12,
                    preconditioner: pc,
                    ..Default::default()
                };
                sols.push(solve(&op, &f, None, &opts).unwrap().0);
            }
            assert!(rel_err(&sols[0].data, &sols[1].data) < 1e-9, "{kind:?}");
        }
    }

    #[test]
    fn solve_is_bitwise_deterministic() {
        let g = Grid::cube(2, 48, 1.0 / 48.0).unwrap();
        let dom = Domain::new(
            g,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
        )
        .unwrap();
        let op = assemble_operator(&random_scalar(g, 9), &dom, 0.0).unwrap();
        let f = random_rhs(g, 3);
        let u1 = solve(&op, &f, None, &SolveOptions::default()).unwrap().0;
        let u2 = solve(&op, &f, None, &SolveOptions::default()).unwrap().0;
        assert_eq!(u1.data, u2.data);
    }

    #[test]
    fn discrete_ellipticity() {
        let g = Grid::cube(2, 12, 0.1).unwrap();
        let dom = Domain::new(g, DomainKind::Box).unwrap();
        let a = random_scalar(g, 2);
        let massive = 0.7;
        let op = assemble_operator(&a, &dom, massive).unwrap();
        let mut u = random_rhs(g, 4);
        for c in 0..g.len() {
            if dom.is_dirichlet(c) {
                u.data[c] = 0.0;
            }
        }
        let au = op.apply(&u.data);
        let lhs: f64 = au.iter().zip(&u.data).map(|(a, b)| a * b).sum();
        let gu = gradient(&u, &dom);
        let gn: f64 = gu.comps.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
        let un: f64 = u.data.iter().map(|v| v * v).sum();
        assert!(lhs >= a.lambda() * gn + massive * un - 1e-9);
    }
}
