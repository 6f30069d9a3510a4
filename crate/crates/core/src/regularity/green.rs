use crate::ensemble::CoefficientField;
use crate::error::{invalid, Result};
use crate::pde::{
    assemble_operator, cell_vector, gradient, gradient_transpose, solve, Domain, Point,
    ScalarField, SolveOptions, VecField,
};

#[derive(Clone, Debug, PartialEq)]
pub struct GreenReport {
    /// `|grad u(x0)|` for the zero-Dirichlet solution with data `(g, f)`.
    pub gradient: f64,
    /// `int (|g| + |f| dist(x, dO)) / |x0 - x|^d dx` over cells.
    pub kernel: f64,
    pub ratio: f64,
}

/// Discrete kernel integral: the self cell is replaced by the nearest other
/// free cell's integrand.
pub fn kernel_integral(domain: &Domain, g: &VecField, f: &ScalarField, x0: &Point) -> f64 {
    let grid = domain.grid();
    let d = grid.dim() as i32;
    let c0 = grid.nearest_cell(x0);
    let mut total = 0.0;
    let mut nearest: Option<(f64, f64)> = None;
    for c in 0..grid.len() {
        if domain.is_dirichlet(c) || c == c0 {
            continue;
        }
        let x = grid.center(c);
        let gv = cell_vector(g, domain, c);
        let gn = (gv[0] * gv[0] + gv[1] * gv[1] + gv[2] * gv[2]).sqrt();
        let dist = domain.distance(x0, &x);
        let val = (gn + f.data[c].abs() * domain.boundary_distance(&x)) / dist.powi(d);
        total += val;
        if nearest.is_none_or(|(best, _)| dist < best) {
            nearest = Some((dist, val));
        }
    }
    if let Some((_, v)) = nearest {
        if !domain.is_dirichlet(c0) {
            total += v;
        }
    }
    total * grid.cell_volume()
}

/// Solves `-div(a grad u) = div g + f` with zero Dirichlet data and compares
/// `|grad u(x0)|` with the kernel integral.
pub fn green_kernel_bound_check(
    a: &CoefficientField,
    domain: &Domain,
    g: &VecField,
    f: &ScalarField,
    x0: &Point,
    opts: &SolveOptions,
) -> Result<GreenReport> {
    let grid = *domain.grid();
    let h = grid.spacing();
    for c in 0..grid.len() {
        if domain.is_dirichlet(c) {
            continue;
        }
        let gv = cell_vector(g, domain, c);
        if gv.iter().all(|v| *v == 0.0) && f.data[c] == 0.0 {
            continue;
        }
        let disp = domain.displacement(x0, &grid.center(c));
        if disp.iter().all(|v| v.abs() <= h * (1.0 + 1e-9)) {
            return invalid(
                "x0 lies within one cell of the data support; kernel bound is infinite there",
            );
        }
    }
    let div = gradient_transpose(g, domain);
    let mut rhs = ScalarField::zeros(grid);
    for c in 0..grid.len() {
        if !domain.is_dirichlet(c) {
            rhs.data[c] = f.data[c] - div[c];
        }
    }
    let op = assemble_operator(a, domain, 0.0)?;
    let (u, _) = solve(&op, &rhs, None, opts)?;
    let v = cell_vector(&gradient(&u, domain), domain, grid.nearest_cell(x0));
    let top = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let kernel = kernel_integral(domain, g, f, x0);
    let ratio = if top == 0.0 && kernel == 0.0 {
        0.0
    } else {
        top / kernel
    };
    Ok(GreenReport {
        gradient: top,
        kernel,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::bump;
    use crate::pde::{dense_solve, DomainKind, Grid};

    fn unit_box(n: usize) -> Domain {
        Domain::new(
            Grid::cube(2, n, 1.0 / (n - 1) as f64).unwrap(),
            DomainKind::Box,
        )
        .unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let dom = unit_box(16);
        let g = *dom.grid();
        let r = green_kernel_bound_check(
            &CoefficientField::identity(g),
            &dom,
            &VecField::zeros(g),
            &ScalarField::zeros(g),
            &[0.5, 0.5, 0.0],
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn matches_dense_oracle() {
        let dom = unit_box(24);
        let grid = *dom.grid();
        let a = CoefficientField::identity(grid);
        let g = VecField::from_fn(&dom, |x| {
            let b = bump(((x[0] - 0.7).powi(2) + (x[1] - 0.3).powi(2)).sqrt(), 0.15);
            [b, -0.5 * b, 0.0]
        });
        let f = ScalarField::zeros(grid);
        let x0 = grid.center(grid.index([6, 16, 0]));
        let r = green_kernel_bound_check(&a, &dom, &g, &f, &x0, &SolveOptions::with_tol(1e-13))
            .unwrap();

        // Independent evaluation of both sides.
        let op = assemble_operator(&a, &dom, 0.0).unwrap();
        let div = gradient_transpose(&g, &dom);
        let rhs = ScalarField {
            grid,
            data: (0..grid.len())
                .map(|c| if dom.is_dirichlet(c) { 0.0 } else { -div[c] })
                .collect(),
        };
        let u = dense_solve(&op, &rhs, None).unwrap();
        let h = grid.spacing();
        let at = |i: usize, j: usize| u.data[grid.index([i, j, 0])];
        let gx = 0.5 * ((at(7, 16) - at(6, 16)) + (at(6, 16) - at(5, 16))) / h;
        let gy = 0.5 * ((at(6, 17) - at(6, 16)) + (at(6, 16) - at(6, 15))) / h;
        let top = (gx * gx + gy * gy).sqrt();
        let mut kern = 0.0;
        for i in 1..23 {
            for j in 1..23 {
                let x = grid.center(grid.index([i, j, 0]));
                let dist = ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)).sqrt();
                let c = grid.index([i, j, 0]);
                let gx = 0.5 * (g.comps[0][c] + g.comps[0][grid.index([i - 1, j, 0])]);
                let gy = 0.5 * (g.comps[1][c] + g.comps[1][grid.index([i, j - 1, 0])]);
                let gn = (gx * gx + gy * gy).sqrt();
                if (i, j) == (6, 16) {
                    continue;
                }
                kern += h * h * gn / (dist * dist);
            }
        }
        // The self cell and its nearest neighbours sit outside the support.
        assert!((r.gradient - top).abs() <= 1e-6 * top);
        assert!(
            (r.kernel - kern).abs() <= 1e-6 * kern,
            "{} vs {kern}",
            r.kernel
        );
        assert!((r.ratio - top / kern).abs() <= 1e-6 * r.ratio);
    }

    #[test]
    fn point_inside_support_is_rejected() {
        let dom = unit_box(16);
        let grid = *dom.grid();
        let f = ScalarField::from_fn(grid, |x| {
            bump(((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt(), 0.2)
        });
        let r = green_kernel_bound_check(
            &CoefficientField::identity(grid),
            &dom,
            &VecField::zeros(grid),
            &f,
            &[0.5, 0.5, 0.0],
            &SolveOptions::default(),
        );
        assert!(r.is_err());
    }
}
