use rayon::prelude::*;

use super::field::{ScalarField, VecField};
use super::grid::Domain;
use crate::ensemble::CoefficientField;
use crate::error::{invalid, Error, Result};

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds from triplets; duplicates are summed in input order.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.cols[s..e].binary_search(&c) {
            Ok(p) => self.vals[s + p],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[s..e]
            .iter()
            .copied()
            .zip(self.vals[s..e].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, r)).collect()
    }

    /// `y = A x`. Rows are independent, so the parallel split does not change results.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let body = |(r, out): (usize, &mut f64)| {
            let mut s = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            *out = s;
        };
        if self.n_rows >= 1 << 15 {
            y.par_iter_mut()
                .enumerate()
                .with_min_len(4096)
                .for_each(body);
        } else {
            y.iter_mut().enumerate().for_each(body);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n_rows).all(|r| {
            self.row(r)
                .all(|(c, v)| (v - self.get(c, r)).abs() <= tol * v.abs().max(1.0))
        })
    }
}

/// Discretisation of `-div(a grad u) + massive * u` on a [`Domain`].
///
/// Free rows couple only to free columns in `system`; couplings to Dirichlet
/// cells are kept in `boundary` and moved to the right-hand side at solve time.
/// Dirichlet rows of `system` are identity rows.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    domain: Domain,
    massive: f64,
    system: Csr,
    boundary: Csr,
    dirichlet: Vec<bool>,
    coef_range: (f64, f64),
}

/// Harmonic mean, with the convention that a vanishing value yields zero.
#[inline]
fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

pub fn assemble_operator(
    a: &CoefficientField,
    domain: &Domain,
    massive: f64,
) -> Result<LinearOperator> {
    let grid = *domain.grid();
    if !a.grid().same_shape(&grid) {
        return Err(Error::ShapeMismatch(format!(
            "coefficient grid {:?} does not match domain grid {:?}",
            a.grid().extents(),
            grid.extents()
        )));
    }
    if !(massive >= 0.0 && massive.is_finite()) {
        return invalid(format!(
            "massive parameter must be finite and nonnegative, got {massive}"
        ));
    }
    let d = grid.dim();
    let n = grid.len();
    let h2 = grid.spacing() * grid.spacing();
    let dirichlet = domain.dirichlet_mask();

    let mut full: Vec<(usize, usize, f64)> = Vec::with_capacity(n * (2 * d + 1));
    let mut push = |r: usize, c: usize, v: f64| {
        if !dirichlet[r] {
            full.push((r, c, v));
        }
    };

    // Diagonal coefficients on faces, harmonic mean of the two cells.
    for k in 0..d {
        for c in 0..n {
            let Some(nb) = domain.neighbor(c, k, true) else {
                continue;
            };
            if nb == c {
                continue;
            }
            let m = harmonic(a.get(c, k, k), a.get(nb, k, k)) / h2;
            push(c, c, m);
            push(nb, nb, m);
            push(c, nb, -m);
            push(nb, c, -m);
        }
    }

    // Off-diagonal coefficients: each cell couples its k-faces with its l-faces
    // with weight a_kl / 4, which averages a_kl arithmetically across a face.
    if a.has_off_diagonal() {
        let h = grid.spacing();
        for o in 0..n {
            for k in 0..d {
                for l in 0..d {
                    if k == l {
                        continue;
                    }
                    let w = a.get(o, k, l) / 4.0;
                    if w == 0.0 {
                        continue;
                    }
                    let faces = |axis: usize| {
                        let mut f: Vec<[(usize, f64); 2]> = Vec::with_capacity(2);
                        if let Some(lo) = domain.neighbor(o, axis, false) {
                            f.push([(lo, -1.0 / h), (o, 1.0 / h)]);
                        }
                        if let Some(hi) = domain.neighbor(o, axis, true) {
                            f.push([(o, -1.0 / h), (hi, 1.0 / h)]);
                        }
                        f
                    };
                    for fk in faces(k) {
                        for fl in faces(l) {
                            for &(p, gp) in &fk {
                                for &(q, gq) in &fl {
                                    push(p, q, w * gp * gq);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    if massive > 0.0 {
        for c in 0..n {
            push(c, c, massive);
        }
    }

    let mut sys = Vec::with_capacity(full.len());
    let mut bnd = Vec::new();
    for (r, c, v) in full {
        if dirichlet[c] {
            bnd.push((r, c, v));
        } else {
            sys.push((r, c, v));
        }
    }
    for (c, &isd) in dirichlet.iter().enumerate() {
        if isd {
            sys.push((c, c, 1.0));
        }
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in 0..n {
        for k in 0..d {
            let v = a.get(c, k, k);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }

    Ok(LinearOperator {
        domain: domain.clone(),
        massive,
        system: Csr::from_triplets(n, n, sys),
        boundary: Csr::from_triplets(n, n, bnd),
        dirichlet,
        coef_range: (lo, hi),
    })
}

impl LinearOperator {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn massive(&self) -> f64 {
        self.massive
    }
    pub fn system(&self) -> &Csr {
        &self.system
    }
    pub fn boundary(&self) -> &Csr {
        &self.boundary
    }
    pub fn dirichlet(&self) -> &[bool] {
        &self.dirichlet
    }
    pub fn len(&self) -> usize {
        self.system.n_rows
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Range of the diagonal coefficient entries; drives the spectral preconditioner.
    pub fn coefficient_range(&self) -> (f64, f64) {
        self.coef_range
    }

    /// True when constants lie in the kernel (pure torus without a massive term).
    pub fn is_singular(&self) -> bool {
        self.massive == 0.0 && !self.dirichlet.iter().any(|&b| b)
    }

    /// Entry of the unrestricted matrix in a free row.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        if self.dirichlet[r] {
            return if r == c { 1.0 } else { 0.0 };
        }
        if self.dirichlet[c] {
            self.boundary.get(r, c)
        } else {
            self.system.get(r, c)
        }
    }

    /// Applies the operator on free rows (including couplings to Dirichlet
    /// values in `u`). Dirichlet rows are left at zero.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut y = self.system.matvec(u);
        let b = self.boundary.matvec(u);
        for c in 0..y.len() {
            y[c] = if self.dirichlet[c] { 0.0 } else { y[c] + b[c] };
        }
        y
    }

    /// Residual `||A u - f||_inf` over free rows.
    pub fn residual_max(&self, u: &ScalarField, rhs: &ScalarField) -> f64 {
        let au = self.apply(&u.data);
        (0..au.len())
            .filter(|&c| !self.dirichlet[c])
            .map(|c| (au[c] - rhs.data[c]).abs())
            .fold(0.0, f64::max)
    }
}

/// Face fluxes `M g` for the same face-coefficient rules the operator uses,
/// so that `G^T (flux(a, G u)) + massive u` equals the operator applied to `u`.
pub fn flux(a: &CoefficientField, domain: &Domain, g: &VecField) -> VecField {
    let grid = *domain.grid();
    let d = grid.dim();
    let n = grid.len();
    let mut q = VecField::zeros(grid);
    for k in 0..d {
        for c in 0..n {
            if let Some(nb) = domain.neighbor(c, k, true) {
                q.comps[k][c] = harmonic(a.get(c, k, k), a.get(nb, k, k)) * g.comps[k][c];
            }
        }
    }
    if a.has_off_diagonal() {
        for o in 0..n {
            for k in 0..d {
                let faces_k: Vec<usize> = [
                    domain.neighbor(o, k, false),
                    domain.neighbor(o, k, true).map(|_| o),
                ]
                .into_iter()
                .flatten()
                .collect();
                for l in 0..d {
                    if l == k {
                        continue;
                    }
                    let w = a.get(o, k, l) / 4.0;
                    if w == 0.0 {
                        continue;
                    }
                    let mut gl = 0.0;
                    if let Some(lo) = domain.neighbor(o, l, false) {
                        gl += g.comps[l][lo];
                    }
                    if domain.neighbor(o, l, true).is_some() {
                        gl += g.comps[l][o];
                    }
                    for &f in &faces_k {
                        q.comps[k][f] += w * gl;
                    }
                }
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::field::{gradient, gradient_transpose};
    use crate::pde::grid::{DomainKind, FarBoundary, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, seed: u64, off_diag: bool) -> CoefficientField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = grid.dim();
        let mut e = vec![0.0; grid.len() * d * d];
        for c in 0..grid.len() {
            for k in 0..d {
                e[c * d * d + k * d + k] = rng.random_range(0.5..1.0);
            }
            if off_diag {
                let v = rng.random_range(-0.1..0.1);
                e[c * d * d + 1] = v;
                e[c * d * d + d] = v;
            }
        }
        CoefficientField::new(grid, e, 0.3).unwrap()
    }

    #[test]
    fn identity_torus_is_laplacian() {
        let g = Grid::new(2, &[6, 5], 0.5).unwrap();
        let dom = Domain::torus(g).unwrap();
        let op = assemble_operator(&CoefficientField::identity(g), &dom, 0.0).unwrap();
        for r in 0..g.len() {
            let s: f64 = op.system().row(r).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-12);
            assert!((op.system().get(r, r) - 4.0 / 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn massive_term_is_additive() {
        let g = Grid::new(2, &[6, 7], 0.3).unwrap();
        let dom = Domain::new(
            g,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
        )
        .unwrap();
        let a = random_field(g, 3, true);
        let op0 = assemble_operator(&a, &dom, 0.0).unwrap();
        let op1 = assemble_operator(&a, &dom, 0.25).unwrap();
        for r in 0..g.len() {
            for c in 0..g.len() {
                let mut expect = op0.entry(r, c);
                if r == c && !dom.is_dirichlet(r) {
                    expect += 0.25;
                }
                assert_eq!(op1.entry(r, c), expect);
            }
        }
    }

    #[test]
    fn random_torus_operator_is_symmetric() {
        let g = Grid::cube(2, 8, 0.125).unwrap();
        let dom = Domain::torus(g).unwrap();
        let op = assemble_operator(&random_field(g, 7, true), &dom, 0.0).unwrap();
        assert!(op.system().is_symmetric(1e-14));
    }

    #[test]
    fn operator_matches_flux_composition() {
        for kind in [
            DomainKind::Torus,
            DomainKind::Box,
            DomainKind::Slab {
                far: FarBoundary::Neumann,
            },
        ] {
            let g = Grid::new(3, &[5, 4, 6], 0.5).unwrap();
            let dom = Domain::new(g, kind).unwrap();
            let a = random_field(g, 11, true);
            let op = assemble_operator(&a, &dom, 0.0).unwrap();
            let u = ScalarField::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin() + x[2] * x[0]);
            let q = flux(&a, &dom, &gradient(&u, &dom));
            let div = gradient_transpose(&q, &dom);
            let au = op.apply(&u.data);
            for c in 0..g.len() {
                if !dom.is_dirichlet(c) {
                    assert!(
                        (au[c] - div[c]).abs() < 1e-11 * (1.0 + div[c].abs()),
                        "{kind:?} cell {c}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let g = Grid::cube(2, 8, 0.1).unwrap();
        let g2 = Grid::cube(2, 6, 0.1).unwrap();
        let dom = Domain::torus(g).unwrap();
        let a = CoefficientField::identity(g2);
        assert!(matches!(
            assemble_operator(&a, &dom, 0.0),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
