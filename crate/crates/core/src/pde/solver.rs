use super::field::ScalarField;
use super::operator::LinearOperator;
use super::spectral::SpectralPreconditioner;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Preconditioner {
    Jacobi,
    /// Constant-coefficient fast solver; falls back to Jacobi on masked domains.
    #[default]
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 20_000,
            preconditioner: Preconditioner::Spectral,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return invalid(format!("tolerance {} outside (0, 1e-2]", self.rel_tol));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

enum Precond {
    Jacobi(Vec<f64>),
    Spectral(SpectralPreconditioner),
}

impl Precond {
    fn build(op: &LinearOperator, kind: Preconditioner) -> Self {
        if kind == Preconditioner::Spectral {
            let (lo, hi) = op.coefficient_range();
            let c = (lo.max(1e-300) * hi).sqrt();
            if let Some(p) = SpectralPreconditioner::new(op.domain(), c, op.massive()) {
                return Precond::Spectral(p);
            }
        }
        let inv = op
            .system()
            .diagonal()
            .iter()
            .zip(op.dirichlet())
            .map(|(&v, &d)| if d || v == 0.0 { 0.0 } else { 1.0 / v })
            .collect();
        Precond::Jacobi(inv)
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Jacobi(inv) => {
                for i in 0..r.len() {
                    z[i] = inv[i] * r[i];
                }
            }
            Precond::Spectral(p) => p.apply(r, z),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Fixed-order blocked sum: deterministic and a little more accurate.
    let mut total = 0.0;
    for (ca, cb) in a.chunks(1024).zip(b.chunks(1024)) {
        let mut s = 0.0;
        for i in 0..ca.len() {
            s += ca[i] * cb[i];
        }
        total += s;
    }
    total
}

fn project_mean_zero(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A u = rhs` on free cells with `u = dirichlet` on Dirichlet cells.
pub fn solve(
    op: &LinearOperator,
    rhs: &ScalarField,
    dirichlet: Option<&ScalarField>,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveStats)> {
    solve_with_guess(op, rhs, dirichlet, None, opts)
}

pub fn solve_with_guess(
    op: &LinearOperator,
    rhs: &ScalarField,
    dirichlet: Option<&ScalarField>,
    guess: Option<&ScalarField>,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveStats)> {
    opts.validate()?;
    let grid = *op.domain().grid();
    let n = grid.len();
    if rhs.data.len() != n || dirichlet.is_some_and(|d| d.data.len() != n) {
        return Err(Error::ShapeMismatch(
            "right-hand side or boundary data does not match the operator".into(),
        ));
    }
    let mask = op.dirichlet();
    let singular = op.is_singular();

    // Effective right-hand side on free rows.
    let mut b: Vec<f64> = rhs
        .data
        .iter()
        .zip(mask)
        .map(|(&v, &d)| if d { 0.0 } else { v })
        .collect();
    let mut ud = vec![0.0; n];
    if let Some(dd) = dirichlet {
        for c in 0..n {
            if mask[c] {
                ud[c] = dd.data[c];
            }
        }
        let bu = op.boundary().matvec(&ud);
        for c in 0..n {
            if !mask[c] {
                b[c] -= bu[c];
            }
        }
    }
    if singular {
        let s: f64 = b.iter().sum();
        let scale: f64 = b.iter().map(|v| v.abs()).sum();
        if s.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::IncompatibleRhs(format!(
                "torus problem without massive term needs a mean-zero right-hand side (sum {s:.3e})"
            )));
        }
        project_mean_zero(&mut b);
    }

    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    if let Some(g) = guess {
        for c in 0..n {
            if !mask[c] {
                x[c] = g.data[c];
            }
        }
    }
    if bnorm == 0.0 && guess.is_none() {
        for c in 0..n {
            if mask[c] {
                x[c] = ud[c];
            }
        }
        return Ok((
            ScalarField { grid, data: x },
            SolveStats {
                iterations: 0,
                rel_residual: 0.0,
            },
        ));
    }
    let bnorm = bnorm.max(f64::MIN_POSITIVE);

    let a = op.system();
    let pc = Precond::build(op, opts.preconditioner);
    let mut r = b.clone();
    let mut q = vec![0.0; n];
    if guess.is_some() {
        a.matvec_into(&x, &mut q);
        for c in 0..n {
            r[c] = if mask[c] { 0.0 } else { b[c] - q[c] };
        }
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    let mut restarts = 0;
    while rel > opts.rel_tol {
        if it >= opts.max_iter {
            return Err(Error::NotConverged {
                iterations: it,
                residual: rel,
            });
        }
        it += 1;
        a.matvec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::NotConverged {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if singular {
            project_mean_zero(&mut r);
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= opts.rel_tol {
            // Confirm against the true residual; restart from it if they disagree.
            a.matvec_into(&x, &mut q);
            for c in 0..n {
                r[c] = if mask[c] { 0.0 } else { b[c] - q[c] };
            }
            if singular {
                project_mean_zero(&mut r);
            }
            rel = dot(&r, &r).sqrt() / bnorm;
            if rel <= opts.rel_tol || restarts >= 5 {
                break;
            }
            restarts += 1;
            pc.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rel > opts.rel_tol {
        return Err(Error::NotConverged {
            iterations: it,
            residual: rel,
        });
    }
    if singular {
        project_mean_zero(&mut x);
    }
    for c in 0..n {
        if mask[c] {
            x[c] = ud[c];
        }
    }
    Ok((
        ScalarField { grid, data: x },
        SolveStats {
            iterations: it,
            rel_residual: rel,
        },
    ))
}
