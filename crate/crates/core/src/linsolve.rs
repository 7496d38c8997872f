//! Block-diagonal direct solves and preconditioned Krylov iterations.

use nalgebra::{DMatrix, DVector};

use crate::assembly::SparseMatrix;
use crate::error::{Error, Result};

fn dense_block(m: &SparseMatrix, block: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, &m.dense_block(block * n, n))
}

fn check_blocks(m: &SparseMatrix, n_loc: usize) -> Result<usize> {
    if n_loc == 0 || m.nrows() != m.ncols() || m.nrows() % n_loc != 0 {
        return Err(Error::invalid(format!(
            "a {}x{} matrix does not split into blocks of size {n_loc}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows() / n_loc)
}

/// Cholesky factors of the diagonal blocks of a block-diagonal SPD matrix.
#[derive(Clone, Debug)]
pub struct BlockFactorization {
    n_loc: usize,
    factors: Vec<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl BlockFactorization {
    /// Factor every `n_loc` block; a block that is not SPD points to an
    /// assembly bug.
    pub fn new(m: &SparseMatrix, n_loc: usize) -> Result<Self> {
        let n_blocks = check_blocks(m, n_loc)?;
        let factors = (0..n_blocks)
            .map(|b| dense_block(m, b, n_loc).cholesky().ok_or(Error::NotSpd { block: b }))
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockFactorization { n_loc, factors })
    }

    pub fn n_loc(&self) -> usize {
        self.n_loc
    }

    pub fn n_blocks(&self) -> usize {
        self.factors.len()
    }

    pub fn dim(&self) -> usize {
        self.n_loc * self.factors.len()
    }

    pub fn solve_into(&self, rhs: &[f64], out: &mut [f64]) -> Result<()> {
        if rhs.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::invalid(format!(
                "right-hand side of length {} for a system of size {}",
                rhs.len(),
                self.dim()
            )));
        }
        let n = self.n_loc;
        for (b, f) in self.factors.iter().enumerate() {
            let mut x = DVector::from_column_slice(&rhs[b * n..(b + 1) * n]);
            f.solve_mut(&mut x);
            out[b * n..(b + 1) * n].copy_from_slice(x.as_slice());
        }
        Ok(())
    }

    /// `M^{-1} A` for a matrix `A` with the same row blocking, keeping the
    /// sparsity of `A` at block granularity.
    pub fn left_solve(&self, a: &SparseMatrix) -> Result<SparseMatrix> {
        if a.nrows() != self.dim() {
            return Err(Error::invalid(format!("{} rows for a block system of size {}", a.nrows(), self.dim())));
        }
        let n = self.n_loc;
        let mut triplets = Vec::with_capacity(a.nnz());
        for (b, f) in self.factors.iter().enumerate() {
            let mut cols: Vec<usize> = (b * n..(b + 1) * n).flat_map(|r| a.row(r).0.iter().copied()).collect();
            cols.sort_unstable();
            cols.dedup();
            let mut dense = DMatrix::zeros(n, cols.len());
            for i in 0..n {
                let (cs, vs) = a.row(b * n + i);
                for (c, v) in cs.iter().zip(vs) {
                    let j = cols.binary_search(c).expect("column collected above");
                    dense[(i, j)] = *v;
                }
            }
            f.solve_mut(&mut dense);
            for i in 0..n {
                for (j, &c) in cols.iter().enumerate() {
                    triplets.push((b * n + i, c, dense[(i, j)]));
                }
            }
        }
        SparseMatrix::from_triplets(a.nrows(), a.ncols(), &triplets)
    }

    /// Largest `||L L^T - M_b|| / ||M_b||` over blocks.
    pub fn reconstruction_error(&self, m: &SparseMatrix) -> f64 {
        self.factors
            .iter()
            .enumerate()
            .map(|(b, f)| {
                let mb = dense_block(m, b, self.n_loc);
                let l = f.l();
                (&l * l.transpose() - &mb).norm() / mb.norm()
            })
            .fold(0.0, f64::max)
    }
}

/// `M^{-1} rhs` by exact block solves.
pub fn block_solve(f: &BlockFactorization, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rhs.len()];
    f.solve_into(rhs, &mut out)?;
    Ok(out)
}

/// 2-norm condition number of each diagonal block.
pub fn block_condition_numbers(m: &SparseMatrix, n_loc: usize) -> Result<Vec<f64>> {
    let n_blocks = check_blocks(m, n_loc)?;
    Ok((0..n_blocks)
        .map(|b| {
            let s = dense_block(m, b, n_loc).singular_values();
            s.max() / s.min()
        })
        .collect())
}

/// Block-Jacobi preconditioner: explicit inverses of the diagonal blocks.
#[derive(Clone, Debug)]
pub struct BlockJacobi {
    n_loc: usize,
    inverses: Vec<f64>,
}

impl BlockJacobi {
    pub fn new(a: &SparseMatrix, n_loc: usize) -> Result<Self> {
        let n_blocks = check_blocks(a, n_loc)?;
        let mut inverses = Vec::with_capacity(n_blocks * n_loc * n_loc);
        for b in 0..n_blocks {
            let inv = dense_block(a, b, n_loc).lu().try_inverse().ok_or_else(|| {
                Error::invalid(format!("singular diagonal block {b} in the preconditioner"))
            })?;
            // row-major
            inverses.extend(inv.transpose().iter());
        }
        Ok(BlockJacobi { n_loc, inverses })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.n_loc;
        for ((zb, rb), inv) in z.chunks_mut(n).zip(r.chunks(n)).zip(self.inverses.chunks(n * n)) {
            for (i, zi) in zb.iter_mut().enumerate() {
                *zi = inv[i * n..(i + 1) * n].iter().zip(rb).map(|(a, b)| a * b).sum();
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrylovMethod {
    /// Conjugate gradients; symmetric positive definite systems only.
    Cg,
    /// BiCGStab, falling back to restarted GMRES on breakdown or
    /// stagnation.
    BiCgStab,
    Gmres,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    pub method: KrylovMethod,
    /// Target for `||b - A x|| / ||b||`.
    pub tol: f64,
    /// Defaults to `10 N`.
    pub max_iter: Option<usize>,
}

impl KrylovOptions {
    pub fn new(method: KrylovMethod, tol: f64) -> Self {
        KrylovOptions {
            method,
            tol,
            max_iter: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(a: &SparseMatrix, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.matvec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Solve `A x = b` to `||b - A x|| <= tol ||b||` with a block-Jacobi
/// preconditioner. `x0` seeds the iteration.
pub fn krylov_solve(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &KrylovOptions,
    pre: &BlockJacobi,
) -> Result<(Vec<f64>, KrylovStats)> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(Error::invalid("Krylov solve dimension mismatch"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("Krylov tolerance must be positive"));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], KrylovStats::default()));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let res = true_residual(a, b, &x, &mut r) / b_norm;
    if res <= opts.tol {
        return Ok((x, KrylovStats { iterations: 0, relative_residual: res }));
    }
    let mut method = opts.method;
    let mut used = 0;
    // recursive residuals drift, so convergence is judged on the true
    // residual and the iteration restarted from the current iterate if needed
    for _ in 0..4 {
        let budget = max_iter - used;
        let outcome = match method {
            KrylovMethod::Cg => cg(a, b_norm, &mut x, &mut r, opts.tol, budget, pre),
            KrylovMethod::BiCgStab => bicgstab(a, b_norm, &mut x, &mut r, opts.tol, budget, pre),
            KrylovMethod::Gmres => gmres(a, b, &mut x, &mut r, opts.tol, budget, pre),
        };
        used += outcome.unwrap_or(budget);
        let res = true_residual(a, b, &x, &mut r) / b_norm;
        if res <= opts.tol {
            return Ok((x, KrylovStats { iterations: used, relative_residual: res }));
        }
        if outcome.is_none() && method == KrylovMethod::BiCgStab {
            // give GMRES the full budget again from the current iterate
            if !res.is_finite() {
                x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
                true_residual(a, b, &x, &mut r);
            }
            method = KrylovMethod::Gmres;
            used = 0;
            continue;
        }
        if outcome.is_none() || used >= max_iter || !res.is_finite() {
            return Err(non_convergence(method, used, res));
        }
    }
    let res = true_residual(a, b, &x, &mut r) / b_norm;
    Err(non_convergence(method, used, res))
}

fn non_convergence(method: KrylovMethod, iterations: usize, residual: f64) -> Error {
    Error::NonConvergence {
        method: match method {
            KrylovMethod::Cg => "conjugate gradients",
            KrylovMethod::BiCgStab => "BiCGStab",
            KrylovMethod::Gmres => "GMRES",
        },
        iterations,
        residual,
    }
}

/// Returns the iteration count on convergence of the recursive residual.
fn cg(
    a: &SparseMatrix,
    b_norm: f64,
    x: &mut [f64],
    r: &mut [f64],
    tol: f64,
    max_iter: usize,
    pre: &BlockJacobi,
) -> Option<usize> {
    let n = x.len();
    let mut z = vec![0.0; n];
    pre.apply(r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(r, &z);
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(r) <= tol * b_norm {
            return Some(it);
        }
        pre.apply(r, &mut z);
        let rz_new = dot(r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    None
}

fn bicgstab(
    a: &SparseMatrix,
    b_norm: f64,
    x: &mut [f64],
    r: &mut [f64],
    tol: f64,
    max_iter: usize,
    pre: &BlockJacobi,
) -> Option<usize> {
    let n = x.len();
    let r_hat = r.to_vec();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, r);
        if rho_new == 0.0 || omega == 0.0 {
            return None;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut p_hat);
        a.matvec_into(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return None;
        }
        alpha = rho / denom;
        // r becomes s
        for i in 0..n {
            x[i] += alpha * p_hat[i];
            r[i] -= alpha * v[i];
        }
        if norm(r) <= tol * b_norm {
            return Some(it);
        }
        pre.apply(r, &mut s_hat);
        a.matvec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return None;
        }
        omega = dot(&t, r) / tt;
        for i in 0..n {
            x[i] += omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        if norm(r) <= tol * b_norm {
            return Some(it);
        }
    }
    None
}

/// Krylov basis size between GMRES restarts.
pub const GMRES_RESTART: usize = 60;

/// Restarted GMRES with right preconditioning; returns the number of inner
/// iterations on convergence of the least-squares residual.
fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    r: &mut [f64],
    tol: f64,
    max_iter: usize,
    pre: &BlockJacobi,
) -> Option<usize> {
    let n = x.len();
    let b_norm = norm(b);
    let m = GMRES_RESTART.min(n);
    let mut used = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    while used < max_iter {
        let beta = norm(r);
        if beta <= tol * b_norm {
            return Some(used);
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        // Hessenberg columns, already rotated
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut rot: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && used < max_iter {
            pre.apply(&basis[k], &mut z);
            a.matvec_into(&z, &mut w);
            let mut col = vec![0.0; k + 2];
            for (j, v) in basis.iter().enumerate() {
                let hj = dot(&w, v);
                col[j] = hj;
                for i in 0..n {
                    w[i] -= hj * v[i];
                }
            }
            col[k + 1] = norm(&w);
            for (j, &(c, s)) in rot.iter().enumerate() {
                let (p, q) = (col[j], col[j + 1]);
                col[j] = c * p + s * q;
                col[j + 1] = -s * p + c * q;
            }
            let d = col[k].hypot(col[k + 1]);
            if d == 0.0 {
                return None;
            }
            let (c, s) = (col[k] / d, col[k + 1] / d);
            let next = col[k + 1];
            col[k] = d;
            col[k + 1] = 0.0;
            rot.push((c, s));
            g[k + 1] = -s * g[k];
            g[k] *= c;
            h.push(col);
            used += 1;
            k += 1;
            if g[k].abs() <= tol * b_norm || next == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / next).collect());
        }
        // back substitution for the coefficients, then x += M^{-1} V y
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[j][i] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        w.iter_mut().for_each(|v| *v = 0.0);
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                w[i] += yj * basis[j][i];
            }
        }
        pre.apply(&w, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
        true_residual(a, b, x, r);
        if g[k].abs() <= tol * b_norm {
            return Some(used);
        }
    }
    None
}
