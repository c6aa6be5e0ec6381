//! Krylov methods and dense solvers for the Nystrom and coupled systems.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("operator is {rows}x{cols} but right-hand side has length {rhs}")]
    DimensionMismatch { rows: usize, cols: usize, rhs: usize },
    #[error("matrix is singular to working precision at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("Arnoldi breakdown at iteration {iteration}")]
    Breakdown { iteration: usize },
    #[error("no convergence after {iterations} iterations, relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Outcome of an iterative or direct solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual |b - Ax| / |b|, recomputed from the solution.
    pub residual: f64,
    pub wall: Duration,
}

impl SolveReport {
    pub fn direct(residual: f64, wall: Duration) -> Self {
        SolveReport { iterations: 0, residual, wall }
    }
}

/// Square linear operator applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (self * v).as_slice().to_vec()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn true_residual(op: &dyn LinearOperator, b: &[f64], x: &[f64], bnorm: f64) -> f64 {
    let ax = op.apply(x);
    let r: f64 = b
        .iter()
        .zip(&ax)
        .map(|(bi, ai)| (bi - ai) * (bi - ai))
        .sum::<f64>()
        .sqrt();
    if bnorm > 0.0 {
        r / bnorm
    } else {
        r
    }
}

/// Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations.
///
/// Converges when the relative residual |b - Ax| / |b| drops below `tol`.
/// The residual in the report is recomputed from the returned solution.
pub fn gmres(
    op: &dyn LinearOperator,
    b: &[f64],
    restart: usize,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let n = op.dim();
    if b.len() != n {
        return Err(SolverError::DimensionMismatch { rows: n, cols: n, rhs: b.len() });
    }
    let start = Instant::now();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveReport { iterations: 0, residual: 0.0, wall: start.elapsed() }));
    }
    let m = restart.max(1);
    let mut total_iters = 0;

    'outer: loop {
        let ax = op.apply(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta / bnorm <= tol {
            break;
        }
        for v in &mut r {
            *v /= beta;
        }
        let mut basis = vec![r];
        // Hessenberg columns after Givens reduction, plus rotation parameters.
        let mut h_cols: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            if total_iters >= max_iters {
                let residual = true_residual(op, b, &x, bnorm);
                return Err(SolverError::NoConvergence { iterations: total_iters, residual });
            }
            total_iters += 1;
            let mut w = op.apply(&basis[k]);
            let mut h = vec![0.0; k + 2];
            for (j, vj) in basis.iter().enumerate() {
                h[j] = dot(&w, vj);
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= h[j] * vi;
                }
            }
            let wnorm = norm(&w);
            h[k + 1] = wnorm;
            // Apply previous rotations to the new column.
            for j in 0..k {
                let tmp = cs[j] * h[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
                h[j] = tmp;
            }
            let denom = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
            if denom == 0.0 {
                return Err(SolverError::Breakdown { iteration: total_iters });
            }
            let (c, s) = (h[k] / denom, h[k + 1] / denom);
            cs.push(c);
            sn.push(s);
            h[k] = denom;
            h[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            h_cols.push(h);
            k_used = k + 1;

            let happy = wnorm == 0.0;
            if g[k + 1].abs() / bnorm <= tol || happy {
                break;
            }
            if !happy {
                for v in &mut w {
                    *v /= wnorm;
                }
                basis.push(w);
            }
        }

        // Back-substitute the triangularized least-squares system.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h_cols[j][i] * y[j];
            }
            y[i] = s / h_cols[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }

        if g[k_used].abs() / bnorm <= tol {
            break 'outer;
        }
        if total_iters >= max_iters {
            let residual = true_residual(op, b, &x, bnorm);
            return Err(SolverError::NoConvergence { iterations: total_iters, residual });
        }
    }

    let residual = true_residual(op, b, &x, bnorm);
    Ok((x, SolveReport { iterations: total_iters, residual, wall: start.elapsed() }))
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn new(a: &DMatrix<f64>) -> Result<Self, SolverError> {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut piv = k;
            let mut pmax = lu[(k, k)].abs();
            for i in (k + 1)..n {
                if lu[(i, k)].abs() > pmax {
                    pmax = lu[(i, k)].abs();
                    piv = i;
                }
            }
            if pmax < f64::MIN_POSITIVE.sqrt() {
                return Err(SolverError::Singular { pivot: k });
            }
            if piv != k {
                lu.swap_rows(piv, k);
                perm.swap(piv, k);
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let l = lu[(i, k)] / d;
                lu[(i, k)] = l;
                for j in (k + 1)..n {
                    lu[(i, j)] -= l * lu[(k, j)];
                }
            }
        }
        Ok(LuFactors { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

/// Direct dense solve via LU with partial pivoting.
pub fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>, SolverError> {
    if a.nrows() != b.len() || a.nrows() != a.ncols() {
        return Err(SolverError::DimensionMismatch {
            rows: a.nrows(),
            cols: a.ncols(),
            rhs: b.len(),
        });
    }
    Ok(LuFactors::new(a)?.solve(b))
}

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicate entries are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            per_row[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut per_row {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n_rows, n_cols, row_ptr, cols, vals }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(i) => vals[i],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c];
            }
            y[r] = s;
        }
        y
    }

    /// Restriction to a subset of indices (same set for rows and columns).
    pub fn restrict(&self, keep: &[usize]) -> CsrMatrix {
        let mut remap = vec![usize::MAX; self.n_cols];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_r, &old_r) in keep.iter().enumerate() {
            let (cols, vals) = self.row(old_r);
            for (c, v) in cols.iter().zip(vals) {
                if remap[*c] != usize::MAX {
                    triplets.push((new_r, remap[*c], *v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), keep.len(), &triplets)
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

/// Symmetric Gauss-Seidel preconditioner M = (D + L) D^-1 (D + U).
pub struct SymmetricGaussSeidel<'a> {
    matrix: &'a CsrMatrix,
    diag: Vec<f64>,
}

impl<'a> SymmetricGaussSeidel<'a> {
    pub fn new(matrix: &'a CsrMatrix) -> Self {
        let diag = (0..matrix.n_rows()).map(|i| matrix.get(i, i)).collect();
        SymmetricGaussSeidel { matrix, diag }
    }
}

impl Preconditioner for SymmetricGaussSeidel<'_> {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = self.matrix.n_rows();
        // Forward sweep: (D + L) y = r.
        let mut y = vec![0.0; n];
        for i in 0..n {
            let (cols, vals) = self.matrix.row(i);
            let mut s = r[i];
            for (c, v) in cols.iter().zip(vals) {
                if *c < i {
                    s -= v * y[*c];
                }
            }
            y[i] = s / self.diag[i];
        }
        // Scale and backward sweep: (D + U) z = D y.
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let (cols, vals) = self.matrix.row(i);
            let mut s = self.diag[i] * y[i];
            for (c, v) in cols.iter().zip(vals) {
                if *c > i {
                    s -= v * z[*c];
                }
            }
            z[i] = s / self.diag[i];
        }
        z
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite systems.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    pre: &dyn Preconditioner,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let n = a.n_rows();
    if b.len() != n {
        return Err(SolverError::DimensionMismatch { rows: n, cols: a.n_cols(), rhs: b.len() });
    }
    let start = Instant::now();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveReport { iterations: 0, residual: 0.0, wall: start.elapsed() }));
    }
    let mut r = b.to_vec();
    let mut z = pre.apply(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iters = 0;
    while iters < max_iters {
        if norm(&r) / bnorm <= tol {
            break;
        }
        iters += 1;
        let ap = a.matvec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) / bnorm <= tol {
            break;
        }
        z = pre.apply(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = true_residual(a, b, &x, bnorm);
    if residual > tol * 10.0 && iters >= max_iters {
        return Err(SolverError::NoConvergence { iterations: iters, residual });
    }
    Ok((x, SolveReport { iterations: iters, residual, wall: start.elapsed() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct DiagOp(Vec<f64>);

    impl LinearOperator for DiagOp {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64]) -> Vec<f64> {
            self.0.iter().zip(x).map(|(d, v)| d * v).collect()
        }
    }

    #[test]
    fn gmres_identity_converges_in_one_iteration() {
        let op = DiagOp(vec![1.0; 5]);
        let b = vec![3.0, -1.0, 2.0, 0.5, 4.0];
        let (x, rep) = gmres(&op, &b, 20, 1e-12, 100).unwrap();
        assert_eq!(rep.iterations, 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_diagonal_system() {
        let op = DiagOp(vec![1.0, 2.0, 4.0]);
        let b = vec![1.0, 2.0, 4.0];
        let (x, rep) = gmres(&op, &b, 20, 1e-12, 100).unwrap();
        for xi in &x {
            assert!((xi - 1.0).abs() < 1e-12);
        }
        assert!(rep.residual <= 1e-12);
    }

    #[test]
    fn gmres_reports_true_residual() {
        // Random-ish dense system; claimed residual must match a recomputation.
        let n = 30;
        let a = DMatrix::<f64>::from_fn(n, n, |i, j| {
            if i == j { 4.0 } else { ((i * 7 + j * 13) % 11) as f64 / 11.0 - 0.5 }
        });
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let (x, rep) = gmres(&a, &b, 20, 1e-11, 500).unwrap();
        let bnorm = norm(&b);
        let recomputed = true_residual(&a, &b, &x, bnorm);
        assert!(recomputed <= 1e-10);
        assert!((recomputed - rep.residual).abs() <= 0.1 * rep.residual.max(1e-16));
    }

    #[test]
    fn gmres_residual_monotone_within_cycle() {
        // The least-squares residual g[k+1] is non-increasing inside a cycle;
        // verify via the true residual of intermediate solves on a small SPD
        // system solved with a single long cycle.
        let n = 12;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0;
            if i > 0 {
                a[(i, i - 1)] = -1.0;
                a[(i - 1, i)] = -1.0;
            }
        }
        let b = vec![1.0; n];
        let mut last = f64::INFINITY;
        for iters in 1..=n {
            let res = match gmres(&a, &b, n, 1e-16, iters) {
                Ok((x, _)) => true_residual(&a, &b, &x, norm(&b)),
                Err(SolverError::NoConvergence { residual, .. }) => residual,
                Err(e) => panic!("{e}"),
            };
            assert!(res <= last + 1e-12, "residual grew: {res} > {last}");
            last = res;
        }
    }

    #[test]
    fn dense_solve_identity_and_2x2() {
        let a = DMatrix::<f64>::identity(3, 3);
        let x = dense_solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);

        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let x = dense_solve(&a, &[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dense_solve_flags_singular_with_pivot() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        match dense_solve(&a, &[1.0, 2.0]) {
            Err(SolverError::Singular { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn dense_solve_residual_small() {
        let n = 40;
        let a = DMatrix::<f64>::from_fn(n, n, |i, j| {
            if i == j { 5.0 } else { (((i + 1) * (j + 3)) % 17) as f64 / 17.0 - 0.5 }
        });
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = dense_solve(&a, &b).unwrap();
        assert!(true_residual(&a, &b, &x, norm(&b)) < 1e-10);
    }

    #[test]
    fn pcg_identity_single_iteration() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let (x, rep) = pcg(&a, &[1.0, -2.0, 0.5], &IdentityPreconditioner, 1e-12, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pcg_1d_laplacian() {
        let mut trip = Vec::new();
        for i in 0..4 {
            trip.push((i, i, 2.0));
            if i > 0 {
                trip.push((i, i - 1, -1.0));
                trip.push((i - 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(4, 4, &trip);
        let (x, _) = pcg(&a, &[1.0, 0.0, 0.0, 1.0], &IdentityPreconditioner, 1e-12, 100).unwrap();
        for xi in &x {
            assert!((xi - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn csr_roundtrip_and_matvec() {
        let a = CsrMatrix::from_triplets(
            2,
            3,
            &[(0, 2, 1.5), (0, 0, 1.0), (1, 1, -2.0), (0, 0, 0.5)],
        );
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 1.5);
        let y = a.matvec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![1.5 + 4.5, -4.0]);
    }
}
