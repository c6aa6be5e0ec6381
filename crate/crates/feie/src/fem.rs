//! Structured tensor-product Lagrange finite element spaces on rectangles:
//! assembly, Dirichlet solves via lifting, and point evaluation of values and
//! gradients.
//!
//! The direct solver exploits the tensor-product structure of the uniform
//! grid: the constrained stiffness is Kx (x) My + Mx (x) Ky, which is
//! diagonalized by the per-axis generalized eigenvectors. The factorization
//! is computed once per mesh and reused across all solves.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{gauss_legendre, Point, Vec2};
use crate::potentials::LagrangeBasis;
use crate::solvers::{pcg, CsrMatrix, SolveReport, SolverError, SymmetricGaussSeidel};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("element degree must be between 1 and 4, got {0}")]
    UnsupportedDegree(usize),
    #[error("need at least 2 elements per axis, got {nx}x{ny}")]
    MeshTooCoarse { nx: usize, ny: usize },
    #[error("elements must be square: hx = {hx}, hy = {hy}")]
    NonSquareElements { hx: f64, hy: f64 },
    #[error("point ({x}, {y}) lies outside the mesh rectangle")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("coefficient vector has length {got}, space has {expected} degrees of freedom")]
    CoefficientLength { expected: usize, got: usize },
    #[error("iterative solve failed: {0}")]
    SolveFailed(#[from] SolverError),
}

/// Uniform rectangular mesh of square elements.
#[derive(Debug, Clone, Copy)]
pub struct FeMesh {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl FeMesh {
    pub fn new(
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self, FemError> {
        if nx < 2 || ny < 2 {
            return Err(FemError::MeshTooCoarse { nx, ny });
        }
        let m = FeMesh { x0, x1, y0, y1, nx, ny };
        let (hx, hy) = (m.hx(), m.hy());
        if !(hx > 0.0) || !(hy > 0.0) || (hx - hy).abs() > 1e-10 * hx.abs() {
            return Err(FemError::NonSquareElements { hx, hy });
        }
        Ok(m)
    }

    /// Square mesh over `[x0, x1] x [y0, y1]` with element size near `h`.
    pub fn with_target_h(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Result<Self, FemError> {
        let nx = ((x1 - x0) / h).round().max(2.0) as usize;
        let ny = ((y1 - y0) / h).round().max(2.0) as usize;
        Self::new(x0, x1, y0, y1, nx, ny)
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / self.ny as f64
    }

    /// Element size; elements are square.
    pub fn h(&self) -> f64 {
        self.hx()
    }
}

/// Gauss-Lobatto points on [0, 1] for degrees 1 through 4.
fn lobatto_reference_nodes(p: usize) -> Result<Vec<f64>, FemError> {
    let on_unit = |xs: &[f64]| xs.iter().map(|x| 0.5 * (1.0 + x)).collect();
    match p {
        1 => Ok(on_unit(&[-1.0, 1.0])),
        2 => Ok(on_unit(&[-1.0, 0.0, 1.0])),
        3 => {
            let a = 1.0 / 5.0_f64.sqrt();
            Ok(on_unit(&[-1.0, -a, a, 1.0]))
        }
        4 => {
            let a = (3.0 / 7.0_f64).sqrt();
            Ok(on_unit(&[-1.0, -a, 0.0, a, 1.0]))
        }
        _ => Err(FemError::UnsupportedDegree(p)),
    }
}

struct SpaceInner {
    mesh: FeMesh,
    p: usize,
    basis: LagrangeBasis,
    nodes_x: Vec<f64>,
    nodes_y: Vec<f64>,
    boundary: Vec<usize>,
    interior: Vec<usize>,
}

/// Continuous tensor-product Lagrange space of degree p on a [`FeMesh`],
/// with Gauss-Lobatto nodal points shared across element faces.
///
/// Degrees of freedom are numbered `iy * n_nodes_x + ix`.
#[derive(Clone)]
pub struct FeSpace(Arc<SpaceInner>);

impl FeSpace {
    pub fn new(mesh: FeMesh, p: usize) -> Result<Self, FemError> {
        let ref_nodes = lobatto_reference_nodes(p)?;
        let basis = LagrangeBasis::new(ref_nodes.clone());
        let global_axis = |n_el: usize, a: f64, h: f64| {
            let mut v = Vec::with_capacity(n_el * p + 1);
            for e in 0..n_el {
                let take = if e + 1 == n_el { p + 1 } else { p };
                for &xi in ref_nodes.iter().take(take) {
                    v.push(a + (e as f64 + xi) * h);
                }
            }
            v
        };
        let nodes_x = global_axis(mesh.nx, mesh.x0, mesh.hx());
        let nodes_y = global_axis(mesh.ny, mesh.y0, mesh.hy());
        let (n_x, n_y) = (nodes_x.len(), nodes_y.len());
        let mut boundary = Vec::new();
        let mut interior = Vec::new();
        for iy in 0..n_y {
            for ix in 0..n_x {
                let dof = iy * n_x + ix;
                if ix == 0 || ix == n_x - 1 || iy == 0 || iy == n_y - 1 {
                    boundary.push(dof);
                } else {
                    interior.push(dof);
                }
            }
        }
        Ok(FeSpace(Arc::new(SpaceInner {
            mesh,
            p,
            basis,
            nodes_x,
            nodes_y,
            boundary,
            interior,
        })))
    }

    pub fn mesh(&self) -> &FeMesh {
        &self.0.mesh
    }

    pub fn degree(&self) -> usize {
        self.0.p
    }

    pub fn n_nodes_x(&self) -> usize {
        self.0.nodes_x.len()
    }

    pub fn n_nodes_y(&self) -> usize {
        self.0.nodes_y.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes_x() * self.n_nodes_y()
    }

    pub fn node_position(&self, dof: usize) -> Point {
        let n_x = self.n_nodes_x();
        Point::new(self.0.nodes_x[dof % n_x], self.0.nodes_y[dof / n_x])
    }

    /// Degrees of freedom on the rectangle boundary, in ascending order.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.0.boundary
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.0.interior
    }

    pub fn boundary_positions(&self) -> Vec<Point> {
        self.0.boundary.iter().map(|&d| self.node_position(d)).collect()
    }

    /// 1D stiffness and mass matrices along one axis (full, boundary rows
    /// included); symmetric with bandwidth p.
    fn one_d_matrices(&self, n_el: usize, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = self.0.p;
        let (gx, gw) = gauss_legendre(p + 2);
        let nb = p + 1;
        let mut k_ref = DMatrix::<f64>::zeros(nb, nb);
        let mut m_ref = DMatrix::<f64>::zeros(nb, nb);
        for (g, &x) in gx.iter().enumerate() {
            let v = self.0.basis.eval_all(x);
            let dv = self.0.basis.eval_all_deriv(x);
            for a in 0..nb {
                for b in 0..nb {
                    k_ref[(a, b)] += gw[g] * dv[a] * dv[b];
                    m_ref[(a, b)] += gw[g] * v[a] * v[b];
                }
            }
        }
        let n = n_el * p + 1;
        let mut k = DMatrix::<f64>::zeros(n, n);
        let mut m = DMatrix::<f64>::zeros(n, n);
        for e in 0..n_el {
            let base = e * p;
            for a in 0..nb {
                for b in 0..nb {
                    k[(base + a, base + b)] += k_ref[(a, b)] / h;
                    m[(base + a, base + b)] += m_ref[(a, b)] * h;
                }
            }
        }
        (k, m)
    }

    /// Sparse symmetric stiffness matrix for grad-grad on the full space.
    pub fn assemble_stiffness(&self) -> CsrMatrix {
        let mesh = &self.0.mesh;
        let (kx, mx) = self.one_d_matrices(mesh.nx, mesh.hx());
        let (ky, my) = self.one_d_matrices(mesh.ny, mesh.hy());
        let p = self.0.p;
        let n_x = self.n_nodes_x();
        let mut triplets = Vec::new();
        for iy in 0..self.n_nodes_y() {
            let jy_lo = iy.saturating_sub(p);
            let jy_hi = (iy + p).min(self.n_nodes_y() - 1);
            for ix in 0..n_x {
                let row = iy * n_x + ix;
                let jx_lo = ix.saturating_sub(p);
                let jx_hi = (ix + p).min(n_x - 1);
                for jy in jy_lo..=jy_hi {
                    for jx in jx_lo..=jx_hi {
                        let v = kx[(ix, jx)] * my[(iy, jy)] + mx[(ix, jx)] * ky[(iy, jy)];
                        if v != 0.0 {
                            triplets.push((row, jy * n_x + jx, v));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.n_dofs(), self.n_dofs(), &triplets)
    }

    /// Load vector for the weak form: per-element Gauss quadrature of f
    /// against the basis with (p+2)^2 points per element.
    pub fn assemble_load(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mesh = &self.0.mesh;
        let p = self.0.p;
        let (gx, gw) = gauss_legendre(p + 2);
        let basis_at: Vec<Vec<f64>> = gx.iter().map(|&x| self.0.basis.eval_all(x)).collect();
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let n_x = self.n_nodes_x();
        let mut load = vec![0.0; self.n_dofs()];
        for ey in 0..mesh.ny {
            for ex in 0..mesh.nx {
                for (gyi, &gy) in gx.iter().enumerate() {
                    let y = mesh.y0 + (ey as f64 + gy) * hy;
                    for (gxi, &gxv) in gx.iter().enumerate() {
                        let x = mesh.x0 + (ex as f64 + gxv) * hx;
                        let scale = f(x, y) * gw[gxi] * gw[gyi] * hx * hy;
                        if scale == 0.0 {
                            continue;
                        }
                        for b in 0..=p {
                            let wy = basis_at[gyi][b] * scale;
                            let row_base = (ey * p + b) * n_x + ex * p;
                            for a in 0..=p {
                                load[row_base + a] += basis_at[gxi][a] * wy;
                            }
                        }
                    }
                }
            }
        }
        load
    }

    /// Discrete lifting: nodal interpolation of g at boundary nodes, zero at
    /// interior nodes.
    pub fn lift(&self, g: impl Fn(Point) -> f64) -> FeFunction {
        let mut coeffs = vec![0.0; self.n_dofs()];
        for &dof in &self.0.boundary {
            coeffs[dof] = g(self.node_position(dof));
        }
        FeFunction { space: self.clone(), coeffs }
    }

    /// Element owning coordinate `x` along one axis; points exactly on an
    /// interior edge belong to the element on the lower side.
    fn locate(a: f64, h: f64, n_el: usize, x: f64) -> usize {
        let s = (x - a) / h;
        let mut e = s.floor();
        if s == e && e > 0.0 {
            e -= 1.0;
        }
        (e.max(0.0) as usize).min(n_el - 1)
    }
}

/// Coefficient vector over an [`FeSpace`].
#[derive(Clone)]
pub struct FeFunction {
    space: FeSpace,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: FeSpace, coeffs: Vec<f64>) -> Result<Self, FemError> {
        if coeffs.len() != space.n_dofs() {
            return Err(FemError::CoefficientLength {
                expected: space.n_dofs(),
                got: coeffs.len(),
            });
        }
        Ok(FeFunction { space, coeffs })
    }

    /// Nodal interpolant of a function.
    pub fn interpolate(space: &FeSpace, f: impl Fn(Point) -> f64) -> Self {
        let coeffs = (0..space.n_dofs()).map(|d| f(space.node_position(d))).collect();
        FeFunction { space: space.clone(), coeffs }
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn check_inside(&self, x: Point) -> Result<(), FemError> {
        let m = self.space.mesh();
        let tol = 1e-12 * ((m.x1 - m.x0).abs() + (m.y1 - m.y0).abs());
        if x.x < m.x0 - tol || x.x > m.x1 + tol || x.y < m.y0 - tol || x.y > m.y1 + tol {
            return Err(FemError::PointOutsideDomain { x: x.x, y: x.y });
        }
        Ok(())
    }

    fn local_frame(&self, x: Point) -> (usize, usize, f64, f64) {
        let m = self.space.mesh();
        let (hx, hy) = (m.hx(), m.hy());
        let ex = FeSpace::locate(m.x0, hx, m.nx, x.x);
        let ey = FeSpace::locate(m.y0, hy, m.ny, x.y);
        let xi = (x.x - (m.x0 + ex as f64 * hx)) / hx;
        let eta = (x.y - (m.y0 + ey as f64 * hy)) / hy;
        (ex, ey, xi, eta)
    }

    pub fn eval(&self, x: Point) -> Result<f64, FemError> {
        self.check_inside(x)?;
        let inner = &self.space.0;
        let p = inner.p;
        let (ex, ey, xi, eta) = self.local_frame(x);
        let vx = inner.basis.eval_all(xi);
        let vy = inner.basis.eval_all(eta);
        let n_x = inner.nodes_x.len();
        let mut acc = 0.0;
        for b in 0..=p {
            let row = (ey * p + b) * n_x + ex * p;
            let mut sx = 0.0;
            for a in 0..=p {
                sx += vx[a] * self.coeffs[row + a];
            }
            acc += vy[b] * sx;
        }
        Ok(acc)
    }

    pub fn eval_many(&self, pts: &[Point]) -> Result<Vec<f64>, FemError> {
        pts.iter().map(|&x| self.eval(x)).collect()
    }

    pub fn grad(&self, x: Point) -> Result<Vec2, FemError> {
        self.check_inside(x)?;
        let inner = &self.space.0;
        let m = &inner.mesh;
        let p = inner.p;
        let (ex, ey, xi, eta) = self.local_frame(x);
        let vx = inner.basis.eval_all(xi);
        let vy = inner.basis.eval_all(eta);
        let dx = inner.basis.eval_all_deriv(xi);
        let dy = inner.basis.eval_all_deriv(eta);
        let n_x = inner.nodes_x.len();
        let (mut gx, mut gy) = (0.0, 0.0);
        for b in 0..=p {
            let row = (ey * p + b) * n_x + ex * p;
            let (mut sx, mut sdx) = (0.0, 0.0);
            for a in 0..=p {
                sx += vx[a] * self.coeffs[row + a];
                sdx += dx[a] * self.coeffs[row + a];
            }
            gx += vy[b] * sdx;
            gy += dy[b] * sx;
        }
        Ok(Vec2::new(gx / m.hx(), gy / m.hy()))
    }

    pub fn grad_many(&self, pts: &[Point]) -> Result<Vec<Vec2>, FemError> {
        pts.iter().map(|&x| self.grad(x)).collect()
    }
}

/// How the constrained stiffness is inverted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeSolverMode {
    /// Tensor-product fast diagonalization, factored once and reused.
    Direct,
    /// Preconditioned CG with a symmetric Gauss-Seidel preconditioner.
    Iterative { tol: f64, max_iters: usize },
}

impl Default for FeSolverMode {
    fn default() -> Self {
        FeSolverMode::Direct
    }
}

struct FastDiag {
    vx: DMatrix<f64>,
    vy: DMatrix<f64>,
    lam_x: DVector<f64>,
    lam_y: DVector<f64>,
}

/// Dirichlet solver for -laplace(u) = f with boundary values imposed through
/// a discrete lifting. The factorization (direct) or assembled interior
/// matrix (iterative) is built once and reused across solves.
pub struct DirichletSolver {
    space: FeSpace,
    mode: FeSolverMode,
    kx: DMatrix<f64>,
    mx: DMatrix<f64>,
    ky: DMatrix<f64>,
    my: DMatrix<f64>,
    fast: Option<FastDiag>,
    interior_csr: Option<CsrMatrix>,
}

impl DirichletSolver {
    pub fn new(space: &FeSpace, mode: FeSolverMode) -> Result<Self, FemError> {
        let mesh = space.mesh();
        let (kx, mx) = space.one_d_matrices(mesh.nx, mesh.hx());
        let (ky, my) = space.one_d_matrices(mesh.ny, mesh.hy());
        let mut solver = DirichletSolver {
            space: space.clone(),
            mode,
            kx,
            mx,
            ky,
            my,
            fast: None,
            interior_csr: None,
        };
        match mode {
            FeSolverMode::Direct => {
                let (vx, lam_x) = generalized_eigen(&solver.kx, &solver.mx);
                let (vy, lam_y) = generalized_eigen(&solver.ky, &solver.my);
                solver.fast = Some(FastDiag { vx, vy, lam_x, lam_y });
            }
            FeSolverMode::Iterative { .. } => {
                let full = space.assemble_stiffness();
                solver.interior_csr = Some(full.restrict(space.interior_nodes()));
            }
        }
        Ok(solver)
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    /// Apply the full (unconstrained) stiffness through the banded tensor
    /// structure.
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let n_x = self.space.n_nodes_x();
        let n_y = self.space.n_nodes_y();
        let p = self.space.degree();
        let u = DMatrix::from_column_slice(n_x, n_y, u);
        let t1 = banded_mul_left(&self.kx, &u, p);
        let t1 = banded_mul_right(&t1, &self.my, p);
        let t2 = banded_mul_left(&self.mx, &u, p);
        let t2 = banded_mul_right(&t2, &self.ky, p);
        (t1 + t2).as_slice().to_vec()
    }

    /// Solve with a volume load function and Dirichlet boundary values.
    pub fn solve_fn(
        &self,
        f: impl Fn(f64, f64) -> f64,
        g: impl Fn(Point) -> f64,
    ) -> Result<(FeFunction, SolveReport), FemError> {
        let load = self.space.assemble_load(f);
        let bvals: Vec<f64> = self
            .space
            .boundary_nodes()
            .iter()
            .map(|&d| g(self.space.node_position(d)))
            .collect();
        self.solve_with(&load, &bvals)
    }

    /// Solve with a precomputed full-length load vector and boundary values
    /// ordered like [`FeSpace::boundary_nodes`].
    pub fn solve_with(
        &self,
        load: &[f64],
        boundary_values: &[f64],
    ) -> Result<(FeFunction, SolveReport), FemError> {
        assert_eq!(load.len(), self.space.n_dofs());
        assert_eq!(boundary_values.len(), self.space.boundary_nodes().len());
        let start = Instant::now();
        let n = self.space.n_dofs();
        let mut lifted = vec![0.0; n];
        for (&dof, &v) in self.space.boundary_nodes().iter().zip(boundary_values) {
            lifted[dof] = v;
        }
        let k_lift = self.apply_stiffness(&lifted);
        let interior = self.space.interior_nodes();
        let rhs: Vec<f64> = interior.iter().map(|&d| load[d] - k_lift[d]).collect();

        let (u_int, iterations) = match self.mode {
            FeSolverMode::Direct => (self.solve_interior_direct(&rhs), 0),
            FeSolverMode::Iterative { tol, max_iters } => {
                let a = self.interior_csr.as_ref().expect("assembled in new()");
                let pre = SymmetricGaussSeidel::new(a);
                let (x, rep) = pcg(a, &rhs, &pre, tol, max_iters)?;
                (x, rep.iterations)
            }
        };

        let mut coeffs = lifted;
        for (&dof, v) in interior.iter().zip(&u_int) {
            coeffs[dof] = *v;
        }
        // Interior-row Galerkin residual, recomputed from the coefficients.
        let k_u = self.apply_stiffness(&coeffs);
        let mut r2 = 0.0;
        let mut b2 = 0.0;
        for (&d, &b) in interior.iter().zip(&rhs) {
            let r = k_u[d] - load[d];
            r2 += r * r;
            b2 += b * b;
        }
        let residual = if b2 > 0.0 { (r2 / b2).sqrt() } else { r2.sqrt() };
        let report = SolveReport { iterations, residual, wall: start.elapsed() };
        Ok((FeFunction { space: self.space.clone(), coeffs }, report))
    }

    fn solve_interior_direct(&self, rhs: &[f64]) -> Vec<f64> {
        let fd = self.fast.as_ref().expect("factored in new()");
        let n_xi = self.space.n_nodes_x() - 2;
        let n_yi = self.space.n_nodes_y() - 2;
        let b = DMatrix::from_column_slice(n_xi, n_yi, rhs);
        let mut w = fd.vx.transpose() * b * &fd.vy;
        for j in 0..n_yi {
            for i in 0..n_xi {
                w[(i, j)] /= fd.lam_x[i] + fd.lam_y[j];
            }
        }
        let u = &fd.vx * w * fd.vy.transpose();
        u.as_slice().to_vec()
    }
}

/// Convenience wrapper: factor once, solve once.
pub fn solve_dirichlet(
    space: &FeSpace,
    f: impl Fn(f64, f64) -> f64,
    g: impl Fn(Point) -> f64,
) -> Result<(FeFunction, SolveReport), FemError> {
    DirichletSolver::new(space, FeSolverMode::Direct)?.solve_fn(f, g)
}

/// Generalized symmetric-definite eigendecomposition of the interior block:
/// K v = lambda M v with V^T M V = I.
fn generalized_eigen(k_full: &DMatrix<f64>, m_full: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = k_full.nrows() - 2;
    let k = k_full.view((1, 1), (n, n)).into_owned();
    let m = m_full.view((1, 1), (n, n)).into_owned();
    let chol = m.cholesky().expect("1D mass matrix is SPD");
    let l = chol.l();
    // C = L^-1 K L^-T, kept symmetric.
    let a1 = l.solve_lower_triangular(&k).expect("triangular solve");
    let a2 = l
        .solve_lower_triangular(&a1.transpose())
        .expect("triangular solve");
    let c = (&a2 + a2.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let v = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .expect("triangular solve");
    for (i, lam) in eig.eigenvalues.iter().enumerate() {
        assert!(*lam > 0.0, "interior stiffness eigenvalue {i} not positive: {lam}");
    }
    (v, eig.eigenvalues)
}

/// y = A u with A symmetric of bandwidth `band`.
fn banded_mul_left(a: &DMatrix<f64>, u: &DMatrix<f64>, band: usize) -> DMatrix<f64> {
    let (n, m) = (u.nrows(), u.ncols());
    let mut y = DMatrix::<f64>::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            let lo = i.saturating_sub(band);
            let hi = (i + band).min(n - 1);
            let mut s = 0.0;
            for k in lo..=hi {
                s += a[(i, k)] * u[(k, j)];
            }
            y[(i, j)] = s;
        }
    }
    y
}

/// y = u A with A symmetric of bandwidth `band`.
fn banded_mul_right(u: &DMatrix<f64>, a: &DMatrix<f64>, band: usize) -> DMatrix<f64> {
    let (n, m) = (u.nrows(), u.ncols());
    let mut y = DMatrix::<f64>::zeros(n, m);
    for j in 0..m {
        let lo = j.saturating_sub(band);
        let hi = (j + band).min(m - 1);
        for k in lo..=hi {
            let akj = a[(k, j)];
            if akj == 0.0 {
                continue;
            }
            for i in 0..n {
                y[(i, j)] += u[(i, k)] * akj;
            }
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(nx: usize, p: usize) -> FeSpace {
        FeSpace::new(FeMesh::new(0.0, 1.0, 0.0, 1.0, nx, nx).unwrap(), p).unwrap()
    }

    #[test]
    fn mesh_validation() {
        assert!(FeMesh::new(0.0, 1.0, 0.0, 1.0, 1, 4).is_err());
        assert!(FeMesh::new(0.0, 1.0, 0.0, 2.0, 4, 4).is_err());
        assert!(FeMesh::new(0.0, 1.0, 0.0, 2.0, 4, 8).is_ok());
        assert!(FeSpace::new(FeMesh::new(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap(), 5).is_err());
    }

    #[test]
    fn stiffness_interior_row_sums_vanish() {
        // Constants are in the nullspace of the unconstrained operator.
        for p in 1..=4 {
            let space = unit_square(3, p);
            let k = space.assemble_stiffness();
            for &d in space.interior_nodes() {
                let (_, vals) = k.row(d);
                let s: f64 = vals.iter().sum();
                assert!(s.abs() < 1e-12, "p={p} row {d}: {s}");
            }
        }
    }

    #[test]
    fn q1_stiffness_matches_hand_assembled_stencil() {
        // Classical 4-node bilinear element matrix on a square (any size):
        // diag 2/3, edge neighbors -1/6, diagonal neighbor -1/3. Assemble the
        // 2x2-element mesh by hand and compare all 81 entries.
        let space = unit_square(2, 1);
        let k = space.assemble_stiffness();
        let ke = [
            [2.0 / 3.0, -1.0 / 6.0, -1.0 / 3.0, -1.0 / 6.0],
            [-1.0 / 6.0, 2.0 / 3.0, -1.0 / 6.0, -1.0 / 3.0],
            [-1.0 / 3.0, -1.0 / 6.0, 2.0 / 3.0, -1.0 / 6.0],
            [-1.0 / 6.0, -1.0 / 3.0, -1.0 / 6.0, 2.0 / 3.0],
        ];
        let mut expected = [[0.0; 9]; 9];
        for ey in 0..2 {
            for ex in 0..2 {
                // Local corner order: (0,0), (1,0), (1,1), (0,1).
                let g = [
                    ey * 3 + ex,
                    ey * 3 + ex + 1,
                    (ey + 1) * 3 + ex + 1,
                    (ey + 1) * 3 + ex,
                ];
                for a in 0..4 {
                    for b in 0..4 {
                        expected[g[a]][g[b]] += ke[a][b];
                    }
                }
            }
        }
        for i in 0..9 {
            for j in 0..9 {
                assert!(
                    (k.get(i, j) - expected[i][j]).abs() < 1e-13,
                    "({i},{j}): {} vs {}",
                    k.get(i, j),
                    expected[i][j]
                );
            }
        }
    }

    #[test]
    fn load_of_unit_function_sums_to_area() {
        for p in 1..=4 {
            let space =
                FeSpace::new(FeMesh::new(-0.5, 1.5, 0.0, 2.0, 5, 5).unwrap(), p).unwrap();
            let load = space.assemble_load(|_, _| 1.0);
            let total: f64 = load.iter().sum();
            assert!((total - 4.0).abs() < 1e-12, "p={p}: {total}");
        }
    }

    #[test]
    fn lift_examples() {
        let space = unit_square(3, 2);
        let zero = space.lift(|_| 0.0);
        assert!(zero.coeffs().iter().all(|&c| c == 0.0));
        let one = space.lift(|_| 1.0);
        for &d in space.boundary_nodes() {
            assert_eq!(one.coeffs()[d], 1.0);
        }
        for &d in space.interior_nodes() {
            assert_eq!(one.coeffs()[d], 0.0);
        }
        let linear = space.lift(|p| p.x + p.y);
        for &d in space.boundary_nodes() {
            let x = space.node_position(d);
            assert!((linear.coeffs()[d] - (x.x + x.y)).abs() < 1e-15);
        }
    }

    #[test]
    fn harmonic_polynomial_reproduced_exactly() {
        // f = 0 with g = x + y: in every Q_p space the solution matches the
        // nodal values of x + y.
        for p in 1..=4 {
            let space = unit_square(4, p);
            let (u, rep) = solve_dirichlet(&space, |_, _| 0.0, |q| q.x + q.y).unwrap();
            for dof in 0..space.n_dofs() {
                let x = space.node_position(dof);
                assert!(
                    (u.coeffs()[dof] - (x.x + x.y)).abs() < 1e-10,
                    "p={p} dof {dof}"
                );
            }
            assert!(rep.residual < 1e-10);
        }
    }

    #[test]
    fn quadratic_solution_for_constant_load() {
        // -Delta(x - x^2) = 2; x(1-x) is in Q_p for p >= 2 and its trace
        // matches the boundary data.
        for p in 2..=4 {
            let space = unit_square(4, p);
            let (u, _) = solve_dirichlet(&space, |_, _| 2.0, |q| q.x * (1.0 - q.x)).unwrap();
            for dof in 0..space.n_dofs() {
                let x = space.node_position(dof);
                assert!((u.coeffs()[dof] - x.x * (1.0 - x.x)).abs() < 1e-10, "p={p}");
            }
            let v = u.eval(Point::new(0.5, 0.7)).unwrap();
            assert!((v - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn patch_test_all_degrees() {
        // u = x^p + y^p with the matching load is reproduced to solver
        // tolerance in Q_p.
        for p in 1..=4 {
            let space = unit_square(3, p);
            let pf = p as f64;
            let exact = move |x: f64, y: f64| x.powi(p as i32) + y.powi(p as i32);
            let f = move |x: f64, y: f64| {
                if p < 2 {
                    0.0
                } else {
                    -pf * (pf - 1.0) * (x.powi(p as i32 - 2) + y.powi(p as i32 - 2))
                }
            };
            let (u, _) = solve_dirichlet(&space, f, |q| exact(q.x, q.y)).unwrap();
            for dof in 0..space.n_dofs() {
                let x = space.node_position(dof);
                assert!(
                    (u.coeffs()[dof] - exact(x.x, x.y)).abs() < 1e-10,
                    "p={p} at {x:?}"
                );
            }
        }
    }

    #[test]
    fn eval_and_grad_of_interpolant() {
        let space = unit_square(5, 2);
        let u = FeFunction::interpolate(&space, |p| p.x + p.y);
        assert!((u.eval(Point::new(0.3, 0.4)).unwrap() - 0.7).abs() < 1e-12);
        let g = u.grad(Point::new(0.37, 0.81)).unwrap();
        assert!((g.x - 1.0).abs() < 1e-12 && (g.y - 1.0).abs() < 1e-12);
        // Continuity at a corner shared by four elements.
        let v = u.eval(Point::new(0.4, 0.6)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(u.eval(Point::new(1.2, 0.0)).is_err());
    }

    #[test]
    fn gradient_of_constant_load_solution() {
        let space = unit_square(4, 3);
        let (u, _) = solve_dirichlet(&space, |_, _| 2.0, |q| q.x * (1.0 - q.x)).unwrap();
        for y in [0.21, 0.55, 0.83] {
            let g = u.grad(Point::new(0.5, y)).unwrap();
            assert!(g.x.abs() < 1e-10 && g.y.abs() < 1e-10, "{g:?}");
        }
    }

    #[test]
    fn p1_gradient_cellwise_structure() {
        // Bilinear elements: within one element each partial derivative is
        // constant along its own axis (du/dx = b + d y), which is what makes
        // coarse normal-derivative traces sensitive to element placement.
        let space = unit_square(4, 1);
        let (u, _) = solve_dirichlet(&space, |x, y| (x * y).sin(), |_| 0.0).unwrap();
        let gx1 = u.grad(Point::new(0.30, 0.35)).unwrap().x;
        let gx2 = u.grad(Point::new(0.45, 0.35)).unwrap().x;
        assert!((gx1 - gx2).abs() < 1e-13);
        let gy1 = u.grad(Point::new(0.35, 0.30)).unwrap().y;
        let gy2 = u.grad(Point::new(0.35, 0.45)).unwrap().y;
        assert!((gy1 - gy2).abs() < 1e-13);
    }

    #[test]
    fn edge_points_use_lower_left_element() {
        // A kinked interpolant distinguishes the two sides of the edge at
        // x = 0.5 on a 4-element axis.
        let space = unit_square(4, 1);
        let u = FeFunction::interpolate(&space, |p| (p.x - 0.5).abs());
        let g = u.grad(Point::new(0.5, 0.3)).unwrap();
        assert!((g.x + 1.0).abs() < 1e-12, "expected left-side slope, got {g:?}");
    }

    #[test]
    fn manufactured_solution_converges_at_order_three() {
        use std::f64::consts::PI;
        // u = sin(pi x) sin(pi y), f = 2 pi^2 u, p = 2: L2 EOC >= 3.
        let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let f = |x: f64, y: f64| 2.0 * PI * PI * exact(x, y);
        let l2_err = |nx: usize| -> f64 {
            let space = unit_square(nx, 2);
            let (u, _) = solve_dirichlet(&space, f, |_| 0.0).unwrap();
            let (gx, gw) = gauss_legendre(4);
            let h = space.mesh().h();
            let mut acc = 0.0;
            for ey in 0..nx {
                for ex in 0..nx {
                    for (i, &xi) in gx.iter().enumerate() {
                        for (j, &eta) in gx.iter().enumerate() {
                            let x = (ex as f64 + xi) * h;
                            let y = (ey as f64 + eta) * h;
                            let d = u.eval(Point::new(x, y)).unwrap() - exact(x, y);
                            acc += gw[i] * gw[j] * h * h * d * d;
                        }
                    }
                }
            }
            acc.sqrt()
        };
        let e1 = l2_err(4);
        let e2 = l2_err(8);
        let e3 = l2_err(16);
        let eoc1 = (e1 / e2).log2();
        let eoc2 = (e2 / e3).log2();
        assert!(eoc1 >= 2.9 && eoc2 >= 2.9, "EOC {eoc1}, {eoc2}");
    }

    #[test]
    fn discrete_maximum_principle_proxy() {
        // Harmonic solves stay within ~max boundary value on a dense sample.
        for p in [1, 2, 3] {
            let space = unit_square(8, p);
            let g = |q: Point| (3.0 * q.x).sin() + (2.0 * q.y).cos();
            let (u, _) = solve_dirichlet(&space, |_, _| 0.0, g).unwrap();
            let gmax = space
                .boundary_positions()
                .iter()
                .map(|&q| g(q).abs())
                .fold(0.0, f64::max);
            let mut umax = 0.0_f64;
            for i in 0..50 {
                for j in 0..50 {
                    let q = Point::new((i as f64 + 0.5) / 50.0, (j as f64 + 0.5) / 50.0);
                    umax = umax.max(u.eval(q).unwrap().abs());
                }
            }
            assert!(umax <= 1.05 * gmax, "p={p}: {umax} vs {gmax}");
        }
    }

    #[test]
    fn constrained_stiffness_is_spd() {
        let space = unit_square(4, 2);
        let k = space.assemble_stiffness().restrict(space.interior_nodes());
        let n = k.n_rows();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let (cols, vals) = k.row(i);
            for (c, v) in cols.iter().zip(vals) {
                dense[(i, *c)] = *v;
            }
        }
        assert!((dense.clone() - dense.transpose()).norm() < 1e-13);
        assert!(dense.cholesky().is_some());
    }

    #[test]
    fn tensor_apply_matches_assembled_matrix() {
        let space = unit_square(3, 3);
        let solver = DirichletSolver::new(&space, FeSolverMode::Direct).unwrap();
        let k = space.assemble_stiffness();
        let u: Vec<f64> = (0..space.n_dofs()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let a = solver.apply_stiffness(&u);
        let b = k.matvec(&u);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-11, "{x} vs {y}");
        }
    }

    #[test]
    fn galerkin_residual_small_after_solve() {
        let space = unit_square(6, 3);
        let (_, rep) =
            solve_dirichlet(&space, |x, y| (x + 2.0 * y).cos(), |q| q.x * q.y).unwrap();
        assert!(rep.residual < 1e-10, "residual {}", rep.residual);
    }

    #[test]
    fn iterative_mode_matches_direct() {
        let space = unit_square(8, 2);
        let f = |x: f64, y: f64| (2.0 * x - y).sin();
        let g = |q: Point| q.x - q.y * q.y;
        let (ud, _) = DirichletSolver::new(&space, FeSolverMode::Direct)
            .unwrap()
            .solve_fn(f, g)
            .unwrap();
        let (ui, rep) = DirichletSolver::new(
            &space,
            FeSolverMode::Iterative { tol: 1e-12, max_iters: 2000 },
        )
        .unwrap()
        .solve_fn(f, g)
        .unwrap();
        assert!(rep.iterations > 0);
        let diff: f64 = ud
            .coeffs()
            .iter()
            .zip(ui.coeffs())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-9, "direct vs iterative differ by {diff}");
    }

    #[test]
    fn sgs_preconditioner_beats_plain_cg() {
        let space = unit_square(16, 1);
        let a = space.assemble_stiffness().restrict(space.interior_nodes());
        let b: Vec<f64> = (0..a.n_rows()).map(|i| ((i * 7) % 13) as f64 / 13.0).collect();
        let pre = SymmetricGaussSeidel::new(&a);
        let (_, rep_sgs) = pcg(&a, &b, &pre, 1e-10, 10_000).unwrap();
        let (_, rep_id) =
            pcg(&a, &b, &crate::solvers::IdentityPreconditioner, 1e-10, 10_000).unwrap();
        assert!(
            rep_sgs.iterations < rep_id.iterations,
            "{} vs {}",
            rep_sgs.iterations,
            rep_id.iterations
        );
    }
}
