//! Exclusion (exterior) solver: finite elements on the full rectangle
//! coupled to an exterior integral equation whose representation is the sum
//! of the double and single layer potentials of one density. The density
//! equation is the Schur complement of the coupled system, applied
//! matrix-free: each application evaluates the potential on the outer
//! boundary, performs one cached-factorization FE solve, and takes its trace
//! on the embedded curve.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DMatrix;

use crate::fem::{DirichletSolver, FeFunction, FeMesh, FeSpace};
use crate::geometry::{BoundaryDiscretization, Curve, Point, Side};
use crate::potentials::{
    eval_direct_combined, onsurface_matrix, DensityVector, PvKind, QbxConfig,
};
use crate::solvers::{gmres, LinearOperator};

use super::{
    check_separation, classify_points, interior::solve_dense_system, BoundaryField,
    CoupledSolution, IeMode, PotentialSum, ProblemError, Rect, ScalarField, SolutionReports,
    SolveOptions,
};

/// Poisson problem on the rectangle minus the region enclosed by `curve`,
/// with Dirichlet data `g` on the curve and `g_hat` on the rectangle.
/// `f` must be smoothly continued into the excluded region.
pub struct ExclusionProblem {
    pub curve: Curve,
    pub domain: Rect,
    pub f: ScalarField,
    pub g: BoundaryField,
    pub g_hat: BoundaryField,
}

impl ExclusionProblem {
    pub fn new(
        curve: Curve,
        domain: Rect,
        f: ScalarField,
        g: BoundaryField,
        g_hat: BoundaryField,
    ) -> Result<Self, ProblemError> {
        check_separation(&curve, &domain)?;
        Ok(ExclusionProblem { curve, domain, f, g, g_hat })
    }
}

pub struct ExclusionSolution {
    pub u1: FeFunction,
    pub density: DensityVector,
    pub disc: BoundaryDiscretization,
    pub qbx: QbxConfig,
    pub reports: SolutionReports,
}

/// The Schur-complement operator on densities:
/// Z = 1/2 I + (D-bar + S-bar) - R U [0; R-hat A], where A = D + S.
pub struct ExclusionOperator<'a> {
    pub a_pv: DMatrix<f64>,
    pub disc: &'a BoundaryDiscretization,
    pub fe: &'a DirichletSolver,
    pub fe_boundary: Vec<Point>,
    pub gamma_pts: Vec<Point>,
    pub zero_load: Vec<f64>,
    pub inner_iters: AtomicUsize,
    pub fe_solves: AtomicUsize,
    pub failure: Mutex<Option<String>>,
}

impl<'a> ExclusionOperator<'a> {
    pub fn new(
        disc: &'a BoundaryDiscretization,
        fe: &'a DirichletSolver,
        qbx: &QbxConfig,
    ) -> Result<Self, ProblemError> {
        let mut a_pv = onsurface_matrix(disc, PvKind::DoubleLayer, qbx)?;
        a_pv += onsurface_matrix(disc, PvKind::SingleLayer, qbx)?;
        Ok(ExclusionOperator {
            a_pv,
            disc,
            fe,
            fe_boundary: fe.space().boundary_positions(),
            gamma_pts: disc.nodes().iter().map(|n| n.position).collect(),
            zero_load: vec![0.0; fe.space().n_dofs()],
            inner_iters: AtomicUsize::new(0),
            fe_solves: AtomicUsize::new(0),
            failure: Mutex::new(None),
        })
    }

    /// Evaluate A gamma = (D + S) gamma at the outer-rectangle boundary nodes
    /// (far targets by the separation invariant; direct quadrature).
    pub fn potential_at_fe_boundary(&self, gamma: &[f64]) -> Vec<f64> {
        eval_direct_combined(self.disc, gamma, 1.0, gamma, 1.0, &self.fe_boundary)
    }
}

impl LinearOperator for ExclusionOperator<'_> {
    fn dim(&self) -> usize {
        self.disc.n_nodes()
    }

    fn apply(&self, gamma: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.5 * gamma[i];
            for j in 0..n {
                s += self.a_pv[(i, j)] * gamma[j];
            }
            y[i] = s;
        }
        let bc = self.potential_at_fe_boundary(gamma);
        match self.fe.solve_with(&self.zero_load, &bc) {
            Ok((w, rep)) => {
                self.inner_iters.fetch_add(rep.iterations, Ordering::Relaxed);
                self.fe_solves.fetch_add(1, Ordering::Relaxed);
                match w.eval_many(&self.gamma_pts) {
                    Ok(trace) => {
                        for (yi, t) in y.iter_mut().zip(&trace) {
                            *yi -= t;
                        }
                    }
                    Err(e) => {
                        *self.failure.lock().unwrap() = Some(e.to_string());
                    }
                }
            }
            Err(e) => {
                *self.failure.lock().unwrap() = Some(e.to_string());
            }
        }
        y
    }
}

/// Assemble a matrix-free operator densely by applying it to unit vectors.
pub(crate) fn assemble_operator(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply(&e);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

/// Solve the exclusion problem. The far-field constant of the exterior
/// representation is left free (the single layer carries any logarithmic
/// growth); no additive constant is lost because the FE part supplies it.
pub fn solve_exclusion(
    prob: &ExclusionProblem,
    p: usize,
    h_fe: f64,
    disc: &BoundaryDiscretization,
    qbx: &QbxConfig,
    opts: &SolveOptions,
) -> Result<CoupledSolution, ProblemError> {
    let d = &prob.domain;
    let mesh = FeMesh::with_target_h(d.x0, d.x1, d.y0, d.y1, h_fe)?;
    let space = FeSpace::new(mesh, p)?;
    let fe = DirichletSolver::new(&space, opts.fe_mode)?;

    let op = ExclusionOperator::new(disc, &fe, qbx)?;

    // Right-hand side: g - R U [f; g_hat].
    let f = prob.f.clone();
    let load = space.assemble_load(move |x, y| f(x, y));
    let ghat_vals: Vec<f64> = space
        .boundary_nodes()
        .iter()
        .map(|&dof| (prob.g_hat)(space.node_position(dof)))
        .collect();
    let (u_data, rep_data) = fe.solve_with(&load, &ghat_vals)?;
    let trace = u_data.eval_many(&op.gamma_pts)?;
    let rhs: Vec<f64> = op
        .gamma_pts
        .iter()
        .zip(&trace)
        .map(|(x, t)| (prob.g)(*x) - t)
        .collect();

    let (gamma, outer) = match opts.ie_mode {
        IeMode::MatrixFree => {
            let result = gmres(&op, &rhs, opts.outer_restart, opts.outer_tol, opts.outer_max_iters);
            if let Some(msg) = op.failure.lock().unwrap().take() {
                return Err(ProblemError::InnerSolve(msg));
            }
            result.map_err(ProblemError::OuterSolve)?
        }
        IeMode::Assembled => {
            let z = assemble_operator(&op);
            if let Some(msg) = op.failure.lock().unwrap().take() {
                return Err(ProblemError::InnerSolve(msg));
            }
            let dense_opts = SolveOptions { ie_mode: IeMode::Assembled, ..opts.clone() };
            solve_dense_system(&z, &rhs, &dense_opts)?
        }
    };

    // Final FE solve: u1 = U [f; g_hat - R-hat A gamma].
    let a_gamma = op.potential_at_fe_boundary(&gamma);
    let bc: Vec<f64> = ghat_vals.iter().zip(&a_gamma).map(|(g, a)| g - a).collect();
    let (u1, rep_final) = fe.solve_with(&load, &bc)?;

    let density = DensityVector::new(disc.clone(), gamma)?;
    let reports = SolutionReports {
        outer,
        fe_setup: vec![rep_data, rep_final],
        inner_fe_iterations: op.inner_iters.load(Ordering::Relaxed),
        fe_applications: op.fe_solves.load(Ordering::Relaxed),
    };
    Ok(CoupledSolution::Exclusion(ExclusionSolution {
        u1,
        density,
        disc: disc.clone(),
        qbx: qbx.clone(),
        reports,
    }))
}

impl ExclusionSolution {
    /// Total solution u = u1 + (D + S) gamma on the rectangle minus the
    /// enclosed region; points inside the excluded region are rejected.
    pub fn evaluate(&self, pts: &[Point]) -> Result<Vec<f64>, ProblemError> {
        let flags = classify_points(&self.disc, pts);
        self.evaluate_classified(pts, &flags)
    }

    pub fn evaluate_classified(
        &self,
        pts: &[Point],
        flags: &[(Side, bool)],
    ) -> Result<Vec<f64>, ProblemError> {
        for (p, &(side, _)) in pts.iter().zip(flags) {
            if side == Side::Interior {
                return Err(ProblemError::PointOutsideDomains { x: p.x, y: p.y });
            }
        }
        let mut out = self.u1.eval_many(pts)?;
        let sum = PotentialSum {
            disc: self.disc.clone(),
            qbx: self.qbx.clone(),
            coeff_d: 1.0,
            dens_d: self.density.clone(),
            coeff_s: 1.0,
            dens_s: self.density.clone(),
        };
        let u2 = sum.eval_classified(pts, flags)?;
        for (o, v) in out.iter_mut().zip(&u2) {
            *o += v;
        }
        Ok(out)
    }
}
