//! Interior embedded-mesh solver: a finite element solve on the embedding
//! rectangle followed by a second-kind double layer equation on the embedded
//! boundary, combined by forward substitution.

use nalgebra::DMatrix;

use crate::fem::{DirichletSolver, FeFunction, FeMesh, FeSpace};
use crate::geometry::{BoundaryDiscretization, Curve, Point, Side};
use crate::potentials::{onsurface_matrix, DensityVector, PvKind, QbxConfig};
use crate::solvers::{gmres, LuFactors, SolveReport};

use super::{
    check_separation, classify_points, BoundaryField, CoupledSolution, IeMode, PotentialSum,
    ProblemError, Rect, ScalarField, SolutionReports, SolveOptions,
};

/// Dirichlet problem on the region enclosed by `curve`, embedded in the
/// rectangle `domain` with the boundaries well separated. `f` must be a
/// globally defined expression on the rectangle.
pub struct InteriorProblem {
    pub curve: Curve,
    pub domain: Rect,
    pub f: ScalarField,
    pub g: BoundaryField,
}

impl InteriorProblem {
    pub fn new(
        curve: Curve,
        domain: Rect,
        f: ScalarField,
        g: BoundaryField,
    ) -> Result<Self, ProblemError> {
        check_separation(&curve, &domain)?;
        Ok(InteriorProblem { curve, domain, f, g })
    }
}

pub struct InteriorSolution {
    pub u1: FeFunction,
    pub density: DensityVector,
    pub disc: BoundaryDiscretization,
    pub qbx: QbxConfig,
    pub reports: SolutionReports,
}

/// Solve the interior problem: u1 from the volume load with zero outer
/// boundary values, then the Nystrom system
/// (-1/2 I + D-bar) gamma = g - u1|_Gamma, with u2 = D gamma. No outer
/// iteration is needed.
pub fn solve_interior(
    prob: &InteriorProblem,
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
    let f = prob.f.clone();
    let (u1, fe_report) = fe.solve_fn(move |x, y| f(x, y), |_| 0.0)?;

    let n = disc.n_nodes();
    let dbar = onsurface_matrix(disc, PvKind::DoubleLayer, qbx)?;
    let mut a = dbar;
    for i in 0..n {
        a[(i, i)] -= 0.5;
    }
    let gamma_pts: Vec<Point> = disc.nodes().iter().map(|nd| nd.position).collect();
    let u1_trace = u1.eval_many(&gamma_pts)?;
    let rhs: Vec<f64> = gamma_pts
        .iter()
        .zip(&u1_trace)
        .map(|(x, t)| (prob.g)(*x) - t)
        .collect();

    let (gamma, outer) = solve_dense_system(&a, &rhs, opts)?;
    let density = DensityVector::new(disc.clone(), gamma)?;

    let reports = SolutionReports {
        outer,
        fe_setup: vec![fe_report],
        inner_fe_iterations: 0,
        fe_applications: 0,
    };
    Ok(CoupledSolution::Interior(InteriorSolution {
        u1,
        density,
        disc: disc.clone(),
        qbx: qbx.clone(),
        reports,
    }))
}

/// Solve a dense second-kind system directly (LU) or by GMRES, reporting an
/// independently recomputed relative residual either way.
pub(crate) fn solve_dense_system(
    a: &DMatrix<f64>,
    rhs: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport), ProblemError> {
    match opts.ie_mode {
        IeMode::Assembled => {
            let start = std::time::Instant::now();
            let lu = LuFactors::new(a)?;
            let x = lu.solve(rhs);
            let ax = a * nalgebra::DVector::from_column_slice(&x);
            let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rnorm = rhs
                .iter()
                .zip(ax.iter())
                .map(|(b, v)| (b - v) * (b - v))
                .sum::<f64>()
                .sqrt();
            let residual = if bnorm > 0.0 { rnorm / bnorm } else { rnorm };
            Ok((x, SolveReport { iterations: 0, residual, wall: start.elapsed() }))
        }
        IeMode::MatrixFree => {
            let (x, rep) = gmres(a, rhs, opts.outer_restart, opts.outer_tol, opts.outer_max_iters)
                .map_err(ProblemError::OuterSolve)?;
            Ok((x, rep))
        }
    }
}

impl InteriorSolution {
    /// Total solution u = u1 + (D gamma) 1_Omega: points outside the curve
    /// (but inside the rectangle) see only the finite element part.
    pub fn evaluate(&self, pts: &[Point]) -> Result<Vec<f64>, ProblemError> {
        let flags = classify_points(&self.disc, pts);
        self.evaluate_classified(pts, &flags)
    }

    pub fn evaluate_classified(
        &self,
        pts: &[Point],
        flags: &[(Side, bool)],
    ) -> Result<Vec<f64>, ProblemError> {
        let mut out = self.u1.eval_many(pts)?;
        let inside_idx: Vec<usize> = flags
            .iter()
            .enumerate()
            .filter(|(_, &(side, _))| side == Side::Interior)
            .map(|(i, _)| i)
            .collect();
        if !inside_idx.is_empty() {
            let sum = PotentialSum::double_only(
                self.disc.clone(),
                self.qbx.clone(),
                self.density.clone(),
            );
            let p: Vec<Point> = inside_idx.iter().map(|&i| pts[i]).collect();
            let fl: Vec<(Side, bool)> = inside_idx.iter().map(|&i| flags[i]).collect();
            let u2 = sum.eval_classified(&p, &fl)?;
            for (&i, v) in inside_idx.iter().zip(&u2) {
                out[i] += v;
            }
        }
        Ok(out)
    }
}
