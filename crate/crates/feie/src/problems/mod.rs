//! The three coupled solver drivers: interior, exclusion, and interface
//! problems, with region-classified evaluation of the total solution.

mod exclusion;
mod interface;
mod interior;

pub use exclusion::{solve_exclusion, ExclusionProblem, ExclusionSolution};
pub use interface::{
    select_alphas, solve_interface, CoeffCase, InterfaceCoefficients, InterfaceProblem,
    InterfaceSolution,
};
pub use interior::{solve_interior, InteriorProblem, InteriorSolution};

use std::sync::Arc;

use thiserror::Error;

use crate::fem::{FeSolverMode, FemError};
use crate::geometry::{
    BoundaryDiscretization, Curve, GeometryError, Point, Side, Vec2, NEAR_BAND_FACTOR,
};
use crate::potentials::{
    eval_direct_combined, eval_qbx, DensityVector, LayerKind, Limit, PotentialError, QbxConfig,
};
use crate::solvers::{SolveReport, SolverError};

/// Volume data f(x, y).
pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Boundary data g(x).
pub type BoundaryField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// Flux data b(x, n) evaluated with the shared outward normal.
pub type FluxField = Arc<dyn Fn(Point, Vec2) -> f64 + Send + Sync>;

pub fn scalar_field(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> ScalarField {
    Arc::new(f)
}

pub fn boundary_field(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> BoundaryField {
    Arc::new(f)
}

pub fn flux_field(f: impl Fn(Point, Vec2) -> f64 + Send + Sync + 'static) -> FluxField {
    Arc::new(f)
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("embedded curve is not strictly inside the rectangle (clearance {clearance:.3e})")]
    CurveNotInsideDomain { clearance: f64 },
    #[error("kappa must be nonzero")]
    ZeroKappa,
    #[error(
        "the kappa = -c coefficient case is unsupported: the density equation loses its \
         identity term and is no longer of the second kind"
    )]
    KappaEqualsMinusC,
    #[error("evaluation point ({x}, {y}) lies outside every computational domain")]
    PointOutsideDomains { x: f64, y: f64 },
    #[error("the density system solver did not converge: {0}")]
    OuterSolve(#[source] SolverError),
    #[error("a finite element solve inside the coupled operator failed: {0}")]
    InnerSolve(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Axis-aligned rectangle, used for the embedding domains.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn square(half_width: f64) -> Self {
        Rect { x0: -half_width, x1: half_width, y0: -half_width, y1: half_width }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Distance from a point to the rectangle boundary (positive inside).
    pub fn boundary_clearance(&self, p: Point) -> f64 {
        let dx = (p.x - self.x0).min(self.x1 - p.x);
        let dy = (p.y - self.y0).min(self.y1 - p.y);
        dx.min(dy)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Check that the curve is strictly inside the rectangle, by sampling.
pub(crate) fn check_separation(curve: &Curve, rect: &Rect) -> Result<f64, ProblemError> {
    let mut clearance = f64::INFINITY;
    for p in curve.sample_polyline(512) {
        if !rect.contains(p) {
            return Err(ProblemError::CurveNotInsideDomain { clearance: -1.0 });
        }
        clearance = clearance.min(rect.boundary_clearance(p));
    }
    if clearance <= 0.0 {
        return Err(ProblemError::CurveNotInsideDomain { clearance });
    }
    Ok(clearance)
}

/// How the density system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IeMode {
    /// GMRES on the matrix-free Schur operator.
    MatrixFree,
    /// Explicitly assemble the operator column by column and solve densely.
    Assembled,
}

/// Solver configuration shared by the three drivers.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub fe_mode: FeSolverMode,
    pub ie_mode: IeMode,
    /// Relative residual tolerance for the outer density system.
    pub outer_tol: f64,
    pub outer_restart: usize,
    pub outer_max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            fe_mode: FeSolverMode::Direct,
            ie_mode: IeMode::MatrixFree,
            outer_tol: 1e-10,
            outer_restart: 20,
            outer_max_iters: 400,
        }
    }
}

/// Iteration and residual bookkeeping for one coupled solve.
#[derive(Debug, Clone)]
pub struct SolutionReports {
    /// The density-system solve (its residual is recomputed independently).
    pub outer: SolveReport,
    /// Finite element solves outside the outer iteration (right-hand side
    /// assembly and the final solve).
    pub fe_setup: Vec<SolveReport>,
    /// Total inner CG iterations spent in FE solves inside operator
    /// applications (zero with the direct FE factorization).
    pub inner_fe_iterations: usize,
    /// Number of FE solves performed inside operator applications.
    pub fe_applications: usize,
}

impl SolutionReports {
    /// Total inner iterations including the setup solves.
    pub fn total_inner_iterations(&self) -> usize {
        self.inner_fe_iterations + self.fe_setup.iter().map(|r| r.iterations).sum::<usize>()
    }
}

/// A fixed linear combination of layer potentials of stored densities:
/// coeff_d * D[gamma_d] + coeff_s * S[gamma_s]. This covers all three
/// representations used by the solvers.
pub(crate) struct PotentialSum {
    pub disc: BoundaryDiscretization,
    pub qbx: QbxConfig,
    pub coeff_d: f64,
    pub dens_d: DensityVector,
    pub coeff_s: f64,
    pub dens_s: DensityVector,
}

impl PotentialSum {
    pub fn double_only(disc: BoundaryDiscretization, qbx: QbxConfig, dens: DensityVector) -> Self {
        let zero = DensityVector::new(disc.clone(), vec![0.0; disc.n_nodes()]).expect("length");
        PotentialSum { disc, qbx, coeff_d: 1.0, dens_d: dens, coeff_s: 0.0, dens_s: zero }
    }

    /// Far-field evaluation by direct quadrature (no near-band validation;
    /// the caller classified the targets).
    pub fn eval_far(&self, pts: &[Point]) -> Vec<f64> {
        eval_direct_combined(
            &self.disc,
            self.dens_d.values(),
            self.coeff_d,
            self.dens_s.values(),
            self.coeff_s,
            pts,
        )
    }

    /// Near-surface evaluation through one-sided QBX.
    pub fn eval_near(&self, pts: &[Point], side: Side) -> Result<Vec<f64>, PotentialError> {
        let limit = match side {
            Side::Interior => Limit::Interior,
            Side::Exterior => Limit::Exterior,
        };
        let mut out = vec![0.0; pts.len()];
        if self.coeff_d != 0.0 {
            let v = eval_qbx(&self.disc, &self.dens_d, LayerKind::DoubleLayer, pts, limit, &self.qbx, None)?;
            for (o, x) in out.iter_mut().zip(&v) {
                *o += self.coeff_d * x;
            }
        }
        if self.coeff_s != 0.0 {
            let v = eval_qbx(&self.disc, &self.dens_s, LayerKind::SingleLayer, pts, limit, &self.qbx, None)?;
            for (o, x) in out.iter_mut().zip(&v) {
                *o += self.coeff_s * x;
            }
        }
        Ok(out)
    }

    /// Evaluate at arbitrary points with precomputed (side, near) flags,
    /// applying QBX on the points' own side inside the near band.
    pub fn eval_classified(
        &self,
        pts: &[Point],
        flags: &[(Side, bool)],
    ) -> Result<Vec<f64>, PotentialError> {
        let mut out = vec![0.0; pts.len()];
        let mut far = Vec::new();
        let mut near_int = Vec::new();
        let mut near_ext = Vec::new();
        for (i, &(side, near)) in flags.iter().enumerate() {
            if !near {
                far.push(i);
            } else if side == Side::Interior {
                near_int.push(i);
            } else {
                near_ext.push(i);
            }
        }
        if !far.is_empty() {
            let p: Vec<Point> = far.iter().map(|&i| pts[i]).collect();
            let v = self.eval_far(&p);
            for (&i, x) in far.iter().zip(&v) {
                out[i] = *x;
            }
        }
        for (group, side) in [(near_int, Side::Interior), (near_ext, Side::Exterior)] {
            if group.is_empty() {
                continue;
            }
            let p: Vec<Point> = group.iter().map(|&i| pts[i]).collect();
            let v = self.eval_near(&p, side)?;
            for (&i, x) in group.iter().zip(&v) {
                out[i] = *x;
            }
        }
        Ok(out)
    }
}

/// Classify points against the embedded curve: side and near-band flag.
pub(crate) fn classify_points(
    disc: &BoundaryDiscretization,
    pts: &[Point],
) -> Vec<(Side, bool)> {
    use rayon::prelude::*;
    pts.par_iter().map(|&p| disc.classify(p, NEAR_BAND_FACTOR)).collect()
}

/// Construction hooks for the coupled operators, used by integration tests
/// and the acceptance suite to probe operator-level properties.
pub mod testing {
    use super::*;
    use crate::fem::DirichletSolver;
    use crate::solvers::LinearOperator;
    use nalgebra::DMatrix;

    pub use super::exclusion::ExclusionOperator;
    pub use super::interface::InterfaceOperator;

    pub fn exclusion_operator<'a>(
        disc: &'a BoundaryDiscretization,
        fe: &'a DirichletSolver,
        qbx: &QbxConfig,
    ) -> Result<ExclusionOperator<'a>, ProblemError> {
        ExclusionOperator::new(disc, fe, qbx)
    }

    pub fn interface_operator<'a>(
        disc: &'a BoundaryDiscretization,
        fe_outer: &'a DirichletSolver,
        kappa: f64,
        c: f64,
        qbx: &QbxConfig,
    ) -> Result<InterfaceOperator<'a>, ProblemError> {
        let co = select_alphas(kappa, c)?;
        InterfaceOperator::new(disc, fe_outer, co, kappa, c, qbx)
    }

    /// Assemble any matrix-free operator densely by unit-vector probing.
    pub fn assemble_operator(op: &dyn LinearOperator) -> DMatrix<f64> {
        super::exclusion::assemble_operator(op)
    }
}

/// Densities, finite element parts, and a region-classified evaluator for
/// the total solution of one coupled problem.
pub enum CoupledSolution {
    Interior(InteriorSolution),
    Exclusion(ExclusionSolution),
    Interface(InterfaceSolution),
}

impl CoupledSolution {
    pub fn reports(&self) -> &SolutionReports {
        match self {
            CoupledSolution::Interior(s) => &s.reports,
            CoupledSolution::Exclusion(s) => &s.reports,
            CoupledSolution::Interface(s) => &s.reports,
        }
    }

    /// Evaluate the total solution, classifying each point against the
    /// embedded curve (and the embedding rectangles) internally.
    pub fn evaluate(&self, pts: &[Point]) -> Result<Vec<f64>, ProblemError> {
        match self {
            CoupledSolution::Interior(s) => s.evaluate(pts),
            CoupledSolution::Exclusion(s) => s.evaluate(pts),
            CoupledSolution::Interface(s) => s.evaluate(pts),
        }
    }

    pub fn n_fe_dofs(&self) -> usize {
        match self {
            CoupledSolution::Interior(s) => s.u1.space().n_dofs(),
            CoupledSolution::Exclusion(s) => s.u1.space().n_dofs(),
            CoupledSolution::Interface(s) => {
                s.u1_inner.space().n_dofs() + s.u1_outer.space().n_dofs()
            }
        }
    }

    pub fn n_boundary_nodes(&self) -> usize {
        match self {
            CoupledSolution::Interior(s) => s.disc.n_nodes(),
            CoupledSolution::Exclusion(s) => s.disc.n_nodes(),
            CoupledSolution::Interface(s) => s.disc.n_nodes(),
        }
    }
}
