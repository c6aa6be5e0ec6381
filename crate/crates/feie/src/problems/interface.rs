//! Interface solver: transmission conditions u_i = c u_e + a and
//! du_i/dn = kappa du_e/dn + b across an embedded curve, using the combined
//! representations u2_i = a1 D[gamma_i] + a2 S[gamma_e] and
//! u2_e = a3 D[gamma_i] + a4 S[gamma_e]. The coefficient constraint
//! a1 = kappa a3 eliminates the hypersingular operator, and the remaining
//! density system is of the second kind; it couples to two independent
//! finite element solves (interior: homogeneous data; exterior: lifted data)
//! through value and normal-derivative traces on the curve.
//!
//! All interface conditions use the one shared normal pointing out of the
//! inner region.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::fem::{DirichletSolver, FeFunction, FeMesh, FeSpace};
use crate::geometry::{BoundaryDiscretization, Curve, Point, Side, Vec2};
use crate::potentials::{onsurface_matrix, DensityVector, PvKind, QbxConfig};
use crate::solvers::{gmres, LinearOperator};

use super::{
    check_separation, classify_points, interior::solve_dense_system, BoundaryField,
    CoupledSolution, FluxField, IeMode, PotentialSum, ProblemError, Rect, ScalarField,
    SolutionReports, SolveOptions,
};

/// Which coefficient case the jump data selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffCase {
    /// kappa differs from both c and -c; all operator terms present.
    General,
    /// kappa = c: the double layer drops out of the first density equation
    /// and the density block reduces to a scaled identity.
    KappaEqualsC,
}

/// Representation coefficients (alpha_1, ..., alpha_4) with the constraint
/// alpha_1 = kappa * alpha_3 built in.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceCoefficients {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub case: CoeffCase,
}

/// Choose the representation coefficients from the jump coefficients.
///
/// General case (kappa != +-c): alpha2 = 0, alpha3 = 1/(kappa - c),
/// alpha4 = 1/kappa. Case kappa = c: alpha2 = 1, alpha3 = -1/kappa,
/// alpha4 = 1/kappa. The case kappa = -c is rejected.
pub fn select_alphas(kappa: f64, c: f64) -> Result<InterfaceCoefficients, ProblemError> {
    if kappa == 0.0 {
        return Err(ProblemError::ZeroKappa);
    }
    if kappa == -c {
        return Err(ProblemError::KappaEqualsMinusC);
    }
    if kappa == c {
        let alpha3 = -1.0 / kappa;
        Ok(InterfaceCoefficients {
            alpha1: kappa * alpha3,
            alpha2: 1.0,
            alpha3,
            alpha4: 1.0 / kappa,
            case: CoeffCase::KappaEqualsC,
        })
    } else {
        let alpha3 = 1.0 / (kappa - c);
        Ok(InterfaceCoefficients {
            alpha1: kappa * alpha3,
            alpha2: 0.0,
            alpha3,
            alpha4: 1.0 / kappa,
            case: CoeffCase::General,
        })
    }
}

/// Interface problem data. `f_inner` / `f_outer` are smooth continuations of
/// the source onto the full inner / outer rectangles; `a` and `b` are the
/// value and flux jumps; `g_hat` is the Dirichlet data on the outer
/// rectangle.
pub struct InterfaceProblem {
    pub curve: Curve,
    pub inner_domain: Rect,
    pub outer_domain: Rect,
    pub f_inner: ScalarField,
    pub f_outer: ScalarField,
    pub kappa: f64,
    pub c: f64,
    pub a: BoundaryField,
    pub b: FluxField,
    pub g_hat: BoundaryField,
}

impl InterfaceProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        curve: Curve,
        inner_domain: Rect,
        outer_domain: Rect,
        f_inner: ScalarField,
        f_outer: ScalarField,
        kappa: f64,
        c: f64,
        a: BoundaryField,
        b: FluxField,
        g_hat: BoundaryField,
    ) -> Result<Self, ProblemError> {
        select_alphas(kappa, c)?;
        check_separation(&curve, &inner_domain)?;
        check_separation(&curve, &outer_domain)?;
        Ok(InterfaceProblem {
            curve,
            inner_domain,
            outer_domain,
            f_inner,
            f_outer,
            kappa,
            c,
            a,
            b,
            g_hat,
        })
    }
}

pub struct InterfaceSolution {
    pub u1_inner: FeFunction,
    pub u1_outer: FeFunction,
    pub density_inner: DensityVector,
    pub density_outer: DensityVector,
    pub coeffs: InterfaceCoefficients,
    pub disc: BoundaryDiscretization,
    pub qbx: QbxConfig,
    pub reports: SolutionReports,
}

/// The 2N x 2N density operator: the second-kind blocks on
/// (gamma_i, gamma_e) plus the coupling through the exterior FE solve.
pub struct InterfaceOperator<'a> {
    disc: &'a BoundaryDiscretization,
    fe_outer: &'a DirichletSolver,
    co: InterfaceCoefficients,
    kappa: f64,
    c: f64,
    /// Identity and operator coefficients of the density blocks.
    id_row1: f64,
    dbar_row1: f64,
    sbar_row1: f64,
    id_row2: f64,
    sprime_row2: f64,
    dbar: nalgebra::DMatrix<f64>,
    sbar: nalgebra::DMatrix<f64>,
    sprime: nalgebra::DMatrix<f64>,
    fe_boundary: Vec<Point>,
    gamma_pts: Vec<Point>,
    gamma_normals: Vec<Vec2>,
    zero_load: Vec<f64>,
    inner_iters: AtomicUsize,
    fe_solves: AtomicUsize,
    failure: Mutex<Option<String>>,
}

impl<'a> InterfaceOperator<'a> {
    pub fn new(
        disc: &'a BoundaryDiscretization,
        fe_outer: &'a DirichletSolver,
        co: InterfaceCoefficients,
        kappa: f64,
        c: f64,
        qbx: &QbxConfig,
    ) -> Result<Self, ProblemError> {
        let dbar = onsurface_matrix(disc, PvKind::DoubleLayer, qbx)?;
        let sbar = onsurface_matrix(disc, PvKind::SingleLayer, qbx)?;
        let sprime = onsurface_matrix(disc, PvKind::SingleLayerNormalDeriv, qbx)?;
        Ok(InterfaceOperator {
            disc,
            fe_outer,
            co,
            kappa,
            c,
            id_row1: -0.5 * (kappa + c) * co.alpha3,
            dbar_row1: (kappa - c) * co.alpha3,
            sbar_row1: co.alpha2 - c * co.alpha4,
            id_row2: 0.5 * (co.alpha2 + kappa * co.alpha4),
            sprime_row2: co.alpha2 - kappa * co.alpha4,
            dbar,
            sbar,
            sprime,
            fe_boundary: fe_outer.space().boundary_positions(),
            gamma_pts: disc.nodes().iter().map(|n| n.position).collect(),
            gamma_normals: disc.nodes().iter().map(|n| n.normal).collect(),
            zero_load: vec![0.0; fe_outer.space().n_dofs()],
            inner_iters: AtomicUsize::new(0),
            fe_solves: AtomicUsize::new(0),
            failure: Mutex::new(None),
        })
    }

    /// R-hat A (gamma_i, gamma_e) = a3 D[gamma_i] + a4 S[gamma_e] at the
    /// outer-rectangle boundary nodes (far targets; direct quadrature).
    pub fn potential_at_fe_boundary(&self, gi: &[f64], ge: &[f64]) -> Vec<f64> {
        crate::potentials::eval_direct_combined(
            self.disc,
            gi,
            self.co.alpha3,
            ge,
            self.co.alpha4,
            &self.fe_boundary,
        )
    }

    pub fn take_failure(&self) -> Option<String> {
        self.failure.lock().unwrap().take()
    }
}

impl LinearOperator for InterfaceOperator<'_> {
    fn dim(&self) -> usize {
        2 * self.disc.n_nodes()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.disc.n_nodes();
        let (gi, ge) = x.split_at(n);
        let mut row1 = vec![0.0; n];
        let mut row2 = vec![0.0; n];
        for i in 0..n {
            let mut s1 = self.id_row1 * gi[i];
            let mut s2 = self.id_row2 * ge[i];
            for j in 0..n {
                s1 += self.dbar_row1 * self.dbar[(i, j)] * gi[j]
                    + self.sbar_row1 * self.sbar[(i, j)] * ge[j];
                s2 += self.sprime_row2 * self.sprime[(i, j)] * ge[j];
            }
            row1[i] = s1;
            row2[i] = s2;
        }
        // Coupling: - R U [0; 0; R-hat A] with the interior FE block
        // identically zero (homogeneous data), so only the exterior solve
        // contributes: row1 += c R w, row2 += kappa (R d/dn) w.
        let bc = self.potential_at_fe_boundary(gi, ge);
        match self.fe_outer.solve_with(&self.zero_load, &bc) {
            Ok((w, rep)) => {
                self.inner_iters.fetch_add(rep.iterations, Ordering::Relaxed);
                self.fe_solves.fetch_add(1, Ordering::Relaxed);
                let trace = w.eval_many(&self.gamma_pts);
                let grads = w.grad_many(&self.gamma_pts);
                match (trace, grads) {
                    (Ok(tr), Ok(gr)) => {
                        for i in 0..n {
                            row1[i] += self.c * tr[i];
                            row2[i] += self.kappa * gr[i].dot(&self.gamma_normals[i]);
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        *self.failure.lock().unwrap() = Some(e.to_string());
                    }
                }
            }
            Err(e) => {
                *self.failure.lock().unwrap() = Some(e.to_string());
            }
        }
        row1.extend(row2);
        row1
    }
}

/// Solve the interface problem at FE degree `p` (both rectangles are meshed
/// at element size near `h_fe`).
pub fn solve_interface(
    prob: &InterfaceProblem,
    p: usize,
    h_fe: f64,
    disc: &BoundaryDiscretization,
    qbx: &QbxConfig,
    opts: &SolveOptions,
) -> Result<CoupledSolution, ProblemError> {
    let co = select_alphas(prob.kappa, prob.c)?;
    let di = &prob.inner_domain;
    let de = &prob.outer_domain;
    let space_i = FeSpace::new(FeMesh::with_target_h(di.x0, di.x1, di.y0, di.y1, h_fe)?, p)?;
    let space_e = FeSpace::new(FeMesh::with_target_h(de.x0, de.x1, de.y0, de.y1, h_fe)?, p)?;
    let fe_i = DirichletSolver::new(&space_i, opts.fe_mode)?;
    let fe_e = DirichletSolver::new(&space_e, opts.fe_mode)?;

    let op = InterfaceOperator::new(disc, &fe_e, co, prob.kappa, prob.c, qbx)?;
    let n = disc.n_nodes();

    // Right-hand side: (a, b) - R U [f_i; f_e; g_hat].
    let fi = prob.f_inner.clone();
    let fe_load_i = space_i.assemble_load(move |x, y| fi(x, y));
    let fo = prob.f_outer.clone();
    let fe_load_e = space_e.assemble_load(move |x, y| fo(x, y));
    let ghat_vals: Vec<f64> = space_e
        .boundary_nodes()
        .iter()
        .map(|&dof| (prob.g_hat)(space_e.node_position(dof)))
        .collect();
    let zeros_i = vec![0.0; space_i.boundary_nodes().len()];
    let (u1i, rep_i) = fe_i.solve_with(&fe_load_i, &zeros_i)?;
    let (u1e0, rep_e) = fe_e.solve_with(&fe_load_e, &ghat_vals)?;

    let tr_i = u1i.eval_many(&op.gamma_pts)?;
    let tr_e = u1e0.eval_many(&op.gamma_pts)?;
    let gr_i = u1i.grad_many(&op.gamma_pts)?;
    let gr_e = u1e0.grad_many(&op.gamma_pts)?;
    let mut rhs = Vec::with_capacity(2 * n);
    for i in 0..n {
        let x = op.gamma_pts[i];
        rhs.push((prob.a)(x) - (tr_i[i] - prob.c * tr_e[i]));
    }
    for i in 0..n {
        let x = op.gamma_pts[i];
        let nh = op.gamma_normals[i];
        let dn_i = gr_i[i].dot(&nh);
        let dn_e = gr_e[i].dot(&nh);
        rhs.push((prob.b)(x, nh) - (dn_i - prob.kappa * dn_e));
    }

    let (gamma, outer) = match opts.ie_mode {
        IeMode::MatrixFree => {
            let result = gmres(&op, &rhs, opts.outer_restart, opts.outer_tol, opts.outer_max_iters);
            if let Some(msg) = op.take_failure() {
                return Err(ProblemError::InnerSolve(msg));
            }
            result.map_err(ProblemError::OuterSolve)?
        }
        IeMode::Assembled => {
            let z = super::exclusion::assemble_operator(&op);
            if let Some(msg) = op.take_failure() {
                return Err(ProblemError::InnerSolve(msg));
            }
            let dense_opts = SolveOptions { ie_mode: IeMode::Assembled, ..opts.clone() };
            solve_dense_system(&z, &rhs, &dense_opts)?
        }
    };
    let (gi, ge) = gamma.split_at(n);

    // Final exterior FE solve with the density-corrected boundary data; the
    // interior FE part is independent of the densities.
    let a_gamma = op.potential_at_fe_boundary(gi, ge);
    let bc: Vec<f64> = ghat_vals.iter().zip(&a_gamma).map(|(g, a)| g - a).collect();
    let (u1e, rep_final) = fe_e.solve_with(&fe_load_e, &bc)?;

    let reports = SolutionReports {
        outer,
        fe_setup: vec![rep_i, rep_e, rep_final],
        inner_fe_iterations: op.inner_iters.load(Ordering::Relaxed),
        fe_applications: op.fe_solves.load(Ordering::Relaxed),
    };
    Ok(CoupledSolution::Interface(InterfaceSolution {
        u1_inner: u1i,
        u1_outer: u1e,
        density_inner: DensityVector::new(disc.clone(), gi.to_vec())?,
        density_outer: DensityVector::new(disc.clone(), ge.to_vec())?,
        coeffs: co,
        disc: disc.clone(),
        qbx: qbx.clone(),
        reports,
    }))
}

impl InterfaceSolution {
    /// Region-classified evaluation: inside the curve
    /// u = u1_inner + a1 D[gamma_i] + a2 S[gamma_e]; outside (within the
    /// outer rectangle) u = u1_outer + a3 D[gamma_i] + a4 S[gamma_e].
    pub fn evaluate(&self, pts: &[Point]) -> Result<Vec<f64>, ProblemError> {
        let flags = classify_points(&self.disc, pts);
        self.evaluate_classified(pts, &flags)
    }

    pub fn evaluate_classified(
        &self,
        pts: &[Point],
        flags: &[(Side, bool)],
    ) -> Result<Vec<f64>, ProblemError> {
        let mut out = vec![0.0; pts.len()];
        let inner_idx: Vec<usize> = (0..pts.len())
            .filter(|&i| flags[i].0 == Side::Interior)
            .collect();
        let outer_idx: Vec<usize> = (0..pts.len())
            .filter(|&i| flags[i].0 == Side::Exterior)
            .collect();
        for &i in &outer_idx {
            let m = self.u1_outer.space().mesh();
            let p = pts[i];
            if p.x < m.x0 || p.x > m.x1 || p.y < m.y0 || p.y > m.y1 {
                return Err(ProblemError::PointOutsideDomains { x: p.x, y: p.y });
            }
        }
        if !inner_idx.is_empty() {
            let p: Vec<Point> = inner_idx.iter().map(|&i| pts[i]).collect();
            let fl: Vec<(Side, bool)> = inner_idx.iter().map(|&i| flags[i]).collect();
            let fe = self.u1_inner.eval_many(&p)?;
            let sum = PotentialSum {
                disc: self.disc.clone(),
                qbx: self.qbx.clone(),
                coeff_d: self.coeffs.alpha1,
                dens_d: self.density_inner.clone(),
                coeff_s: self.coeffs.alpha2,
                dens_s: self.density_outer.clone(),
            };
            let u2 = sum.eval_classified(&p, &fl)?;
            for ((&i, a), b) in inner_idx.iter().zip(&fe).zip(&u2) {
                out[i] = a + b;
            }
        }
        if !outer_idx.is_empty() {
            let p: Vec<Point> = outer_idx.iter().map(|&i| pts[i]).collect();
            let fl: Vec<(Side, bool)> = outer_idx.iter().map(|&i| flags[i]).collect();
            let fe = self.u1_outer.eval_many(&p)?;
            let sum = PotentialSum {
                disc: self.disc.clone(),
                qbx: self.qbx.clone(),
                coeff_d: self.coeffs.alpha3,
                dens_d: self.density_inner.clone(),
                coeff_s: self.coeffs.alpha4,
                dens_s: self.density_outer.clone(),
            };
            let u2 = sum.eval_classified(&p, &fl)?;
            for ((&i, a), b) in outer_idx.iter().zip(&fe).zip(&u2) {
                out[i] = a + b;
            }
        }
        Ok(out)
    }
}
