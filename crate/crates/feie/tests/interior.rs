//! Interior solver: exact harmonic reproduction, trivial data, conditioning
//! of the second-kind system, and the evaluation contract.

use feie::geometry::{BoundaryDiscretization, Curve, Point, PointLocation};
use feie::potentials::QbxConfig;
use feie::problems::{
    boundary_field, scalar_field, solve_interior, CoupledSolution, IeMode, InteriorProblem, Rect,
    SolveOptions,
};

fn circle_problem(
    f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    g: impl Fn(Point) -> f64 + Send + Sync + 'static,
) -> InteriorProblem {
    let curve = Curve::circle(Point::new(0.0, 0.0), 0.5).unwrap();
    InteriorProblem::new(
        curve,
        Rect::square(0.6),
        scalar_field(f),
        boundary_field(g),
    )
    .unwrap()
}

fn sample_disc_points(r_max: f64, n: usize) -> Vec<Point> {
    // Polar grid staying strictly inside the circle, including points inside
    // the near band.
    let mut pts = Vec::new();
    for i in 0..n {
        let r = r_max * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64 + 0.19;
            pts.push(Point::new(r * t.cos(), r * t.sin()));
        }
    }
    pts
}

#[test]
fn harmonic_data_reproduced_by_the_layer_potential() {
    // f = 0 forces u1 = 0 exactly, so the double layer alone must reproduce
    // the harmonic boundary data x^2 - y^2 throughout the disc.
    let prob = circle_problem(|_, _| 0.0, |p| p.x * p.x - p.y * p.y);
    let disc = BoundaryDiscretization::build_panels(&prob.curve, 32, 8).unwrap();
    let sol = solve_interior(
        &prob,
        3,
        0.12,
        &disc,
        &QbxConfig::with_order(4),
        &SolveOptions::default(),
    )
    .unwrap();
    let pts = sample_disc_points(0.4999, 24);
    let vals = sol.evaluate(&pts).unwrap();
    let mut worst = 0.0_f64;
    for (p, v) in pts.iter().zip(&vals) {
        worst = worst.max((v - (p.x * p.x - p.y * p.y)).abs());
    }
    assert!(worst < 1e-6, "max error {worst}");
}

#[test]
fn zero_data_gives_zero_solution() {
    let prob = circle_problem(|_, _| 0.0, |_| 0.0);
    let disc = BoundaryDiscretization::build_panels(&prob.curve, 16, 8).unwrap();
    let sol = solve_interior(
        &prob,
        2,
        0.12,
        &disc,
        &QbxConfig::with_order(3),
        &SolveOptions::default(),
    )
    .unwrap();
    let pts = sample_disc_points(0.48, 10);
    for v in sol.evaluate(&pts).unwrap() {
        assert!(v.abs() < 1e-12, "{v}");
    }
}

#[test]
fn outside_points_see_only_the_fe_part() {
    // With f = 1 and g = 0 the FE part is nonzero; outside the curve the
    // total solution equals u1 alone.
    let prob = circle_problem(|_, _| 1.0, |_| 0.0);
    let disc = BoundaryDiscretization::build_panels(&prob.curve, 16, 8).unwrap();
    let sol = solve_interior(
        &prob,
        2,
        0.08,
        &disc,
        &QbxConfig::with_order(3),
        &SolveOptions::default(),
    )
    .unwrap();
    let outside = [Point::new(0.55, 0.15), Point::new(-0.58, -0.52)];
    let vals = sol.evaluate(&outside).unwrap();
    let CoupledSolution::Interior(inner) = &sol else {
        panic!("expected interior solution")
    };
    let u1 = inner.u1.eval_many(&outside).unwrap();
    for (a, b) in vals.iter().zip(&u1) {
        assert_eq!(a, b);
        assert!(b.abs() > 1e-4, "u1 should be nonzero outside the curve");
    }
    // The indicator view of the same fact.
    assert_eq!(
        disc.point_in_domain(Point::new(0.55, 0.15)),
        PointLocation::Outside
    );
}

#[test]
fn nystrom_constant_density_identity() {
    // (-1/2 I + D-bar) maps the constant density -c to the constant c, so a
    // constant right-hand side c must return gamma = -c.
    use feie::potentials::{onsurface_matrix, PvKind};
    use feie::solvers::dense_solve;
    let curve = Curve::circle(Point::new(0.0, 0.0), 0.5).unwrap();
    let disc = BoundaryDiscretization::build_panels(&curve, 16, 8).unwrap();
    let mut a = onsurface_matrix(&disc, PvKind::DoubleLayer, &QbxConfig::with_order(4)).unwrap();
    for i in 0..disc.n_nodes() {
        a[(i, i)] -= 0.5;
    }
    let c = 0.7;
    let rhs = vec![c; disc.n_nodes()];
    let gamma = dense_solve(&a, &rhs).unwrap();
    for g in &gamma {
        assert!((g + c).abs() < 1e-6, "{g}");
    }
}

#[test]
fn second_kind_iteration_count_stable_under_refinement() {
    // GMRES iteration counts on the Nystrom system change by at most 2 when
    // the boundary resolution doubles.
    let prob = circle_problem(|_, _| 0.0, |p| (3.0 * p.y.atan2(p.x)).cos());
    let opts = SolveOptions { ie_mode: IeMode::MatrixFree, ..Default::default() };
    let mut iters = Vec::new();
    for panels in [16, 32] {
        let disc = BoundaryDiscretization::build_panels(&prob.curve, panels, 8).unwrap();
        let sol = solve_interior(&prob, 2, 0.12, &disc, &QbxConfig::with_order(3), &opts).unwrap();
        iters.push(sol.reports().outer.iterations);
    }
    let diff = iters[1].abs_diff(iters[0]);
    assert!(diff <= 2, "iteration counts {iters:?}");
}

#[test]
fn density_residual_is_recheckable_and_small() {
    let prob = circle_problem(|x, y| x + y, |p| p.x);
    let disc = BoundaryDiscretization::build_panels(&prob.curve, 16, 8).unwrap();
    for mode in [IeMode::Assembled, IeMode::MatrixFree] {
        let opts = SolveOptions { ie_mode: mode, ..Default::default() };
        let sol =
            solve_interior(&prob, 2, 0.1, &disc, &QbxConfig::with_order(3), &opts).unwrap();
        let rep = &sol.reports().outer;
        assert!(rep.residual <= 1e-10, "mode {mode:?}: residual {}", rep.residual);
    }
}

#[test]
fn curve_touching_domain_rejected() {
    let curve = Curve::circle(Point::new(0.0, 0.0), 0.7).unwrap();
    let r = InteriorProblem::new(
        curve,
        Rect::square(0.6),
        scalar_field(|_, _| 0.0),
        boundary_field(|_| 0.0),
    );
    assert!(r.is_err());
}
