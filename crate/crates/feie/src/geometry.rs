//! Smooth closed curves, their differential geometry, and composite
//! Gauss-Legendre panel discretizations of the boundary.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Point2, Vector2};
use thiserror::Error;

pub type Point = Point2<f64>;
pub type Vec2 = Vector2<f64>;

/// Number of samples in the cached polyline used for distance queries.
const POLYLINE_SAMPLES: usize = 4096;

/// Default near-boundary threshold, as a multiple of the local node spacing.
pub const NEAR_BAND_FACTOR: f64 = 2.0;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("curve radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("need at least {min} {what}, got {got}")]
    TooCoarse {
        what: &'static str,
        min: usize,
        got: usize,
    },
    #[error("degenerate curve: |gamma'({t})| = {speed:.3e} at a quadrature node")]
    DegenerateCurve { t: f64, speed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Interior,
    Exterior,
}

/// Three-valued classification of a point relative to a closed curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLocation {
    Inside,
    Outside,
    NearBoundary,
}

/// Side of the curve a point lies on, together with its distance to the curve.
#[derive(Debug, Clone, Copy)]
pub struct SidedDistance {
    pub side: Side,
    pub dist: f64,
}

#[derive(Debug, Clone)]
enum Shape {
    Circle { center: Point, radius: f64 },
    Starfish,
}

#[derive(Debug)]
struct CurveInner {
    shape: Shape,
    /// Positions at t = i / POLYLINE_SAMPLES, used for distance estimates.
    polyline: Vec<Point>,
}

/// A smooth closed curve parametrized counterclockwise over t in [0, 1).
///
/// The outward unit normal is the tangent rotated by -90 degrees; for a
/// counterclockwise parametrization it points out of the enclosed region.
#[derive(Debug, Clone)]
pub struct Curve(Arc<CurveInner>);

impl Curve {
    /// Counterclockwise circle. The parameter t = 0 sits at angle 0, so
    /// `position(0) = center + (radius, 0)`.
    pub fn circle(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::NonPositiveRadius(radius));
        }
        Ok(Self::new(Shape::Circle { center, radius }))
    }

    /// Five-armed starfish with radius 1/2 + (1/8) sin(10 pi t) at angle
    /// 2 pi t, centered at the origin. Fits inside [-0.8, 0.8]^2.
    pub fn starfish() -> Self {
        Self::new(Shape::Starfish)
    }

    fn new(shape: Shape) -> Self {
        let mut polyline = Vec::with_capacity(POLYLINE_SAMPLES);
        for i in 0..POLYLINE_SAMPLES {
            let t = i as f64 / POLYLINE_SAMPLES as f64;
            polyline.push(shape_position(&shape, t));
        }
        Curve(Arc::new(CurveInner { shape, polyline }))
    }

    pub fn position(&self, t: f64) -> Point {
        shape_position(&self.0.shape, t)
    }

    pub fn velocity(&self, t: f64) -> Vec2 {
        match &self.0.shape {
            Shape::Circle { radius, .. } => {
                let a = 2.0 * PI * t;
                Vec2::new(-radius * 2.0 * PI * a.sin(), radius * 2.0 * PI * a.cos())
            }
            Shape::Starfish => {
                let (r, dr) = starfish_radius(t);
                let a = 2.0 * PI * t;
                let (s, c) = a.sin_cos();
                Vec2::new(dr * c - r * 2.0 * PI * s, dr * s + r * 2.0 * PI * c)
            }
        }
    }

    pub fn acceleration(&self, t: f64) -> Vec2 {
        match &self.0.shape {
            Shape::Circle { radius, .. } => {
                let a = 2.0 * PI * t;
                let w = 2.0 * PI;
                Vec2::new(-radius * w * w * a.cos(), -radius * w * w * a.sin())
            }
            Shape::Starfish => {
                let (r, dr) = starfish_radius(t);
                let ddr = -12.5 * PI * PI * (10.0 * PI * t).sin();
                let a = 2.0 * PI * t;
                let w = 2.0 * PI;
                let (s, c) = a.sin_cos();
                Vec2::new(
                    ddr * c - 2.0 * dr * w * s - r * w * w * c,
                    ddr * s + 2.0 * dr * w * c - r * w * w * s,
                )
            }
        }
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.velocity(t).norm()
    }

    /// Unit tangent in the direction of increasing t.
    pub fn tangent(&self, t: f64) -> Vec2 {
        self.velocity(t).normalize()
    }

    /// Unit outward normal (tangent rotated by -90 degrees).
    pub fn normal(&self, t: f64) -> Vec2 {
        let tau = self.tangent(t);
        Vec2::new(tau.y, -tau.x)
    }

    /// Signed side and distance of `x` relative to the curve.
    pub fn sided_distance(&self, x: Point) -> SidedDistance {
        match &self.0.shape {
            Shape::Circle { center, radius } => {
                let r = (x - center).norm();
                SidedDistance {
                    side: if r < *radius { Side::Interior } else { Side::Exterior },
                    dist: (r - radius).abs(),
                }
            }
            Shape::Starfish => {
                let r = x.coords.norm();
                let theta = x.y.atan2(x.x);
                // Star-shaped: the ray from the origin crosses the curve once,
                // so the radial gap decides the side exactly.
                let rc = 0.5 + 0.125 * (5.0 * theta).sin();
                let gap = r - rc;
                let side = if gap < 0.0 { Side::Interior } else { Side::Exterior };
                // |gap| bounds the true distance from above and 0.5|gap| from
                // below (max slope of the radial function); only spend the
                // polyline scan when the gap is small.
                if gap.abs() > 0.25 {
                    SidedDistance { side, dist: gap.abs() }
                } else {
                    let mut d2 = f64::INFINITY;
                    for p in &self.0.polyline {
                        d2 = d2.min((x - p).norm_squared());
                    }
                    SidedDistance { side, dist: d2.sqrt() }
                }
            }
        }
    }

    /// Winding-number classification with a near-boundary band of absolute
    /// width `near_dist`.
    pub fn point_in_domain(&self, x: Point, near_dist: f64) -> PointLocation {
        let sd = self.sided_distance(x);
        if sd.dist < near_dist {
            PointLocation::NearBoundary
        } else if sd.side == Side::Interior {
            PointLocation::Inside
        } else {
            PointLocation::Outside
        }
    }

    /// `n` positions at equispaced parameters, e.g. for plotting.
    pub fn sample_polyline(&self, n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| self.position(i as f64 / n as f64))
            .collect()
    }
}

fn shape_position(shape: &Shape, t: f64) -> Point {
    match shape {
        Shape::Circle { center, radius } => {
            let a = 2.0 * PI * t;
            Point::new(center.x + radius * a.cos(), center.y + radius * a.sin())
        }
        Shape::Starfish => {
            let (r, _) = starfish_radius(t);
            let a = 2.0 * PI * t;
            Point::new(r * a.cos(), r * a.sin())
        }
    }
}

/// Radius and its t-derivative for the starfish.
fn starfish_radius(t: f64) -> (f64, f64) {
    let r = 0.5 + 0.125 * (10.0 * PI * t).sin();
    let dr = 1.25 * PI * (10.0 * PI * t).cos();
    (r, dr)
}

/// One quadrature node of a panel discretization.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryNode {
    pub t: f64,
    pub position: Point,
    pub normal: Vec2,
    /// Gauss-Legendre weight times parametrization speed times panel length.
    pub weight: f64,
    pub speed: f64,
    pub panel: usize,
}

#[derive(Debug)]
struct DiscInner {
    curve: Curve,
    nodes: Vec<BoundaryNode>,
    /// Arclength of each panel (sum of its node weights).
    panel_arclength: Vec<f64>,
    nodes_per_panel: usize,
    h_max: f64,
}

/// Composite Gauss-Legendre panel discretization of a closed curve: equal
/// parameter-length panels with q nodes each.
#[derive(Debug, Clone)]
pub struct BoundaryDiscretization(Arc<DiscInner>);

impl BoundaryDiscretization {
    pub fn build_panels(
        curve: &Curve,
        n_panels: usize,
        q: usize,
    ) -> Result<Self, GeometryError> {
        if n_panels < 4 {
            return Err(GeometryError::TooCoarse {
                what: "panels",
                min: 4,
                got: n_panels,
            });
        }
        if q < 4 {
            return Err(GeometryError::TooCoarse {
                what: "nodes per panel",
                min: 4,
                got: q,
            });
        }
        let (xi, w) = gauss_legendre(q);
        let dt = 1.0 / n_panels as f64;
        let mut nodes = Vec::with_capacity(n_panels * q);
        let mut panel_arclength = vec![0.0; n_panels];
        for panel in 0..n_panels {
            let t0 = panel as f64 * dt;
            for j in 0..q {
                let t = t0 + xi[j] * dt;
                let speed = curve.speed(t);
                if speed < 1e-12 {
                    return Err(GeometryError::DegenerateCurve { t, speed });
                }
                let weight = w[j] * dt * speed;
                panel_arclength[panel] += weight;
                nodes.push(BoundaryNode {
                    t,
                    position: curve.position(t),
                    normal: curve.normal(t),
                    weight,
                    speed,
                    panel,
                });
            }
        }
        let h_max = panel_arclength.iter().cloned().fold(0.0, f64::max);
        Ok(BoundaryDiscretization(Arc::new(DiscInner {
            curve: curve.clone(),
            nodes,
            panel_arclength,
            nodes_per_panel: q,
            h_max,
        })))
    }

    pub fn curve(&self) -> &Curve {
        &self.0.curve
    }

    pub fn nodes(&self) -> &[BoundaryNode] {
        &self.0.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.0.nodes.len()
    }

    pub fn n_panels(&self) -> usize {
        self.0.panel_arclength.len()
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.0.nodes_per_panel
    }

    /// Maximum panel arclength; the characteristic boundary mesh size.
    pub fn h_ie(&self) -> f64 {
        self.0.h_max
    }

    pub fn panel_arclength(&self, panel: usize) -> f64 {
        self.0.panel_arclength[panel]
    }

    /// Arclength estimate: sum of all quadrature weights.
    pub fn arclength(&self) -> f64 {
        self.0.nodes.iter().map(|n| n.weight).sum()
    }

    /// Node spacing scale near node `i`: its panel's arclength / q.
    pub fn local_spacing(&self, i: usize) -> f64 {
        self.0.panel_arclength[self.0.nodes[i].panel] / self.0.nodes_per_panel as f64
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: Point) -> usize {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (i, n) in self.0.nodes.iter().enumerate() {
            let d2 = (x - n.position).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        best
    }

    /// Side/near classification of `x` with the near band defined as
    /// `near_factor` times the local node spacing.
    pub fn classify(&self, x: Point, near_factor: f64) -> (Side, bool) {
        let sd = self.0.curve.sided_distance(x);
        // Cheap reject: the band cannot be wider than near_factor * max spacing.
        let max_spacing = self.0.h_max / self.0.nodes_per_panel as f64;
        if sd.dist >= near_factor * max_spacing {
            return (sd.side, false);
        }
        let spacing = self.local_spacing(self.nearest_node(x));
        (sd.side, sd.dist < near_factor * spacing)
    }

    /// Three-valued classification with the default band factor.
    pub fn point_in_domain(&self, x: Point) -> PointLocation {
        let (side, near) = self.classify(x, NEAR_BAND_FACTOR);
        if near {
            PointLocation::NearBoundary
        } else if side == Side::Interior {
            PointLocation::Inside
        } else {
            PointLocation::Outside
        }
    }

    /// Same panels, `factor` times as many Gauss-Legendre nodes per panel.
    pub fn refined(&self, factor: usize) -> Result<Self, GeometryError> {
        Self::build_panels(
            &self.0.curve,
            self.n_panels(),
            self.0.nodes_per_panel * factor.max(1),
        )
    }
}

/// Gauss-Legendre nodes and weights on [0, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess (Chebyshev-like) for the i-th root on [-1, 1].
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(z) and derivative via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        let wi = 1.0 / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent arclength oracle: adaptive Simpson on the speed.
    fn simpson_arclength(curve: &Curve, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(c: &Curve, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (c.speed(a) + 4.0 * c.speed(0.5 * (a + b)) + c.speed(b))
        }
        fn recurse(c: &Curve, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(c, a, m);
            let right = simpson(c, m, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                recurse(c, a, m, left, 0.5 * tol, depth - 1)
                    + recurse(c, m, b, right, 0.5 * tol, depth - 1)
            }
        }
        recurse(curve, a, b, simpson(curve, a, b), tol, 40)
    }

    /// Independent winding-number oracle: crossing count on a dense polyline.
    fn winding_inside(curve: &Curve, x: Point) -> bool {
        let n = 8192;
        let pts = curve.sample_polyline(n);
        let mut crossings = 0;
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            if (a.y > x.y) != (b.y > x.y) {
                let xi = a.x + (x.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if xi > x.x {
                    crossings += 1;
                }
            }
        }
        crossings % 2 == 1
    }

    #[test]
    fn circle_conventions() {
        let c = Curve::circle(Point::new(0.0, 0.0), 0.5).unwrap();
        let p0 = c.position(0.0);
        assert_relative_eq!(p0.x, 0.5, epsilon = 1e-15);
        assert_relative_eq!(p0.y, 0.0, epsilon = 1e-15);
        let unit = Curve::circle(Point::new(0.0, 0.0), 1.0).unwrap();
        let n = unit.normal(0.25);
        assert_relative_eq!(n.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(n.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_rejects_bad_radius() {
        assert!(Curve::circle(Point::new(0.0, 0.0), 0.0).is_err());
        assert!(Curve::circle(Point::new(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn circle_arclength() {
        let c = Curve::circle(Point::new(0.0, 0.0), 0.5).unwrap();
        let d = BoundaryDiscretization::build_panels(&c, 8, 8).unwrap();
        assert!((d.arclength() - PI).abs() < 1e-10);
        let d = BoundaryDiscretization::build_panels(&c, 16, 8).unwrap();
        assert!((d.arclength() - PI).abs() < 1e-12);
    }

    #[test]
    fn unit_circle_sum_of_weights_and_radii() {
        let c = Curve::circle(Point::new(0.0, 0.0), 1.0).unwrap();
        let d = BoundaryDiscretization::build_panels(&c, 16, 8).unwrap();
        assert!((d.arclength() - 2.0 * PI).abs() < 1e-12);
        for n in d.nodes() {
            assert!((n.position.coords.norm() - 1.0).abs() < 1e-14);
            assert!((n.normal.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_is_closed_and_periodic() {
        for c in [Curve::circle(Point::new(0.2, -0.1), 0.7).unwrap(), Curve::starfish()] {
            assert!((c.position(0.0) - c.position(1.0)).norm() < 1e-13);
            assert!((c.position(0.3) - c.position(1.3)).norm() < 1e-12);
        }
    }

    #[test]
    fn starfish_shape() {
        let c = Curve::starfish();
        let p0 = c.position(0.0);
        // Radius form of the five-armed curve: r(0) = 1/2 at angle 0.
        assert_relative_eq!(p0.x, 0.5, epsilon = 1e-15);
        assert_relative_eq!(p0.y, 0.0, epsilon = 1e-15);
        // Radius from the centroid oscillates no more than 1/8 around 1/2.
        let n = 10_000;
        let pts = c.sample_polyline(n);
        let centroid = pts.iter().fold(Vec2::zeros(), |acc, p| acc + p.coords) / n as f64;
        assert!(centroid.norm() < 1e-3);
        let mut rmin = f64::INFINITY;
        let mut rmax = 0.0_f64;
        for p in &pts {
            let r = (p.coords - centroid).norm();
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        assert!(rmax <= 0.5 + 0.125 + 1e-6);
        assert!(rmin >= 0.5 - 0.125 - 1e-6);
        assert!((rmax - 0.625).abs() < 1e-3);
        assert!((rmin - 0.375).abs() < 1e-3);
        // Regularity at sampled parameters.
        for i in 0..1000 {
            assert!(c.speed(i as f64 / 1000.0) > 0.1);
        }
    }

    #[test]
    fn starfish_h_ie_halves_under_panel_doubling() {
        let c = Curve::starfish();
        let d20 = BoundaryDiscretization::build_panels(&c, 20, 8).unwrap();
        let d40 = BoundaryDiscretization::build_panels(&c, 40, 8).unwrap();
        // Panels have equal parameter length, so the max-arclength panel
        // tracks the peak parametrization speed only asymptotically; the
        // ratio approaches 2 from below.
        let ratio = d20.h_ie() / d40.h_ie();
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
        let d80 = BoundaryDiscretization::build_panels(&c, 80, 8).unwrap();
        let ratio_fine = d40.h_ie() / d80.h_ie();
        assert!((ratio_fine - 2.0).abs() < 0.1, "ratio {ratio_fine}");
    }

    #[test]
    fn panels_partition_parameter_interval() {
        let c = Curve::starfish();
        let d = BoundaryDiscretization::build_panels(&c, 10, 5).unwrap();
        assert_eq!(d.n_nodes(), 50);
        // Nodes are strictly increasing in t and confined to their panels.
        for (i, n) in d.nodes().iter().enumerate() {
            let lo = n.panel as f64 / 10.0;
            assert!(n.t > lo && n.t < lo + 0.1);
            if i > 0 {
                assert!(n.t > d.nodes()[i - 1].t);
            }
        }
    }

    #[test]
    fn build_panels_validates_inputs() {
        let c = Curve::starfish();
        assert!(BoundaryDiscretization::build_panels(&c, 3, 8).is_err());
        assert!(BoundaryDiscretization::build_panels(&c, 8, 3).is_err());
    }

    #[test]
    fn quadrature_exactness_per_panel() {
        // With weights w_i = w_gl * dt * speed, dividing the speed back out
        // integrates polynomials in t of degree <= 2q-1 exactly per panel.
        let c = Curve::starfish();
        let q = 6;
        let d = BoundaryDiscretization::build_panels(&c, 8, q).unwrap();
        let dt = 1.0 / 8.0;
        for k in 0..(2 * q) {
            let num: f64 = d
                .nodes()
                .iter()
                .filter(|n| n.panel == 2)
                .map(|n| n.weight / n.speed * n.t.powi(k as i32))
                .sum();
            let (a, b): (f64, f64) = (2.0 * dt, 3.0 * dt);
            let exact = (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0);
            assert!((num - exact).abs() < 1e-12, "degree {k}: {num} vs {exact}");
        }
    }

    #[test]
    fn normals_are_unit_and_orthogonal_to_tangent() {
        for c in [Curve::circle(Point::new(0.1, 0.3), 0.4).unwrap(), Curve::starfish()] {
            let d = BoundaryDiscretization::build_panels(&c, 12, 8).unwrap();
            for n in d.nodes() {
                assert!((n.normal.norm() - 1.0).abs() < 1e-12);
                assert!(n.normal.dot(&c.tangent(n.t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outward_normal_points_outside() {
        for c in [Curve::circle(Point::new(0.0, 0.0), 0.5).unwrap(), Curve::starfish()] {
            for i in 0..40 {
                let t = i as f64 / 40.0;
                let x = c.position(t) + 1e-3 * c.normal(t);
                assert!(!winding_inside(&c, x), "t = {t}");
                let y = c.position(t) - 1e-3 * c.normal(t);
                assert!(winding_inside(&c, y), "t = {t}");
            }
        }
    }

    #[test]
    fn classification_matches_winding_oracle() {
        let c = Curve::starfish();
        let mut checked = 0;
        for i in 0..27 {
            for j in 0..27 {
                let x = Point::new(-0.9 + i as f64 / 15.0, -0.9 + j as f64 / 15.0);
                let sd = c.sided_distance(x);
                if sd.dist < 1e-3 {
                    continue;
                }
                checked += 1;
                assert_eq!(sd.side == Side::Interior, winding_inside(&c, x), "{x:?}");
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn point_in_domain_examples() {
        let c = Curve::circle(Point::new(0.0, 0.0), 0.5).unwrap();
        let d = BoundaryDiscretization::build_panels(&c, 16, 8).unwrap();
        assert_eq!(d.point_in_domain(Point::new(0.0, 0.0)), PointLocation::Inside);
        assert_eq!(d.point_in_domain(Point::new(2.0, 2.0)), PointLocation::Outside);
        // Node spacing is pi / 128; 1e-4 is well inside a 2x band.
        assert_eq!(
            d.point_in_domain(Point::new(0.5 + 1e-4, 0.0)),
            PointLocation::NearBoundary
        );
        let spacing = d.local_spacing(d.nearest_node(Point::new(0.5, 0.0)));
        assert_relative_eq!(spacing, PI / 128.0, epsilon = 1e-6);
    }

    #[test]
    fn starfish_arclength_refines_at_high_order() {
        let c = Curve::starfish();
        let oracle = simpson_arclength(&c, 0.0, 1.0, 1e-14);
        let q = 4;
        let e1 = (BoundaryDiscretization::build_panels(&c, 12, q).unwrap().arclength() - oracle).abs();
        let e2 = (BoundaryDiscretization::build_panels(&c, 24, q).unwrap().arclength() - oracle).abs();
        let eoc = (e1 / e2).log2();
        assert!(eoc >= 2.0 * q as f64 - 1.0, "EOC {eoc}");
    }

    #[test]
    fn gauss_legendre_rules() {
        for n in [1, 2, 4, 8, 16, 32] {
            let (x, w) = gauss_legendre(n);
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() < 1e-14);
            // Exact for degree 2n-1 on [0, 1].
            let k = 2 * n - 1;
            let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            assert!((num - 1.0 / (k as f64 + 1.0)).abs() < 1e-13, "n = {n}");
        }
    }
}
