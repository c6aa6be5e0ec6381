//! Laplace layer potentials: kernels, direct (far-field) quadrature
//! evaluation, QBX on-/near-surface evaluation, principal-value operator
//! matrices, and the smooth domain indicator.

mod qbx;

pub use qbx::{eval_qbx, onsurface_matrix, PvKind, QbxConfig, Upsampled};
pub(crate) use qbx::LagrangeBasis;

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{
    BoundaryDiscretization, GeometryError, Point, Side, Vec2, NEAR_BAND_FACTOR,
};

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("kernel evaluated at coincident target and source points")]
    CoincidentPoints,
    #[error("density has {got} values but the discretization has {expected} nodes")]
    DensityLength { expected: usize, got: usize },
    #[error("density contains a non-finite value at index {0}")]
    NonFiniteDensity(usize),
    #[error(
        "target {index} at distance {dist:.3e} is inside the near band ({threshold:.3e}); \
         evaluate it with eval_qbx"
    )]
    TargetInNearBand { index: usize, dist: f64, threshold: f64 },
    #[error("target {index} lies outside the expansion disk; it is not in the near band")]
    TargetOutsideExpansion { index: usize },
    #[error("target normals are required for the normal-derivative kernel")]
    MissingTargetNormals,
    #[error(
        "QBX expansion center for panel {panel} falls on the wrong side of the curve; \
         the discretization is too coarse there"
    )]
    CenterOnWrongSide { panel: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which layer potential kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// G(x, x0) = -(2 pi)^-1 log |x - x0|.
    SingleLayer,
    /// grad_{x0} G . n(x0).
    DoubleLayer,
    /// n(x) . grad_x G.
    SingleLayerNormalDeriv,
}

/// One-sided limit or principal value for on-surface evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    Interior,
    Exterior,
    PrincipalValue,
}

impl Limit {
    pub fn side(self) -> Option<Side> {
        match self {
            Limit::Interior => Some(Side::Interior),
            Limit::Exterior => Some(Side::Exterior),
            Limit::PrincipalValue => None,
        }
    }
}

/// Nystrom density samples at the nodes of one boundary discretization.
#[derive(Debug, Clone)]
pub struct DensityVector {
    disc: BoundaryDiscretization,
    values: Vec<f64>,
}

impl DensityVector {
    pub fn new(disc: BoundaryDiscretization, values: Vec<f64>) -> Result<Self, PotentialError> {
        if values.len() != disc.n_nodes() {
            return Err(PotentialError::DensityLength {
                expected: disc.n_nodes(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PotentialError::NonFiniteDensity(i));
        }
        Ok(DensityVector { disc, values })
    }

    /// Density that is one at every node.
    pub fn unit(disc: BoundaryDiscretization) -> Self {
        let n = disc.n_nodes();
        DensityVector { disc, values: vec![1.0; n] }
    }

    /// Sample a function of position at the nodes.
    pub fn from_fn(disc: BoundaryDiscretization, f: impl Fn(Point) -> f64) -> Self {
        let values = disc.nodes().iter().map(|n| f(n.position)).collect();
        DensityVector { disc, values }
    }

    pub fn disc(&self) -> &BoundaryDiscretization {
        &self.disc
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Pointwise kernel of the requested layer potential.
///
/// The target normal is only consulted for the normal-derivative kernel.
pub fn kernel(
    kind: LayerKind,
    target: Point,
    source: Point,
    source_normal: Vec2,
    target_normal: Option<Vec2>,
) -> Result<f64, PotentialError> {
    let d = target - source;
    let r2 = d.norm_squared();
    if r2 == 0.0 {
        return Err(PotentialError::CoincidentPoints);
    }
    match kind {
        LayerKind::SingleLayer => Ok(-r2.ln() / (4.0 * PI)),
        LayerKind::DoubleLayer => Ok(d.dot(&source_normal) / (2.0 * PI * r2)),
        LayerKind::SingleLayerNormalDeriv => {
            let nt = target_normal.ok_or(PotentialError::MissingTargetNormals)?;
            Ok(-nt.dot(&d) / (2.0 * PI * r2))
        }
    }
}

fn validate_density(
    disc: &BoundaryDiscretization,
    density: &DensityVector,
) -> Result<(), PotentialError> {
    if density.values.len() != disc.n_nodes() {
        return Err(PotentialError::DensityLength {
            expected: disc.n_nodes(),
            got: density.values.len(),
        });
    }
    Ok(())
}

/// Plain quadrature sum over the nodes, for targets well separated from the
/// curve. Targets inside the near band are rejected; use [`eval_qbx`] there.
pub fn eval_direct(
    disc: &BoundaryDiscretization,
    density: &DensityVector,
    kind: LayerKind,
    targets: &[Point],
    target_normals: Option<&[Vec2]>,
) -> Result<Vec<f64>, PotentialError> {
    validate_density(disc, density)?;
    if kind == LayerKind::SingleLayerNormalDeriv && target_normals.is_none() {
        return Err(PotentialError::MissingTargetNormals);
    }
    for (i, x) in targets.iter().enumerate() {
        let (_, near) = disc.classify(*x, NEAR_BAND_FACTOR);
        if near {
            let sd = disc.curve().sided_distance(*x);
            let threshold =
                NEAR_BAND_FACTOR * disc.local_spacing(disc.nearest_node(*x));
            return Err(PotentialError::TargetInNearBand { index: i, dist: sd.dist, threshold });
        }
    }
    Ok(eval_direct_unchecked(disc, density.values(), kind, targets, target_normals))
}

/// Direct quadrature sum without the near-band validation; callers must have
/// classified the targets already.
pub(crate) fn eval_direct_unchecked(
    disc: &BoundaryDiscretization,
    values: &[f64],
    kind: LayerKind,
    targets: &[Point],
    target_normals: Option<&[Vec2]>,
) -> Vec<f64> {
    use rayon::prelude::*;
    let nodes = disc.nodes();
    targets
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut acc = 0.0;
            match kind {
                LayerKind::SingleLayer => {
                    for (n, g) in nodes.iter().zip(values) {
                        let r2 = (x - n.position).norm_squared();
                        acc += n.weight * g * (-r2.ln() / (4.0 * PI));
                    }
                }
                LayerKind::DoubleLayer => {
                    for (n, g) in nodes.iter().zip(values) {
                        let d = x - n.position;
                        let r2 = d.norm_squared();
                        acc += n.weight * g * d.dot(&n.normal) / (2.0 * PI * r2);
                    }
                }
                LayerKind::SingleLayerNormalDeriv => {
                    let nt = target_normals.expect("validated")[i];
                    for (n, g) in nodes.iter().zip(values) {
                        let d = x - n.position;
                        let r2 = d.norm_squared();
                        acc -= n.weight * g * nt.dot(&d) / (2.0 * PI * r2);
                    }
                }
            }
            acc
        })
        .collect()
}

/// Combined double + single layer sum (the exterior representation kernel),
/// in one pass over the nodes.
pub(crate) fn eval_direct_combined(
    disc: &BoundaryDiscretization,
    values_d: &[f64],
    coeff_d: f64,
    values_s: &[f64],
    coeff_s: f64,
    targets: &[Point],
) -> Vec<f64> {
    use rayon::prelude::*;
    let nodes = disc.nodes();
    targets
        .par_iter()
        .map(|x| {
            let mut acc = 0.0;
            for (j, n) in nodes.iter().enumerate() {
                let d = x - n.position;
                let r2 = d.norm_squared();
                acc += coeff_d * n.weight * values_d[j] * d.dot(&n.normal) / (2.0 * PI * r2);
                acc += coeff_s * n.weight * values_s[j] * (-r2.ln() / (4.0 * PI));
            }
            acc
        })
        .collect()
}

/// Smooth indicator of the enclosed region: the negative double layer
/// potential of the unit density. Routes far targets through direct
/// quadrature and near targets through one-sided QBX.
pub fn indicator(
    disc: &BoundaryDiscretization,
    targets: &[Point],
    cfg: &QbxConfig,
) -> Result<Vec<f64>, PotentialError> {
    let unit = DensityVector::unit(disc.clone());
    let mut out = vec![0.0; targets.len()];
    let mut far = Vec::new();
    let mut near_int = Vec::new();
    let mut near_ext = Vec::new();
    for (i, x) in targets.iter().enumerate() {
        let (side, near) = disc.classify(*x, NEAR_BAND_FACTOR);
        if !near {
            far.push((i, *x));
        } else if side == Side::Interior {
            near_int.push((i, *x));
        } else {
            near_ext.push((i, *x));
        }
    }
    let far_pts: Vec<Point> = far.iter().map(|&(_, x)| x).collect();
    let far_vals =
        eval_direct_unchecked(disc, unit.values(), LayerKind::DoubleLayer, &far_pts, None);
    for (&(i, _), v) in far.iter().zip(&far_vals) {
        out[i] = -v;
    }
    for (group, limit) in [(near_int, Limit::Interior), (near_ext, Limit::Exterior)] {
        if group.is_empty() {
            continue;
        }
        let pts: Vec<Point> = group.iter().map(|&(_, x)| x).collect();
        let vals = eval_qbx(disc, &unit, LayerKind::DoubleLayer, &pts, limit, cfg, None)?;
        for (&(i, _), v) in group.iter().zip(&vals) {
            out[i] = -v;
        }
    }
    Ok(out)
}

/// Nystrom extension of a solved second-kind density to arbitrary boundary
/// parameters: gamma(x) = 2 (D^h gamma)(x) - 2 rhs(x), where rhs is the
/// right-hand side of the interior integral equation. Used as a cross-check
/// against per-panel interpolation; targets should not coincide with nodes.
pub fn extend_density_second_kind(
    disc: &BoundaryDiscretization,
    density: &DensityVector,
    rhs: impl Fn(Point) -> f64,
    params: &[f64],
) -> Result<Vec<f64>, PotentialError> {
    validate_density(disc, density)?;
    let curve = disc.curve();
    let targets: Vec<Point> = params.iter().map(|&t| curve.position(t)).collect();
    for (i, x) in targets.iter().enumerate() {
        let near = disc
            .nodes()
            .iter()
            .any(|n| (x - n.position).norm() < 1e-10);
        if near {
            return Err(PotentialError::TargetInNearBand {
                index: i,
                dist: 0.0,
                threshold: 1e-10,
            });
        }
    }
    let sums =
        eval_direct_unchecked(disc, density.values(), LayerKind::DoubleLayer, &targets, None);
    Ok(targets
        .iter()
        .zip(&sums)
        .map(|(x, s)| 2.0 * s - 2.0 * rhs(*x))
        .collect())
}
