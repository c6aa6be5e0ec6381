//! Quadrature by expansion: on- and near-surface evaluation of the Laplace
//! layer potentials through local complex Taylor expansions about centers
//! displaced off the curve, with upsampled source quadrature for the
//! (non-singular) coefficient integrals.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::geometry::{BoundaryDiscretization, BoundaryNode, Point, Side, Vec2};
use crate::potentials::{DensityVector, LayerKind, Limit, PotentialError};

/// QBX parameters.
///
/// `offset_factor` is the expansion-center offset as a multiple of the local
/// node spacing (panel arclength / q); the default of 4 places centers half a
/// panel off the curve for q = 8. `upsampling` is the factor by which source
/// quadrature is refined for the coefficient integrals.
#[derive(Debug, Clone)]
pub struct QbxConfig {
    pub order: usize,
    pub offset_factor: f64,
    pub upsampling: usize,
}

impl QbxConfig {
    pub fn new(order: usize, offset_factor: f64, upsampling: usize) -> Self {
        assert!(order >= 1, "QBX order must be at least 1");
        assert!(offset_factor > 0.0, "center offset factor must be positive");
        assert!(upsampling >= 1, "upsampling factor must be at least 1");
        QbxConfig { order, offset_factor, upsampling }
    }

    pub fn with_order(order: usize) -> Self {
        Self::new(order, 4.0, 4)
    }
}

impl Default for QbxConfig {
    fn default() -> Self {
        Self::new(4, 4.0, 4)
    }
}

/// Principal-value operator selector for [`onsurface_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvKind {
    DoubleLayer,
    SingleLayer,
    SingleLayerNormalDeriv,
}

impl PvKind {
    fn layer(self) -> LayerKind {
        match self {
            PvKind::DoubleLayer => LayerKind::DoubleLayer,
            PvKind::SingleLayer => LayerKind::SingleLayer,
            PvKind::SingleLayerNormalDeriv => LayerKind::SingleLayerNormalDeriv,
        }
    }
}

fn cpt(p: Point) -> Complex64 {
    Complex64::new(p.x, p.y)
}

fn cvec(v: Vec2) -> Complex64 {
    Complex64::new(v.x, v.y)
}

/// Source geometry refined for coefficient quadrature, with the per-panel
/// Lagrange matrix that carries coarse node densities to the fine nodes.
pub struct Upsampled {
    fine: BoundaryDiscretization,
    /// (q_fine x q_coarse) interpolation on the reference panel.
    interp: DMatrix<f64>,
    q_coarse: usize,
    q_fine: usize,
}

impl Upsampled {
    pub fn new(disc: &BoundaryDiscretization, factor: usize) -> Result<Self, PotentialError> {
        let fine = disc.refined(factor)?;
        let q_coarse = disc.nodes_per_panel();
        let q_fine = fine.nodes_per_panel();
        let (coarse_ref, _) = crate::geometry::gauss_legendre(q_coarse);
        let (fine_ref, _) = crate::geometry::gauss_legendre(q_fine);
        let basis = LagrangeBasis::new(coarse_ref);
        let mut interp = DMatrix::zeros(q_fine, q_coarse);
        for (j, &x) in fine_ref.iter().enumerate() {
            let row = basis.eval_all(x);
            for k in 0..q_coarse {
                interp[(j, k)] = row[k];
            }
        }
        Ok(Upsampled { fine, interp, q_coarse, q_fine })
    }

    pub fn fine(&self) -> &BoundaryDiscretization {
        &self.fine
    }

    /// Interpolate coarse per-node values panel by panel onto the fine nodes.
    pub fn upsample(&self, values: &[f64]) -> Vec<f64> {
        let n_panels = self.fine.n_panels();
        let mut out = vec![0.0; n_panels * self.q_fine];
        for p in 0..n_panels {
            let coarse = &values[p * self.q_coarse..(p + 1) * self.q_coarse];
            for j in 0..self.q_fine {
                let mut s = 0.0;
                for k in 0..self.q_coarse {
                    s += self.interp[(j, k)] * coarse[k];
                }
                out[p * self.q_fine + j] = s;
            }
        }
        out
    }

    /// Carry a row of fine-node weights back to coarse-node weights (the
    /// transpose of [`Self::upsample`]).
    fn restrict_row(&self, fine_row: &[f64]) -> Vec<f64> {
        let n_panels = self.fine.n_panels();
        let mut out = vec![0.0; n_panels * self.q_coarse];
        for p in 0..n_panels {
            for j in 0..self.q_fine {
                let w = fine_row[p * self.q_fine + j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..self.q_coarse {
                    out[p * self.q_coarse + k] += w * self.interp[(j, k)];
                }
            }
        }
        out
    }
}

/// Barycentric Lagrange basis on a fixed set of nodes.
pub(crate) struct LagrangeBasis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: Vec<f64>) -> Self {
        let n = nodes.len();
        let mut weights = vec![1.0; n];
        for k in 0..n {
            for m in 0..n {
                if m != k {
                    weights[k] /= nodes[k] - nodes[m];
                }
            }
        }
        LagrangeBasis { nodes, weights }
    }

    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let n = self.nodes.len();
        if let Some(k) = self.nodes.iter().position(|&t| t == x) {
            let mut out = vec![0.0; n];
            out[k] = 1.0;
            return out;
        }
        let terms: Vec<f64> = (0..n).map(|k| self.weights[k] / (x - self.nodes[k])).collect();
        let denom: f64 = terms.iter().sum();
        terms.iter().map(|t| t / denom).collect()
    }

    pub fn eval_all_deriv(&self, x: f64) -> Vec<f64> {
        // Differentiate the barycentric form; fall back to a node formula if
        // x coincides with a node.
        let n = self.nodes.len();
        if let Some(i) = self.nodes.iter().position(|&t| t == x) {
            // l_k'(x_i) = (w_k / w_i) / (x_i - x_k) for k != i, and
            // l_i'(x_i) = -sum_{k != i} l_k'(x_i).
            let mut out = vec![0.0; n];
            let mut diag = 0.0;
            for k in 0..n {
                if k != i {
                    let v = (self.weights[k] / self.weights[i]) / (self.nodes[i] - self.nodes[k]);
                    out[k] = v;
                    diag -= v;
                }
            }
            out[i] = diag;
            return out;
        }
        let terms: Vec<f64> = (0..n).map(|k| self.weights[k] / (x - self.nodes[k])).collect();
        let s: f64 = terms.iter().sum();
        let sp: f64 = (0..n)
            .map(|k| -self.weights[k] / ((x - self.nodes[k]) * (x - self.nodes[k])))
            .sum();
        (0..n)
            .map(|k| {
                let tk = terms[k];
                let tkp = -self.weights[k] / ((x - self.nodes[k]) * (x - self.nodes[k]));
                (tkp * s - tk * sp) / (s * s)
            })
            .collect()
    }
}

/// Sum over expansion orders of W^k / A^{k+1} for k = 0..=order.
fn geometric_kernel_sum(a: Complex64, w: Complex64, order: usize) -> Complex64 {
    let inv = a.inv();
    let ratio = w * inv;
    let mut term = inv;
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..=order {
        acc += term;
        term *= ratio;
    }
    acc
}

/// Contribution factor of one fine source node to the expanded potential at
/// target `z` about center `c`; the potential is `sum_j factor_j * gamma_j`.
fn qbx_factor(
    kind: LayerKind,
    node: &BoundaryNode,
    c: Complex64,
    z: Complex64,
    target_normal: Option<Complex64>,
    order: usize,
) -> f64 {
    let zeta = cpt(node.position);
    let a = zeta - c;
    let w = z - c;
    match kind {
        LayerKind::DoubleLayer => {
            let s = geometric_kernel_sum(a, w, order);
            -node.weight / (2.0 * PI) * (cvec(node.normal) * s).re
        }
        LayerKind::SingleLayer => {
            // Re log(z - zeta) expanded about c: log|A| - sum_k (W/A)^k / k.
            let mut acc = -node.weight / (2.0 * PI) * a.norm().ln();
            let ratio = w * a.inv();
            let mut term = ratio;
            for k in 1..=order {
                acc += node.weight / (2.0 * PI) * (term / k as f64).re;
                term *= ratio;
            }
            acc
        }
        LayerKind::SingleLayerNormalDeriv => {
            let s = geometric_kernel_sum(a, w, order);
            let nt = target_normal.expect("target normal required for S'");
            node.weight / (2.0 * PI) * (nt * s).re
        }
    }
}

/// Expansion center for the node `anchor` on the requested side, validated to
/// lie on that side of the curve.
fn expansion_center(
    disc: &BoundaryDiscretization,
    anchor: usize,
    side: Side,
    cfg: &QbxConfig,
) -> Result<(Complex64, f64), PotentialError> {
    let node = &disc.nodes()[anchor];
    let r = cfg.offset_factor * disc.local_spacing(anchor);
    let sign = match side {
        Side::Interior => -1.0,
        Side::Exterior => 1.0,
    };
    let center = node.position + sign * r * node.normal;
    let sd = disc.curve().sided_distance(center);
    if sd.side != side {
        return Err(PotentialError::CenterOnWrongSide { panel: node.panel });
    }
    Ok((cpt(center), r))
}

fn eval_one_sided(
    disc: &BoundaryDiscretization,
    up: &Upsampled,
    gamma_fine: &[f64],
    kind: LayerKind,
    targets: &[Point],
    side: Side,
    cfg: &QbxConfig,
    target_normals: Option<&[Vec2]>,
) -> Result<Vec<f64>, PotentialError> {
    let fine_nodes = up.fine.nodes();
    // Resolve anchors and centers first so geometry errors surface cleanly.
    let mut anchors = Vec::with_capacity(targets.len());
    for (i, x) in targets.iter().enumerate() {
        let anchor = disc.nearest_node(*x);
        let (c, r) = expansion_center(disc, anchor, side, cfg)?;
        let w = cpt(*x) - c;
        if w.norm() > 1.2 * r {
            return Err(PotentialError::TargetOutsideExpansion { index: i });
        }
        anchors.push((c, cpt(*x)));
    }
    let out = anchors
        .par_iter()
        .enumerate()
        .map(|(i, &(c, z))| {
            let nt = target_normals.map(|ns| cvec(ns[i]));
            let mut acc = 0.0;
            for (node, g) in fine_nodes.iter().zip(gamma_fine) {
                acc += qbx_factor(kind, node, c, z, nt, cfg.order) * g;
            }
            acc
        })
        .collect();
    Ok(out)
}

/// Evaluate a layer potential at on-surface or near-surface targets through
/// QBX. One-sided limits return the limit from the stated side; the principal
/// value is the average of the two one-sided limits.
pub fn eval_qbx(
    disc: &BoundaryDiscretization,
    density: &DensityVector,
    kind: LayerKind,
    targets: &[Point],
    limit: Limit,
    cfg: &QbxConfig,
    target_normals: Option<&[Vec2]>,
) -> Result<Vec<f64>, PotentialError> {
    if density.values().len() != disc.n_nodes() {
        return Err(PotentialError::DensityLength {
            expected: disc.n_nodes(),
            got: density.values().len(),
        });
    }
    if kind == LayerKind::SingleLayerNormalDeriv && target_normals.is_none() {
        return Err(PotentialError::MissingTargetNormals);
    }
    let up = Upsampled::new(disc, cfg.upsampling)?;
    let gamma_fine = up.upsample(density.values());
    match limit.side() {
        Some(side) => {
            eval_one_sided(disc, &up, &gamma_fine, kind, targets, side, cfg, target_normals)
        }
        None => {
            let a = eval_one_sided(
                disc,
                &up,
                &gamma_fine,
                kind,
                targets,
                Side::Interior,
                cfg,
                target_normals,
            )?;
            let b = eval_one_sided(
                disc,
                &up,
                &gamma_fine,
                kind,
                targets,
                Side::Exterior,
                cfg,
                target_normals,
            )?;
            Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect())
        }
    }
}

/// Dense Nystrom matrix of a principal-value operator: entry (i, j) carries
/// node j's density to the principal value at node i. Assembled row by row
/// from two-sided QBX expansions through the upsampling interpolation.
pub fn onsurface_matrix(
    disc: &BoundaryDiscretization,
    kind: PvKind,
    cfg: &QbxConfig,
) -> Result<DMatrix<f64>, PotentialError> {
    let n = disc.n_nodes();
    let up = Upsampled::new(disc, cfg.upsampling)?;
    let fine_nodes = up.fine.nodes();
    let layer = kind.layer();

    // Validate all centers up front (errors name the offending panel).
    let mut centers = Vec::with_capacity(n);
    for i in 0..n {
        let ci = expansion_center(disc, i, Side::Interior, cfg)?;
        let ce = expansion_center(disc, i, Side::Exterior, cfg)?;
        centers.push((ci.0, ce.0));
    }

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let node = &disc.nodes()[i];
            let z = cpt(node.position);
            let nt = match layer {
                LayerKind::SingleLayerNormalDeriv => Some(cvec(node.normal)),
                _ => None,
            };
            let (c_int, c_ext) = centers[i];
            let mut fine_row = vec![0.0; fine_nodes.len()];
            for (j, src) in fine_nodes.iter().enumerate() {
                let a = qbx_factor(layer, src, c_int, z, nt, cfg.order);
                let b = qbx_factor(layer, src, c_ext, z, nt, cfg.order);
                fine_row[j] = 0.5 * (a + b);
            }
            up.restrict_row(&fine_row)
        })
        .collect();

    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}
