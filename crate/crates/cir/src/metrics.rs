//! Reference implementations of the loss terms and evaluation metrics used
//! around the deep-learning baseline: chamfer distance, Jaccard index, mesh
//! regularizers, cross entropies, the weighted total loss, ROC AUC, and
//! confusion-matrix metrics. All functions are pure with fixed summation
//! order, so results are bit-stable across runs.

use crate::surface::TriMesh;
use crate::volume::MaskVolume;
use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("point set is empty")]
    EmptySet,
    #[error("volume dims differ: {a:?} vs {b:?}")]
    DimMismatch {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("missing loss component '{0}'")]
    MissingComponent(&'static str),
    #[error("AUC needs at least one positive and one negative label")]
    DegenerateLabels,
}

/// Mean-weighted symmetric squared chamfer distance:
/// `CD = mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2`.
///
/// The directional sums use squared distances and per-direction mean
/// weighting; reported magnitudes depend on this convention.
pub fn chamfer_weighted_symmetric(
    a: &[Vector3<f64>],
    b: &[Vector3<f64>],
) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let directed = |from: &[Vector3<f64>], to: &[Vector3<f64>]| -> f64 {
        let mut sum = 0.0;
        for p in from {
            let mut best = f64::INFINITY;
            for q in to {
                let d = (p - q).norm_squared();
                if d < best {
                    best = d;
                }
            }
            sum += best;
        }
        sum / from.len() as f64
    };
    Ok(directed(a, b) + directed(b, a))
}

/// Intersection-over-union of one class between two same-shaped volumes.
/// Defined as 1 when the class is absent from both.
pub fn jaccard(a: &MaskVolume, b: &MaskVolume, class_id: u8) -> Result<f64, MetricsError> {
    if a.dims() != b.dims() {
        return Err(MetricsError::DimMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        let fa = x == class_id;
        let fb = y == class_id;
        if fa && fb {
            inter += 1;
        }
        if fa || fb {
            union += 1;
        }
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Mean squared distance of each vertex to its one-ring neighbor mean.
pub fn laplacian_loss(mesh: &TriMesh) -> f64 {
    let nbrs = mesh.vertex_neighbors();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, nb) in nbrs.iter().enumerate() {
        if nb.is_empty() {
            continue;
        }
        let mut mean = Vector3::zeros();
        for &j in nb {
            mean += mesh.vertices[j as usize];
        }
        mean /= nb.len() as f64;
        sum += (mesh.vertices[i] - mean).norm_squared();
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean squared edge length.
pub fn edge_loss(mesh: &TriMesh) -> f64 {
    let edges = mesh.edges();
    if edges.is_empty() {
        return 0.0;
    }
    let sum: f64 = edges
        .iter()
        .map(|&(u, v)| (mesh.vertices[u as usize] - mesh.vertices[v as usize]).norm_squared())
        .sum();
    sum / edges.len() as f64
}

/// Mean `1 - cos(theta)` between the normals of faces adjacent across each
/// interior edge.
pub fn normal_consistency_loss(mesh: &TriMesh) -> f64 {
    use std::collections::HashMap;
    let mut edge_faces: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (fi, &[a, b, c]) in mesh.faces.iter().enumerate() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            edge_faces.entry((u.min(v), u.max(v))).or_default().push(fi);
        }
    }
    let mut pairs: Vec<(usize, usize)> = edge_faces
        .values()
        .filter(|fs| fs.len() == 2)
        .map(|fs| (fs[0], fs[1]))
        .collect();
    pairs.sort_unstable();
    if pairs.is_empty() {
        return 0.0;
    }
    let normals: Vec<Vector3<f64>> = (0..mesh.face_count()).map(|f| mesh.face_normal(f)).collect();
    let sum: f64 = pairs
        .iter()
        .map(|&(f, g)| 1.0 - normals[f].dot(&normals[g]))
        .sum();
    sum / pairs.len() as f64
}

/// Mean negative log likelihood of per-item class distributions; chosen-class
/// probabilities are clamped at 1e-7 before the log.
pub fn cross_entropy(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64, MetricsError> {
    if probs.len() != labels.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} distributions vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(MetricsError::ShapeMismatch("no items".into()));
    }
    let mut sum = 0.0;
    for (dist, &label) in probs.iter().zip(labels) {
        let p = *dist.get(label).ok_or_else(|| {
            MetricsError::ShapeMismatch(format!(
                "label {label} out of range for {}-class distribution",
                dist.len()
            ))
        })?;
        sum += -p.clamp(1e-7, 1.0).ln();
    }
    Ok(sum / probs.len() as f64)
}

/// Binary cross entropy of one probability against a {0,1} label.
pub fn bce(p: f64, y: u8) -> f64 {
    let p = p.clamp(1e-7, 1.0 - 1e-7);
    if y != 0 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Loss-term weights of the training objective; the defaults are the
/// baseline's published weighting (regularizers at 0.1 except edge).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossWeights {
    pub w_bce: f64,
    pub w_ce: f64,
    pub w_chamfer_nodule: f64,
    pub w_chamfer_spiculation: f64,
    pub w_chamfer_lobulation: f64,
    pub w_laplacian: f64,
    pub w_edge: f64,
    pub w_normal: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_bce: 1.0,
            w_ce: 1.0,
            w_chamfer_nodule: 1.0,
            w_chamfer_spiculation: 1.0,
            w_chamfer_lobulation: 1.0,
            w_laplacian: 0.1,
            w_edge: 1.0,
            w_normal: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let all = [
            self.w_bce,
            self.w_ce,
            self.w_chamfer_nodule,
            self.w_chamfer_spiculation,
            self.w_chamfer_lobulation,
            self.w_laplacian,
            self.w_edge,
            self.w_normal,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MetricsError::ShapeMismatch(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Named scalar loss terms; every one must be present for the total.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossComponents {
    pub bce: Option<f64>,
    pub ce: Option<f64>,
    pub chamfer_nodule: Option<f64>,
    pub chamfer_spiculation: Option<f64>,
    pub chamfer_lobulation: Option<f64>,
    pub laplacian: Option<f64>,
    pub edge: Option<f64>,
    pub normal_consistency: Option<f64>,
}

/// Weighted sum of all loss terms, accumulated exactly as the published
/// equation groups them: the prediction and chamfer terms left to right,
/// plus a separately summed regularization subtotal.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> Result<f64, MetricsError> {
    w.validate()?;
    let get = |v: Option<f64>, name: &'static str| -> Result<f64, MetricsError> {
        let x = v.ok_or(MetricsError::MissingComponent(name))?;
        if !x.is_finite() {
            return Err(MetricsError::ShapeMismatch(format!("{name} is not finite")));
        }
        Ok(x)
    };
    let mut total = w.w_bce * get(c.bce, "bce")?;
    total += w.w_ce * get(c.ce, "ce")?;
    total += w.w_chamfer_nodule * get(c.chamfer_nodule, "chamfer_nodule")?;
    total += w.w_chamfer_spiculation * get(c.chamfer_spiculation, "chamfer_spiculation")?;
    total += w.w_chamfer_lobulation * get(c.chamfer_lobulation, "chamfer_lobulation")?;
    let mut regularization = w.w_laplacian * get(c.laplacian, "laplacian")?;
    regularization += w.w_edge * get(c.edge, "edge")?;
    regularization += w.w_normal * get(c.normal_consistency, "normal_consistency")?;
    Ok(total + regularization)
}

/// Per-case scores, binary labels, and the decision threshold.
#[derive(Debug, Clone)]
pub struct BinaryOutcomes {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub threshold: f64,
}

impl BinaryOutcomes {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>, threshold: f64) -> Result<Self, MetricsError> {
        if scores.len() != labels.len() {
            return Err(MetricsError::ShapeMismatch(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        Ok(Self {
            scores,
            labels,
            threshold,
        })
    }
}

/// Binarize a 1-5 radiologist malignancy score: positive iff RM > 3
/// (moderately to highly suspicious).
pub fn rm_binarize(score: f64) -> u8 {
    u8::from(score > 3.0)
}

/// Area under the ROC curve by the Mann-Whitney statistic with ties counted
/// one half, equivalent to trapezoidal integration of the ROC curve.
pub fn roc_auc(o: &BinaryOutcomes) -> Result<f64, MetricsError> {
    let pos = o.labels.iter().filter(|&&l| l != 0).count();
    let neg = o.labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::DegenerateLabels);
    }
    // average ranks over tie groups; rank sums stay exact half-integers
    let mut order: Vec<usize> = (0..o.scores.len()).collect();
    order.sort_by(|&i, &j| o.scores[i].total_cmp(&o.scores[j]));
    let mut rank = vec![0.0f64; o.scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && o.scores[order[j + 1]] == o.scores[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &order[i..=j] {
            rank[k] = avg;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = o
        .labels
        .iter()
        .zip(&rank)
        .filter(|(&l, _)| l != 0)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
}

/// Confusion-matrix metrics at the outcome threshold
/// (score >= threshold predicts positive). Ratios with a zero denominator
/// are defined as 0.
pub fn binary_metrics(o: &BinaryOutcomes) -> BinaryMetrics {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut tn = 0.0;
    let mut fal_n = 0.0;
    for (&s, &l) in o.scores.iter().zip(&o.labels) {
        let predicted = s >= o.threshold;
        match (predicted, l != 0) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fal_n += 1.0,
        }
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    BinaryMetrics {
        accuracy: ratio(tp + tn, tp + tn + fp + fal_n),
        sensitivity: ratio(tp, tp + fal_n),
        specificity: ratio(tn, tn + fp),
        f1: ratio(2.0 * tp, 2.0 * tp + fp + fal_n),
    }
}
