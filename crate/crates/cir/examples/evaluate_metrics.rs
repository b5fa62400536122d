//! The evaluation and loss toolbox: chamfer distance, Jaccard index, mesh
//! regularizers, cross entropies, the weighted total loss, ROC AUC, and
//! confusion-matrix metrics.
//!
//! Run with: `cargo run --example evaluate_metrics`

use cir::metrics::{
    bce, binary_metrics, chamfer_weighted_symmetric, cross_entropy, edge_loss, jaccard,
    laplacian_loss, normal_consistency_loss, rm_binarize, roc_auc, total_loss, BinaryOutcomes,
    LossComponents, LossWeights,
};
use cir::phantom;
use cir::surface::marching_cubes;

fn main() {
    // chamfer between a surface and a decimated copy of itself
    let sphere = phantom::icosphere(3, 10.0);
    let coarse = phantom::icosphere(2, 10.0);
    let cd = chamfer_weighted_symmetric(&sphere.vertices, &coarse.vertices).unwrap();
    println!("chamfer(icosphere s3, icosphere s2) = {cd:.4} mm^2");

    // voxel overlap between a ball and a slightly larger ball
    let a = phantom::ball_mask(8.0, 1.0);
    let b = {
        let grid = a.dims();
        let c = 0.5 * (grid.0 as f64 - 1.0);
        cir::volume::MaskVolume::binary(grid, [1.0; 3], [0.0; 3], |i, j, k| {
            let d = ((i as f64 - c).powi(2) + (j as f64 - c).powi(2) + (k as f64 - c).powi(2))
                .sqrt();
            d <= 9.0
        })
    };
    println!("jaccard(ball r8, ball r9) = {:.3}", jaccard(&a, &b, 1).unwrap());

    // mesh regularizers on a marching-cubes surface
    let mesh = marching_cubes(&phantom::ball_mask(6.0, 1.0)).unwrap();
    println!(
        "regularizers: laplacian {:.4}, edge {:.4}, normal consistency {:.4}",
        laplacian_loss(&mesh),
        edge_loss(&mesh),
        normal_consistency_loss(&mesh)
    );

    // cross entropies
    let probs = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1]];
    println!(
        "cross entropy = {:.4}, bce(0.9, 1) = {:.4}",
        cross_entropy(&probs, &[0, 1]).unwrap(),
        bce(0.9, 1)
    );

    // the training objective with its published weights
    let components = LossComponents {
        bce: Some(0.32),
        ce: Some(0.54),
        chamfer_nodule: Some(0.011),
        chamfer_spiculation: Some(0.013),
        chamfer_lobulation: Some(0.016),
        laplacian: Some(0.21),
        edge: Some(0.08),
        normal_consistency: Some(0.35),
    };
    println!(
        "total loss = {:.4}",
        total_loss(&components, &LossWeights::default()).unwrap()
    );

    // malignancy classification metrics; radiologist 1-5 scores binarize at > 3
    let rm_scores = [2.0, 3.0, 4.0, 5.0, 1.0, 4.0, 3.0, 5.0];
    let labels: Vec<u8> = rm_scores.iter().map(|&s| rm_binarize(s)).collect();
    let model_scores = vec![0.2, 0.45, 0.8, 0.95, 0.1, 0.6, 0.55, 0.85];
    let outcomes = BinaryOutcomes::new(model_scores, labels, 0.5).unwrap();
    let m = binary_metrics(&outcomes);
    println!(
        "auc {:.3}, accuracy {:.3}, sensitivity {:.3}, specificity {:.3}, f1 {:.3}",
        roc_auc(&outcomes).unwrap(),
        m.accuracy,
        m.sensitivity,
        m.specificity,
        m.f1
    );
}
