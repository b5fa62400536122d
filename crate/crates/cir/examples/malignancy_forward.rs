//! Malignancy classifier plumbing: assemble the 96000-value mesh feature
//! vector (geometric stand-in featurization), concatenate encoder features
//! into the 112384-value hybrid vector, save/load CIRW weights, and run the
//! softmax forward pass.
//!
//! Run with: `cargo run --example malignancy_forward [out_dir]`

use cir::malignancy::{
    concat_hybrid, geometric_standin_features, load_weights, mlp_forward, save_weights,
    MlpWeights, ENCODER_FEATURE_LEN,
};
use cir::phantom::{self, FixtureRng};
use cir::pipeline::{annotate_case, PipelineConfig};
use std::path::PathBuf;

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "cir-example-out/malignancy_forward".into())
        .into();
    std::fs::create_dir_all(&out).unwrap();

    // derive stand-in features from an annotated phantom
    let mask = phantom::cone_spiked_ball_mask(8.0, 8.0, 15.0, 1.0);
    let case = annotate_case(&mask, &PipelineConfig::default()).unwrap();
    let adm = cir::sphere::area_distortion(
        &case.mesh,
        &cir::sphere::SphericalMap {
            positions: case.spherical_map.positions.clone(),
            iterations_used: case.spherical_map.iterations_used,
            final_energy: case.spherical_map.final_energy,
            energies: case.spherical_map.energies.clone(),
        },
    )
    .unwrap();
    let features = geometric_standin_features(&case.mesh, &adm, &case.annotation).unwrap();
    println!(
        "mesh features: {} values from {} vertices ({:?})",
        features.values.len(),
        features.vertex_count_actual,
        features.source
    );

    let encoder = vec![0.0; ENCODER_FEATURE_LEN];
    let hybrid = concat_hybrid(&encoder, &features).unwrap();
    println!("hybrid features: {} values", hybrid.values.len());

    // small random network standing in for externally trained weights
    let mut rng = FixtureRng::new(42);
    let mut weights = MlpWeights::zeros(&[96_000, 512, 128, 2]);
    for layer in &mut weights.layers {
        let scale = (2.0 / layer.cols as f64).sqrt();
        for w in &mut layer.weights {
            *w = (rng.range(-scale, scale)) as f32;
        }
    }
    let path = out.join("random.cirw");
    save_weights(&weights, &path).unwrap();
    let reloaded = load_weights(&path).unwrap();
    assert_eq!(reloaded, weights);
    println!(
        "weights: [96000, 512, 128, 2] saved and reloaded exactly ({} bytes)",
        std::fs::metadata(&path).unwrap().len()
    );

    let prediction = mlp_forward(&features.values, &reloaded).unwrap();
    println!(
        "forward pass: p_benign {:.4}, p_malignant {:.4} (sum {:.6})",
        prediction.p_benign,
        prediction.p_malignant,
        prediction.p_benign + prediction.p_malignant
    );
    println!("note: stand-in features exercise the contract, not a trained model");
}
