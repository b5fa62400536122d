//! Acceptance suite: phantom reproduction and property checks for the whole
//! pipeline, one test per criterion. Every tolerance is pinned here, not
//! computed. Run with `cargo test --test acceptance -- --nocapture` to see
//! the per-criterion pass lines.

use cir::malignancy::{
    concat_hybrid, mesh_feature_index, mlp_forward, MeshFeatureVector, MlpWeights,
    ENCODER_FEATURE_LEN, FEATURES_PER_BRANCH, HYBRID_FEATURE_LEN, MESH_FEATURE_LEN,
    MESH_FEATURE_VERTICES,
};
use cir::metrics::{
    binary_metrics, chamfer_weighted_symmetric, jaccard, roc_auc, total_loss, BinaryOutcomes,
    LossComponents, LossWeights,
};
use cir::phantom::{self, FixtureRng};
use cir::pipeline::{annotate_case, PipelineConfig};
use cir::sphere::{area_distortion, parameterize, ParamOptions};
use cir::spikes::{detect_spikes, SpikeClass, SpikeOptions};
use cir::volume::MaskVolume;
use nalgebra::Vector3;
use std::time::Instant;

fn scaled(mut mesh: cir::surface::TriMesh, s: f64) -> cir::surface::TriMesh {
    for v in &mut mesh.vertices {
        *v *= s;
    }
    mesh
}

/// Sphere phantom: a featureless sphere must converge quickly, carry only
/// numerical-noise distortion, and yield zero spike detections.
#[test]
fn criterion_01_sphere_phantom() {
    let start = Instant::now();
    let mesh = scaled(phantom::icosphere(4, 1.0), 10.0);
    let smap = parameterize(&mesh, &ParamOptions::default()).unwrap();
    assert!(
        smap.iterations_used < ParamOptions::default().max_iters,
        "parameterization did not converge"
    );
    let adm = area_distortion(&mesh, &smap).unwrap();
    let max_eps = adm
        .epsilon_vertex
        .iter()
        .map(|e| e.abs())
        .fold(0.0, f64::max);
    assert!(max_eps < 0.05, "max |epsilon_v| = {max_eps}");
    let spikes = detect_spikes(&mesh, &adm, &SpikeOptions::default()).unwrap();
    assert_eq!(spikes.len(), 0, "spurious spikes: {}", spikes.len());
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "[PASS] sphere phantom: converged in {} sweeps, max|eps| {max_eps:.2e}, 0 spikes, {elapsed:?}",
        smap.iterations_used
    );
}

/// Cone phantom end-to-end: a sharp 15-degree spike on a ball mask yields
/// exactly one spiculation with its apex at the cone tip, and the voxelized
/// output contains spiculation labels.
#[test]
fn criterion_02_cone_phantom() {
    let mask = phantom::cone_spiked_ball_mask(10.0, 10.0, 15.0, 1.0);
    let case = annotate_case(&mask, &PipelineConfig::default()).unwrap();
    let spiculations: Vec<_> = case
        .annotation
        .spikes
        .iter()
        .filter(|s| s.class == SpikeClass::Spiculation)
        .collect();
    assert_eq!(spiculations.len(), 1, "expected exactly one spiculation");
    let spike = spiculations[0];
    let apex = case.mesh.vertices[spike.apex_id as usize];
    let tip_z = case
        .mesh
        .vertices
        .iter()
        .map(|v| v.z)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        (apex.z - tip_z).abs() < 1.5,
        "apex z {} is not the cone tip z {tip_z}",
        apex.z
    );
    assert!(
        case.masks.count_label(2) > 0,
        "voxelized output has no spiculation labels"
    );
    println!(
        "[PASS] cone phantom: 1 spiculation (apex angle {:.1} deg), apex at tip, {} spiculation voxels",
        spike.apex_angle_deg,
        case.masks.count_label(2)
    );
}

/// Bump phantom: a hemispherical bulge is detected and classified as exactly
/// one lobulation.
#[test]
fn criterion_03_bump_phantom() {
    let mesh = scaled(
        phantom::bump_sphere_mesh(3, phantom::ico_vertex_axis(), 0.6, 0.35),
        10.0,
    );
    let smap = parameterize(&mesh, &ParamOptions::default()).unwrap();
    let adm = area_distortion(&mesh, &smap).unwrap();
    let ann = cir::spikes::annotate(&mesh, &adm, &SpikeOptions::default()).unwrap();
    assert_eq!(
        ann.summary.n_lobulations, 1,
        "expected exactly one lobulation, spikes: {:?}",
        ann.spikes
    );
    assert_eq!(ann.summary.n_spiculations, 0);
    let lob = ann
        .spikes
        .iter()
        .find(|s| s.class == SpikeClass::Lobulation)
        .unwrap();
    println!(
        "[PASS] bump phantom: 1 lobulation (apex angle {:.1} deg)",
        lob.apex_angle_deg
    );
}

/// Parameterization invariants over 50 random star-shaped phantoms:
/// unit norms within 1e-9, zero flipped faces, non-increasing energies, and
/// the normalized-area identity within 1e-9.
#[test]
fn criterion_04_parameterization_invariants_50_phantoms() {
    let mut passed = 0;
    for seed in 0..50u64 {
        let amplitude = 0.15 + 0.004 * seed as f64;
        let mesh = phantom::random_star_mesh(seed, 2, amplitude);
        let smap = parameterize(&mesh, &ParamOptions::default())
            .unwrap_or_else(|e| panic!("phantom {seed}: {e}"));

        for p in &smap.positions {
            assert!((p.norm() - 1.0).abs() <= 1e-9, "phantom {seed}: norm {}", p.norm());
        }

        // flipped spherical triangles against the global orientation
        let det = |f: &[u32; 3]| -> f64 {
            let a = smap.positions[f[0] as usize];
            let b = smap.positions[f[1] as usize];
            let c = smap.positions[f[2] as usize];
            a.dot(&b.cross(&c))
        };
        let total: f64 = mesh.faces.iter().map(det).sum();
        let sign = total.signum();
        let flips = mesh.faces.iter().filter(|f| det(f) * sign <= 0.0).count();
        assert_eq!(flips, 0, "phantom {seed}: {flips} flipped faces");

        for w in smap.energies.windows(2) {
            assert!(w[1] <= w[0], "phantom {seed}: energy increased");
        }

        let adm = area_distortion(&mesh, &smap).unwrap();
        let total_in: f64 = (0..mesh.face_count()).map(|f| mesh.face_area(f)).sum();
        let identity: f64 = (0..mesh.face_count())
            .map(|f| mesh.face_area(f) / total_in * adm.epsilon_face[f].exp())
            .sum();
        assert!(
            (identity - 1.0).abs() < 1e-9,
            "phantom {seed}: area identity off by {}",
            (identity - 1.0).abs()
        );
        passed += 1;
    }
    assert_eq!(passed, 50);
    println!("[PASS] parameterization invariants: 50/50 phantoms");
}

/// Metric implementations agree exactly with exhaustive brute-force oracles
/// on 100 random instances of size <= 64.
#[test]
fn criterion_05_metric_oracle_equivalence() {
    let mut rng = FixtureRng::new(0xACCE97);
    for instance in 0..100 {
        let n = 2 + (rng.next_u64() % 63) as usize;
        let m = 2 + (rng.next_u64() % 63) as usize;

        // chamfer vs exhaustive nearest neighbor
        let a: Vec<Vector3<f64>> = (0..n)
            .map(|_| Vector3::new(rng.next_f64(), rng.next_f64(), rng.next_f64()))
            .collect();
        let b: Vec<Vector3<f64>> = (0..m)
            .map(|_| Vector3::new(rng.next_f64(), rng.next_f64(), rng.next_f64()))
            .collect();
        let mut forward = 0.0;
        for p in &a {
            let mut best = f64::INFINITY;
            for q in &b {
                let d = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
                if d < best {
                    best = d;
                }
            }
            forward += best;
        }
        let mut backward = 0.0;
        for q in &b {
            let mut best = f64::INFINITY;
            for p in &a {
                let d = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
                if d < best {
                    best = d;
                }
            }
            backward += best;
        }
        let oracle = forward / n as f64 + backward / m as f64;
        assert_eq!(
            chamfer_weighted_symmetric(&a, &b).unwrap(),
            oracle,
            "instance {instance}: chamfer"
        );

        // jaccard vs set counting on a random label pair
        let dims = (4usize, 4usize, 4usize);
        let la: Vec<u8> = (0..64).map(|_| (rng.next_u64() % 3) as u8).collect();
        let lb: Vec<u8> = (0..64).map(|_| (rng.next_u64() % 3) as u8).collect();
        let va = MaskVolume::new(dims, [1.0; 3], [0.0; 3], la.clone(), vec![0, 1, 2]).unwrap();
        let vb = MaskVolume::new(dims, [1.0; 3], [0.0; 3], lb.clone(), vec![0, 1, 2]).unwrap();
        for class in [0u8, 1, 2] {
            let mut inter = 0usize;
            let mut union = 0usize;
            for i in 0..64 {
                let fa = la[i] == class;
                let fb = lb[i] == class;
                if fa && fb {
                    inter += 1;
                }
                if fa || fb {
                    union += 1;
                }
            }
            let expected = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
            assert_eq!(
                jaccard(&va, &vb, class).unwrap(),
                expected,
                "instance {instance}: jaccard class {class}"
            );
        }

        // AUC vs positive/negative pair counting, confusion vs direct counts
        let count = 4 + (rng.next_u64() % 61) as usize;
        let scores: Vec<f64> = (0..count).map(|_| (rng.next_u64() % 12) as f64 / 12.0).collect();
        let labels: Vec<u8> = (0..count).map(|_| (rng.next_u64() % 2) as u8).collect();
        if labels.contains(&1) && labels.contains(&0) {
            let mut wins = 0.0;
            let mut pairs = 0.0;
            for i in 0..count {
                for j in 0..count {
                    if labels[i] == 1 && labels[j] == 0 {
                        pairs += 1.0;
                        if scores[i] > scores[j] {
                            wins += 1.0;
                        } else if scores[i] == scores[j] {
                            wins += 0.5;
                        }
                    }
                }
            }
            let o = BinaryOutcomes::new(scores.clone(), labels.clone(), 0.5).unwrap();
            assert_eq!(roc_auc(&o).unwrap(), wins / pairs, "instance {instance}: auc");

            let (mut tp, mut fp, mut tn, mut fal) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for (s, l) in scores.iter().zip(&labels) {
                match (*s >= 0.5, *l == 1) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, false) => tn += 1.0,
                    (false, true) => fal += 1.0,
                }
            }
            let m = binary_metrics(&o);
            assert_eq!(m.accuracy, (tp + tn) / count as f64);
            assert_eq!(m.sensitivity, if tp + fal > 0.0 { tp / (tp + fal) } else { 0.0 });
            assert_eq!(m.specificity, if tn + fp > 0.0 { tn / (tn + fp) } else { 0.0 });
            assert_eq!(
                m.f1,
                if 2.0 * tp + fp + fal > 0.0 { 2.0 * tp / (2.0 * tp + fp + fal) } else { 0.0 }
            );
        }
    }
    println!("[PASS] metric oracle equivalence: 100/100 instances exact");
}

/// The weighted total loss of unit components equals 6.2 exactly.
#[test]
fn criterion_06_total_loss_unit_components() {
    let unit = LossComponents {
        bce: Some(1.0),
        ce: Some(1.0),
        chamfer_nodule: Some(1.0),
        chamfer_spiculation: Some(1.0),
        chamfer_lobulation: Some(1.0),
        laplacian: Some(1.0),
        edge: Some(1.0),
        normal_consistency: Some(1.0),
    };
    let total = total_loss(&unit, &LossWeights::default()).unwrap();
    assert_eq!(total, 6.2, "total loss {total}");
    println!("[PASS] total loss with unit components = 6.2 exactly");
}

/// Classifier shape contracts: feature lengths, layer dims, softmax output.
#[test]
fn criterion_07_shape_contracts() {
    assert_eq!(MESH_FEATURE_VERTICES, 1000);
    assert_eq!(FEATURES_PER_BRANCH * 3, 96);
    assert_eq!(MESH_FEATURE_LEN, 96_000);
    assert_eq!(ENCODER_FEATURE_LEN, 16_384);
    assert_eq!(HYBRID_FEATURE_LEN, 112_384);
    assert_eq!(ENCODER_FEATURE_LEN + MESH_FEATURE_LEN, HYBRID_FEATURE_LEN);
    assert_eq!(mesh_feature_index(999, 2, 31), MESH_FEATURE_LEN - 1);

    // mesh-only network: 96000 -> 512 -> 128 -> 2
    {
        let w = MlpWeights::zeros(&[96_000, 512, 128, 2]);
        w.validate().unwrap();
        assert_eq!(w.input_dim(), 96_000);
        let dims: Vec<(usize, usize)> = w.layers.iter().map(|l| (l.cols, l.rows)).collect();
        assert_eq!(dims, vec![(96_000, 512), (512, 128), (128, 2)]);
        let p = mlp_forward(&vec![0.0; 96_000], &w).unwrap();
        assert!((p.p_benign + p.p_malignant - 1.0).abs() < 1e-6);
    }
    // hybrid network: 112384 -> 512 -> 128 -> 2
    {
        let w = MlpWeights::zeros(&[112_384, 512, 128, 2]);
        w.validate().unwrap();
        let dims: Vec<(usize, usize)> = w.layers.iter().map(|l| (l.cols, l.rows)).collect();
        assert_eq!(dims, vec![(112_384, 512), (512, 128), (128, 2)]);

        let mesh_features = MeshFeatureVector {
            values: vec![0.0; MESH_FEATURE_LEN],
            vertex_count_actual: 0,
            source: cir::malignancy::FeatureSource::Deep,
        };
        let hybrid = concat_hybrid(&vec![0.0; ENCODER_FEATURE_LEN], &mesh_features).unwrap();
        assert_eq!(hybrid.values.len(), 112_384);
        let p = mlp_forward(&hybrid.values, &w).unwrap();
        assert!((p.p_benign + p.p_malignant - 1.0).abs() < 1e-6);
    }
    // softmax normalization away from the trivial zero case
    {
        let mut rng = FixtureRng::new(77);
        let mut w = MlpWeights::zeros(&[32, 8, 2]);
        for layer in &mut w.layers {
            for v in &mut layer.weights {
                *v = rng.range(-1.0, 1.0) as f32;
            }
        }
        let x: Vec<f64> = (0..32).map(|_| rng.range(-3.0, 3.0)).collect();
        let p = mlp_forward(&x, &w).unwrap();
        assert!((p.p_benign + p.p_malignant - 1.0).abs() < 1e-6);
        assert!(p.p_benign >= 0.0 && p.p_malignant >= 0.0);
    }
    println!("[PASS] shape contracts: 96000 = 1000x96, 112384 = 16384 + 96000, published layer dims, softmax sums to 1");
}

/// Voxelization round trip: blob mask through the full pipeline keeps at
/// least 0.9 foreground Jaccard against the (resampled) input mask.
#[test]
fn criterion_08_voxelization_round_trip() {
    let mask = phantom::random_blob_mask(17, 30.0, 0.15, 1.0);
    let case = annotate_case(&mask, &PipelineConfig::default()).unwrap();
    let mut inter = 0usize;
    let mut union = 0usize;
    for (a, b) in case.masks.labels().iter().zip(case.resampled.labels()) {
        let fa = *a != 0;
        let fb = *b != 0;
        if fa && fb {
            inter += 1;
        }
        if fa || fb {
            union += 1;
        }
    }
    let j = inter as f64 / union as f64;
    assert!(j >= 0.9, "round-trip Jaccard {j}");
    println!("[PASS] voxelization round trip: Jaccard {j:.3} >= 0.9");
}

/// A ~10k-face phantom runs the full annotate pipeline in under 60 s on one
/// thread.
#[test]
fn criterion_09_performance_10k_faces() {
    let mask = phantom::ball_mask(16.0, 1.0);
    let start = Instant::now();
    let case = annotate_case(&mask, &PipelineConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let faces = case.mesh.face_count();
    assert!(
        (8_000..=14_000).contains(&faces),
        "phantom has {faces} faces, wanted roughly 10k"
    );
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("[PASS] performance: {faces} faces annotated in {elapsed:?} (< 60 s)");
}

/// Two runs of the annotate command over identical inputs are byte-identical,
/// including parallel runs with --jobs 2.
#[test]
fn criterion_10_determinism_of_annotate() {
    let dir = tempfile::tempdir().unwrap();
    let mask_a = dir.path().join("a.nrrd");
    let mask_b = dir.path().join("b.nrrd");
    cir::volume::write_nrrd(&phantom::ball_mask(6.0, 1.0), &mask_a).unwrap();
    cir::volume::write_nrrd(
        &phantom::cone_spiked_ball_mask(7.0, 7.0, 15.0, 1.0),
        &mask_b,
    )
    .unwrap();

    let run = |out: &std::path::Path, jobs: &str| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_cir"))
            .args([
                "annotate",
                mask_a.to_str().unwrap(),
                mask_b.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--jobs",
                jobs,
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    let serial_1 = dir.path().join("serial1");
    let serial_2 = dir.path().join("serial2");
    let parallel = dir.path().join("parallel");
    run(&serial_1, "1");
    run(&serial_2, "1");
    run(&parallel, "2");

    for case in ["a", "b"] {
        for name in ["mesh.ply", "annotation.json", "masks.nrrd"] {
            let bytes_1 = std::fs::read(serial_1.join(case).join(name)).unwrap();
            let bytes_2 = std::fs::read(serial_2.join(case).join(name)).unwrap();
            let bytes_p = std::fs::read(parallel.join(case).join(name)).unwrap();
            assert!(!bytes_1.is_empty());
            assert_eq!(bytes_1, bytes_2, "{case}/{name} differs between serial runs");
            assert_eq!(bytes_1, bytes_p, "{case}/{name} differs under --jobs 2");
        }
    }
    println!("[PASS] determinism: serial and --jobs 2 outputs byte-identical");
}
