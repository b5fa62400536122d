//! Rasterize a vertex-classified surface annotation back onto the mask grid:
//! interior voxels become nodule base, near-surface voxels take the class of
//! the nearest mesh vertex (spiculation beats lobulation beats base on ties).
//!
//! Run with: `cargo run --example voxelize_annotation [out_dir]`

use cir::phantom;
use cir::pipeline::{annotate_case, PipelineConfig};
use cir::volume::write_nrrd;
use std::path::PathBuf;

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "cir-example-out/voxelize_annotation".into())
        .into();
    std::fs::create_dir_all(&out).unwrap();

    let mask = phantom::cone_spiked_ball_mask(10.0, 10.0, 15.0, 1.0);
    let case = annotate_case(&mask, &PipelineConfig::default()).unwrap();

    let labels = &case.masks;
    println!("voxelized annotation on grid {:?}:", labels.dims());
    for (name, code) in [
        ("background", 0u8),
        ("nodule base", 1),
        ("spiculation", 2),
        ("lobulation", 3),
    ] {
        println!("  {name:<12} {:>7}", labels.count_label(code));
    }

    // foreground agreement with the resampled input mask
    let mut inter = 0usize;
    let mut union = 0usize;
    for (a, b) in labels.labels().iter().zip(case.resampled.labels()) {
        let fa = *a != 0;
        let fb = *b != 0;
        if fa && fb {
            inter += 1;
        }
        if fa || fb {
            union += 1;
        }
    }
    println!(
        "foreground Jaccard vs input mask: {:.3}",
        inter as f64 / union as f64
    );

    let path = out.join("labels.nrrd");
    write_nrrd(labels, &path).unwrap();
    println!("wrote {}", path.display());
}
