//! Full annotation pipeline on a synthetic spiculated nodule: build a mask
//! of a ball with a sharp cone, resample, extract the surface, map it to the
//! sphere, detect and classify spikes, and voxelize the annotation.
//!
//! Run with: `cargo run --example annotate_phantom [out_dir]`

use cir::phantom;
use cir::pipeline::{annotate_case, write_case_outputs, PipelineConfig};
use cir::spikes::SpikeClass;
use std::path::PathBuf;

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "cir-example-out/annotate_phantom".into())
        .into();

    // 10 mm nodule with a 10 mm spiculation of 15 degree half-angle
    let mask = phantom::cone_spiked_ball_mask(10.0, 10.0, 15.0, 1.0);
    println!(
        "phantom mask: dims {:?}, {} foreground voxels",
        mask.dims(),
        mask.foreground_count()
    );

    let config = PipelineConfig::default();
    let case = annotate_case(&mask, &config).expect("pipeline runs");

    println!(
        "surface: {} vertices, {} faces",
        case.mesh.vertex_count(),
        case.mesh.face_count()
    );
    println!(
        "parameterization: {} sweeps, final energy {:.4}",
        case.spherical_map.iterations_used, case.spherical_map.final_energy
    );

    let s = &case.annotation.summary;
    println!(
        "annotation: {} spiculation(s), {} lobulation(s), min epsilon {:.2}",
        s.n_spiculations, s.n_lobulations, s.min_epsilon
    );
    for spike in &case.annotation.spikes {
        if spike.class != SpikeClass::Other {
            println!(
                "  {:?}: {} vertices, height {:.1} mm, apex angle {:.1} deg",
                spike.class,
                spike.vertex_ids.len(),
                spike.height_mm,
                spike.apex_angle_deg
            );
        }
    }
    println!(
        "voxelized labels: base {}, spiculation {}, lobulation {}",
        case.masks.count_label(1),
        case.masks.count_label(2),
        case.masks.count_label(3)
    );

    write_case_outputs(&case, &config, &out).expect("outputs written");
    println!("wrote mesh.ply, annotation.json, masks.nrrd to {}", out.display());
}
