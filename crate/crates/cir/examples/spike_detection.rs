//! Detect and classify surface spikes from negative area distortion: a sharp
//! cone reads as a spiculation, a rounded bump as a lobulation, and the
//! vertex classification map colors the labeled PLY (red spiculations, blue
//! lobulations, white nodule).
//!
//! Run with: `cargo run --example spike_detection [out_dir]`

use cir::phantom;
use cir::sphere::{area_distortion, parameterize, ParamOptions};
use cir::spikes::{annotate, SpikeOptions};
use cir::surface::{write_ply, Channel};
use std::path::PathBuf;

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "cir-example-out/spike_detection".into())
        .into();
    std::fs::create_dir_all(&out).unwrap();

    // 10 mm sphere, sharp cone at one pole, rounded bump at the other
    let axis = phantom::ico_vertex_axis();
    let mut mesh = phantom::radial_mesh(3, |d| {
        let up = d.dot(&axis).clamp(-1.0, 1.0).acos();
        let down = (-d.dot(&axis)).clamp(-1.0, 1.0).acos();
        let cone = 1.8 * (1.0 - up / 0.28).max(0.0);
        let t = (down / 0.6).min(1.0);
        let bump = 0.35 * (1.0 - t * t).powi(2);
        1.0 + cone + bump
    });
    for v in &mut mesh.vertices {
        *v *= 10.0;
    }

    let smap = parameterize(&mesh, &ParamOptions::default()).unwrap();
    let adm = area_distortion(&mesh, &smap).unwrap();
    let opts = SpikeOptions::default();
    let ann = annotate(&mesh, &adm, &opts).unwrap();

    println!(
        "detected {} component(s): {} spiculation, {} lobulation",
        ann.spikes.len(),
        ann.summary.n_spiculations,
        ann.summary.n_lobulations
    );
    println!("class     members  height_mm  base_mm  apex_deg  mean_eps");
    for s in &ann.spikes {
        println!(
            "{:<12?} {:>5} {:>9.2} {:>8.2} {:>9.1} {:>9.3}",
            s.class,
            s.vertex_ids.len(),
            s.height_mm,
            s.base_radius_mm,
            s.apex_angle_deg,
            s.mean_epsilon
        );
    }
    println!(
        "area fractions: spiculation {:.3}, lobulation {:.3}",
        ann.summary.spiculation_area_fraction, ann.summary.lobulation_area_fraction
    );

    mesh.channels
        .insert("epsilon".into(), Channel::Scalar(adm.epsilon_vertex.clone()));
    mesh.channels
        .insert("class".into(), Channel::Label(ann.vertex_class.clone()));
    let path = out.join("classified.ply");
    write_ply(&mesh, &path).unwrap();
    println!("wrote {}", path.display());
}
