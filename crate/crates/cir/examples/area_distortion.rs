//! Area distortion of the spherical map: spikes hold far more surface area
//! than their spherical image, driving the log ratio strongly negative at
//! the spike while the smooth base stays slightly positive. Writes a PLY
//! with the per-vertex epsilon channel for visualization.
//!
//! Run with: `cargo run --example area_distortion [out_dir]`

use cir::phantom;
use cir::sphere::{area_distortion, parameterize, ParamOptions};
use cir::surface::{write_ply, Channel};
use std::path::PathBuf;

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "cir-example-out/area_distortion".into())
        .into();
    std::fs::create_dir_all(&out).unwrap();

    let axis = phantom::ico_vertex_axis();
    let mut mesh = phantom::cone_spiked_sphere_mesh(3, axis, 0.28, 1.8);
    for v in &mut mesh.vertices {
        *v *= 10.0;
    }

    let smap = parameterize(&mesh, &ParamOptions::default()).unwrap();
    let adm = area_distortion(&mesh, &smap).unwrap();

    let mut eps = adm.epsilon_vertex.clone();
    eps.sort_by(f64::total_cmp);
    let pct = |p: f64| eps[(p * (eps.len() - 1) as f64) as usize];
    println!(
        "epsilon_v: min {:+.3}  p25 {:+.3}  median {:+.3}  p75 {:+.3}  max {:+.3}",
        eps[0],
        pct(0.25),
        pct(0.5),
        pct(0.75),
        eps[eps.len() - 1]
    );

    let (argmin, min_eps) = adm
        .epsilon_vertex
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    println!(
        "most compressed vertex: #{argmin} at radius {:.1} mm (the cone tip), epsilon {min_eps:+.2}",
        mesh.vertices[argmin].norm()
    );

    // normalized areas balance: sum of input shares times exp(eps) is 1
    let total_in: f64 = (0..mesh.face_count()).map(|f| mesh.face_area(f)).sum();
    let identity: f64 = (0..mesh.face_count())
        .map(|f| mesh.face_area(f) / total_in * adm.epsilon_face[f].exp())
        .sum();
    println!("area-normalization identity: |sum - 1| = {:.1e}", (identity - 1.0).abs());

    mesh.channels
        .insert("epsilon".into(), Channel::Scalar(adm.epsilon_vertex.clone()));
    let path = out.join("cone_epsilon.ply");
    write_ply(&mesh, &path).unwrap();
    println!("wrote {}", path.display());
}
