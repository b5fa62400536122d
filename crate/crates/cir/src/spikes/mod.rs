//! Spike detection and classification from negative area distortion, vertex
//! annotations, and voxelization of annotations back into label masks.

mod voxelize;

pub use voxelize::voxelize_annotation;

use crate::sphere::AreaDistortionMap;
use crate::surface::TriMesh;
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpikeError {
    #[error("area distortion map has {map} vertices, mesh has {mesh}")]
    SizeMismatch { map: usize, mesh: usize },
    #[error("grid too coarse: mesh bounding box spans {spans:.2} voxels on axis {axis}")]
    GridTooCoarse { axis: usize, spans: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpikeClass {
    Spiculation,
    Lobulation,
    Other,
}

/// Detection and classification thresholds. The sharp/curved split and the
/// minimum height are configuration, not paper values; they are echoed into
/// every output for reproducibility.
#[derive(Debug, Clone, Copy)]
pub struct SpikeOptions {
    /// Vertices with epsilon at or below this count as spike tissue.
    pub noise_floor: f64,
    /// Components smaller than this are "other".
    pub min_vertices: usize,
    /// Apex angles below this are sharp (spiculation), at or above curved.
    pub theta_spic_deg: f64,
    /// Components shorter than this are "other".
    pub min_height_mm: f64,
}

impl Default for SpikeOptions {
    fn default() -> Self {
        Self {
            noise_floor: -0.02,
            min_vertices: 8,
            theta_spic_deg: 65.0,
            min_height_mm: 1.0,
        }
    }
}

/// A detected surface protrusion: one connected component of sub-floor
/// area distortion with its geometry summary.
#[derive(Debug, Clone, Serialize)]
pub struct Spike {
    pub vertex_ids: Vec<u32>,
    pub apex_id: u32,
    pub height_mm: f64,
    pub base_radius_mm: f64,
    pub apex_angle_deg: f64,
    pub mean_epsilon: f64,
    pub class: SpikeClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnotationSummary {
    pub n_spiculations: usize,
    pub n_lobulations: usize,
    pub spiculation_area_fraction: f64,
    pub lobulation_area_fraction: f64,
    pub min_epsilon: f64,
    pub mean_apex_angle_spiculation_deg: Option<f64>,
}

/// Vertex-level classes: 0 = base, 1 = spiculation, 2 = lobulation.
/// Vertices of "other" spikes are labeled base.
#[derive(Debug, Clone, Serialize)]
pub struct NoduleAnnotation {
    pub vertex_class: Vec<u8>,
    pub spikes: Vec<Spike>,
    pub summary: AnnotationSummary,
}

pub const VERTEX_BASE: u8 = 0;
pub const VERTEX_SPICULATION: u8 = 1;
pub const VERTEX_LOBULATION: u8 = 2;

/// Detect maximal connected components of `{v : eps_v <= noise_floor}` in the
/// vertex adjacency graph, sorted by minimum epsilon ascending. Components
/// smaller than `min_vertices` come back preassigned "other"; larger ones
/// await `classify_spike`.
pub fn detect_spikes(
    mesh: &TriMesh,
    adm: &AreaDistortionMap,
    opts: &SpikeOptions,
) -> Result<Vec<Spike>, SpikeError> {
    let eps = &adm.epsilon_vertex;
    if eps.len() != mesh.vertex_count() {
        return Err(SpikeError::SizeMismatch {
            map: eps.len(),
            mesh: mesh.vertex_count(),
        });
    }
    let nbrs = mesh.vertex_neighbors();
    let below = |v: usize| eps[v] <= opts.noise_floor;

    let mut component = vec![usize::MAX; mesh.vertex_count()];
    let mut spikes = Vec::new();
    for seed in 0..mesh.vertex_count() {
        if !below(seed) || component[seed] != usize::MAX {
            continue;
        }
        let id = spikes.len();
        let mut members = Vec::new();
        let mut stack = vec![seed as u32];
        component[seed] = id;
        while let Some(v) = stack.pop() {
            members.push(v);
            for &n in &nbrs[v as usize] {
                if below(n as usize) && component[n as usize] == usize::MAX {
                    component[n as usize] = id;
                    stack.push(n);
                }
            }
        }
        members.sort_unstable();
        spikes.push(build_spike(mesh, eps, members));
    }
    spikes.sort_by(|a, b| {
        let ea = a.min_epsilon(eps);
        let eb = b.min_epsilon(eps);
        ea.total_cmp(&eb).then(a.apex_id.cmp(&b.apex_id))
    });
    Ok(spikes)
}

impl Spike {
    /// The component minimum, which by construction sits at the apex.
    fn min_epsilon(&self, eps: &[f64]) -> f64 {
        eps[self.apex_id as usize]
    }
}

fn build_spike(mesh: &TriMesh, eps: &[f64], members: Vec<u32>) -> Spike {
    let apex_id = members
        .iter()
        .copied()
        .min_by(|&a, &b| {
            eps[a as usize]
                .total_cmp(&eps[b as usize])
                .then(a.cmp(&b))
        })
        .expect("component is non-empty");

    // boundary loop: members adjacent to a vertex outside the component
    let nbrs = mesh.vertex_neighbors();
    let member_set: std::collections::HashSet<u32> = members.iter().copied().collect();
    let mut boundary: Vec<u32> = members
        .iter()
        .copied()
        .filter(|&v| nbrs[v as usize].iter().any(|n| !member_set.contains(n)))
        .collect();
    if boundary.is_empty() {
        boundary = members.clone();
    }

    let b_pos: Vec<Vector3<f64>> = boundary
        .iter()
        .map(|&v| mesh.vertices[v as usize])
        .collect();
    let centroid = b_pos.iter().sum::<Vector3<f64>>() / b_pos.len() as f64;
    let base_radius_mm = (b_pos.iter().map(|p| (p - centroid).norm()).sum::<f64>()
        / b_pos.len() as f64)
        .max(1e-9);

    let apex = mesh.vertices[apex_id as usize];
    let height_mm = if b_pos.len() >= 3 {
        // least-squares base plane: normal is the smallest-variance direction
        let mut cov = Matrix3::zeros();
        for p in &b_pos {
            let d = p - centroid;
            cov += d * d.transpose();
        }
        let eig = nalgebra::SymmetricEigen::new(cov);
        let mut normal = Vector3::zeros();
        let mut smallest = f64::INFINITY;
        for i in 0..3 {
            if eig.eigenvalues[i] < smallest {
                smallest = eig.eigenvalues[i];
                normal = eig.eigenvectors.column(i).into_owned();
            }
        }
        ((apex - centroid).dot(&normal)).abs()
    } else {
        (apex - centroid).norm()
    };

    let apex_angle_deg = (2.0 * base_radius_mm.atan2(height_mm))
        .to_degrees()
        .clamp(1e-9, 180.0 - 1e-9);
    let mean_epsilon =
        members.iter().map(|&v| eps[v as usize]).sum::<f64>() / members.len() as f64;

    Spike {
        vertex_ids: members,
        apex_id,
        height_mm,
        base_radius_mm,
        apex_angle_deg,
        mean_epsilon,
        // small components keep this preassignment; larger ones are
        // reclassified by classify_spike
        class: SpikeClass::Other,
    }
}

/// Sharp/curved classification: "other" when too small or too short, else
/// spiculation when the apex angle is below the threshold, else lobulation.
/// The boundary value classifies as lobulation.
pub fn classify_spike(spike: &Spike, opts: &SpikeOptions) -> SpikeClass {
    if spike.vertex_ids.len() < opts.min_vertices || spike.height_mm < opts.min_height_mm {
        SpikeClass::Other
    } else if spike.apex_angle_deg < opts.theta_spic_deg {
        SpikeClass::Spiculation
    } else {
        SpikeClass::Lobulation
    }
}

/// Full annotation: detect, classify, label vertices, summarize.
pub fn annotate(
    mesh: &TriMesh,
    adm: &AreaDistortionMap,
    opts: &SpikeOptions,
) -> Result<NoduleAnnotation, SpikeError> {
    let mut spikes = detect_spikes(mesh, adm, opts)?;
    for s in &mut spikes {
        s.class = classify_spike(s, opts);
    }

    let mut vertex_class = vec![VERTEX_BASE; mesh.vertex_count()];
    for s in &spikes {
        let label = match s.class {
            SpikeClass::Spiculation => VERTEX_SPICULATION,
            SpikeClass::Lobulation => VERTEX_LOBULATION,
            SpikeClass::Other => continue, // treated as nodule base
        };
        for &v in &s.vertex_ids {
            vertex_class[v as usize] = label;
        }
    }

    // area fractions from barycentric vertex areas (one-ring sums / 3)
    let ring = mesh.one_ring_areas();
    let total: f64 = ring.iter().sum::<f64>() / 3.0;
    let mut spic_area = 0.0;
    let mut lob_area = 0.0;
    for v in 0..mesh.vertex_count() {
        match vertex_class[v] {
            VERTEX_SPICULATION => spic_area += ring[v] / 3.0,
            VERTEX_LOBULATION => lob_area += ring[v] / 3.0,
            _ => {}
        }
    }

    let n_spiculations = spikes
        .iter()
        .filter(|s| s.class == SpikeClass::Spiculation)
        .count();
    let n_lobulations = spikes
        .iter()
        .filter(|s| s.class == SpikeClass::Lobulation)
        .count();
    let spic_angles: Vec<f64> = spikes
        .iter()
        .filter(|s| s.class == SpikeClass::Spiculation)
        .map(|s| s.apex_angle_deg)
        .collect();

    let summary = AnnotationSummary {
        n_spiculations,
        n_lobulations,
        spiculation_area_fraction: spic_area / total,
        lobulation_area_fraction: lob_area / total,
        min_epsilon: adm
            .epsilon_vertex
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
        mean_apex_angle_spiculation_deg: if spic_angles.is_empty() {
            None
        } else {
            Some(spic_angles.iter().sum::<f64>() / spic_angles.len() as f64)
        },
    };

    Ok(NoduleAnnotation {
        vertex_class,
        spikes,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom;
    use crate::sphere::{area_distortion, parameterize, ParamOptions};

    fn pipeline(mesh: &TriMesh) -> AreaDistortionMap {
        let smap = parameterize(mesh, &ParamOptions::default()).unwrap();
        area_distortion(mesh, &smap).unwrap()
    }

    fn scaled(mut mesh: TriMesh, s: f64) -> TriMesh {
        for v in &mut mesh.vertices {
            *v *= s;
        }
        mesh
    }

    /// 10 mm sphere with an 18 mm-tall sharp cone at one pole.
    fn cone_phantom() -> TriMesh {
        scaled(
            phantom::cone_spiked_sphere_mesh(3, phantom::ico_vertex_axis(), 0.28, 1.8),
            10.0,
        )
    }

    /// 10 mm sphere with a 3.5 mm rounded bump at one pole.
    fn bump_phantom() -> TriMesh {
        scaled(
            phantom::bump_sphere_mesh(3, phantom::ico_vertex_axis(), 0.6, 0.35),
            10.0,
        )
    }

    #[test]
    fn clean_sphere_has_no_spikes() {
        let mesh = scaled(phantom::icosphere(3, 1.0), 10.0);
        let adm = pipeline(&mesh);
        let spikes = detect_spikes(&mesh, &adm, &SpikeOptions::default()).unwrap();
        assert!(spikes.is_empty(), "{} spurious spikes", spikes.len());
    }

    #[test]
    fn cone_is_detected_and_classified_spiculation() {
        let mesh = cone_phantom();
        let adm = pipeline(&mesh);
        let ann = annotate(&mesh, &adm, &SpikeOptions::default()).unwrap();
        assert_eq!(ann.summary.n_spiculations, 1, "spikes: {:?}", ann.spikes);
        assert_eq!(ann.summary.n_lobulations, 0);
        let spike = ann
            .spikes
            .iter()
            .find(|s| s.class == SpikeClass::Spiculation)
            .unwrap();
        // apex is the cone tip: the vertex farthest from the center
        let tip = (0..mesh.vertex_count())
            .max_by(|&a, &b| mesh.vertices[a].norm().total_cmp(&mesh.vertices[b].norm()))
            .unwrap() as u32;
        assert_eq!(spike.apex_id, tip);
        assert!(
            spike.apex_angle_deg < 50.0,
            "apex angle {}",
            spike.apex_angle_deg
        );
        assert!(spike.height_mm > 5.0, "height {}", spike.height_mm);
    }

    #[test]
    fn bump_is_detected_and_classified_lobulation() {
        let mesh = bump_phantom();
        let adm = pipeline(&mesh);
        let ann = annotate(&mesh, &adm, &SpikeOptions::default()).unwrap();
        assert_eq!(ann.summary.n_lobulations, 1, "spikes: {:?}", ann.spikes);
        assert_eq!(ann.summary.n_spiculations, 0);
        let spike = ann
            .spikes
            .iter()
            .find(|s| s.class == SpikeClass::Lobulation)
            .unwrap();
        assert!(
            spike.apex_angle_deg >= 65.0,
            "apex angle {}",
            spike.apex_angle_deg
        );
    }

    #[test]
    fn cone_and_bump_on_opposite_poles_are_disjoint() {
        let axis = phantom::ico_vertex_axis();
        let mesh = scaled(
            phantom::radial_mesh(3, |d| {
                let up = d.dot(&axis).clamp(-1.0, 1.0).acos();
                let down = (-d.dot(&axis)).clamp(-1.0, 1.0).acos();
                let cone = 1.8 * (1.0 - up / 0.28).max(0.0);
                let t = (down / 0.6).min(1.0);
                let bump = 0.35 * (1.0 - t * t).powi(2);
                1.0 + cone + bump
            }),
            10.0,
        );
        let adm = pipeline(&mesh);
        let ann = annotate(&mesh, &adm, &SpikeOptions::default()).unwrap();
        assert_eq!(ann.summary.n_spiculations, 1);
        assert_eq!(ann.summary.n_lobulations, 1);
        let classified: Vec<&Spike> = ann
            .spikes
            .iter()
            .filter(|s| s.class != SpikeClass::Other)
            .collect();
        let a: std::collections::HashSet<u32> =
            classified[0].vertex_ids.iter().copied().collect();
        assert!(
            classified[1].vertex_ids.iter().all(|v| !a.contains(v)),
            "spikes share vertices"
        );
        // cone vertices labeled 1, bump vertices 2
        for (v, &class) in ann.vertex_class.iter().enumerate() {
            let p = mesh.vertices[v];
            if p.norm() > 14.0 {
                assert_eq!(class, VERTEX_SPICULATION, "tall cone vertex {v}");
            }
            if p.norm() > 10.8 && p.normalize().dot(&axis) < -0.9 {
                assert_eq!(class, VERTEX_LOBULATION, "bump vertex {v}");
            }
        }
    }

    #[test]
    fn tiny_components_classify_other_and_stay_base() {
        let mesh = phantom::icosphere(2, 10.0);
        // synthetic distortion: exactly 3 mutually adjacent vertices below floor
        let face = mesh.faces[0];
        let mut eps = vec![0.05; mesh.vertex_count()];
        for &v in &face {
            eps[v as usize] = -0.5;
        }
        let adm = AreaDistortionMap {
            epsilon_vertex: eps,
            epsilon_face: vec![0.0; mesh.face_count()],
        };
        let ann = annotate(&mesh, &adm, &SpikeOptions::default()).unwrap();
        assert_eq!(ann.spikes.len(), 1);
        assert_eq!(ann.spikes[0].class, SpikeClass::Other);
        assert_eq!(ann.summary.n_spiculations, 0);
        assert_eq!(ann.summary.n_lobulations, 0);
        assert!(ann.vertex_class.iter().all(|&c| c == VERTEX_BASE));
        assert!((ann.summary.spiculation_area_fraction).abs() < 1e-12);
    }

    #[test]
    fn spikes_are_disjoint_connected_and_sorted() {
        let mesh = cone_phantom();
        let adm = pipeline(&mesh);
        let spikes = detect_spikes(&mesh, &adm, &SpikeOptions::default()).unwrap();
        let nbrs = mesh.vertex_neighbors();
        let mut seen = std::collections::HashSet::new();
        let mut last_min = f64::NEG_INFINITY;
        for s in &spikes {
            for &v in &s.vertex_ids {
                assert!(seen.insert(v), "vertex {v} in two spikes");
            }
            // connectivity: BFS within the member set reaches every member
            let set: std::collections::HashSet<u32> = s.vertex_ids.iter().copied().collect();
            let mut reached = std::collections::HashSet::new();
            let mut stack = vec![s.vertex_ids[0]];
            reached.insert(s.vertex_ids[0]);
            while let Some(v) = stack.pop() {
                for &n in &nbrs[v as usize] {
                    if set.contains(&n) && reached.insert(n) {
                        stack.push(n);
                    }
                }
            }
            assert_eq!(reached.len(), set.len(), "disconnected spike");
            let min_eps = adm.epsilon_vertex[s.apex_id as usize];
            assert!(min_eps >= last_min, "not sorted by min epsilon");
            last_min = min_eps;
            // apex has the component's minimum epsilon
            for &v in &s.vertex_ids {
                assert!(adm.epsilon_vertex[v as usize] >= min_eps);
            }
        }
    }

    #[test]
    fn lowering_noise_floor_never_grows_spike_tissue() {
        let mesh = cone_phantom();
        let adm = pipeline(&mesh);
        let mut last = usize::MAX;
        for floor in [-0.02, -0.1, -0.5, -2.0] {
            let opts = SpikeOptions {
                noise_floor: floor,
                ..Default::default()
            };
            let total: usize = detect_spikes(&mesh, &adm, &opts)
                .unwrap()
                .iter()
                .map(|s| s.vertex_ids.len())
                .sum();
            assert!(total <= last, "floor {floor}: {total} > {last}");
            last = total;
        }
    }

    #[test]
    fn rigid_motion_keeps_classes_uniform_scale_keeps_angles() {
        let mesh = cone_phantom();
        let adm = pipeline(&mesh);
        let ann = annotate(&mesh, &adm, &SpikeOptions::default()).unwrap();

        let rot = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(Vector3::new(0.3, -1.0, 0.2)),
            1.1,
        );
        let mut moved = mesh.clone();
        for v in &mut moved.vertices {
            *v = rot * *v + Vector3::new(5.0, -3.0, 11.0);
        }
        let ann_moved = annotate(&moved, &adm, &SpikeOptions::default()).unwrap();
        assert_eq!(ann.vertex_class, ann_moved.vertex_class);

        let s = 2.5;
        let mut grown = mesh.clone();
        for v in &mut grown.vertices {
            *v *= s;
        }
        let ann_grown = annotate(&grown, &adm, &SpikeOptions::default()).unwrap();
        assert_eq!(ann.vertex_class, ann_grown.vertex_class);
        for (a, b) in ann.spikes.iter().zip(&ann_grown.spikes) {
            assert!((a.height_mm * s - b.height_mm).abs() < 1e-6);
            assert!((a.base_radius_mm * s - b.base_radius_mm).abs() < 1e-6);
            assert!((a.apex_angle_deg - b.apex_angle_deg).abs() < 1e-6);
        }
    }

    #[test]
    fn summary_counts_match_spike_list() {
        let mesh = cone_phantom();
        let adm = pipeline(&mesh);
        let ann = annotate(&mesh, &adm, &SpikeOptions::default()).unwrap();
        let spic = ann
            .spikes
            .iter()
            .filter(|s| s.class == SpikeClass::Spiculation)
            .count();
        let lob = ann
            .spikes
            .iter()
            .filter(|s| s.class == SpikeClass::Lobulation)
            .count();
        assert_eq!(ann.summary.n_spiculations, spic);
        assert_eq!(ann.summary.n_lobulations, lob);
        // base + spike fractions account for the whole surface
        let base = 1.0
            - ann.summary.spiculation_area_fraction
            - ann.summary.lobulation_area_fraction;
        assert!((0.0..=1.0).contains(&base));
    }
}
