//! Spherical parameterization of genus-0 surfaces and the per-vertex area
//! distortion map driving spike detection.
//!
//! The map is computed by cotangent-weighted tangential Laplacian smoothing
//! of a Gauss-map initialization, reprojected to the sphere after every
//! update, with Mobius re-centering to keep the mapped area centroid at the
//! origin (spherical heat flow collapses toward a pole without it). Each
//! sweep is accepted only if the string-of-springs harmonic energy does not
//! increase, so the recorded energy sequence is non-increasing by
//! construction. Residual flipped triangles are repaired by uniform-weight
//! relaxation restricted to the flipped region.

use crate::surface::{MeshError, TriMesh};
use nalgebra::Vector3;
use std::io::Write;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("mesh has genus {0}, spherical parameterization needs genus 0")]
    NotGenusZero(i64),
    #[error("mesh is not a closed manifold: {0}")]
    NonManifold(String),
    #[error("no bijective map: {0} flipped faces remain after repair")]
    NoBijectiveMap(usize),
    #[error("map and mesh connectivity differ ({map} positions vs {mesh} vertices)")]
    ConnectivityMismatch { map: usize, mesh: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ParamOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub step: f64,
    /// Optional CSV dump of the per-sweep energy (`sweep,energy` lines).
    pub energy_log: Option<PathBuf>,
}

impl Default for ParamOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-7,
            step: 0.5,
            energy_log: None,
        }
    }
}

/// Per-vertex unit-sphere positions sharing the source mesh connectivity.
#[derive(Debug, Clone)]
pub struct SphericalMap {
    pub positions: Vec<Vector3<f64>>,
    pub iterations_used: usize,
    /// Harmonic energy of the returned positions.
    pub final_energy: f64,
    /// Energy after each accepted smoothing sweep; non-increasing.
    pub energies: Vec<f64>,
}

/// Log area ratios of spherical-image faces over input faces, both
/// normalized to unit total area. Negative on spikes, positive on the base.
#[derive(Debug, Clone)]
pub struct AreaDistortionMap {
    pub epsilon_vertex: Vec<f64>,
    pub epsilon_face: Vec<f64>,
}

struct Connectivity {
    /// Undirected edges (u < v) with clamped cotangent weights, sorted.
    edges: Vec<(u32, u32, f64)>,
    /// CSR neighbor lists with matching weights.
    nbr_offset: Vec<usize>,
    nbr_index: Vec<u32>,
    nbr_weight: Vec<f64>,
}

fn cotan_connectivity(mesh: &TriMesh) -> Connectivity {
    use std::collections::HashMap;
    let mut weights: HashMap<(u32, u32), f64> = HashMap::new();
    for &[a, b, c] in &mesh.faces {
        let pa = mesh.vertices[a as usize];
        let pb = mesh.vertices[b as usize];
        let pc = mesh.vertices[c as usize];
        // half cotangent of the corner opposite each edge, clamped at zero:
        // obtuse corners of degenerate spike triangles must not destabilize
        // the flow
        let mut add = |u: u32, v: u32, e0: Vector3<f64>, e1: Vector3<f64>| {
            let cross = e0.cross(&e1).norm();
            let cot = if cross > 1e-300 { e0.dot(&e1) / cross } else { 0.0 };
            *weights.entry((u.min(v), u.max(v))).or_insert(0.0) += 0.5 * cot.max(0.0);
        };
        add(b, c, pb - pa, pc - pa);
        add(c, a, pc - pb, pa - pb);
        add(a, b, pa - pc, pb - pc);
    }
    let mut edges: Vec<(u32, u32, f64)> = weights
        .into_iter()
        .map(|((u, v), w)| (u, v, w))
        .collect();
    edges.sort_unstable_by_key(|&(u, v, _)| (u, v));

    let n = mesh.vertices.len();
    let mut degree = vec![0usize; n];
    for &(u, v, _) in &edges {
        degree[u as usize] += 1;
        degree[v as usize] += 1;
    }
    let mut nbr_offset = vec![0usize; n + 1];
    for i in 0..n {
        nbr_offset[i + 1] = nbr_offset[i] + degree[i];
    }
    let mut cursor = nbr_offset.clone();
    let mut nbr_index = vec![0u32; nbr_offset[n]];
    let mut nbr_weight = vec![0f64; nbr_offset[n]];
    for &(u, v, w) in &edges {
        nbr_index[cursor[u as usize]] = v;
        nbr_weight[cursor[u as usize]] = w;
        cursor[u as usize] += 1;
        nbr_index[cursor[v as usize]] = u;
        nbr_weight[cursor[v as usize]] = w;
        cursor[v as usize] += 1;
    }
    Connectivity {
        edges,
        nbr_offset,
        nbr_index,
        nbr_weight,
    }
}

fn harmonic_energy(conn: &Connectivity, p: &[Vector3<f64>]) -> f64 {
    conn.edges
        .iter()
        .map(|&(u, v, w)| w * (p[u as usize] - p[v as usize]).norm_squared())
        .sum()
}

/// One Gauss-Seidel sweep in vertex index order: move each vertex a fraction
/// `step` of the tangential part of its weighted umbrella displacement, then
/// reproject to the sphere.
fn smoothing_sweep(conn: &Connectivity, p: &mut [Vector3<f64>], step: f64) {
    for i in 0..p.len() {
        let lo = conn.nbr_offset[i];
        let hi = conn.nbr_offset[i + 1];
        if lo == hi {
            continue;
        }
        let mut sum = Vector3::zeros();
        let mut total = 0.0;
        for k in lo..hi {
            sum += conn.nbr_weight[k] * p[conn.nbr_index[k] as usize];
            total += conn.nbr_weight[k];
        }
        let target = if total > 1e-12 {
            sum / total
        } else {
            // all incident weights clamped away: plain neighbor mean
            let mut m = Vector3::zeros();
            for k in lo..hi {
                m += p[conn.nbr_index[k] as usize];
            }
            m / (hi - lo) as f64
        };
        let d = target - p[i];
        let tangential = d - d.dot(&p[i]) * p[i];
        p[i] = (p[i] + step * tangential).normalize();
    }
}

/// Area-weighted centroid of the mapped surface.
fn mapped_centroid(faces: &[[u32; 3]], p: &[Vector3<f64>]) -> Vector3<f64> {
    let mut c = Vector3::zeros();
    let mut total = 0.0;
    for &[a, b, c_] in faces {
        let pa = p[a as usize];
        let pb = p[b as usize];
        let pc = p[c_ as usize];
        let area = 0.5 * (pb - pa).cross(&(pc - pa)).norm();
        c += area * (pa + pb + pc) / 3.0;
        total += area;
    }
    if total > 0.0 {
        c / total
    } else {
        c
    }
}

/// Mobius transform of the unit sphere pulling mass toward `a` (|a| < 1);
/// inverse-stereographic normalization used to keep the centroid at 0.
fn mobius_toward(p: &mut [Vector3<f64>], a: Vector3<f64>) {
    let a2 = a.norm_squared();
    for q in p.iter_mut() {
        let denom = (*q + a).norm_squared();
        if denom > 1e-300 {
            *q = (((1.0 - a2) * *q) + 2.0 * (1.0 + a.dot(q)) * a) / denom;
        }
        q.normalize_mut();
    }
}

/// Push the mapped area centroid to (near) the origin.
fn recenter(faces: &[[u32; 3]], p: &mut [Vector3<f64>]) {
    for _ in 0..100 {
        let c = mapped_centroid(faces, p);
        if c.norm() < 1e-4 {
            break;
        }
        mobius_toward(p, -0.5 * c);
    }
}

fn face_det(face: &[u32; 3], p: &[Vector3<f64>]) -> f64 {
    let pa = p[face[0] as usize];
    let pb = p[face[1] as usize];
    let pc = p[face[2] as usize];
    pa.dot(&pb.cross(&pc))
}

fn flipped_faces(faces: &[[u32; 3]], p: &[Vector3<f64>]) -> Vec<usize> {
    let total: f64 = faces.iter().map(|f| face_det(f, p)).sum();
    let sign = if total >= 0.0 { 1.0 } else { -1.0 };
    faces
        .iter()
        .enumerate()
        .filter(|(_, f)| face_det(f, p) * sign <= 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Uniform-weight relaxation of the flipped region (flipped faces plus their
/// one-ring) until no flipped spherical triangles remain.
fn repair_flips(
    mesh: &TriMesh,
    conn: &Connectivity,
    p: &mut [Vector3<f64>],
) -> Result<(), ParamError> {
    for _ in 0..400 {
        let flipped = flipped_faces(&mesh.faces, p);
        if flipped.is_empty() {
            return Ok(());
        }
        let mut region = vec![false; p.len()];
        for &f in &flipped {
            for &v in &mesh.faces[f] {
                region[v as usize] = true;
                let lo = conn.nbr_offset[v as usize];
                let hi = conn.nbr_offset[v as usize + 1];
                for k in lo..hi {
                    region[conn.nbr_index[k] as usize] = true;
                }
            }
        }
        for i in 0..p.len() {
            if !region[i] {
                continue;
            }
            let lo = conn.nbr_offset[i];
            let hi = conn.nbr_offset[i + 1];
            if lo == hi {
                continue;
            }
            let mut m = Vector3::zeros();
            for k in lo..hi {
                m += p[conn.nbr_index[k] as usize];
            }
            let m = m / (hi - lo) as f64;
            let n = m.norm();
            if n > 1e-12 {
                p[i] = m / n;
            }
        }
    }
    let remaining = flipped_faces(&mesh.faces, p).len();
    if remaining > 0 {
        Err(ParamError::NoBijectiveMap(remaining))
    } else {
        Ok(())
    }
}

/// Map a closed genus-0 mesh onto the unit sphere.
pub fn parameterize(mesh: &TriMesh, opts: &ParamOptions) -> Result<SphericalMap, ParamError> {
    if let Err(e) = mesh.validate() {
        return Err(ParamError::NonManifold(e.to_string()));
    }
    let stats = mesh.stats().map_err(|e| match e {
        MeshError::OpenSurface => ParamError::NonManifold("surface has boundary".into()),
        other => ParamError::NonManifold(other.to_string()),
    })?;
    if stats.genus != 0 {
        return Err(ParamError::NotGenusZero(stats.genus));
    }

    let conn = cotan_connectivity(mesh);

    // Gauss-map initialization: directions from the area-weighted centroid.
    let mut centroid = Vector3::zeros();
    let mut total_area = 0.0;
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.faces[f];
        let area = mesh.face_area(f);
        centroid += area
            * (mesh.vertices[a as usize] + mesh.vertices[b as usize] + mesh.vertices[c as usize])
            / 3.0;
        total_area += area;
    }
    centroid /= total_area;
    let mut positions: Vec<Vector3<f64>> = mesh
        .vertices
        .iter()
        .map(|v| {
            let d = v - centroid;
            let n = d.norm();
            if n > 1e-12 {
                d / n
            } else {
                Vector3::new(0.0, 0.0, 1.0)
            }
        })
        .collect();
    recenter(&mesh.faces, &mut positions);

    let mut energies = Vec::new();
    let mut energy = harmonic_energy(&conn, &positions);
    energies.push(energy);

    let mut step = opts.step.clamp(1e-6, 1.0);
    let mut iterations_used = 0;
    let mut scratch = positions.clone();
    for _ in 0..opts.max_iters {
        scratch.copy_from_slice(&positions);
        smoothing_sweep(&conn, &mut scratch, step);
        if mapped_centroid(&mesh.faces, &scratch).norm() > 1e-4 {
            recenter(&mesh.faces, &mut scratch);
        }
        let trial = harmonic_energy(&conn, &scratch);
        if trial <= energy {
            std::mem::swap(&mut positions, &mut scratch);
            iterations_used += 1;
            energies.push(trial);
            let decrease = energy - trial;
            energy = trial;
            if decrease < opts.tol * energy.max(f64::MIN_POSITIVE) {
                break;
            }
            step = (step * 1.2).min(1.0);
        } else {
            step *= 0.5;
            if step < 1e-9 {
                break;
            }
        }
    }

    // clean runs leave the accepted state untouched here, so the returned
    // energy equals the last recorded one
    if !flipped_faces(&mesh.faces, &positions).is_empty() {
        repair_flips(mesh, &conn, &mut positions)?;
    }
    if mapped_centroid(&mesh.faces, &positions).norm() > 1e-3 {
        recenter(&mesh.faces, &mut positions);
        if !flipped_faces(&mesh.faces, &positions).is_empty() {
            repair_flips(mesh, &conn, &mut positions)?;
        }
    }

    let final_energy = harmonic_energy(&conn, &positions);
    if let Some(path) = &opts.energy_log {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "sweep,energy")?;
        for (i, e) in energies.iter().enumerate() {
            writeln!(file, "{i},{e}")?;
        }
    }

    Ok(SphericalMap {
        positions,
        iterations_used,
        final_energy,
        energies,
    })
}

/// Area distortion of the parameterization: per-face and per-vertex log
/// ratios of normalized spherical-image areas over normalized input areas.
/// Per-vertex values use one-ring area sums, not averages of face values.
pub fn area_distortion(mesh: &TriMesh, smap: &SphericalMap) -> Result<AreaDistortionMap, ParamError> {
    if smap.positions.len() != mesh.vertices.len() {
        return Err(ParamError::ConnectivityMismatch {
            map: smap.positions.len(),
            mesh: mesh.vertices.len(),
        });
    }
    let nf = mesh.faces.len();
    let tri_area = |p: &[Vector3<f64>], f: &[u32; 3]| -> f64 {
        let pa = p[f[0] as usize];
        let pb = p[f[1] as usize];
        let pc = p[f[2] as usize];
        0.5 * (pb - pa).cross(&(pc - pa)).norm()
    };
    let mut input: Vec<f64> = (0..nf).map(|f| mesh.face_area(f)).collect();
    let mut mapped: Vec<f64> = mesh
        .faces
        .iter()
        .map(|f| tri_area(&smap.positions, f))
        .collect();
    for areas in [&mut input, &mut mapped] {
        let total: f64 = areas.iter().sum();
        let floor = 1e-12 * total / nf as f64;
        for a in areas.iter_mut() {
            *a = a.max(floor);
        }
        let total: f64 = areas.iter().sum();
        for a in areas.iter_mut() {
            *a /= total;
        }
    }

    let epsilon_face: Vec<f64> = (0..nf).map(|f| (mapped[f] / input[f]).ln()).collect();

    let nv = mesh.vertices.len();
    let mut ring_input = vec![0.0; nv];
    let mut ring_mapped = vec![0.0; nv];
    for (f, face) in mesh.faces.iter().enumerate() {
        for &v in face {
            ring_input[v as usize] += input[f];
            ring_mapped[v as usize] += mapped[f];
        }
    }
    let epsilon_vertex: Vec<f64> = (0..nv)
        .map(|v| {
            if ring_input[v] > 0.0 && ring_mapped[v] > 0.0 {
                (ring_mapped[v] / ring_input[v]).ln()
            } else {
                0.0
            }
        })
        .collect();

    Ok(AreaDistortionMap {
        epsilon_vertex,
        epsilon_face,
    })
}
