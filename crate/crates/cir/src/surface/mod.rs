//! Closed triangle surfaces: extraction from binary masks, mesh structure and
//! statistics, connected components, smoothing, and OBJ/PLY I/O.

mod io;
mod marching_cubes;

pub use io::{read_obj, write_obj, write_ply, write_ply_with};
pub use marching_cubes::{marching_cubes, marching_cubes_iso};

use nalgebra::Vector3;
use std::collections::BTreeMap;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mask contains no foreground voxels")]
    EmptyMask,
    #[error("marching cubes produced a non-manifold surface")]
    NonManifoldOutput,
    #[error("operation requires a closed surface but the mesh has boundary")]
    OpenSurface,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Named per-vertex attribute data.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Scalar(Vec<f64>),
    Label(Vec<u8>),
}

impl Channel {
    pub fn len(&self) -> usize {
        match self {
            Channel::Scalar(v) => v.len(),
            Channel::Label(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Indexed triangle surface in physical coordinates (mm).
///
/// Faces are counter-clockwise as seen from outside the enclosed solid.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub channels: BTreeMap<String, Channel>,
}

/// Summary statistics of a closed manifold mesh.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    pub genus: i64,
    pub surface_area: f64,
    pub volume: f64,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            faces,
            channels: BTreeMap::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    #[inline]
    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        let p0 = self.vertices[a as usize];
        let p1 = self.vertices[b as usize];
        let p2 = self.vertices[c as usize];
        0.5 * (p1 - p0).cross(&(p2 - p0)).norm()
    }

    #[inline]
    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[f];
        let p0 = self.vertices[a as usize];
        let p1 = self.vertices[b as usize];
        let p2 = self.vertices[c as usize];
        let n = (p1 - p0).cross(&(p2 - p0));
        let len = n.norm();
        if len > 1e-300 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Signed enclosed volume; positive when faces wind counter-clockwise
    /// seen from outside.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let p0 = self.vertices[a as usize];
                let p1 = self.vertices[b as usize];
                let p2 = self.vertices[c as usize];
                p0.dot(&p1.cross(&p2)) / 6.0
            })
            .sum()
    }

    /// Undirected edges, each as (min, max) vertex pair, deduplicated.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Per-vertex neighbor lists derived from face edges, each sorted.
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for &(u, v) in &self.edges() {
            nbrs[u as usize].push(v);
            nbrs[v as usize].push(u);
        }
        nbrs
    }

    /// Sum of incident face areas per vertex.
    pub fn one_ring_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.vertices.len()];
        for f in 0..self.faces.len() {
            let a = self.face_area(f);
            for &v in &self.faces[f] {
                areas[v as usize] += a;
            }
        }
        areas
    }

    /// Area-weighted vertex normals, normalized.
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for f in 0..self.faces.len() {
            let [a, b, c] = self.faces[f];
            let p0 = self.vertices[a as usize];
            let p1 = self.vertices[b as usize];
            let p2 = self.vertices[c as usize];
            let n = (p1 - p0).cross(&(p2 - p0)); // length = 2 * area
            for v in [a, b, c] {
                normals[v as usize] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 1e-300 {
                *n /= len;
            }
        }
        normals
    }

    pub fn bounding_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    /// Check structural invariants: index bounds, no degenerate index triples,
    /// 1-or-2 faces per edge, consistent orientation, channel lengths.
    pub fn validate(&self) -> Result<(), MeshError> {
        let nv = self.vertices.len() as u32;
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for &[a, b, c] in &self.faces {
            if a >= nv || b >= nv || c >= nv {
                return Err(MeshError::InvalidMesh("face index out of bounds".into()));
            }
            if a == b || b == c || a == c {
                return Err(MeshError::InvalidMesh("face repeats a vertex index".into()));
            }
            for (u, v) in [(a, b), (b, c), (c, a)] {
                let count = directed.entry((u, v)).or_insert(0);
                *count += 1;
                if *count > 1 {
                    // a repeated directed edge is either a non-manifold edge or
                    // an orientation flip between its two faces
                    return Err(MeshError::InvalidMesh(format!(
                        "directed edge ({u},{v}) used more than once"
                    )));
                }
            }
        }
        for (u, v) in directed.keys() {
            let opposite = directed.get(&(*v, *u)).copied().unwrap_or(0);
            if opposite > 1 {
                return Err(MeshError::InvalidMesh("edge shared by >2 faces".into()));
            }
        }
        for (name, ch) in &self.channels {
            if ch.len() != self.vertices.len() {
                return Err(MeshError::InvalidMesh(format!(
                    "channel '{name}' length {} != vertex count {}",
                    ch.len(),
                    self.vertices.len()
                )));
            }
        }
        Ok(())
    }

    /// True when every edge is shared by exactly two faces.
    pub fn is_closed(&self) -> bool {
        let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
        for &[a, b, c] in &self.faces {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *counts.entry((u.min(v), u.max(v))).or_insert(0) += 1;
            }
        }
        counts.values().all(|&c| c == 2)
    }

    /// V/E/F counts, Euler characteristic, genus, area and enclosed volume.
    /// Requires a closed surface.
    pub fn stats(&self) -> Result<MeshStats, MeshError> {
        self.validate()?;
        if !self.is_closed() {
            return Err(MeshError::OpenSurface);
        }
        let v = self.vertices.len();
        let e = self.edges().len();
        let f = self.faces.len();
        let euler = v as i64 - e as i64 + f as i64;
        Ok(MeshStats {
            vertices: v,
            edges: e,
            faces: f,
            euler,
            genus: (2 - euler) / 2,
            surface_area: self.surface_area(),
            volume: self.signed_volume().abs(),
        })
    }

    /// Submesh induced by the face-connectivity component with the most
    /// faces, reindexed compactly. Channels are carried over per vertex.
    pub fn largest_component(&self) -> TriMesh {
        if self.faces.is_empty() {
            return self.clone();
        }
        // faces are adjacent when they share an undirected edge
        let mut edge_faces: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (fi, &[a, b, c]) in self.faces.iter().enumerate() {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                edge_faces
                    .entry((u.min(v), u.max(v)))
                    .or_default()
                    .push(fi as u32);
            }
        }
        let mut component = vec![u32::MAX; self.faces.len()];
        let mut sizes = Vec::new();
        for seed in 0..self.faces.len() {
            if component[seed] != u32::MAX {
                continue;
            }
            let id = sizes.len() as u32;
            let mut size = 0usize;
            let mut stack = vec![seed as u32];
            component[seed] = id;
            while let Some(f) = stack.pop() {
                size += 1;
                let [a, b, c] = self.faces[f as usize];
                for (u, v) in [(a, b), (b, c), (c, a)] {
                    for &g in &edge_faces[&(u.min(v), u.max(v))] {
                        if component[g as usize] == u32::MAX {
                            component[g as usize] = id;
                            stack.push(g);
                        }
                    }
                }
            }
            sizes.push(size);
        }
        let best = sizes
            .iter()
            .enumerate()
            .max_by_key(|&(i, &s)| (s, std::cmp::Reverse(i)))
            .map(|(i, _)| i as u32)
            .unwrap();

        let mut vertex_map = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (fi, &[a, b, c]) in self.faces.iter().enumerate() {
            if component[fi] != best {
                continue;
            }
            let mut mapped = [0u32; 3];
            for (slot, old) in mapped.iter_mut().zip([a, b, c]) {
                if vertex_map[old as usize] == u32::MAX {
                    vertex_map[old as usize] = vertices.len() as u32;
                    vertices.push(self.vertices[old as usize]);
                }
                *slot = vertex_map[old as usize];
            }
            faces.push(mapped);
        }

        let mut channels = BTreeMap::new();
        for (name, ch) in &self.channels {
            let picked = match ch {
                Channel::Scalar(data) => Channel::Scalar(remap_channel(data, &vertex_map, vertices.len())),
                Channel::Label(data) => Channel::Label(remap_channel(data, &vertex_map, vertices.len())),
            };
            channels.insert(name.clone(), picked);
        }
        TriMesh {
            vertices,
            faces,
            channels,
        }
    }
}

fn remap_channel<T: Copy + Default>(data: &[T], vertex_map: &[u32], new_len: usize) -> Vec<T> {
    let mut out = vec![T::default(); new_len];
    for (old, &new) in vertex_map.iter().enumerate() {
        if new != u32::MAX {
            out[new as usize] = data[old];
        }
    }
    out
}

/// Taubin lambda/mu smoothing with uniform weights. Off by default in the
/// pipeline: smoothing erodes the spikes the pipeline exists to measure.
pub fn taubin_smooth(mesh: &TriMesh, iterations: usize, lambda: f64, mu: f64) -> TriMesh {
    let nbrs = mesh.vertex_neighbors();
    let mut positions = mesh.vertices.clone();
    let mut scratch = positions.clone();
    for _ in 0..iterations {
        for &factor in &[lambda, mu] {
            for (i, nb) in nbrs.iter().enumerate() {
                if nb.is_empty() {
                    scratch[i] = positions[i];
                    continue;
                }
                let mut mean = Vector3::zeros();
                for &j in nb {
                    mean += positions[j as usize];
                }
                mean /= nb.len() as f64;
                scratch[i] = positions[i] + factor * (mean - positions[i]);
            }
            std::mem::swap(&mut positions, &mut scratch);
        }
    }
    TriMesh {
        vertices: positions,
        faces: mesh.faces.clone(),
        channels: mesh.channels.clone(),
    }
}
