//! Synthetic phantoms with analytically known geometry: icospheres, tori,
//! star-shaped blobs, and voxel masks of spheres with attached cones or
//! bumps. These drive the test and acceptance suites and the runnable
//! examples, so they live in the library rather than in test code.

use crate::surface::TriMesh;
use crate::volume::MaskVolume;
use nalgebra::Vector3;
use std::collections::HashMap;

/// Fixed-sequence generator (splitmix64) so phantom fixtures never change
/// across runs or dependency upgrades.
#[derive(Debug, Clone)]
pub struct FixtureRng(u64);

impl FixtureRng {
    pub fn new(seed: u64) -> Self {
        FixtureRng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn unit_vector(&mut self) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                self.range(-1.0, 1.0),
                self.range(-1.0, 1.0),
                self.range(-1.0, 1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }
}

const ICO_T: f64 = 1.618033988749895; // (1 + sqrt 5) / 2

fn icosahedron() -> (Vec<Vector3<f64>>, Vec<[u32; 3]>) {
    let t = ICO_T;
    let vertices = vec![
        Vector3::new(-1.0, t, 0.0),
        Vector3::new(1.0, t, 0.0),
        Vector3::new(-1.0, -t, 0.0),
        Vector3::new(1.0, -t, 0.0),
        Vector3::new(0.0, -1.0, t),
        Vector3::new(0.0, 1.0, t),
        Vector3::new(0.0, -1.0, -t),
        Vector3::new(0.0, 1.0, -t),
        Vector3::new(t, 0.0, -1.0),
        Vector3::new(t, 0.0, 1.0),
        Vector3::new(-t, 0.0, -1.0),
        Vector3::new(-t, 0.0, 1.0),
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

/// Unit-direction icosphere: subdivided icosahedron with every vertex
/// projected onto the unit sphere, then scaled by `radius`.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriMesh {
    let (mut vertices, mut faces) = icosahedron();
    for v in &mut vertices {
        v.normalize_mut();
    }
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let mut mid = |u: u32, v: u32, vertices: &mut Vec<Vector3<f64>>| -> u32 {
                let key = (u.min(v), u.max(v));
                *midpoint.entry(key).or_insert_with(|| {
                    let m = (vertices[u as usize] + vertices[v as usize]).normalize();
                    vertices.push(m);
                    vertices.len() as u32 - 1
                })
            };
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next_faces.push([a, ab, ca]);
            next_faces.push([b, bc, ab]);
            next_faces.push([c, ca, bc]);
            next_faces.push([ab, bc, ca]);
        }
        faces = next_faces;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    TriMesh::new(vertices, faces)
}

/// Star-shaped surface from a positive radial function over directions.
pub fn radial_mesh(subdivisions: u32, radial: impl Fn(&Vector3<f64>) -> f64) -> TriMesh {
    let mut mesh = icosphere(subdivisions, 1.0);
    for v in &mut mesh.vertices {
        let dir = v.normalize();
        *v = dir * radial(&dir);
    }
    mesh
}

/// Grid-triangulated torus (genus 1), `nu` x `nv` quads split into triangles.
pub fn torus(nu: usize, nv: usize, major: f64, minor: f64) -> TriMesh {
    use std::f64::consts::TAU;
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let ring = major + minor * v.cos();
            vertices.push(Vector3::new(
                ring * u.cos(),
                ring * u.sin(),
                minor * v.sin(),
            ));
        }
    }
    let mut faces = Vec::with_capacity(nu * nv * 2);
    let at = |i: usize, j: usize| (i % nu * nv + j % nv) as u32;
    for i in 0..nu {
        for j in 0..nv {
            let a = at(i, j);
            let b = at(i + 1, j);
            let c = at(i + 1, j + 1);
            let d = at(i, j + 1);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, faces)
}

/// Random star-shaped phantom: unit sphere plus a few smooth radial lobes.
/// The total lobe amplitude is `amplitude`, so radii stay within
/// `1 ± amplitude` and the surface remains star-shaped about the origin.
pub fn random_star_mesh(seed: u64, subdivisions: u32, amplitude: f64) -> TriMesh {
    let mut rng = FixtureRng::new(seed);
    let lobes = 4 + (rng.next_u64() % 4) as usize;
    let mut dirs = Vec::with_capacity(lobes);
    let mut raw = Vec::with_capacity(lobes);
    let mut sharp = Vec::with_capacity(lobes);
    let mut total = 0.0;
    for _ in 0..lobes {
        dirs.push(rng.unit_vector());
        let a = rng.range(-1.0, 1.0);
        total += a.abs();
        raw.push(a);
        sharp.push(rng.range(2.0, 8.0));
    }
    let scale = if total > 0.0 { amplitude / total } else { 0.0 };
    radial_mesh(subdivisions, move |d| {
        let mut r = 1.0;
        for ((u, a), k) in dirs.iter().zip(&raw).zip(&sharp) {
            let c = 0.5 * (1.0 + d.dot(u));
            r += scale * a * c.powf(*k);
        }
        r
    })
}

/// Unit sphere with one sharp cone along `axis` ending in a tent-profile tip
/// of the given height (in sphere radii) over a cap of `cap_angle` radians.
/// The tip coincides with an icosphere vertex when `axis` points at one.
pub fn cone_spiked_sphere_mesh(
    subdivisions: u32,
    axis: Vector3<f64>,
    cap_angle: f64,
    height: f64,
) -> TriMesh {
    let axis = axis.normalize();
    radial_mesh(subdivisions, move |d| {
        let theta = d.dot(&axis).clamp(-1.0, 1.0).acos();
        1.0 + height * (1.0 - theta / cap_angle).max(0.0)
    })
}

/// Unit sphere with one smooth hemispherical-style bump along `axis`.
pub fn bump_sphere_mesh(
    subdivisions: u32,
    axis: Vector3<f64>,
    cap_angle: f64,
    height: f64,
) -> TriMesh {
    let axis = axis.normalize();
    radial_mesh(subdivisions, move |d| {
        let theta = d.dot(&axis).clamp(-1.0, 1.0).acos();
        let t = (theta / cap_angle).min(1.0);
        1.0 + height * (1.0 - t * t).powi(2)
    })
}

/// Direction of icosahedron vertex 0; cone/bump phantoms aligned to it keep
/// an exact mesh vertex at the apex through all subdivision levels.
pub fn ico_vertex_axis() -> Vector3<f64> {
    Vector3::new(-1.0, ICO_T, 0.0).normalize()
}

fn mask_from_predicate(
    half_extent_mm: f64,
    spacing: f64,
    inside: impl Fn(Vector3<f64>) -> bool,
) -> MaskVolume {
    let n = (2.0 * half_extent_mm / spacing).ceil() as usize + 3;
    let center = 0.5 * (n as f64 - 1.0) * spacing;
    let c = Vector3::new(center, center, center);
    MaskVolume::binary((n, n, n), [spacing; 3], [0.0; 3], |i, j, k| {
        let p = Vector3::new(i as f64 * spacing, j as f64 * spacing, k as f64 * spacing);
        inside(p - c)
    })
}

/// Voxelized ball of the given radius (mm), isotropic spacing.
pub fn ball_mask(radius_mm: f64, spacing: f64) -> MaskVolume {
    mask_from_predicate(radius_mm, spacing, |p| p.norm() <= radius_mm)
}

/// Ball with a sharp cone along +z: apex half-angle `half_angle_deg`,
/// rising `height_mm` above the sphere surface.
pub fn cone_spiked_ball_mask(
    radius_mm: f64,
    height_mm: f64,
    half_angle_deg: f64,
    spacing: f64,
) -> MaskVolume {
    let apex_z = radius_mm + height_mm;
    let slope = half_angle_deg.to_radians().tan();
    mask_from_predicate(apex_z, spacing, move |p| {
        if p.norm() <= radius_mm {
            return true;
        }
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        p.z >= 0.0 && p.z <= apex_z && rho <= slope * (apex_z - p.z)
    })
}

/// Ball with a hemispherical bump: a smaller ball centered on the surface.
pub fn bump_ball_mask(radius_mm: f64, bump_radius_mm: f64, spacing: f64) -> MaskVolume {
    let bump_center = Vector3::new(0.0, 0.0, radius_mm);
    mask_from_predicate(radius_mm + bump_radius_mm, spacing, move |p| {
        p.norm() <= radius_mm || (p - bump_center).norm() <= bump_radius_mm
    })
}

/// Random star-shaped blob mask with mean radius `radius_mm`.
pub fn random_blob_mask(seed: u64, radius_mm: f64, amplitude: f64, spacing: f64) -> MaskVolume {
    let mut rng = FixtureRng::new(seed);
    let lobes = 4 + (rng.next_u64() % 3) as usize;
    let mut dirs = Vec::new();
    let mut raw = Vec::new();
    let mut sharp = Vec::new();
    let mut total = 0.0;
    for _ in 0..lobes {
        dirs.push(rng.unit_vector());
        let a = rng.range(-1.0, 1.0);
        total += a.abs();
        raw.push(a);
        sharp.push(rng.range(2.0, 6.0));
    }
    let scale = if total > 0.0 { amplitude / total } else { 0.0 };
    let radial = move |d: &Vector3<f64>| -> f64 {
        let mut r = 1.0;
        for ((u, a), k) in dirs.iter().zip(&raw).zip(&sharp) {
            let c = 0.5 * (1.0 + d.dot(u));
            r += scale * a * c.powf(*k);
        }
        r * radius_mm
    };
    mask_from_predicate(radius_mm * (1.0 + amplitude), spacing, move |p| {
        let n = p.norm();
        if n < 1e-9 {
            return true;
        }
        n <= radial(&(p / n))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_face_counts_double_per_level() {
        assert_eq!(icosphere(0, 1.0).face_count(), 20);
        assert_eq!(icosphere(1, 1.0).face_count(), 80);
        assert_eq!(icosphere(2, 1.0).face_count(), 320);
        assert_eq!(icosphere(3, 1.0).face_count(), 1280);
    }

    #[test]
    fn icosphere_is_valid_closed_and_outward() {
        let s = icosphere(2, 2.0);
        s.validate().unwrap();
        assert!(s.is_closed());
        assert!(s.signed_volume() > 0.0);
        for v in &s.vertices {
            assert!((v.norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn star_mesh_radii_bounded_by_amplitude() {
        let m = random_star_mesh(11, 3, 0.3);
        m.validate().unwrap();
        assert!(m.is_closed());
        for v in &m.vertices {
            let r = v.norm();
            assert!((0.7..=1.3).contains(&r), "radius {r}");
        }
    }

    #[test]
    fn cone_phantom_has_apex_vertex_on_axis() {
        let axis = ico_vertex_axis();
        let m = cone_spiked_sphere_mesh(3, axis, 0.35, 1.0);
        let apex = m
            .vertices
            .iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        assert!((apex.norm() - 2.0).abs() < 1e-9);
        assert!(apex.normalize().dot(&axis) > 1.0 - 1e-9);
    }

    #[test]
    fn masks_have_foreground_and_fit() {
        let ball = ball_mask(8.0, 1.0);
        let expect = 4.0 / 3.0 * std::f64::consts::PI * 512.0;
        let ratio = ball.foreground_count() as f64 / expect;
        assert!((0.9..=1.1).contains(&ratio), "ratio {ratio}");

        let cone = cone_spiked_ball_mask(8.0, 8.0, 15.0, 1.0);
        assert!(cone.foreground_count() > ball.foreground_count());

        let blob = random_blob_mask(5, 9.0, 0.3, 1.0);
        assert!(blob.foreground_count() > 1000);
    }
}
