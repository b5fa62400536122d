//! Rasterize a vertex-classified mesh annotation onto a reference voxel grid:
//! parity-fill the interior as nodule base, then relabel voxels near the
//! surface by the class of the nearest mesh vertex.

use super::{NoduleAnnotation, SpikeError, VERTEX_LOBULATION, VERTEX_SPICULATION};
use crate::surface::TriMesh;
use crate::volume::{MaskVolume, LABEL_BASE, LABEL_LOBULATION, LABEL_SPICULATION};
use nalgebra::Vector3;
use std::collections::HashMap;

/// Closest point on a triangle to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
fn closest_point_on_triangle(
    p: Vector3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
    c: Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + v * ab;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + w * ac;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Voxelize an annotation onto `grid`'s geometry. Interior voxels become
/// base (1); voxels whose center lies within half a voxel diagonal of the
/// surface take the class of the nearest mesh vertex (spiculation 2,
/// lobulation 3, base 1), with ties resolved spiculation > lobulation > base.
pub fn voxelize_annotation(
    ann: &NoduleAnnotation,
    mesh: &TriMesh,
    grid: &MaskVolume,
) -> Result<MaskVolume, SpikeError> {
    let (nx, ny, nz) = grid.dims();
    let [sx, sy, sz] = grid.spacing();
    let [ox, oy, oz] = grid.origin();
    let (lo, hi) = mesh.bounding_box();
    for axis in 0..3 {
        let spans = (hi[axis] - lo[axis]) / grid.spacing()[axis];
        if spans < 3.0 {
            return Err(SpikeError::GridTooCoarse { axis, spans });
        }
    }

    let mut labels = vec![0u8; nx * ny * nz];

    // Interior fill: parity ray casting along +x at each (y, z) voxel-center
    // row. A fixed sub-voxel offset keeps rays off mesh vertices and edges
    // (marching-cubes vertices sit exactly on voxel-center lattice lines);
    // voxels that close to the surface are relabeled by the surface pass.
    let jitter_y = 1.2345e-4 * sy;
    let jitter_z = 2.6789e-4 * sz;
    let mut crossings: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for face in &mesh.faces {
        let a = mesh.vertices[face[0] as usize];
        let b = mesh.vertices[face[1] as usize];
        let c = mesh.vertices[face[2] as usize];
        let ymin = a.y.min(b.y).min(c.y);
        let ymax = a.y.max(b.y).max(c.y);
        let zmin = a.z.min(b.z).min(c.z);
        let zmax = a.z.max(b.z).max(c.z);
        let j0 = (((ymin - oy - jitter_y) / sy).ceil().max(0.0)) as usize;
        let j1 = (((ymax - oy - jitter_y) / sy).floor()).min(ny as f64 - 1.0) as i64;
        let k0 = (((zmin - oz - jitter_z) / sz).ceil().max(0.0)) as usize;
        let k1 = (((zmax - oz - jitter_z) / sz).floor()).min(nz as f64 - 1.0) as i64;
        if j1 < 0 || k1 < 0 {
            continue;
        }
        for k in k0..=(k1 as usize) {
            let rz = oz + k as f64 * sz + jitter_z;
            for j in j0..=(j1 as usize) {
                let ry = oy + j as f64 * sy + jitter_y;
                // barycentric solve in the (y, z) projection
                let d00 = b.y - a.y;
                let d01 = b.z - a.z;
                let d10 = c.y - a.y;
                let d11 = c.z - a.z;
                let det = d00 * d11 - d01 * d10;
                if det.abs() < 1e-30 {
                    continue; // projection degenerate: ray cannot cross transversally
                }
                let py = ry - a.y;
                let pz = rz - a.z;
                let u = (py * d11 - pz * d10) / det;
                let v = (d00 * pz - d01 * py) / det;
                if u < 0.0 || v < 0.0 || u + v > 1.0 {
                    continue;
                }
                let x = a.x + u * (b.x - a.x) + v * (c.x - a.x);
                crossings.entry((j, k)).or_default().push(x);
            }
        }
    }
    for ((j, k), mut xs) in crossings {
        xs.sort_by(f64::total_cmp);
        debug_assert!(xs.len() % 2 == 0, "odd crossing count on a closed mesh");
        for pair in xs.chunks_exact(2) {
            let i0 = (((pair[0] - ox) / sx).ceil().max(0.0)) as usize;
            let i1 = ((pair[1] - ox) / sx).floor() as i64;
            if i1 < 0 {
                continue;
            }
            for i in i0..=(i1 as usize).min(nx - 1) {
                labels[i + nx * (j + ny * k)] = LABEL_BASE;
            }
        }
    }

    // Surface pass: mark voxels within half a voxel diagonal of any triangle.
    let half_diag = 0.5 * (sx * sx + sy * sy + sz * sz).sqrt();
    let mut surface: Vec<bool> = vec![false; nx * ny * nz];
    let pos = |i: usize, j: usize, k: usize| -> Vector3<f64> {
        Vector3::new(
            ox + i as f64 * sx,
            oy + j as f64 * sy,
            oz + k as f64 * sz,
        )
    };
    for face in &mesh.faces {
        let a = mesh.vertices[face[0] as usize];
        let b = mesh.vertices[face[1] as usize];
        let c = mesh.vertices[face[2] as usize];
        let lo = a.inf(&b).inf(&c).add_scalar(-half_diag);
        let hi = a.sup(&b).sup(&c).add_scalar(half_diag);
        let i0 = (((lo.x - ox) / sx).ceil().max(0.0)) as usize;
        let i1 = (((hi.x - ox) / sx).floor()).min(nx as f64 - 1.0).max(-1.0) as i64;
        let j0 = (((lo.y - oy) / sy).ceil().max(0.0)) as usize;
        let j1 = (((hi.y - oy) / sy).floor()).min(ny as f64 - 1.0).max(-1.0) as i64;
        let k0 = (((lo.z - oz) / sz).ceil().max(0.0)) as usize;
        let k1 = (((hi.z - oz) / sz).floor()).min(nz as f64 - 1.0).max(-1.0) as i64;
        if i1 < 0 || j1 < 0 || k1 < 0 {
            continue;
        }
        for k in k0..=(k1 as usize) {
            for j in j0..=(j1 as usize) {
                for i in i0..=(i1 as usize) {
                    let idx = i + nx * (j + ny * k);
                    if surface[idx] {
                        continue;
                    }
                    let p = pos(i, j, k);
                    if (closest_point_on_triangle(p, a, b, c) - p).norm() <= half_diag {
                        surface[idx] = true;
                    }
                }
            }
        }
    }

    // Nearest-vertex class for surface voxels via a spatial hash on vertices.
    let cell = sx.max(sy).max(sz);
    let bucket_of = |p: &Vector3<f64>| -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (v, p) in mesh.vertices.iter().enumerate() {
        buckets.entry(bucket_of(p)).or_default().push(v as u32);
    }
    // higher rank wins distance ties: spiculation > lobulation > base
    let tie_rank = |class: u8| -> u8 {
        match class {
            VERTEX_SPICULATION => 2,
            VERTEX_LOBULATION => 1,
            _ => 0,
        }
    };

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = i + nx * (j + ny * k);
                if !surface[idx] {
                    continue;
                }
                let p = pos(i, j, k);
                let (bx, by, bz) = bucket_of(&p);
                let mut best: Option<(f64, u8, u32)> = None;
                let mut ring = 0i64;
                loop {
                    for dz in -ring..=ring {
                        for dy in -ring..=ring {
                            for dx in -ring..=ring {
                                if dx.abs() < ring && dy.abs() < ring && dz.abs() < ring {
                                    continue; // only the new shell
                                }
                                if let Some(list) =
                                    buckets.get(&(bx + dx, by + dy, bz + dz))
                                {
                                    for &v in list {
                                        let d = (mesh.vertices[v as usize] - p).norm();
                                        let rank = tie_rank(ann.vertex_class[v as usize]);
                                        let better = match &best {
                                            None => true,
                                            Some((bd, br, bv)) => {
                                                d < bd - 1e-9
                                                    || ((d - bd).abs() <= 1e-9
                                                        && (rank > *br
                                                            || (rank == *br && v < *bv)))
                                            }
                                        };
                                        if better {
                                            best = Some((d, rank, v));
                                        }
                                    }
                                }
                            }
                        }
                    }
                    // any point in an unsearched shell is at least this far
                    let shell_min = ring as f64 * cell;
                    match &best {
                        Some((d, _, _)) if *d <= shell_min => break,
                        _ if ring as usize > nx + ny + nz => break,
                        _ => ring += 1,
                    }
                }
                if let Some((_, rank, _)) = best {
                    labels[idx] = match rank {
                        2 => LABEL_SPICULATION,
                        1 => LABEL_LOBULATION,
                        _ => LABEL_BASE,
                    };
                }
            }
        }
    }

    Ok(
        MaskVolume::new((nx, ny, nz), grid.spacing(), grid.origin(), labels, vec![0, 1, 2, 3])
            .expect("label buffer matches grid dims"),
    )
}
