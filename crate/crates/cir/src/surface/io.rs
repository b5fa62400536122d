//! OBJ (geometry only) and ascii PLY (geometry + per-vertex channels) output.

use super::{Channel, MeshError, TriMesh};
use nalgebra::Vector3;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Fig.-1 color convention for the "class" channel.
fn class_color(class: u8) -> [u8; 3] {
    match class {
        1 => [255, 0, 0], // spiculation: red
        2 => [0, 0, 255], // lobulation: blue
        _ => [255, 255, 255], // nodule base: white
    }
}

/// Write triangle geometry as Wavefront OBJ. Positions use Rust's shortest
/// round-trip float formatting, so read-back is exact.
pub fn write_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Read triangle geometry from Wavefront OBJ. Triangles only; any other face
/// arity is a `MalformedFile` error. Channels are not carried by OBJ.
pub fn read_obj(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let text = fs::read_to_string(path)?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<f64> = parts
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| {
                            MeshError::MalformedFile(format!("line {}: bad vertex", lineno + 1))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(MeshError::MalformedFile(format!(
                        "line {}: vertex needs 3 coordinates",
                        lineno + 1
                    )));
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = parts
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        head.parse::<u32>().ok().filter(|&i| i >= 1).ok_or_else(|| {
                            MeshError::MalformedFile(format!(
                                "line {}: bad face index '{t}'",
                                lineno + 1
                            ))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() != 3 {
                    return Err(MeshError::MalformedFile(format!(
                        "line {}: only triangles are supported ({} indices)",
                        lineno + 1,
                        idx.len()
                    )));
                }
                faces.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
            }
            // normals, texcoords, groups etc. carry no geometry we keep
            Some("vn") | Some("vt") | Some("g") | Some("o") | Some("s") | Some("usemtl")
            | Some("mtllib") => {}
            Some(other) => {
                return Err(MeshError::MalformedFile(format!(
                    "line {}: unsupported element '{other}'",
                    lineno + 1
                )));
            }
            None => {}
        }
    }
    let mesh = TriMesh::new(vertices, faces);
    let nv = mesh.vertices.len() as u32;
    if mesh.faces.iter().flatten().any(|&i| i >= nv) {
        return Err(MeshError::MalformedFile("face index out of bounds".into()));
    }
    Ok(mesh)
}

/// Write an ascii PLY with per-vertex channel properties. An "epsilon"
/// channel becomes a float property; a "class" channel becomes a uchar
/// property plus red/green/blue colors (red: spiculations, blue: lobulations,
/// white: nodule).
pub fn write_ply(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    write_ply_with(mesh, path, &[])
}

pub fn write_ply_with(
    mesh: &TriMesh,
    path: impl AsRef<Path>,
    comments: &[String],
) -> Result<(), MeshError> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);

    let scalar_channels: Vec<(&String, &Vec<f64>)> = mesh
        .channels
        .iter()
        .filter_map(|(name, ch)| match ch {
            Channel::Scalar(data) => Some((name, data)),
            Channel::Label(_) => None,
        })
        .collect();
    let class = mesh.channels.get("class").and_then(|ch| match ch {
        Channel::Label(data) => Some(data),
        Channel::Scalar(_) => None,
    });

    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    for c in comments {
        writeln!(w, "comment {c}")?;
    }
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    for (name, _) in &scalar_channels {
        writeln!(w, "property float {name}")?;
    }
    if class.is_some() {
        writeln!(w, "property uchar class")?;
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    writeln!(w, "element face {}", mesh.faces.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;

    for (i, v) in mesh.vertices.iter().enumerate() {
        write!(w, "{} {} {}", v.x, v.y, v.z)?;
        for (_, data) in &scalar_channels {
            write!(w, " {}", data[i])?;
        }
        if let Some(class) = class {
            let [r, g, b] = class_color(class[i]);
            write!(w, " {} {} {} {}", class[i], r, g, b)?;
        }
        writeln!(w)?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom;
    use std::collections::BTreeMap;

    #[test]
    fn obj_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sphere.obj");
        let mesh = phantom::random_star_mesh(3, 2, 0.2);
        write_obj(&mesh, &path).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(back.faces, mesh.faces);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert_eq!(a, b, "shortest round-trip formatting is exact");
        }
    }

    #[test]
    fn quad_faces_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quad.obj");
        fs::write(
            &path,
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n",
        )
        .unwrap();
        assert!(matches!(read_obj(&path), Err(MeshError::MalformedFile(_))));
    }

    #[test]
    fn ply_colors_follow_class_convention() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.ply");
        let mut mesh = TriMesh::new(
            vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        );
        let mut channels = BTreeMap::new();
        channels.insert("class".to_string(), Channel::Label(vec![0, 1, 2]));
        channels.insert("epsilon".to_string(), Channel::Scalar(vec![0.5, -1.25, 0.0]));
        mesh.channels = channels;
        write_ply(&mesh, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("property float epsilon"));
        assert!(text.contains("property uchar class"));
        let lines: Vec<&str> = text.lines().collect();
        let header_end = lines.iter().position(|&l| l == "end_header").unwrap();
        assert!(lines[header_end + 1].ends_with("0.5 0 255 255 255"), "{}", lines[header_end + 1]);
        assert!(lines[header_end + 2].ends_with("-1.25 1 255 0 0"), "{}", lines[header_end + 2]);
        assert!(lines[header_end + 3].ends_with("0 2 0 0 255"), "{}", lines[header_end + 3]);
    }
}
