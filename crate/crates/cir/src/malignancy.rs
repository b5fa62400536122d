//! Malignancy-classifier feature assembly and the fully-connected forward
//! pass. Feature vectors follow the fixed published layout: 1000 vertices x
//! 96 features, the 96 being 32 per decoder branch for the nodule,
//! spiculation, and lobulation branches, branch-major within each vertex.
//! Meshes with fewer vertices are zero-padded, longer ones truncated to the
//! first 1000 in mesh order.

use crate::sphere::AreaDistortionMap;
use crate::spikes::NoduleAnnotation;
use crate::surface::TriMesh;
use serde::Serialize;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MESH_FEATURE_VERTICES: usize = 1000;
pub const FEATURES_PER_BRANCH: usize = 32;
pub const BRANCH_COUNT: usize = 3;
pub const FEATURES_PER_VERTEX: usize = FEATURES_PER_BRANCH * BRANCH_COUNT;
pub const MESH_FEATURE_LEN: usize = MESH_FEATURE_VERTICES * FEATURES_PER_VERTEX;
pub const ENCODER_FEATURE_LEN: usize = 256 * 4 * 4 * 4;
pub const HYBRID_FEATURE_LEN: usize = ENCODER_FEATURE_LEN + MESH_FEATURE_LEN;

const WEIGHTS_MAGIC: &[u8; 4] = b"CIRW";
const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MalignancyError {
    #[error("branch {branch} provides {got} features for vertex {vertex}, expected 32")]
    BranchWidthMismatch {
        branch: usize,
        vertex: usize,
        got: usize,
    },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("input of length {got} does not match layer input dim {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("weights contain non-finite values")]
    NonFiniteWeights,
    #[error("bad magic: not a CIRW weight file")]
    BadMagic,
    #[error("unsupported weight file version {0}")]
    VersionUnsupported(u32),
    #[error("weight file truncated")]
    TruncatedFile,
    #[error("inconsistent layer dims: layer {layer} takes {got}, previous produces {expected}")]
    InconsistentDims {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Where per-vertex features came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    Deep,
    GeometricStandin,
}

/// Flat 96000-value mesh feature vector; flat index of (vertex, branch, k)
/// is `96*vertex + 32*branch + k`.
#[derive(Debug, Clone)]
pub struct MeshFeatureVector {
    pub values: Vec<f64>,
    pub vertex_count_actual: usize,
    pub source: FeatureSource,
}

/// Encoder block (16384 values) followed by the mesh block; 112384 total.
#[derive(Debug, Clone)]
pub struct HybridFeatureVector {
    pub values: Vec<f64>,
}

#[inline]
pub fn mesh_feature_index(vertex: usize, branch: usize, k: usize) -> usize {
    FEATURES_PER_VERTEX * vertex + FEATURES_PER_BRANCH * branch + k
}

/// Assemble the fixed-size mesh feature vector from three per-vertex branch
/// channels (nodule, spiculation, lobulation deformation features).
pub fn assemble_mesh_features(
    branches: [&[Vec<f64>]; BRANCH_COUNT],
    mesh: &TriMesh,
    source: FeatureSource,
) -> Result<MeshFeatureVector, MalignancyError> {
    let nv = mesh.vertex_count();
    for (b, branch) in branches.iter().enumerate() {
        if branch.len() != nv {
            return Err(MalignancyError::LengthMismatch {
                expected: nv,
                got: branch.len(),
            });
        }
        for (v, feats) in branch.iter().enumerate() {
            if feats.len() != FEATURES_PER_BRANCH {
                return Err(MalignancyError::BranchWidthMismatch {
                    branch: b,
                    vertex: v,
                    got: feats.len(),
                });
            }
        }
    }
    let used = nv.min(MESH_FEATURE_VERTICES);
    let mut values = vec![0.0; MESH_FEATURE_LEN];
    for v in 0..used {
        for (b, branch) in branches.iter().enumerate() {
            for k in 0..FEATURES_PER_BRANCH {
                values[mesh_feature_index(v, b, k)] = branch[v][k];
            }
        }
    }
    Ok(MeshFeatureVector {
        values,
        vertex_count_actual: used,
        source,
    })
}

/// Geometric stand-in featurization used when no trained network is present:
/// per vertex position (3), normal (3), area distortion (1), class one-hot
/// (3), one-ring area (1), and mean incident edge length (1), zero-padded to
/// 32 and repeated for each branch.
pub fn geometric_standin_features(
    mesh: &TriMesh,
    adm: &AreaDistortionMap,
    ann: &NoduleAnnotation,
) -> Result<MeshFeatureVector, MalignancyError> {
    let nv = mesh.vertex_count();
    if adm.epsilon_vertex.len() != nv {
        return Err(MalignancyError::LengthMismatch {
            expected: nv,
            got: adm.epsilon_vertex.len(),
        });
    }
    if ann.vertex_class.len() != nv {
        return Err(MalignancyError::LengthMismatch {
            expected: nv,
            got: ann.vertex_class.len(),
        });
    }
    let normals = mesh.vertex_normals();
    let ring = mesh.one_ring_areas();
    let nbrs = mesh.vertex_neighbors();
    let mut branch: Vec<Vec<f64>> = Vec::with_capacity(nv);
    for v in 0..nv {
        let mut f = Vec::with_capacity(FEATURES_PER_BRANCH);
        let p = mesh.vertices[v];
        f.extend_from_slice(&[p.x, p.y, p.z]);
        let n = normals[v];
        f.extend_from_slice(&[n.x, n.y, n.z]);
        f.push(adm.epsilon_vertex[v]);
        let mut one_hot = [0.0; 3];
        one_hot[(ann.vertex_class[v] as usize).min(2)] = 1.0;
        f.extend_from_slice(&one_hot);
        f.push(ring[v]);
        let mean_edge = if nbrs[v].is_empty() {
            0.0
        } else {
            nbrs[v]
                .iter()
                .map(|&u| (mesh.vertices[u as usize] - p).norm())
                .sum::<f64>()
                / nbrs[v].len() as f64
        };
        f.push(mean_edge);
        f.resize(FEATURES_PER_BRANCH, 0.0);
        branch.push(f);
    }
    assemble_mesh_features(
        [&branch, &branch, &branch],
        mesh,
        FeatureSource::GeometricStandin,
    )
}

/// Concatenate flattened encoder features (256x4x4x4) with mesh features.
pub fn concat_hybrid(
    encoder: &[f64],
    mesh_features: &MeshFeatureVector,
) -> Result<HybridFeatureVector, MalignancyError> {
    if encoder.len() != ENCODER_FEATURE_LEN {
        return Err(MalignancyError::LengthMismatch {
            expected: ENCODER_FEATURE_LEN,
            got: encoder.len(),
        });
    }
    let mut values = Vec::with_capacity(HYBRID_FEATURE_LEN);
    values.extend_from_slice(encoder);
    values.extend_from_slice(&mesh_features.values);
    debug_assert_eq!(values.len(), HYBRID_FEATURE_LEN);
    Ok(HybridFeatureVector { values })
}

/// One fully-connected layer: `rows x cols` row-major weights plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

/// Fully-connected classifier weights: ReLU hidden layers, softmax output.
/// Published shapes are [96000, 512, 128, 2] (mesh only) and
/// [112384, 512, 128, 2] (mesh + encoder).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub layers: Vec<Layer>,
}

impl MlpWeights {
    /// Zero-initialized weights for a dim chain like `[96000, 512, 128, 2]`.
    pub fn zeros(dims: &[usize]) -> MlpWeights {
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                rows: w[1],
                cols: w[0],
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
            })
            .collect();
        MlpWeights { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.cols).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), MalignancyError> {
        let mut prev_rows: Option<usize> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.rows * layer.cols || layer.bias.len() != layer.rows {
                return Err(MalignancyError::LengthMismatch {
                    expected: layer.rows * layer.cols,
                    got: layer.weights.len(),
                });
            }
            if let Some(expected) = prev_rows {
                if layer.cols != expected {
                    return Err(MalignancyError::InconsistentDims {
                        layer: i,
                        expected,
                        got: layer.cols,
                    });
                }
            }
            if layer
                .weights
                .iter()
                .chain(&layer.bias)
                .any(|w| !w.is_finite())
            {
                return Err(MalignancyError::NonFiniteWeights);
            }
            prev_rows = Some(layer.rows);
        }
        Ok(())
    }
}

/// Two-class output probabilities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Prediction {
    pub p_benign: f64,
    pub p_malignant: f64,
}

/// Forward pass: ReLU after every layer except the last, then softmax.
/// Accumulation is in f64 regardless of the f32 storage.
pub fn mlp_forward(x: &[f64], w: &MlpWeights) -> Result<Prediction, MalignancyError> {
    w.validate()?;
    if w.layers.is_empty() || w.output_dim() != 2 {
        return Err(MalignancyError::InconsistentDims {
            layer: w.layers.len(),
            expected: 2,
            got: w.output_dim(),
        });
    }
    if x.len() != w.input_dim() {
        return Err(MalignancyError::DimMismatch {
            expected: w.input_dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MalignancyError::NonFiniteWeights);
    }

    let mut activation: Vec<f64> = x.to_vec();
    for (li, layer) in w.layers.iter().enumerate() {
        let mut next = vec![0.0f64; layer.rows];
        for (r, out) in next.iter_mut().enumerate() {
            let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
            let mut acc = 0.0f64;
            for (wv, xv) in row.iter().zip(&activation) {
                acc += *wv as f64 * xv;
            }
            *out = acc + layer.bias[r] as f64;
        }
        let last = li + 1 == w.layers.len();
        if !last {
            for v in &mut next {
                *v = v.max(0.0);
            }
        }
        activation = next;
    }

    // numerically stable softmax over the two logits
    let m = activation[0].max(activation[1]);
    let e0 = (activation[0] - m).exp();
    let e1 = (activation[1] - m).exp();
    let z = e0 + e1;
    Ok(Prediction {
        p_benign: e0 / z,
        p_malignant: e1 / z,
    })
}

/// Write weights in the CIRW binary format: magic, u32 version, u32 layer
/// count, then per layer u32 rows, u32 cols, row-major f32 weights, f32
/// bias. Little-endian throughout.
pub fn save_weights(w: &MlpWeights, path: impl AsRef<Path>) -> Result<(), MalignancyError> {
    w.validate()?;
    let mut file = fs::File::create(path)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(WEIGHTS_MAGIC);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(w.layers.len() as u32).to_le_bytes());
    for layer in &w.layers {
        buf.extend_from_slice(&(layer.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.cols as u32).to_le_bytes());
        for v in &layer.weights {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &layer.bias {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<MlpWeights, MalignancyError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8], MalignancyError> {
        if *cursor + n > bytes.len() {
            return Err(MalignancyError::TruncatedFile);
        }
        let slice = &bytes[*cursor..*cursor + n];
        *cursor += n;
        Ok(slice)
    };
    let read_u32 = |cursor: &mut usize| -> Result<u32, MalignancyError> {
        let s = take(cursor, 4)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    };

    if take(&mut cursor, 4)? != WEIGHTS_MAGIC {
        return Err(MalignancyError::BadMagic);
    }
    let version = read_u32(&mut cursor)?;
    if version != WEIGHTS_VERSION {
        return Err(MalignancyError::VersionUnsupported(version));
    }
    let layer_count = read_u32(&mut cursor)? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let rows = read_u32(&mut cursor)? as usize;
        let cols = read_u32(&mut cursor)? as usize;
        let mut weights = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let s = take(&mut cursor, 4)?;
            weights.push(f32::from_le_bytes([s[0], s[1], s[2], s[3]]));
        }
        let mut bias = Vec::with_capacity(rows);
        for _ in 0..rows {
            let s = take(&mut cursor, 4)?;
            bias.push(f32::from_le_bytes([s[0], s[1], s[2], s[3]]));
        }
        layers.push(Layer {
            rows,
            cols,
            weights,
            bias,
        });
    }
    let w = MlpWeights { layers };
    w.validate()?;
    Ok(w)
}
