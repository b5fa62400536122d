//! Segmentation-mask volumes: a labeled voxel grid with physical geometry,
//! NRRD I/O, and label-preserving isotropic resampling.

mod nrrd;

pub use nrrd::{read_nrrd, write_nrrd, write_nrrd_with, NrrdEncoding};

use thiserror::Error;

/// Voxel label codes used across the pipeline.
pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_BASE: u8 = 1;
pub const LABEL_SPICULATION: u8 = 2;
pub const LABEL_LOBULATION: u8 = 3;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("unsupported NRRD header field: {0}")]
    UnsupportedHeaderField(String),
    #[error("payload size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("voxel value {0} outside the declared label alphabet")]
    InvalidLabel(i64),
    #[error("degenerate resampling target {0} (must be finite and > 0)")]
    DegenerateTarget(f64),
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// 3D labeled voxel grid with physical spacing and origin.
///
/// Labels are stored x-fastest; `origin` is the physical position (mm) of the
/// center of voxel (0,0,0).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskVolume {
    dims: (usize, usize, usize),
    spacing: [f64; 3],
    origin: [f64; 3],
    labels: Vec<u8>,
    label_alphabet: Vec<u8>,
}

impl MaskVolume {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: [f64; 3],
        origin: [f64; 3],
        labels: Vec<u8>,
        label_alphabet: Vec<u8>,
    ) -> Result<Self, VolumeError> {
        let n = dims.0 * dims.1 * dims.2;
        if labels.len() != n {
            return Err(VolumeError::SizeMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        for s in spacing {
            if !(s.is_finite() && s > 0.0) {
                return Err(VolumeError::InvalidVolume(format!(
                    "spacing component {s} must be finite and > 0"
                )));
            }
        }
        let mut alphabet = label_alphabet;
        alphabet.sort_unstable();
        alphabet.dedup();
        if let Some(&bad) = labels.iter().find(|v| !alphabet.contains(v)) {
            return Err(VolumeError::InvalidLabel(bad as i64));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
            labels,
            label_alphabet: alphabet,
        })
    }

    /// Binary volume: voxels selected by the predicate become label 1.
    pub fn binary(
        dims: (usize, usize, usize),
        spacing: [f64; 3],
        origin: [f64; 3],
        foreground: impl Fn(usize, usize, usize) -> bool,
    ) -> Self {
        let mut labels = vec![0u8; dims.0 * dims.1 * dims.2];
        let mut idx = 0;
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    if foreground(i, j, k) {
                        labels[idx] = 1;
                    }
                    idx += 1;
                }
            }
        }
        Self::new(dims, spacing, origin, labels, vec![0, 1]).expect("valid by construction")
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_alphabet(&self) -> &[u8] {
        &self.label_alphabet
    }

    pub fn voxel_count(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn label(&self, i: usize, j: usize, k: usize) -> u8 {
        self.labels[self.index(i, j, k)]
    }

    /// Physical position (mm) of a voxel center.
    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&v| v != 0).count()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&v| v == label).count()
    }

    pub fn is_isotropic(&self) -> bool {
        let [sx, sy, sz] = self.spacing;
        (sx - sy).abs() < 1e-12 && (sy - sz).abs() < 1e-12
    }

    /// Resample onto an isotropic grid by nearest-neighbor lookup.
    ///
    /// `target` defaults to the finest input spacing. Output voxel centers are
    /// mapped to physical space and assigned the label of the nearest input
    /// voxel center; exact midpoints break toward the lower index. Class codes
    /// are never interpolated.
    pub fn resample_isotropic(&self, target: Option<f64>) -> Result<MaskVolume, VolumeError> {
        let [sx, sy, sz] = self.spacing;
        let t = target.unwrap_or_else(|| sx.min(sy).min(sz));
        if !(t.is_finite() && t > 0.0) {
            return Err(VolumeError::DegenerateTarget(t));
        }

        let out_dim = |n: usize, s: f64| -> usize { ((n as f64 * s / t).round() as usize).max(1) };
        let (nx, ny, nz) = self.dims;
        let odims = (out_dim(nx, sx), out_dim(ny, sy), out_dim(nz, sz));
        // Keep the lower corner of the physical extent fixed.
        let oorigin = [
            self.origin[0] - 0.5 * sx + 0.5 * t,
            self.origin[1] - 0.5 * sy + 0.5 * t,
            self.origin[2] - 0.5 * sz + 0.5 * t,
        ];

        // Nearest input index along one axis, ties toward the lower index.
        let nearest = |pos: f64, o: f64, s: f64, n: usize| -> usize {
            let x = (pos - o) / s;
            let i = (x - 0.5).ceil() as isize;
            i.clamp(0, n as isize - 1) as usize
        };

        let mut labels = Vec::with_capacity(odims.0 * odims.1 * odims.2);
        for k in 0..odims.2 {
            let sk = nearest(oorigin[2] + k as f64 * t, self.origin[2], sz, nz);
            for j in 0..odims.1 {
                let sj = nearest(oorigin[1] + j as f64 * t, self.origin[1], sy, ny);
                let row = self.dims.0 * (sj + self.dims.1 * sk);
                for i in 0..odims.0 {
                    let si = nearest(oorigin[0] + i as f64 * t, self.origin[0], sx, nx);
                    labels.push(self.labels[row + si]);
                }
            }
        }

        MaskVolume::new(odims, [t, t, t], oorigin, labels, self.label_alphabet.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn striped_volume() -> MaskVolume {
        // dims (4,4,2), spacing (1,1,2): two z-slabs with distinct patterns
        let mut labels = vec![0u8; 32];
        for j in 0..4 {
            for i in 0..4 {
                labels[i + 4 * j] = ((i + j) % 2) as u8;
                labels[16 + i + 4 * j] = ((i * j) % 2) as u8;
            }
        }
        MaskVolume::new((4, 4, 2), [1.0, 1.0, 2.0], [0.0, 0.0, 0.0], labels, vec![0, 1]).unwrap()
    }

    #[test]
    fn resample_identity_when_already_isotropic() {
        let vol = MaskVolume::binary((5, 5, 5), [0.8, 0.8, 0.8], [1.0, 2.0, 3.0], |i, j, k| {
            i + j + k < 6
        });
        let out = vol.resample_isotropic(None).unwrap();
        assert_eq!(out.dims(), vol.dims());
        assert_eq!(out.labels(), vol.labels());
        assert!(out
            .origin()
            .iter()
            .zip(vol.origin())
            .all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn resample_duplicates_coarse_axis() {
        let vol = striped_volume();
        let out = vol.resample_isotropic(None).unwrap();
        assert_eq!(out.dims(), (4, 4, 4));
        // each input z-slab appears twice
        for k in 0..4 {
            for j in 0..4 {
                for i in 0..4 {
                    assert_eq!(out.label(i, j, k), vol.label(i, j, k / 2));
                }
            }
        }
    }

    #[test]
    fn resample_matches_brute_force_nearest_neighbor() {
        let vol = striped_volume();
        let out = vol.resample_isotropic(None).unwrap();
        // exhaustive oracle: scan every input voxel for the closest center
        for k in 0..4 {
            for j in 0..4 {
                for i in 0..4 {
                    let p = out.position(i, j, k);
                    let mut best = (f64::INFINITY, 0usize, 0usize, 0usize);
                    for sk in 0..2 {
                        for sj in 0..4 {
                            for si in 0..4 {
                                let q = vol.position(si, sj, sk);
                                let d = (p[0] - q[0]).abs()
                                    + (p[1] - q[1]).abs()
                                    + (p[2] - q[2]).abs();
                                // strictly-less keeps the lowest-index tie winner
                                if d < best.0 - 1e-12 {
                                    best = (d, si, sj, sk);
                                }
                            }
                        }
                    }
                    assert_eq!(out.label(i, j, k), vol.label(best.1, best.2, best.3));
                }
            }
        }
    }

    #[test]
    fn resample_rejects_degenerate_target() {
        let vol = striped_volume();
        assert!(matches!(
            vol.resample_isotropic(Some(0.0)),
            Err(VolumeError::DegenerateTarget(_))
        ));
        assert!(matches!(
            vol.resample_isotropic(Some(f64::NAN)),
            Err(VolumeError::DegenerateTarget(_))
        ));
    }

    #[test]
    fn labels_outside_alphabet_rejected() {
        let err = MaskVolume::new((1, 1, 1), [1.0; 3], [0.0; 3], vec![7], vec![0, 1]);
        assert!(matches!(err, Err(VolumeError::InvalidLabel(7))));
    }

    #[test]
    fn foreground_count_scales_with_voxel_volume() {
        // ball of radius 6 in a (16,16,32) grid with anisotropic spacing
        let vol = MaskVolume::binary((16, 16, 32), [1.0, 1.0, 0.5], [0.0; 3], |i, j, k| {
            let dx = i as f64 - 7.5;
            let dy = j as f64 - 7.5;
            let dz = (k as f64 - 15.5) * 0.5;
            (dx * dx + dy * dy + dz * dz).sqrt() <= 6.0
        });
        assert!(vol.foreground_count() >= 1000);
        let out = vol.resample_isotropic(None).unwrap();
        let expected = vol.foreground_count() as f64 * (1.0 * 1.0 * 0.5) / (0.5f64.powi(3));
        let ratio = out.foreground_count() as f64 / expected;
        assert!((0.85..=1.15).contains(&ratio), "ratio {ratio}");
    }
}
