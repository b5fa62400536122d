//! End-to-end pipeline orchestration: configuration handling, the
//! mask-to-annotation case runner, and the JSON report structures written by
//! the command-line tool. Every output embeds the full effective
//! configuration so a run can be reproduced exactly from its artifacts.

use crate::malignancy::{FeatureSource, MalignancyError};
use crate::metrics::{BinaryMetrics, MetricsError};
use crate::sphere::{self, ParamError, ParamOptions, SphericalMap};
use crate::spikes::{self, NoduleAnnotation, SpikeError, SpikeOptions};
use crate::surface::{self, Channel, MeshError, TriMesh};
use crate::volume::{MaskVolume, VolumeError};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Spike(#[from] SpikeError),
    #[error(transparent)]
    Malignancy(#[from] MalignancyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// All pipeline tunables with their defaults. `target_spacing = None` means
/// the finest input spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub target_spacing: Option<f64>,
    pub noise_floor: f64,
    pub theta_spic_deg: f64,
    pub min_height_mm: f64,
    pub min_vertices: usize,
    pub param_max_iters: usize,
    pub param_tol: f64,
    pub threshold: f64,
    pub smooth_iters: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            target_spacing: None,
            noise_floor: -0.02,
            theta_spic_deg: 65.0,
            min_height_mm: 1.0,
            min_vertices: 8,
            param_max_iters: 10_000,
            param_tol: 1e-7,
            threshold: 0.5,
            smooth_iters: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |msg: String| Err(PipelineError::Config(msg));
        if let Some(t) = self.target_spacing {
            if !(t.is_finite() && t > 0.0) {
                return fail(format!("target_spacing {t} must be > 0"));
            }
        }
        if !(self.noise_floor.is_finite() && self.noise_floor <= 0.0) {
            return fail(format!("noise_floor {} must be <= 0", self.noise_floor));
        }
        if !(self.theta_spic_deg > 0.0 && self.theta_spic_deg < 180.0) {
            return fail(format!(
                "theta_spic_deg {} must be in (0, 180)",
                self.theta_spic_deg
            ));
        }
        if !(self.min_height_mm.is_finite() && self.min_height_mm >= 0.0) {
            return fail(format!("min_height_mm {} must be >= 0", self.min_height_mm));
        }
        if self.min_vertices == 0 {
            return fail("min_vertices must be >= 1".into());
        }
        if self.param_max_iters == 0 {
            return fail("param_max_iters must be >= 1".into());
        }
        if !(self.param_tol.is_finite() && self.param_tol > 0.0) {
            return fail(format!("param_tol {} must be > 0", self.param_tol));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return fail(format!("threshold {} must be in [0, 1]", self.threshold));
        }
        Ok(())
    }

    /// Parse a `key=value` config file; `#` starts a comment, unknown keys
    /// are rejected.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        let mut config = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let bad = |k: &str, v: &str| PipelineError::Config(format!("bad value '{v}' for {k}"));
        match key {
            "target_spacing" => {
                self.target_spacing = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad(key, value))?)
                }
            }
            "noise_floor" => self.noise_floor = value.parse().map_err(|_| bad(key, value))?,
            "theta_spic_deg" => self.theta_spic_deg = value.parse().map_err(|_| bad(key, value))?,
            "min_height_mm" => self.min_height_mm = value.parse().map_err(|_| bad(key, value))?,
            "min_vertices" => self.min_vertices = value.parse().map_err(|_| bad(key, value))?,
            "param_max_iters" => {
                self.param_max_iters = value.parse().map_err(|_| bad(key, value))?
            }
            "param_tol" => self.param_tol = value.parse().map_err(|_| bad(key, value))?,
            "threshold" => self.threshold = value.parse().map_err(|_| bad(key, value))?,
            "smooth_iters" => self.smooth_iters = value.parse().map_err(|_| bad(key, value))?,
            other => {
                return Err(PipelineError::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Deterministic `key=value` lines for embedding into outputs.
    pub fn echo_pairs(&self) -> Vec<(String, String)> {
        let spacing = match self.target_spacing {
            Some(t) => t.to_string(),
            None => "auto".to_string(),
        };
        vec![
            ("target_spacing".into(), spacing),
            ("noise_floor".into(), self.noise_floor.to_string()),
            ("theta_spic_deg".into(), self.theta_spic_deg.to_string()),
            ("min_height_mm".into(), self.min_height_mm.to_string()),
            ("min_vertices".into(), self.min_vertices.to_string()),
            ("param_max_iters".into(), self.param_max_iters.to_string()),
            ("param_tol".into(), self.param_tol.to_string()),
            ("threshold".into(), self.threshold.to_string()),
            ("smooth_iters".into(), self.smooth_iters.to_string()),
        ]
    }

    pub fn spike_options(&self) -> SpikeOptions {
        SpikeOptions {
            noise_floor: self.noise_floor,
            min_vertices: self.min_vertices,
            theta_spic_deg: self.theta_spic_deg,
            min_height_mm: self.min_height_mm,
        }
    }

    pub fn param_options(&self) -> ParamOptions {
        ParamOptions {
            max_iters: self.param_max_iters,
            tol: self.param_tol,
            ..Default::default()
        }
    }
}

/// Everything produced by one annotate run.
pub struct CaseResult {
    /// Isotropically resampled input mask (the reference grid).
    pub resampled: MaskVolume,
    /// Largest-component surface with "epsilon" and "class" channels.
    pub mesh: TriMesh,
    pub spherical_map: SphericalMap,
    pub annotation: NoduleAnnotation,
    /// Voxelized annotation on the reference grid (labels 0-3).
    pub masks: MaskVolume,
}

/// Run the full annotation pipeline on one mask volume.
pub fn annotate_case(
    mask: &MaskVolume,
    config: &PipelineConfig,
) -> Result<CaseResult, PipelineError> {
    annotate_case_logged(mask, config, None)
}

/// Same as [`annotate_case`], optionally dumping the per-sweep harmonic
/// energy to a CSV file.
pub fn annotate_case_logged(
    mask: &MaskVolume,
    config: &PipelineConfig,
    energy_log: Option<std::path::PathBuf>,
) -> Result<CaseResult, PipelineError> {
    config.validate()?;
    let resampled = mask.resample_isotropic(config.target_spacing)?;
    let raw_mesh = surface::marching_cubes(&resampled)?;
    let mut mesh = raw_mesh.largest_component();
    if config.smooth_iters > 0 {
        mesh = surface::taubin_smooth(&mesh, config.smooth_iters, 0.33, -0.331);
    }
    let param_opts = ParamOptions {
        energy_log,
        ..config.param_options()
    };
    let spherical_map = sphere::parameterize(&mesh, &param_opts)?;
    let adm = sphere::area_distortion(&mesh, &spherical_map)?;
    let annotation = spikes::annotate(&mesh, &adm, &config.spike_options())?;
    let masks = spikes::voxelize_annotation(&annotation, &mesh, &resampled)?;

    mesh.channels
        .insert("epsilon".into(), Channel::Scalar(adm.epsilon_vertex.clone()));
    mesh.channels
        .insert("class".into(), Channel::Label(annotation.vertex_class.clone()));

    Ok(CaseResult {
        resampled,
        mesh,
        spherical_map,
        annotation,
        masks,
    })
}

/// `annotation.json` payload: spike list, summary, and the full effective
/// configuration.
#[derive(Serialize)]
pub struct AnnotationReport<'a> {
    pub spikes: &'a [spikes::Spike],
    pub summary: &'a spikes::AnnotationSummary,
    pub params: &'a PipelineConfig,
}

/// Write `mesh.ply`, `annotation.json`, and `masks.nrrd` into `out_dir`.
pub fn write_case_outputs(
    case: &CaseResult,
    config: &PipelineConfig,
    out_dir: impl AsRef<Path>,
) -> Result<(), PipelineError> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let comments: Vec<String> = config
        .echo_pairs()
        .into_iter()
        .map(|(k, v)| format!("param {k}={v}"))
        .collect();
    surface::write_ply_with(&case.mesh, dir.join("mesh.ply"), &comments)?;

    let report = AnnotationReport {
        spikes: &case.annotation.spikes,
        summary: &case.annotation.summary,
        params: config,
    };
    write_json(dir.join("annotation.json"), &report)?;

    let pairs: Vec<(String, String)> = config
        .echo_pairs()
        .into_iter()
        .map(|(k, v)| (format!("cir_{k}"), v))
        .collect();
    crate::volume::write_nrrd_with(
        &case.masks,
        dir.join("masks.nrrd"),
        crate::volume::NrrdEncoding::Raw,
        &pairs,
    )?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline; key order is struct order,
/// so output bytes are stable.
pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-class evaluation row: Jaccard over masks, chamfer over point sets.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassEval {
    pub jaccard: Option<f64>,
    pub chamfer: Option<f64>,
}

/// `metrics.json` payload mirroring the published tables: per-class mesh
/// metrics plus malignancy classification metrics when scores are given.
#[derive(Serialize)]
pub struct EvalReport {
    pub cases: usize,
    pub per_class: BTreeMap<String, ClassEval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationEval>,
}

#[derive(Serialize)]
pub struct ClassificationEval {
    pub auc: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub threshold: f64,
}

impl ClassificationEval {
    pub fn from_outcomes(
        outcomes: &crate::metrics::BinaryOutcomes,
    ) -> Result<Self, MetricsError> {
        let auc = crate::metrics::roc_auc(outcomes)?;
        let BinaryMetrics {
            accuracy,
            sensitivity,
            specificity,
            f1,
        } = crate::metrics::binary_metrics(outcomes);
        Ok(Self {
            auc,
            accuracy,
            sensitivity,
            specificity,
            f1,
            threshold: outcomes.threshold,
        })
    }
}

/// Prediction report printed by the predict command.
#[derive(Serialize)]
pub struct PredictionReport {
    pub p_malignant: f64,
    pub threshold: f64,
    pub label: String,
    pub feature_source: FeatureSource,
}

/// Human-readable one-line summary of a case, used by the info command.
pub fn describe_volume(vol: &MaskVolume) -> String {
    let mut s = String::new();
    let (nx, ny, nz) = vol.dims();
    let _ = write!(s, "dims ({nx}, {ny}, {nz})");
    let [sx, sy, sz] = vol.spacing();
    let _ = write!(s, ", spacing ({sx}, {sy}, {sz}) mm");
    let _ = write!(s, ", foreground {}", vol.foreground_count());
    s
}
