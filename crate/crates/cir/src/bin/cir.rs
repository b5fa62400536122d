//! Command-line front end: annotate masks, evaluate predictions, run the
//! malignancy classifier forward pass, and inspect files. All logic lives in
//! the library; this binary only parses arguments, wires files, and maps
//! errors to exit codes (0 success, 2 usage/input error, 3 pipeline failure,
//! 4 internal invariant violation).

use cir::malignancy::{self, FeatureSource};
use cir::metrics::{self, BinaryOutcomes};
use cir::pipeline::{
    self, ClassEval, ClassificationEval, EvalReport, PipelineConfig, PipelineError,
    PredictionReport,
};
use cir::sphere::ParamError;
use cir::spikes::SpikeError;
use cir::surface::{self, MeshError};
use cir::volume::{self, MaskVolume};
use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cir",
    version,
    about = "Lung nodule spiculation/lobulation annotation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default)]
struct ConfigArgs {
    /// key=value config file; flags below override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Isotropic target spacing in mm, or "auto" for the finest input spacing
    #[arg(long)]
    target_spacing: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    noise_floor: Option<f64>,
    #[arg(long)]
    theta_spic_deg: Option<f64>,
    #[arg(long)]
    min_height_mm: Option<f64>,
    #[arg(long)]
    min_vertices: Option<usize>,
    #[arg(long)]
    param_max_iters: Option<usize>,
    #[arg(long)]
    param_tol: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    smooth_iters: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.target_spacing {
            config.set("target_spacing", v)?;
        }
        macro_rules! override_field {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field {
                    config.$field = v;
                })*
            };
        }
        override_field!(
            noise_floor,
            theta_spic_deg,
            min_height_mm,
            min_vertices,
            param_max_iters,
            param_tol,
            threshold,
            smooth_iters
        );
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the annotation pipeline on one or more mask volumes
    Annotate {
        /// Input NRRD segmentation masks
        #[arg(required = true)]
        masks: Vec<PathBuf>,
        /// Output directory (per-case subdirectories when multiple inputs)
        #[arg(long)]
        out: PathBuf,
        /// Parallelism across cases; per-case outputs are byte-identical to
        /// a serial run
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write the per-sweep parameterization energy as energy.csv
        #[arg(long)]
        energy_csv: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare predicted against ground-truth masks (and optionally meshes
    /// and malignancy scores); writes metrics.json
    Eval {
        /// Predicted label masks, case order matching --gt
        #[arg(long, required = true, num_args = 1..)]
        pred: Vec<PathBuf>,
        /// Ground-truth label masks
        #[arg(long, required = true, num_args = 1..)]
        gt: Vec<PathBuf>,
        /// Optional predicted meshes (OBJ), case order matching --gt-meshes
        #[arg(long, num_args = 1..)]
        pred_meshes: Vec<PathBuf>,
        /// Optional ground-truth meshes (OBJ)
        #[arg(long, num_args = 1..)]
        gt_meshes: Vec<PathBuf>,
        /// Optional CSV of `score,label` lines for malignancy metrics
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Decision threshold for the confusion metrics
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Report path
        #[arg(long, default_value = "metrics.json")]
        out: PathBuf,
    },
    /// Classify a feature vector with CIRW weights; prints prediction JSON
    Predict {
        /// Feature vector: JSON array, JSON object with "values", or raw
        /// little-endian f32 binary
        features: PathBuf,
        /// CIRW weight file
        weights: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Print volume or mesh statistics as JSON
    Info {
        /// NRRD mask or OBJ mesh
        path: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Annotate {
            masks,
            out,
            jobs,
            energy_csv,
            config,
        } => cmd_annotate(&masks, &out, jobs, energy_csv, &config),
        Command::Eval {
            pred,
            gt,
            pred_meshes,
            gt_meshes,
            scores,
            threshold,
            out,
        } => cmd_eval(&pred, &gt, &pred_meshes, &gt_meshes, scores.as_deref(), threshold, &out),
        Command::Predict {
            features,
            weights,
            threshold,
        } => cmd_predict(&features, &weights, threshold),
        Command::Info { path } => cmd_info(&path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 = usage/input error, 3 = pipeline failure, 4 = internal invariant.
fn exit_code(err: &PipelineError) -> u8 {
    match err {
        PipelineError::Config(_) | PipelineError::Io(_) | PipelineError::Volume(_) => 2,
        PipelineError::Mesh(MeshError::EmptyMask | MeshError::MalformedFile(_) | MeshError::Io(_)) => 2,
        PipelineError::Mesh(_) => 3,
        PipelineError::Param(ParamError::Io(_)) => 2,
        PipelineError::Param(_) => 3,
        PipelineError::Spike(SpikeError::GridTooCoarse { .. }) => 3,
        PipelineError::Spike(SpikeError::SizeMismatch { .. }) => 4,
        PipelineError::Malignancy(_) | PipelineError::Metrics(_) => 2,
    }
}

fn cmd_annotate(
    masks: &[PathBuf],
    out: &Path,
    jobs: usize,
    energy_csv: bool,
    config_args: &ConfigArgs,
) -> Result<(), PipelineError> {
    let config = config_args.resolve()?;
    let cases: Vec<(PathBuf, PathBuf)> = masks
        .iter()
        .map(|mask| {
            let dir = if masks.len() == 1 {
                out.to_path_buf()
            } else {
                let stem = mask
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "case".to_string());
                out.join(stem)
            };
            (mask.clone(), dir)
        })
        .collect();

    let run_one = |(mask_path, case_dir): &(PathBuf, PathBuf)| -> Result<(), PipelineError> {
        let mask = volume::read_nrrd(mask_path)?;
        std::fs::create_dir_all(case_dir)?;
        let energy_log = energy_csv.then(|| case_dir.join("energy.csv"));
        let case = pipeline::annotate_case_logged(&mask, &config, energy_log.clone())?;
        if let Some(log) = energy_log {
            // every output embeds the effective configuration
            let body = std::fs::read_to_string(&log)?;
            let mut text = String::new();
            for (k, v) in config.echo_pairs() {
                text.push_str(&format!("# {k}={v}\n"));
            }
            text.push_str(&body);
            std::fs::write(&log, text)?;
        }
        pipeline::write_case_outputs(&case, &config, case_dir)
    };

    if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            cases
                .par_iter()
                .map(run_one)
                .collect::<Result<Vec<_>, _>>()
        })?;
    } else {
        for case in &cases {
            run_one(case)?;
        }
    }
    Ok(())
}

fn mask_class_points(vol: &MaskVolume, label: u8) -> Vec<Vector3<f64>> {
    let (nx, ny, nz) = vol.dims();
    let mut points = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if vol.label(i, j, k) == label {
                    let [x, y, z] = vol.position(i, j, k);
                    points.push(Vector3::new(x, y, z));
                }
            }
        }
    }
    points
}

fn cmd_eval(
    pred: &[PathBuf],
    gt: &[PathBuf],
    pred_meshes: &[PathBuf],
    gt_meshes: &[PathBuf],
    scores: Option<&Path>,
    threshold: f64,
    out: &Path,
) -> Result<(), PipelineError> {
    if pred.len() != gt.len() {
        return Err(PipelineError::Config(format!(
            "{} predicted masks vs {} ground-truth masks",
            pred.len(),
            gt.len()
        )));
    }
    if pred_meshes.len() != gt_meshes.len() {
        return Err(PipelineError::Config(format!(
            "{} predicted meshes vs {} ground-truth meshes",
            pred_meshes.len(),
            gt_meshes.len()
        )));
    }

    // per-class voxel labels: class0 nodule base, class1 spiculation,
    // class2 lobulation
    let class_labels: [(String, u8); 3] = [
        ("class0".into(), 1),
        ("class1".into(), 2),
        ("class2".into(), 3),
    ];
    let mut jaccard_sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut chamfer_sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();

    for (p_path, g_path) in pred.iter().zip(gt) {
        let p = volume::read_nrrd(p_path)?;
        let g = volume::read_nrrd(g_path)?;
        for (name, label) in &class_labels {
            let j = metrics::jaccard(&p, &g, *label)?;
            let entry = jaccard_sums.entry(name.clone()).or_insert((0.0, 0));
            entry.0 += j;
            entry.1 += 1;
            // chamfer over the voxel-center point sets of this class;
            // undefined when a side has no voxels of the class
            let pa = mask_class_points(&p, *label);
            let pb = mask_class_points(&g, *label);
            if let Ok(cd) = metrics::chamfer_weighted_symmetric(&pa, &pb) {
                let entry = chamfer_sums.entry(name.clone()).or_insert((0.0, 0));
                entry.0 += cd;
                entry.1 += 1;
            }
        }
    }

    // whole-surface chamfer between mesh vertex sets when meshes are given
    for (p_path, g_path) in pred_meshes.iter().zip(gt_meshes) {
        let p = surface::read_obj(p_path)?;
        let g = surface::read_obj(g_path)?;
        let cd = metrics::chamfer_weighted_symmetric(&p.vertices, &g.vertices)?;
        let entry = chamfer_sums.entry("mesh".into()).or_insert((0.0, 0));
        entry.0 += cd;
        entry.1 += 1;
    }

    let mut per_class = BTreeMap::new();
    for (name, _) in &class_labels {
        per_class.insert(
            name.clone(),
            ClassEval {
                jaccard: jaccard_sums.get(name).map(|(s, n)| s / *n as f64),
                chamfer: chamfer_sums
                    .get(name)
                    .filter(|(_, n)| *n > 0)
                    .map(|(s, n)| s / *n as f64),
            },
        );
    }
    if let Some((s, n)) = chamfer_sums.get("mesh") {
        per_class.insert(
            "mesh".into(),
            ClassEval {
                jaccard: None,
                chamfer: Some(s / *n as f64),
            },
        );
    }

    let classification = match scores {
        Some(path) => {
            let outcomes = read_scores_csv(path, threshold)?;
            Some(ClassificationEval::from_outcomes(&outcomes)?)
        }
        None => None,
    };

    let report = EvalReport {
        cases: pred.len(),
        per_class,
        classification,
    };
    pipeline::write_json(out, &report)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn read_scores_csv(path: &Path, threshold: f64) -> Result<BinaryOutcomes, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.eq_ignore_ascii_case("score,label") {
            continue;
        }
        let (s, l) = line.split_once(',').ok_or_else(|| {
            PipelineError::Config(format!("scores line {}: expected score,label", lineno + 1))
        })?;
        let score: f64 = s.trim().parse().map_err(|_| {
            PipelineError::Config(format!("scores line {}: bad score '{s}'", lineno + 1))
        })?;
        let label: u8 = l.trim().parse().map_err(|_| {
            PipelineError::Config(format!("scores line {}: bad label '{l}'", lineno + 1))
        })?;
        scores.push(score);
        labels.push(u8::from(label != 0));
    }
    BinaryOutcomes::new(scores, labels, threshold).map_err(PipelineError::Metrics)
}

fn cmd_predict(features: &Path, weights: &Path, threshold: f64) -> Result<(), PipelineError> {
    let (values, source) = read_features(features)?;
    let w = malignancy::load_weights(weights)?;
    let prediction = malignancy::mlp_forward(&values, &w)?;
    let report = PredictionReport {
        p_malignant: prediction.p_malignant,
        threshold,
        label: if prediction.p_malignant >= threshold {
            "malignant".to_string()
        } else {
            "benign".to_string()
        },
        feature_source: source,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    print!("{text}");
    Ok(())
}

fn read_features(path: &Path) -> Result<(Vec<f64>, FeatureSource), PipelineError> {
    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    if is_json {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("features JSON: {e}")))?;
        let (array, source) = match &value {
            serde_json::Value::Array(a) => (a, FeatureSource::Deep),
            serde_json::Value::Object(o) => {
                let a = o.get("values").and_then(|v| v.as_array()).ok_or_else(|| {
                    PipelineError::Config("features object needs a 'values' array".into())
                })?;
                let source = match o.get("feature_source").and_then(|v| v.as_str()) {
                    Some("geometric-standin") => FeatureSource::GeometricStandin,
                    _ => FeatureSource::Deep,
                };
                (a, source)
            }
            _ => {
                return Err(PipelineError::Config(
                    "features JSON must be an array or an object".into(),
                ))
            }
        };
        let values: Vec<f64> = array
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| PipelineError::Config("non-numeric feature value".into()))
            })
            .collect::<Result<_, _>>()?;
        Ok((values, source))
    } else {
        let bytes = std::fs::read(path)?;
        if bytes.len() % 4 != 0 {
            return Err(PipelineError::Config(
                "raw feature file length is not a multiple of 4 bytes".into(),
            ));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok((values, FeatureSource::Deep))
    }
}

fn cmd_info(path: &Path) -> Result<(), PipelineError> {
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "nrrd" => {
            let vol = volume::read_nrrd(path)?;
            let mut label_counts = BTreeMap::new();
            for &label in vol.label_alphabet() {
                label_counts.insert(label.to_string(), vol.count_label(label));
            }
            #[derive(serde::Serialize)]
            struct VolumeInfo {
                dims: (usize, usize, usize),
                spacing: [f64; 3],
                origin: [f64; 3],
                label_counts: BTreeMap<String, usize>,
            }
            let info = VolumeInfo {
                dims: vol.dims(),
                spacing: vol.spacing(),
                origin: vol.origin(),
                label_counts,
            };
            let mut text = serde_json::to_string_pretty(&info).expect("serializes");
            text.push('\n');
            print!("{text}");
            Ok(())
        }
        "obj" => {
            let mesh = surface::read_obj(path)?;
            let stats = mesh.stats()?;
            let mut text = serde_json::to_string_pretty(&stats).expect("serializes");
            text.push('\n');
            print!("{text}");
            Ok(())
        }
        other => Err(PipelineError::Config(format!(
            "info supports .nrrd and .obj, got '{other}'"
        ))),
    }
}
