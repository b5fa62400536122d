//! Lung-nodule spiculation and lobulation quantification.
//!
//! The pipeline turns a nodule segmentation mask into clinically-interpretable
//! surface annotations: the mask is resampled to isotropic spacing, a closed
//! triangle surface is extracted, the surface is mapped onto the unit sphere,
//! and the per-vertex area-distortion map of that parameterization drives
//! spike detection and spiculation/lobulation classification. Annotations can
//! be voxelized back into label masks for downstream training, and the crate
//! ships reference implementations of the losses, metrics, and classifier
//! shape contracts used by the companion deep-learning baseline.
//!
//! See the `examples/` directory for one runnable entry point per capability,
//! and the `cir` binary for the `annotate`, `eval`, `predict`, and `info`
//! subcommands.

pub mod malignancy;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod spikes;
pub mod sphere;
pub mod surface;
pub mod volume;
