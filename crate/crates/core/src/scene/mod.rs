//! Synthetic dynamic scenes, posed-image datasets and quality metrics.

mod dataset;
mod metrics;
mod synth;

pub use dataset::{Dataset, DatasetCamera, Split, MANIFEST_NAME};
pub use metrics::{bd_metrics, psnr, ssim, RdPoint, PSNR_CAP};
pub use synth::{generate_scene, orbit_cameras, AnalyticField, Primitive, SceneSpec, Shape};
