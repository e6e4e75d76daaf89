//! Dataset construction around flow-guided edit masks: external-tool adapters
//! for video generation, segmentation and inpainting, the motion and area
//! filter, manifest persistence and overlay rendering.

pub mod adapter;
pub mod config;
pub mod demo;
pub mod error;
pub mod filter;
pub mod manifest;
pub mod mock;
pub mod overlay;
pub mod run;

pub use adapter::{run_stage, AdapterMode, AdapterSpec, StageJob, StageName};
pub use config::{PairConfig, PipelineConfig};
pub use error::{PipelineError, Result, StageError};
pub use filter::{keep, FilterReport, FilterThresholds};
pub use manifest::{read_manifest, validate_manifest, write_manifest, DatasetManifest, ValidationReport};
pub use overlay::render_overlay;
pub use run::{run_pipeline, run_with_config};
