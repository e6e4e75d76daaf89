//! TOML run configuration.
//!
//! ```toml
//! output_dir = "out"
//!
//! [adapters.i2v]
//! command = "i2v-tool --image {in} --out {out} --prompt {prompt}"
//! timeout = 600
//!
//! [adapters.detect_segment]
//! command = "segment --image {in} --out {out} --query {prompt}"
//! timeout = 60
//!
//! [adapters.inpaint]
//! command = "inpaint --video {in} --masks {mask} --out {out} --prompt {prompt}"
//! timeout = 900
//! mode = "file-drop"
//! drop_dir = "jobs"
//!
//! [thresholds]
//! alpha_min = 0.01
//!
//! [[pairs]]
//! id = "cat-01"
//! source_image = "images/cat.png"
//! target_image = "images/cat_edit.png"
//! instruction = "remove the cat"
//! task = "remove"
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::adapter::{AdapterMode, AdapterSpec, StageName};
use crate::error::{PipelineError, Result};
use crate::filter::FilterThresholds;
use maskflow_core::flow::HsParams;
use maskflow_core::propagate::PropagationConfig;
use maskflow_core::{EditInstruction, EditTask};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdapter {
    command: String,
    #[serde(default = "default_timeout")]
    timeout: f64,
    #[serde(default)]
    mode: AdapterMode,
    drop_dir: Option<PathBuf>,
    version: Option<String>,
}

fn default_timeout() -> f64 {
    600.0
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub id: String,
    pub source_image: PathBuf,
    pub target_image: PathBuf,
    pub instruction: String,
    /// Scene description handed to the video generator.
    pub scene: Option<String>,
    pub task: EditTask,
    /// Existing source video directory; skips video generation.
    pub source_video: Option<PathBuf>,
    /// Directory of precomputed `.flo` pairs; skips flow estimation.
    pub flows: Option<PathBuf>,
}

impl PairConfig {
    pub fn edit_instruction(&self) -> Result<EditInstruction> {
        Ok(EditInstruction::new(self.instruction.clone(), self.scene.clone(), self.task)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    output_dir: PathBuf,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    adapter_concurrency: Option<usize>,
    #[serde(default = "default_alpha")]
    overlay_alpha: f64,
    #[serde(default)]
    adapters: BTreeMap<StageName, RawAdapter>,
    #[serde(default)]
    thresholds: FilterThresholds,
    #[serde(default)]
    propagation: PropagationConfig,
    #[serde(default)]
    flow: HsParams,
    #[serde(default)]
    pairs: Vec<PairConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    /// Upper bound on pairs processed at once; `MASKFLOW_WORKERS` may lower it.
    pub workers: Option<usize>,
    /// Upper bound on adapter processes running at once.
    pub adapter_concurrency: Option<usize>,
    pub overlay_alpha: f64,
    pub adapters: BTreeMap<StageName, AdapterSpec>,
    pub thresholds: FilterThresholds,
    pub propagation: PropagationConfig,
    pub flow: HsParams,
    pub pairs: Vec<PairConfig>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b"-_.".contains(&b))
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|reason| PipelineError::Config {
            path: path.to_path_buf(),
            reason,
        })
    }

    /// Parses and validates `text`, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let adapters = raw
            .adapters
            .into_iter()
            .map(|(name, a)| {
                let spec = AdapterSpec {
                    name,
                    command_template: a.command,
                    timeout: a.timeout,
                    mode: a.mode,
                    drop_dir: a.drop_dir.map(resolve),
                    version: a.version,
                };
                (name, spec)
            })
            .collect();
        let pairs = raw
            .pairs
            .into_iter()
            .map(|p| PairConfig {
                source_image: resolve(p.source_image),
                target_image: resolve(p.target_image),
                source_video: p.source_video.map(resolve),
                flows: p.flows.map(resolve),
                ..p
            })
            .collect();
        let cfg = Self {
            output_dir: resolve(raw.output_dir),
            workers: raw.workers,
            adapter_concurrency: raw.adapter_concurrency,
            overlay_alpha: raw.overlay_alpha,
            adapters,
            thresholds: raw.thresholds,
            propagation: raw.propagation,
            flow: raw.flow,
            pairs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        for spec in self.adapters.values() {
            spec.validate()?;
        }
        for stage in [StageName::DetectSegment, StageName::Inpaint] {
            if !self.adapters.contains_key(&stage) {
                return Err(format!("missing [adapters.{stage}]"));
            }
        }
        if !self.adapters.contains_key(&StageName::I2v) {
            if let Some(p) = self.pairs.iter().find(|p| p.source_video.is_none()) {
                return Err(format!("missing [adapters.i2v] and pair {} has no source_video", p.id));
            }
        }
        self.thresholds.validate().map_err(|e| e.to_string())?;
        self.propagation.validate().map_err(|e| e.to_string())?;
        self.flow.validate().map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&self.overlay_alpha) {
            return Err(format!("overlay_alpha {} not in [0, 1]", self.overlay_alpha));
        }
        if self.workers == Some(0) || self.adapter_concurrency == Some(0) {
            return Err("workers and adapter_concurrency must be >= 1".into());
        }
        if self.pairs.is_empty() {
            return Err("no pairs to process".into());
        }
        let mut ids = HashSet::new();
        for p in &self.pairs {
            if !valid_id(&p.id) {
                return Err(format!("pair id {:?} must be [A-Za-z0-9._-] and not start with '.'", p.id));
            }
            if !ids.insert(p.id.as_str()) {
                return Err(format!("duplicate pair id {:?}", p.id));
            }
            p.edit_instruction().map_err(|e| format!("pair {}: {e}", p.id))?;
        }
        Ok(())
    }

    /// Stage name to adapter program and version.
    pub fn tool_provenance(&self) -> BTreeMap<String, String> {
        self.adapters
            .iter()
            .map(|(name, spec)| (name.to_string(), spec.provenance()))
            .collect()
    }

    /// Pair workers: the configured cap, lowered by `MASKFLOW_WORKERS`.
    pub fn worker_count(&self) -> usize {
        let auto = std::thread::available_parallelism().map_or(1, |n| n.get());
        let env = std::env::var("MASKFLOW_WORKERS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0);
        let cap = [self.workers, env].into_iter().flatten().min().unwrap_or(auto);
        cap.clamp(1, self.pairs.len().max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
output_dir = "out"

[adapters.i2v]
command = "gen {in} {out} {prompt}"

[adapters.detect_segment]
command = "seg {in} {out} {prompt}"
timeout = 30

[adapters.inpaint]
command = "fill {in} {mask} {out} {prompt}"
mode = "file-drop"
drop_dir = "jobs"
version = "2.1"

[thresholds]
alpha_max = 0.4

[propagation]
occlusion_fill = "zero"

[propagation.morph]
close_radius = 3

[flow]
iterations = 50

[[pairs]]
id = "p1"
source_image = "a.png"
target_image = "/abs/b.png"
instruction = "remove the ball"
task = "remove"
"#;

    #[test]
    fn parses_sections_and_resolves_paths() {
        let cfg = PipelineConfig::parse(BASE, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.output_dir, Path::new("/cfg/out"));
        assert_eq!(cfg.pairs[0].source_image, Path::new("/cfg/a.png"));
        assert_eq!(cfg.pairs[0].target_image, Path::new("/abs/b.png"));
        assert_eq!(cfg.thresholds.alpha_max, 0.4);
        assert_eq!(cfg.thresholds.alpha_min, 0.01);
        assert_eq!(cfg.propagation.morph.close_radius, 3);
        assert_eq!(cfg.propagation.morph.open_radius, 1);
        assert_eq!(cfg.flow.iterations, 50);
        assert_eq!(cfg.flow.pyramid_levels, 3);
        let inpaint = &cfg.adapters[&StageName::Inpaint];
        assert_eq!(inpaint.mode, AdapterMode::FileDrop);
        assert_eq!(inpaint.drop_dir.as_deref(), Some(Path::new("/cfg/jobs")));
        assert_eq!(cfg.adapters[&StageName::DetectSegment].timeout, 30.0);
        assert_eq!(cfg.tool_provenance()["inpaint"], "fill 2.1");
    }

    #[test]
    fn missing_inpaint_adapter_is_rejected() {
        let text = BASE.replace("[adapters.inpaint]", "[adapters.unused]");
        assert!(PipelineConfig::parse(&text, Path::new("")).is_err());
        let start = BASE.find("[adapters.inpaint]").unwrap();
        let end = BASE.find("[thresholds]").unwrap();
        let text = format!("{}{}", &BASE[..start], &BASE[end..]);
        let err = PipelineConfig::parse(&text, Path::new("")).unwrap_err();
        assert!(err.contains("inpaint"), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        let cases = [
            BASE.replace("alpha_max = 0.4", "alpha_max = 1.4"),
            BASE.replace("id = \"p1\"", "id = \"../p1\""),
            BASE.replace("task = \"remove\"", "task = \"swap\""),
            BASE.replace("{mask} ", ""),
            BASE.replace("instruction = \"remove the ball\"", "instruction = \" \""),
            BASE.replace("[[pairs]]", "[[pears]]"),
            format!("{BASE}\n[[pairs]]\nid = \"p1\"\nsource_image = \"a\"\ntarget_image = \"b\"\ninstruction = \"x\"\ntask = \"add\"\n"),
        ];
        for text in cases {
            assert!(PipelineConfig::parse(&text, Path::new("")).is_err(), "{text}");
        }
    }

    #[test]
    fn i2v_optional_when_videos_supplied() {
        let text = BASE
            .replace("[adapters.i2v]\ncommand = \"gen {in} {out} {prompt}\"", "")
            .replace("task = \"remove\"", "task = \"remove\"\nsource_video = \"v\"");
        assert!(PipelineConfig::parse(&text, Path::new("")).is_ok());
        let text = BASE.replace("[adapters.i2v]\ncommand = \"gen {in} {out} {prompt}\"", "");
        assert!(PipelineConfig::parse(&text, Path::new("")).is_err());
    }
}
