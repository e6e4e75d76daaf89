//! Edit instructions and per-pair dataset records.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, `min` inclusive, `max` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, frame: (usize, usize)) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate(frame)?;
        Ok(b)
    }

    pub fn validate(&self, (width, height): (usize, usize)) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::invalid("bbox", format!("degenerate box {self:?}")));
        }
        if self.x_min < 0.0 || self.y_min < 0.0 || self.x_max > width as f64 || self.y_max > height as f64 {
            return Err(Error::invalid("bbox", format!("{self:?} outside {width}x{height}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditTask {
    Add,
    Remove,
    Replace,
}

impl EditTask {
    pub fn as_str(self) -> &'static str {
        match self {
            EditTask::Add => "add",
            EditTask::Remove => "remove",
            EditTask::Replace => "replace",
        }
    }
}

impl fmt::Display for EditTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EditTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add" => Ok(EditTask::Add),
            "remove" => Ok(EditTask::Remove),
            "replace" => Ok(EditTask::Replace),
            other => Err(Error::invalid("edit task", format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditInstruction {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_text: Option<String>,
    pub task: EditTask,
}

impl EditInstruction {
    pub fn new(text: impl Into<String>, scene_text: Option<String>, task: EditTask) -> Result<Self> {
        let instr = Self {
            text: text.into(),
            scene_text,
            task,
        };
        instr.validate()?;
        Ok(instr)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::invalid("instruction", "empty text"));
        }
        Ok(())
    }

    /// Prompt for the image-to-video stage: the scene description when known.
    pub fn scene_prompt(&self) -> &str {
        self.scene_text.as_deref().unwrap_or(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatus {
    Complete,
    Failed,
}

/// Filter statistics of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    /// Mean fraction of frame area covered by the propagated masks.
    pub area_ratio: f64,
    /// Mean forward-flow magnitude in px/frame.
    pub flow_mag: f64,
}

impl PairStats {
    pub fn is_finite(&self) -> bool {
        self.area_ratio.is_finite() && self.flow_mag.is_finite()
    }
}

/// Shape and timing of a pair's source video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub fps: f64,
}

/// One source/target record. Paths are relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditPair {
    pub id: String,
    pub instruction: EditInstruction,
    pub status: PairStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub source_image: PathBuf,
    pub target_image: PathBuf,
    #[serde(default)]
    pub source_video: Option<PathBuf>,
    #[serde(default)]
    pub target_video: Option<PathBuf>,
    #[serde(default)]
    pub masks: Option<PathBuf>,
    #[serde(default)]
    pub flows: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay: Option<PathBuf>,
    #[serde(default)]
    pub video: Option<VideoMeta>,
    #[serde(default)]
    pub stats: Option<PairStats>,
    pub keep: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EditPair {
    /// A record for a pair whose processing failed.
    pub fn failed(
        id: impl Into<String>,
        instruction: EditInstruction,
        source_image: PathBuf,
        target_image: PathBuf,
        error: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            instruction,
            status: PairStatus::Failed,
            error: Some(error.into()),
            source_image,
            target_image,
            source_video: None,
            target_video: None,
            masks: None,
            flows: None,
            overlay: None,
            video: None,
            stats: None,
            keep: false,
            warnings: Vec::new(),
        }
    }

    /// Checks the record-local invariants (no filesystem access).
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("edit pair", "empty id"));
        }
        self.instruction.validate()?;
        if let Some(stats) = &self.stats {
            if !stats.is_finite() {
                return Err(Error::invalid("edit pair", format!("{}: non-finite stats", self.id)));
            }
        }
        match self.status {
            PairStatus::Complete => {
                let missing: Vec<&str> = [
                    ("source_video", self.source_video.is_none()),
                    ("masks", self.masks.is_none()),
                    ("flows", self.flows.is_none()),
                    ("stats", self.stats.is_none()),
                    ("target_video", self.keep && self.target_video.is_none()),
                ]
                .into_iter()
                .filter_map(|(name, gone)| gone.then_some(name))
                .collect();
                if !missing.is_empty() {
                    return Err(Error::invalid(
                        "edit pair",
                        format!("{}: complete record lacks {}", self.id, missing.join(", ")),
                    ));
                }
            }
            PairStatus::Failed => {
                if self.keep {
                    return Err(Error::invalid("edit pair", format!("{}: failed record marked keep", self.id)));
                }
            }
        }
        Ok(())
    }

    /// Every path the record references, with a label.
    pub fn referenced_paths(&self) -> Vec<(&'static str, &PathBuf)> {
        let mut out = vec![("source_image", &self.source_image), ("target_image", &self.target_image)];
        let optional = [
            ("source_video", &self.source_video),
            ("target_video", &self.target_video),
            ("masks", &self.masks),
            ("flows", &self.flows),
            ("overlay", &self.overlay),
        ];
        out.extend(optional.into_iter().filter_map(|(n, p)| p.as_ref().map(|p| (n, p))));
        out
    }
}
