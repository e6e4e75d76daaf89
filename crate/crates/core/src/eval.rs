//! Mask and flow metrics, plus synthetic end-to-end propagation scenarios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FlowField, FlowSequence};
use crate::flow::{estimate_flow_hs, synthetic_flow, HsParams, SyntheticMotion};
use crate::frame::GrayFrame;
use crate::mask::{MaskFrame, MaskKind, MaskSequence};
use crate::propagate::{propagate_masks, PropagationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoUReport {
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

impl IoUReport {
    fn from_frames(per_frame: Vec<f64>) -> Self {
        let mean = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
        Self { per_frame, mean }
    }
}

fn mask_iou(a: &MaskFrame, b: &MaskFrame) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.values().iter().zip(b.values()) {
        let (x, y) = (x == 1.0, y == 1.0);
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Per-frame intersection over union of two binary sequences.
///
/// A frame where both masks are empty scores 1.
pub fn temporal_iou(pred: &MaskSequence, reference: &MaskSequence) -> Result<IoUReport> {
    if pred.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            got: pred.len(),
        });
    }
    if pred.dims() != reference.dims() {
        return Err(Error::ShapeMismatch {
            expected: reference.dims(),
            got: pred.dims(),
        });
    }
    if pred
        .masks()
        .iter()
        .chain(reference.masks())
        .any(|m| m.kind() != MaskKind::Binary)
    {
        return Err(Error::invalid("iou input", "soft mask; binarize first"));
    }
    let per_frame = pred
        .masks()
        .iter()
        .zip(reference.masks())
        .map(|(a, b)| mask_iou(a, b))
        .collect();
    Ok(IoUReport::from_frames(per_frame))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpeReport {
    pub mean: f64,
    pub max: f64,
}

/// Euclidean endpoint error between two fields, in pixels.
pub fn endpoint_error(flow: &FlowField, truth: &FlowField) -> Result<EpeReport> {
    if flow.dims() != truth.dims() {
        return Err(Error::ShapeMismatch {
            expected: truth.dims(),
            got: flow.dims(),
        });
    }
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let n = flow.u().len();
    for i in 0..n {
        let e = (flow.u()[i] - truth.u()[i]).hypot(flow.v()[i] - truth.v()[i]);
        sum += e;
        max = max.max(e);
    }
    Ok(EpeReport { mean: sum / n as f64, max })
}

/// Region carried by a drift scenario, in first-frame pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum MaskShape {
    /// Covers pixel centres `x0..x0+side`, `y0..y0+side`.
    Square { x0: f64, y0: f64, side: f64 },
    Disk { cx: f64, cy: f64, radius: f64 },
}

impl MaskShape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            MaskShape::Square { x0, y0, side } => {
                x >= x0 - 0.5 && x < x0 + side - 0.5 && y >= y0 - 0.5 && y < y0 + side - 0.5
            }
            MaskShape::Disk { cx, cy, radius } => (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowSource {
    /// Exact analytic forward and backward fields.
    Analytic,
    /// Horn–Schunck estimates on a rendered textured video.
    Estimated(HsParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftScenario {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Motion between consecutive frames.
    pub motion: SyntheticMotion,
    pub shape: MaskShape,
    pub flow_source: FlowSource,
}

/// Smooth texture in `[0.1, 0.9]` used for rendered scenarios.
pub fn smooth_texture(x: f64, y: f64) -> f64 {
    use std::f64::consts::TAU;
    0.5 + 0.2 * (TAU * x / 13.0 + 0.3).sin() * (TAU * y / 17.0).cos()
        + 0.15 * (TAU * (x + 2.0 * y) / 23.0).sin()
        + 0.05 * (TAU * y / 7.0 + 1.0).cos()
}

impl DriftScenario {
    /// Analytic mask of frame `t`.
    pub fn mask_at(&self, t: usize) -> Result<MaskFrame> {
        let back = self.motion.repeated(t as u32).inverse();
        let (w, h) = (self.width, self.height);
        MaskFrame::from_fn(w, h, |x, y| {
            let (qx, qy) = back.apply(x as f64, y as f64, w, h);
            self.shape.contains(qx, qy)
        })
    }

    /// Rendered textured frame `t`.
    pub fn frame_at(&self, t: usize) -> Result<GrayFrame> {
        let back = self.motion.repeated(t as u32).inverse();
        let (w, h) = (self.width, self.height);
        GrayFrame::from_fn(w, h, |x, y| {
            let (qx, qy) = back.apply(x as f64, y as f64, w, h);
            smooth_texture(qx, qy)
        })
    }

    pub fn flows(&self) -> Result<FlowSequence> {
        if self.frames < 2 {
            return Err(Error::invalid("drift scenario", "needs at least two frames"));
        }
        let pairs = self.frames - 1;
        match self.flow_source {
            FlowSource::Analytic => {
                let fwd = synthetic_flow(&self.motion, self.width, self.height)?;
                let bwd = synthetic_flow(&self.motion.inverse(), self.width, self.height)?;
                FlowSequence::new(vec![fwd; pairs], vec![bwd; pairs])
            }
            FlowSource::Estimated(params) => {
                let frames = (0..self.frames).map(|t| self.frame_at(t)).collect::<Result<Vec<_>>>()?;
                let fields: Vec<(FlowField, FlowField)> = (0..pairs)
                    .into_par_iter()
                    .map(|t| {
                        Ok((
                            estimate_flow_hs(&frames[t], &frames[t + 1], &params)?,
                            estimate_flow_hs(&frames[t + 1], &frames[t], &params)?,
                        ))
                    })
                    .collect::<Result<_>>()?;
                let (fwd, bwd) = fields.into_iter().unzip();
                FlowSequence::new(fwd, bwd)
            }
        }
    }
}

/// Runs the real propagation path on a synthetic scenario and scores every
/// frame against the analytic mask.
pub fn propagation_drift(cfg: &PropagationConfig, scenario: &DriftScenario) -> Result<IoUReport> {
    let flows = scenario.flows()?;
    let truth = MaskSequence::new((0..scenario.frames).map(|t| scenario.mask_at(t)).collect::<Result<_>>()?)?;
    let propagated = propagate_masks(&truth.masks()[0], &flows, cfg)?;
    temporal_iou(&propagated, &truth)
}
