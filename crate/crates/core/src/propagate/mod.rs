//! Initial edit-mask construction and flow-guided temporal propagation.

pub mod morph;

use serde::{Deserialize, Serialize};

pub use morph::{close, dilate, erode, open, refine_mask, MorphParams, StructuringElement};

use crate::error::{Error, Result};
use crate::field::FlowSequence;
use crate::mask::{MaskFrame, MaskSequence};
use crate::record::EditTask;
use crate::warp::{fb_consistency, sample_bilinear, ConsistencyParams};

/// What an occluded pixel of the warped mask becomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OcclusionFill {
    /// Keep the previous mask's value at the same coordinate.
    HoldPrevious,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    pub morph: MorphParams,
    pub binarize_threshold: f64,
    pub consistency: ConsistencyParams,
    pub occlusion_fill: OcclusionFill,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            morph: MorphParams::default(),
            binarize_threshold: 0.5,
            consistency: ConsistencyParams::default(),
            occlusion_fill: OcclusionFill::HoldPrevious,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        check_threshold(self.binarize_threshold)?;
        self.consistency.validate()
    }
}

fn check_threshold(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid("binarize threshold", format!("{theta} not in (0, 1)")));
    }
    Ok(())
}

/// The first-frame mask for an edit: the target mask for additions, the source
/// mask for removals and their union for replacements.
pub fn select_initial_mask(task: EditTask, source: Option<&MaskFrame>, target: Option<&MaskFrame>) -> Result<MaskFrame> {
    match task {
        EditTask::Add => target.cloned().ok_or(Error::MissingMask("target")),
        EditTask::Remove => source.cloned().ok_or(Error::MissingMask("source")),
        EditTask::Replace => {
            let s = source.ok_or(Error::MissingMask("source"))?;
            let t = target.ok_or(Error::MissingMask("target"))?;
            if s.dims() != t.dims() {
                return Err(Error::ShapeMismatch {
                    expected: s.dims(),
                    got: t.dims(),
                });
            }
            let values: Vec<f64> = s.values().iter().zip(t.values()).map(|(a, b)| a.max(*b)).collect();
            if s.is_binary_valued() && t.is_binary_valued() {
                MaskFrame::binary(s.width(), s.height(), values)
            } else {
                MaskFrame::soft(s.width(), s.height(), values)
            }
        }
    }
}

/// `1` where the value is at least `threshold`, `0` elsewhere.
pub fn binarize(mask: &MaskFrame, threshold: f64) -> Result<MaskFrame> {
    check_threshold(threshold)?;
    MaskFrame::from_bools(mask.width(), mask.height(), mask.values().iter().map(|&v| v >= threshold).collect::<Vec<_>>())
}

/// Propagates `initial` through `flows`, producing one mask per frame.
///
/// Frame `t + 1` samples the refined first mask through the chain of
/// backward fields `t+1 → t → … → 1`, so sub-pixel motion accumulates instead
/// of being rounded away by per-frame binarization. Pixels of frame `t + 1`
/// whose backward/forward round trip is inconsistent are filled per
/// [`OcclusionFill`]; the result is binarized and closed.
pub fn propagate_masks(initial: &MaskFrame, flows: &FlowSequence, cfg: &PropagationConfig) -> Result<MaskSequence> {
    cfg.validate()?;
    let (w, h) = initial.dims();
    if let Some(dims) = flows.dims() {
        if dims != (w, h) {
            return Err(Error::ShapeMismatch {
                expected: (w, h),
                got: dims,
            });
        }
    }
    let first = refine_mask(initial, &cfg.morph)?;
    // displacement from each pixel of the current frame back into frame 1
    let mut chain_u = vec![0.0; w * h];
    let mut chain_v = vec![0.0; w * h];
    let mut lost = vec![0.0; w * h];
    let mut masks = Vec::with_capacity(flows.len() + 1);
    masks.push(first.clone());
    for (fwd, bwd) in flows.forward().iter().zip(flows.backward()) {
        let prev: &MaskFrame = masks.last().expect("seeded with the first frame");
        let occlusion = fb_consistency(bwd, fwd, &cfg.consistency)?;
        let mut next_u = vec![0.0; w * h];
        let mut next_v = vec![0.0; w * h];
        let mut next_lost = vec![1.0; w * h];
        let mut values = vec![0.0; w * h];
        for i in 0..w * h {
            if occlusion.flags()[i] {
                if cfg.occlusion_fill == OcclusionFill::HoldPrevious {
                    (next_u[i], next_v[i], next_lost[i]) = (chain_u[i], chain_v[i], lost[i]);
                    values[i] = prev.values()[i];
                }
                continue;
            }
            let (bu, bv) = (bwd.u()[i], bwd.v()[i]);
            let (px, py) = ((i % w) as f64 + bu, (i / w) as f64 + bv);
            let sampled = (
                sample_bilinear(&chain_u, w, h, px, py),
                sample_bilinear(&chain_v, w, h, px, py),
                sample_bilinear(&lost, w, h, px, py),
            );
            let (Some(cu), Some(cv), Some(l)) = sampled else {
                continue;
            };
            if l >= 0.5 {
                continue;
            }
            (next_u[i], next_v[i], next_lost[i]) = (bu + cu, bv + cv, 0.0);
            let (sx, sy) = ((i % w) as f64 + next_u[i], (i / w) as f64 + next_v[i]);
            values[i] = sample_bilinear(first.values(), w, h, sx, sy).unwrap_or(0.0);
        }
        (chain_u, chain_v, lost) = (next_u, next_v, next_lost);
        let binary = binarize(&MaskFrame::soft(w, h, values)?, cfg.binarize_threshold)?;
        masks.push(close(&binary, cfg.morph.close_radius, cfg.morph.element)?);
    }
    MaskSequence::new(masks)
}

/// Mean over frames of the covered fraction of the frame.
pub fn area_ratio(seq: &MaskSequence) -> f64 {
    seq.masks().iter().map(MaskFrame::coverage).sum::<f64>() / seq.len() as f64
}
