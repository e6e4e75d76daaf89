//! Backward warping and forward–backward flow consistency.
//!
//! A sample position `s` along one axis of length `n` is *outside* when
//! `s <= -1` or `s >= n`: no pixel's bilinear footprint overlaps it and the
//! sample is 0. Positions in `(-1, 0)` or `(n - 1, n)` touch the border and
//! are clamped onto it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FlowField;
use crate::frame::GrayFrame;
use crate::mask::MaskFrame;

/// A single-channel raster that can be resampled.
pub trait Plane: Sized {
    fn plane_dims(&self) -> (usize, usize);
    fn samples(&self) -> &[f64];
    /// Rebuilds a plane of the same kind from resampled values.
    fn resampled(&self, values: Vec<f64>) -> Result<Self>;
}

impl Plane for GrayFrame {
    fn plane_dims(&self) -> (usize, usize) {
        self.dims()
    }

    fn samples(&self) -> &[f64] {
        self.data()
    }

    fn resampled(&self, values: Vec<f64>) -> Result<Self> {
        GrayFrame::new(self.width(), self.height(), values)
    }
}

impl Plane for MaskFrame {
    fn plane_dims(&self) -> (usize, usize) {
        self.dims()
    }

    fn samples(&self) -> &[f64] {
        self.values()
    }

    /// Warped masks are soft.
    fn resampled(&self, values: Vec<f64>) -> Result<Self> {
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        MaskFrame::soft(self.width(), self.height(), values)
    }
}

/// Per-pixel occlusion flags; `true` marks an inconsistent or occluded pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcclusionMask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl OcclusionMask {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn is_occluded(&self, x: usize, y: usize) -> bool {
        self.flags[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Thresholds of the consistency test, in px² and dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsistencyParams {
    pub tau_abs: f64,
    pub tau_rel: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self {
            tau_abs: 0.5,
            tau_rel: 0.01,
        }
    }
}

impl ConsistencyParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t.is_finite() && t >= 0.0;
        if !ok(self.tau_abs) || !ok(self.tau_rel) {
            return Err(Error::invalid("consistency params", "thresholds must be finite and >= 0"));
        }
        Ok(())
    }
}

fn outside(s: f64, n: usize) -> bool {
    s <= -1.0 || s >= n as f64
}

/// Bilinear sample with the zero-outside / clamp-at-border policy.
pub fn sample_bilinear(data: &[f64], width: usize, height: usize, x: f64, y: f64) -> Option<f64> {
    if outside(x, width) || outside(y, height) {
        return None;
    }
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    let top = lerp(data[y0 * width + x0], data[y0 * width + x1], fx);
    let bottom = lerp(data[y1 * width + x0], data[y1 * width + x1], fx);
    Some(lerp(top, bottom, fy))
}

/// `out(x, y) = src(x + u(x, y), y + v(x, y))`, bilinearly sampled.
pub fn backward_warp<P: Plane>(src: &P, sampling_flow: &FlowField) -> Result<P> {
    let (w, h) = src.plane_dims();
    if sampling_flow.dims() != (w, h) {
        return Err(Error::ShapeMismatch {
            expected: (w, h),
            got: sampling_flow.dims(),
        });
    }
    let data = src.samples();
    let (u, v) = (sampling_flow.u(), sampling_flow.v());
    let out = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            sample_bilinear(data, w, h, x + u[i], y + v[i]).unwrap_or(0.0)
        })
        .collect();
    src.resampled(out)
}

/// Flags pixels `x` of the first field's frame where
/// `|F(x) + G(x + F(x))|² > tau_abs + tau_rel·(|F(x)|² + |G(x + F(x))|²)`.
///
/// `fwd` is defined on the grid being tested and `bwd` on the other frame;
/// lookups that leave the grid are flagged.
pub fn fb_consistency(fwd: &FlowField, bwd: &FlowField, params: &ConsistencyParams) -> Result<OcclusionMask> {
    params.validate()?;
    if fwd.dims() != bwd.dims() {
        return Err(Error::ShapeMismatch {
            expected: fwd.dims(),
            got: bwd.dims(),
        });
    }
    let (w, h) = fwd.dims();
    let flags = (0..w * h)
        .map(|i| {
            let (fu, fv) = (fwd.u()[i], fwd.v()[i]);
            let (px, py) = ((i % w) as f64 + fu, (i / w) as f64 + fv);
            let (Some(bu), Some(bv)) = (
                sample_bilinear(bwd.u(), w, h, px, py),
                sample_bilinear(bwd.v(), w, h, px, py),
            ) else {
                return true;
            };
            let err = (fu + bu).powi(2) + (fv + bv).powi(2);
            let scale = fu * fu + fv * fv + bu * bu + bv * bv;
            err > params.tau_abs + params.tau_rel * scale
        })
        .collect();
    Ok(OcclusionMask {
        width: w,
        height: h,
        flags,
    })
}
