//! Analytic motion fields about the image centre, used as test oracles.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::FlowField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SyntheticMotion {
    Translation { dx: f64, dy: f64 },
    /// Rotation by `angle` radians (positive turns +x towards +y).
    Rotation { angle: f64 },
    Zoom { factor: f64 },
}

impl SyntheticMotion {
    /// Where the point `(x, y)` moves to, with the centre of a `width x height` grid fixed.
    pub fn apply(&self, x: f64, y: f64, width: usize, height: usize) -> (f64, f64) {
        let (cx, cy) = center(width, height);
        match *self {
            SyntheticMotion::Translation { dx, dy } => (x + dx, y + dy),
            SyntheticMotion::Rotation { angle } => {
                let (s, c) = angle.sin_cos();
                let (rx, ry) = (x - cx, y - cy);
                (cx + c * rx - s * ry, cy + s * rx + c * ry)
            }
            SyntheticMotion::Zoom { factor } => (cx + factor * (x - cx), cy + factor * (y - cy)),
        }
    }

    pub fn inverse(&self) -> Self {
        match *self {
            SyntheticMotion::Translation { dx, dy } => SyntheticMotion::Translation { dx: -dx, dy: -dy },
            SyntheticMotion::Rotation { angle } => SyntheticMotion::Rotation { angle: -angle },
            SyntheticMotion::Zoom { factor } => SyntheticMotion::Zoom { factor: 1.0 / factor },
        }
    }

    /// The motion applied `n` times.
    pub fn repeated(&self, n: u32) -> Self {
        let k = f64::from(n);
        match *self {
            SyntheticMotion::Translation { dx, dy } => SyntheticMotion::Translation { dx: k * dx, dy: k * dy },
            SyntheticMotion::Rotation { angle } => SyntheticMotion::Rotation { angle: k * angle },
            SyntheticMotion::Zoom { factor } => SyntheticMotion::Zoom { factor: factor.powi(n as i32) },
        }
    }
}

pub fn center(width: usize, height: usize) -> (f64, f64) {
    ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
}

/// Displacement field `apply(p) − p` of `motion`.
pub fn synthetic_flow(motion: &SyntheticMotion, width: usize, height: usize) -> Result<FlowField> {
    FlowField::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let (tx, ty) = motion.apply(fx, fy, width, height);
        (tx - fx, ty - fy)
    })
}
