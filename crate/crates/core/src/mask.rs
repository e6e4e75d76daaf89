//! Edit-region masks. A value of 1 marks the edit region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Soft,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskFrame {
    width: usize,
    height: usize,
    values: Vec<f64>,
    kind: MaskKind,
}

impl MaskFrame {
    /// Soft mask; every value must lie in `[0, 1]`.
    pub fn soft(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_extent(width, height, values.len())?;
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid("mask", format!("value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            values,
            kind: MaskKind::Soft,
        })
    }

    /// Binary mask; every value must be exactly 0 or 1.
    pub fn binary(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_extent(width, height, values.len())?;
        if let Some(v) = values.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("binary mask", format!("value {v} not in {{0, 1}}")));
        }
        Ok(Self {
            width,
            height,
            values,
            kind: MaskKind::Binary,
        })
    }

    pub fn from_bools(width: usize, height: usize, bits: impl IntoIterator<Item = bool>) -> Result<Self> {
        let values = bits.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
        Self::binary(width, height, values)
    }

    /// Binary mask where `f(x, y)` holds.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let bits = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y));
        Self::from_bools(width, height, bits.collect::<Vec<_>>())
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::binary(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Sum of mask values; the pixel count for binary masks.
    pub fn area(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Fraction of the frame covered by the mask.
    pub fn coverage(&self) -> f64 {
        self.area() / self.values.len() as f64
    }

    pub fn is_binary_valued(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Area-weighted centroid `(x, y)`; `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let area = self.area();
        if area == 0.0 {
            return None;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for (i, &v) in self.values.iter().enumerate() {
            sx += v * (i % self.width) as f64;
            sy += v * (i / self.width) as f64;
        }
        Some((sx / area, sy / area))
    }
}

fn check_extent(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("mask", format!("empty extent {width}x{height}")));
    }
    if len != width * height {
        return Err(Error::invalid("mask", format!("{len} values for {width}x{height}")));
    }
    Ok(())
}

/// One mask per video frame, all of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSequence {
    masks: Vec<MaskFrame>,
}

impl MaskSequence {
    pub fn new(masks: Vec<MaskFrame>) -> Result<Self> {
        let Some(first) = masks.first() else {
            return Err(Error::invalid("mask sequence", "no masks"));
        };
        let dims = first.dims();
        if let Some(m) = masks.iter().find(|m| m.dims() != dims) {
            return Err(Error::ShapeMismatch {
                expected: dims,
                got: m.dims(),
            });
        }
        Ok(Self { masks })
    }

    pub fn masks(&self) -> &[MaskFrame] {
        &self.masks
    }

    pub fn into_masks(self) -> Vec<MaskFrame> {
        self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.masks[0].dims()
    }
}
