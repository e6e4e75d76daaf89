//! Binary morphology on masks.
//!
//! Pixels outside the grid are ignored: erosion only looks at in-grid
//! neighbours, so a region touching the border is not eaten from outside.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mask::MaskFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructuringElement {
    /// `(2r + 1)²` square.
    Square,
    /// Offsets with `dx² + dy² <= r²`.
    Disk,
}

impl StructuringElement {
    fn offsets(self, radius: usize) -> Vec<(isize, isize)> {
        let r = radius as isize;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if self == StructuringElement::Square || dx * dx + dy * dy <= r * r {
                    out.push((dx, dy));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MorphParams {
    pub open_radius: usize,
    pub close_radius: usize,
    pub element: StructuringElement,
}

impl Default for MorphParams {
    fn default() -> Self {
        Self {
            open_radius: 1,
            close_radius: 2,
            element: StructuringElement::Square,
        }
    }
}

fn bits(mask: &MaskFrame) -> Vec<bool> {
    mask.values().iter().map(|&v| v >= 0.5).collect()
}

fn apply(src: &[bool], w: usize, h: usize, offsets: &[(isize, isize)], erode: bool) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut in_grid = offsets.iter().filter_map(|&(dx, dy)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                (nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize)
                    .then(|| src[ny as usize * w + nx as usize])
            });
            out[y * w + x] = if erode {
                in_grid.all(|b| b)
            } else {
                in_grid.any(|b| b)
            };
        }
    }
    out
}

fn to_mask(w: usize, h: usize, b: Vec<bool>) -> Result<MaskFrame> {
    MaskFrame::from_bools(w, h, b)
}

/// Values `>= 0.5` count as foreground.
pub fn erode(mask: &MaskFrame, radius: usize, element: StructuringElement) -> Result<MaskFrame> {
    let (w, h) = mask.dims();
    to_mask(w, h, apply(&bits(mask), w, h, &element.offsets(radius), true))
}

pub fn dilate(mask: &MaskFrame, radius: usize, element: StructuringElement) -> Result<MaskFrame> {
    let (w, h) = mask.dims();
    to_mask(w, h, apply(&bits(mask), w, h, &element.offsets(radius), false))
}

/// Erosion followed by dilation.
pub fn open(mask: &MaskFrame, radius: usize, element: StructuringElement) -> Result<MaskFrame> {
    dilate(&erode(mask, radius, element)?, radius, element)
}

/// Dilation followed by erosion.
pub fn close(mask: &MaskFrame, radius: usize, element: StructuringElement) -> Result<MaskFrame> {
    erode(&dilate(mask, radius, element)?, radius, element)
}

/// Binarizes at 0.5, then opens with `open_radius` and closes with `close_radius`.
pub fn refine_mask(mask: &MaskFrame, morph: &MorphParams) -> Result<MaskFrame> {
    let opened = open(mask, morph.open_radius, morph.element)?;
    close(&opened, morph.close_radius, morph.element)
}
