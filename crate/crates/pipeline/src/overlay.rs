//! Mask overlays for visual inspection.

use std::fs;
use std::path::Path;

use crate::error::{PipelineError, Result};
use maskflow_core::io::{frame_file_name, save_frame};
use maskflow_core::{Frame, MaskFrame, MaskSequence, Video};

pub const HIGHLIGHT_RGB: [u8; 3] = [255, 0, 255];
pub const HIGHLIGHT_GRAY: u8 = 255;

/// `round((1 - a·m)·src + a·m·highlight)` per sample, with `m` the mask value.
pub fn blend_frame(frame: &Frame, mask: &MaskFrame, alpha: f64) -> Result<Frame> {
    if frame.dims() != mask.dims() {
        return Err(maskflow_core::Error::ShapeMismatch {
            expected: frame.dims(),
            got: mask.dims(),
        }
        .into());
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PipelineError::invalid("overlay alpha", format!("{alpha} not in [0, 1]")));
    }
    let c = frame.channels();
    let highlight: &[u8] = if c == 1 { &[HIGHLIGHT_GRAY] } else { &HIGHLIGHT_RGB };
    let data = frame
        .data()
        .chunks_exact(c)
        .zip(mask.values())
        .flat_map(|(px, &m)| {
            let a = alpha * m;
            px.iter()
                .zip(highlight)
                .map(move |(&s, &h)| ((1.0 - a) * f64::from(s) + a * f64::from(h)).round() as u8)
        })
        .collect();
    Ok(Frame::new(frame.width(), frame.height(), c, data)?)
}

/// Writes one blended PNG per frame into `out_dir`.
pub fn render_overlay(video: &Video, masks: &MaskSequence, alpha: f64, out_dir: &Path) -> Result<()> {
    if video.len() != masks.len() {
        return Err(maskflow_core::Error::LengthMismatch {
            expected: video.len(),
            got: masks.len(),
        }
        .into());
    }
    fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    for (i, (frame, mask)) in video.frames().iter().zip(masks.masks()).enumerate() {
        save_frame(&blend_frame(frame, mask, alpha)?, &out_dir.join(frame_file_name(i + 1)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use maskflow_core::io::load_video;

    fn rgb(w: usize, h: usize) -> Frame {
        Frame::new(w, h, 3, (0..w * h * 3).map(|i| (i * 37 % 251) as u8).collect()).unwrap()
    }

    #[test]
    fn empty_mask_leaves_frames_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let video = Video::new(vec![rgb(5, 4), rgb(5, 4)], 16.0).unwrap();
        let masks = MaskSequence::new(vec![MaskFrame::zeros(5, 4).unwrap(); 2]).unwrap();
        render_overlay(&video, &masks, 0.7, dir.path()).unwrap();
        let back = load_video(dir.path()).unwrap();
        assert_eq!(back.frames(), video.frames());
    }

    #[test]
    fn full_alpha_paints_highlight() {
        let full = MaskFrame::from_fn(5, 4, |_, _| true).unwrap();
        let out = blend_frame(&rgb(5, 4), &full, 1.0).unwrap();
        assert!(out.data().chunks(3).all(|p| p == HIGHLIGHT_RGB));
        let gray = Frame::filled(5, 4, 1, 9).unwrap();
        let out = blend_frame(&gray, &full, 1.0).unwrap();
        assert!(out.data().iter().all(|&v| v == HIGHLIGHT_GRAY));
    }

    #[test]
    fn half_alpha_single_pixel() {
        let frame = rgb(3, 3);
        let mask = MaskFrame::from_fn(3, 3, |x, y| (x, y) == (1, 2)).unwrap();
        let out = blend_frame(&frame, &mask, 0.5).unwrap();
        for (i, (&s, &o)) in frame.data().iter().zip(out.data()).enumerate() {
            let pixel = i / 3;
            if pixel == 2 * 3 + 1 {
                let h = f64::from(HIGHLIGHT_RGB[i % 3]);
                assert_eq!(o, (0.5 * f64::from(s) + 0.5 * h).round() as u8);
            } else {
                assert_eq!(o, s);
            }
        }
    }

    #[test]
    fn mismatches_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let video = Video::new(vec![rgb(5, 4)], 16.0).unwrap();
        let masks = MaskSequence::new(vec![MaskFrame::zeros(5, 4).unwrap(); 2]).unwrap();
        assert!(render_overlay(&video, &masks, 0.5, dir.path()).is_err());
        assert!(blend_frame(&rgb(5, 4), &MaskFrame::zeros(4, 4).unwrap(), 0.5).is_err());
        assert!(blend_frame(&rgb(5, 4), &MaskFrame::zeros(5, 4).unwrap(), 1.5).is_err());
    }
}
