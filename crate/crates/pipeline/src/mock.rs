//! Deterministic stand-ins for the external tools, used by tests and demos.

use std::path::Path;

use crate::error::{PipelineError, Result};
use maskflow_core::io::{load_frame, load_mask_sequence, load_video, save_mask, save_video};
use maskflow_core::{Frame, MaskFrame, Video};

/// Luma at or above this (0–255) counts as the object.
pub const SEGMENT_LUMA: f64 = 200.0;

/// Frame `t` is the image translated by `t·shift`, edges clamped.
pub fn mock_i2v(image: &Path, out: &Path, frames: usize, shift: (i64, i64), fps: f64) -> Result<()> {
    if frames == 0 {
        return Err(PipelineError::invalid("mock i2v", "frames must be >= 1"));
    }
    let src = load_frame(image)?;
    let (w, h, c) = (src.width() as i64, src.height() as i64, src.channels());
    let video = (0..frames as i64)
        .map(|t| {
            let mut data = Vec::with_capacity(src.data().len());
            for y in 0..h {
                for x in 0..w {
                    let sx = (x - t * shift.0).clamp(0, w - 1) as usize;
                    let sy = (y - t * shift.1).clamp(0, h - 1) as usize;
                    data.extend_from_slice(src.pixel(sx, sy));
                }
            }
            Frame::new(w as usize, h as usize, c, data)
        })
        .collect::<maskflow_core::Result<Vec<_>>>()?;
    save_video(&Video::new(video, fps)?, out)?;
    Ok(())
}

/// Binary mask of pixels with luma at least [`SEGMENT_LUMA`].
pub fn mock_segment(image: &Path, out: &Path) -> Result<()> {
    let gray = load_frame(image)?.to_gray();
    let (w, h) = gray.dims();
    let mask = MaskFrame::from_bools(w, h, gray.data().iter().map(|&v| v * 255.0 >= SEGMENT_LUMA).collect::<Vec<_>>())?;
    save_mask(&mask, out)?;
    Ok(())
}

/// Replaces masked pixels of each frame by the per-channel mean of the
/// unmasked ones.
pub fn mock_inpaint(video_dir: &Path, masks_dir: &Path, out: &Path) -> Result<()> {
    let video = load_video(video_dir)?;
    let masks = load_mask_sequence(masks_dir)?;
    if masks.len() != video.len() || masks.dims() != video.dims() {
        return Err(PipelineError::invalid(
            "mock inpaint",
            format!("{} masks for {} frames", masks.len(), video.len()),
        ));
    }
    let c = video.channels();
    let frames = video
        .frames()
        .iter()
        .zip(masks.masks())
        .map(|(frame, mask)| {
            let hole: Vec<bool> = mask.values().iter().map(|&m| m >= 0.5).collect();
            let mut sums = vec![0.0; c];
            let mut count = 0usize;
            for (px, _) in frame.data().chunks_exact(c).zip(&hole).filter(|(_, &h)| !h) {
                for (s, &v) in sums.iter_mut().zip(px) {
                    *s += f64::from(v);
                }
                count += 1;
            }
            let fill: Vec<u8> = sums
                .iter()
                .map(|s| if count == 0 { 0 } else { (s / count as f64).round() as u8 })
                .collect();
            let mut data = frame.data().to_vec();
            for (px, _) in data.chunks_exact_mut(c).zip(&hole).filter(|(_, &h)| h) {
                px.copy_from_slice(&fill);
            }
            Frame::new(frame.width(), frame.height(), c, data)
        })
        .collect::<maskflow_core::Result<Vec<_>>>()?;
    save_video(&Video::new(frames, video.fps())?, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use maskflow_core::io::{load_mask, save_frame, save_mask_sequence};
    use maskflow_core::MaskSequence;

    fn ramp(w: usize, h: usize) -> Frame {
        Frame::new(w, h, 1, (0..w * h).map(|i| (i % w * 10) as u8).collect()).unwrap()
    }

    #[test]
    fn i2v_copies_and_shifts() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("in.png");
        save_frame(&ramp(6, 3), &img).unwrap();
        mock_i2v(&img, &dir.path().join("v"), 3, (0, 0), 16.0).unwrap();
        let v = load_video(&dir.path().join("v")).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.frames().iter().all(|f| f == &ramp(6, 3)));

        mock_i2v(&img, &dir.path().join("s"), 3, (1, 0), 20.0).unwrap();
        let s = load_video(&dir.path().join("s")).unwrap();
        assert_eq!(s.fps(), 20.0);
        assert_eq!(s.frames()[2].pixel(4, 1), ramp(6, 3).pixel(2, 1));
        assert_eq!(s.frames()[2].pixel(1, 1), ramp(6, 3).pixel(0, 1));
    }

    #[test]
    fn segment_thresholds_luma() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("in.png");
        let f = Frame::new(3, 1, 3, vec![255, 255, 255, 199, 199, 199, 10, 250, 10]).unwrap();
        save_frame(&f, &img).unwrap();
        mock_segment(&img, &dir.path().join("m.png")).unwrap();
        let m = load_mask(&dir.path().join("m.png")).unwrap();
        assert_eq!(m.values(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn inpaint_fills_holes_with_background_mean() {
        let dir = tempfile::tempdir().unwrap();
        let f = Frame::new(2, 2, 1, vec![10, 20, 30, 250]).unwrap();
        save_video(&Video::new(vec![f], 16.0).unwrap(), &dir.path().join("v")).unwrap();
        let m = MaskFrame::from_fn(2, 2, |x, y| (x, y) == (1, 1)).unwrap();
        save_mask_sequence(&MaskSequence::new(vec![m]).unwrap(), &dir.path().join("m")).unwrap();
        mock_inpaint(&dir.path().join("v"), &dir.path().join("m"), &dir.path().join("o")).unwrap();
        let o = load_video(&dir.path().join("o")).unwrap();
        assert_eq!(o.frames()[0].data(), [10, 20, 30, 20]);
    }
}
