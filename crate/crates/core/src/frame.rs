//! 8-bit frames, their 64-bit grayscale counterpart, and videos.

use crate::error::{Error, Result};

/// Rec. 601 luma weights used for every RGB to gray conversion.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A single 8-bit image, gray (1 channel) or RGB (3 channels), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame", format!("empty extent {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid("frame", format!("{channels} channels (want 1 or 3)")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(
                "frame",
                format!(
                    "data length {} != {width}*{height}*{channels}",
                    data.len()
                ),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// A frame with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(width, height)`
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Samples of pixel `(x, y)`, one per channel.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Grayscale conversion to `[0, 1]`.
    pub fn to_gray(&self) -> GrayFrame {
        let data = match self.channels {
            1 => self.data.iter().map(|&s| f64::from(s) / 255.0).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|px| {
                    let luma = LUMA_WEIGHTS[0] * f64::from(px[0])
                        + LUMA_WEIGHTS[1] * f64::from(px[1])
                        + LUMA_WEIGHTS[2] * f64::from(px[2]);
                    luma / 255.0
                })
                .collect(),
        };
        GrayFrame {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Single-channel 64-bit frame used by the numeric code (flow, warping).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("gray frame", format!("empty extent {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::invalid(
                "gray frame",
                format!("data length {} != {width}*{height}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("gray frame", "non-finite sample"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, data)
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Quantizes back to an 8-bit gray frame, clamping to `[0, 1]`.
    pub fn to_frame(&self) -> Frame {
        let data = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        Frame {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }
}

/// An ordered, shape-homogeneous frame sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    frames: Vec<Frame>,
    fps: f64,
}

impl Video {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::invalid("video", "no frames"));
        };
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid("video", format!("fps {fps} must be positive")));
        }
        let shape = (first.width, first.height, first.channels);
        if let Some((i, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| (f.width, f.height, f.channels) != shape)
        {
            return Err(Error::invalid(
                "video",
                format!(
                    "frame {i} is {}x{}x{}, expected {}x{}x{}",
                    f.width, f.height, f.channels, shape.0, shape.1, shape.2
                ),
            ));
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn channels(&self) -> usize {
        self.frames[0].channels
    }

    pub fn to_gray(&self) -> Vec<GrayFrame> {
        self.frames.iter().map(Frame::to_gray).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn luma_of_pure_channels() {
        let f = Frame::new(3, 1, 3, vec![255, 0, 0, 0, 255, 0, 0, 0, 255]).unwrap();
        let g = f.to_gray();
        assert!((g.at(0, 0) - 0.299).abs() < 1e-12);
        assert!((g.at(1, 0) - 0.587).abs() < 1e-12);
        assert!((g.at(2, 0) - 0.114).abs() < 1e-12);
    }

    #[test]
    fn video_rejects_mixed_shapes_and_bad_fps() {
        let a = Frame::filled(4, 4, 1, 0).unwrap();
        let b = Frame::filled(4, 5, 1, 0).unwrap();
        assert!(Video::new(vec![a.clone(), b], 16.0).is_err());
        assert!(Video::new(vec![], 16.0).is_err());
        assert!(Video::new(vec![a.clone()], 0.0).is_err());
        assert!(Video::new(vec![a], f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn frame_rejects_wrong_lengths(w in 1usize..8, h in 1usize..8, c in prop::sample::select(vec![1usize, 3]), delta in 1usize..5) {
            let n = w * h * c;
            prop_assert!(Frame::new(w, h, c, vec![0; n + delta]).is_err());
            prop_assert!(Frame::new(w, h, c, vec![0; n - 1]).is_err());
            prop_assert!(Frame::new(w, h, c, vec![0; n]).is_ok());
        }

        #[test]
        fn frame_rejects_bad_channel_counts(c in 0usize..8) {
            prop_assume!(c != 1 && c != 3);
            prop_assert!(Frame::new(2, 2, c, vec![0; 4 * c]).is_err());
        }

        #[test]
        fn gray_rejects_non_finite(idx in 0usize..16, bad in prop::sample::select(vec![f64::NAN, f64::INFINITY, f64::NEG_INFINITY])) {
            let mut data = vec![0.5; 16];
            data[idx] = bad;
            prop_assert!(GrayFrame::new(4, 4, data).is_err());
        }
    }
}
