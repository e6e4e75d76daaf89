//! Frame, mask and flow directories on disk.
//!
//! Frames and masks are lossless PNG files named by a zero-padded 1-based
//! index (`000001.png`, `000002.png`, ...). A video directory may carry a
//! `video.json` sidecar holding its frame rate. Flow sequences are stored as
//! `forward_000001.flo` / `backward_000001.flo` pairs.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FlowSequence;
use crate::flow::flo::{read_flo, write_flo};
use crate::frame::{Frame, Video};
use crate::mask::{MaskFrame, MaskSequence};

/// Frame rate assumed when a video directory has no sidecar.
pub const DEFAULT_FPS: f64 = 16.0;

pub const VIDEO_SIDECAR: &str = "video.json";

#[derive(Debug, Serialize, Deserialize)]
struct VideoSidecar {
    fps: f64,
}

pub fn frame_file_name(index: usize) -> String {
    format!("{index:06}.png")
}

/// Numbered image files of `dir`, sorted by index.
pub fn numbered_files(dir: &Path, extension: &str) -> Result<Vec<(u64, PathBuf)>> {
    if !dir.is_dir() {
        return Err(Error::MissingDir(dir.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext_ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case(extension));
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        if ext_ok && !stem.is_empty() && stem.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(index) = stem.parse::<u64>() {
                files.push((index, path));
            }
        }
    }
    files.sort_by_key(|(i, _)| *i);
    Ok(files)
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn save_image(img: &DynamicImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Loads a single image as an 8-bit gray or RGB frame (alpha is dropped).
pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => Frame::new(w, h, 1, g.into_raw()),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            Frame::new(w, h, 1, img.to_luma8().into_raw())
        }
        other => Frame::new(w, h, 3, other.to_rgb8().into_raw()),
    }
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let img = if frame.channels() == 1 {
        let buf: GrayImage = ImageBuffer::<Luma<u8>, _>::from_raw(w, h, frame.data().to_vec())
            .expect("frame invariants guarantee buffer size");
        DynamicImage::ImageLuma8(buf)
    } else {
        let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, frame.data().to_vec())
            .expect("frame invariants guarantee buffer size");
        DynamicImage::ImageRgb8(buf)
    };
    save_image(&img, path)
}

pub fn load_video(dir: &Path) -> Result<Video> {
    let files = numbered_files(dir, "png")?;
    if files.is_empty() {
        return Err(Error::EmptyDir(dir.to_path_buf()));
    }
    let frames = files
        .iter()
        .map(|(_, p)| load_frame(p))
        .collect::<Result<Vec<_>>>()?;
    let sidecar = dir.join(VIDEO_SIDECAR);
    let fps = if sidecar.is_file() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: VideoSidecar = serde_json::from_str(&text)
            .map_err(|e| Error::invalid("video sidecar", format!("{}: {e}", sidecar.display())))?;
        meta.fps
    } else {
        DEFAULT_FPS
    };
    Video::new(frames, fps)
}

pub fn save_video(video: &Video, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    for (i, frame) in video.frames().iter().enumerate() {
        save_frame(frame, &dir.join(frame_file_name(i + 1)))?;
    }
    let sidecar = dir.join(VIDEO_SIDECAR);
    let text = serde_json::to_string(&VideoSidecar { fps: video.fps() }).expect("plain struct");
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
}

/// Loads an 8-bit grayscale mask; 0 maps to 0.0 and 255 to 1.0.
///
/// The mask is binary when every sample is 0 or 255, soft otherwise.
pub fn load_mask(path: &Path) -> Result<MaskFrame> {
    let img = open_image(path)?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::invalid(
                "mask image",
                format!("{} is {:?}, expected 8-bit grayscale", path.display(), other.color()),
            ))
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let raw = gray.into_raw();
    let values: Vec<f64> = raw.iter().map(|&s| f64::from(s) / 255.0).collect();
    if raw.iter().all(|&s| s == 0 || s == 255) {
        MaskFrame::binary(w, h, values)
    } else {
        MaskFrame::soft(w, h, values)
    }
}

/// Saves a mask as 8-bit grayscale, quantizing soft values to the nearest level.
pub fn save_mask(mask: &MaskFrame, path: &Path) -> Result<()> {
    let data = mask
        .values()
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    let buf = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, data)
        .expect("mask invariants guarantee buffer size");
    save_image(&DynamicImage::ImageLuma8(buf), path)
}

pub fn load_mask_sequence(dir: &Path) -> Result<MaskSequence> {
    let files = numbered_files(dir, "png")?;
    if files.is_empty() {
        return Err(Error::EmptyDir(dir.to_path_buf()));
    }
    let masks = files
        .iter()
        .map(|(_, p)| load_mask(p))
        .collect::<Result<Vec<_>>>()?;
    MaskSequence::new(masks)
}

pub fn save_mask_sequence(seq: &MaskSequence, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    for (i, m) in seq.masks().iter().enumerate() {
        save_mask(m, &dir.join(frame_file_name(i + 1)))?;
    }
    Ok(())
}

pub fn forward_flow_name(index: usize) -> String {
    format!("forward_{index:06}.flo")
}

pub fn backward_flow_name(index: usize) -> String {
    format!("backward_{index:06}.flo")
}

pub fn save_flow_sequence(flows: &FlowSequence, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    for (i, (f, b)) in flows.forward().iter().zip(flows.backward()).enumerate() {
        write_flo(f, &dir.join(forward_flow_name(i + 1)))?;
        write_flo(b, &dir.join(backward_flow_name(i + 1)))?;
    }
    Ok(())
}

/// Reads `forward_*.flo` / `backward_*.flo` pairs; indices must be contiguous from 1.
pub fn load_flow_sequence(dir: &Path) -> Result<FlowSequence> {
    if !dir.is_dir() {
        return Err(Error::MissingDir(dir.to_path_buf()));
    }
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for i in 1.. {
        let f = dir.join(forward_flow_name(i));
        let b = dir.join(backward_flow_name(i));
        match (f.is_file(), b.is_file()) {
            (true, true) => {
                forward.push(read_flo(&f)?);
                backward.push(read_flo(&b)?);
            }
            (false, false) => break,
            _ => {
                return Err(Error::invalid(
                    "flow directory",
                    format!("{}: unpaired flow file at index {i}", dir.display()),
                ))
            }
        }
    }
    if forward.is_empty() {
        return Err(Error::EmptyDir(dir.to_path_buf()));
    }
    FlowSequence::new(forward, backward)
}
