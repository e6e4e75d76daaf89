//! Synthetic add/remove-square editing task.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{DmpError, Result};
use crate::ops::patch_average;
use crate::tensor::LatentGrid;

pub const CHANNELS: usize = 4;
pub const FRAMES: usize = 8;
pub const SIZE: usize = 32;
pub const PATCH: (usize, usize, usize) = (2, 4, 4);
pub const SQUARE_SIDE: usize = 12;
pub const NOISE_STD: f64 = 0.2;
/// Strength of the faint square marking where an object will be added.
pub const CUE: f64 = 0.3;
const BRIGHTNESS: [f64; CHANNELS] = [1.0, 0.8, 0.6, 0.4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Instruction {
    AddSquare,
    RemoveSquare,
}

impl Instruction {
    pub const ALL: [Instruction; 2] = [Instruction::AddSquare, Instruction::RemoveSquare];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }
}

/// Top-left corner at frame `f` is `(x0 + dx·f, y0 + dy·f)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x0: usize,
    pub y0: usize,
    pub dx: isize,
    pub dy: isize,
}

impl Trajectory {
    pub fn corner(&self, frame: usize) -> (usize, usize) {
        let at = |p: usize, d: isize| (p as isize + d * frame as isize) as usize;
        (at(self.x0, self.dx), at(self.y0, self.dy))
    }

    pub fn contains(&self, frame: usize, y: usize, x: usize) -> bool {
        let (cx, cy) = self.corner(frame);
        x >= cx && x < cx + SQUARE_SIDE && y >= cy && y < cy + SQUARE_SIDE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySample {
    pub instruction: Instruction,
    pub trajectory: Trajectory,
    /// Latent of the source video, `1 × C × F_p × H_p × W_p`.
    pub source: LatentGrid,
    /// Latent of the edited video; the clean target of the denoiser.
    pub target: LatentGrid,
    /// Binary square mask, `1 × 1 × F × H × W`.
    pub mask: LatentGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDataset {
    pub seed: u64,
    pub samples: Vec<ToySample>,
}

impl ToyDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn random_trajectory(rng: &mut impl Rng) -> Trajectory {
    let span = (FRAMES - 1) as isize;
    let limit = (SIZE - SQUARE_SIDE) as isize;
    let mut axis = || {
        let d = rng.random_range(-1i64..=1) as isize;
        let lo = (-d * span).max(0) as i64;
        let hi = (limit - (d * span).max(0)) as i64;
        (rng.random_range(lo..=hi) as usize, d)
    };
    let (x0, dx) = axis();
    let (y0, dy) = axis();
    Trajectory { x0, y0, dx, dy }
}

fn render(background: &[f64], traj: &Trajectory, amplitude: f64) -> Result<LatentGrid> {
    LatentGrid::from_fn([1, CHANNELS, FRAMES, SIZE, SIZE], |_, c, f, y, x| {
        let bg = background[((c * FRAMES + f) * SIZE + y) * SIZE + x];
        if traj.contains(f, y, x) {
            bg + amplitude * BRIGHTNESS[c]
        } else {
            bg
        }
    })
}

/// `count` videos of a square moving at up to 1 px/frame over Gaussian
/// noise. Adding starts from a faint cue and ends with a bright square;
/// removing starts from the bright square and ends with background.
pub fn make_synthetic_task(seed: u64, count: usize) -> Result<ToyDataset> {
    if count == 0 {
        return Err(DmpError::invalid("task", "count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_STD).expect("positive std");
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let instruction = if rng.random::<bool>() {
            Instruction::AddSquare
        } else {
            Instruction::RemoveSquare
        };
        let trajectory = random_trajectory(&mut rng);
        let background: Vec<f64> = (0..CHANNELS * FRAMES * SIZE * SIZE).map(|_| noise.sample(&mut rng)).collect();
        let (src_amp, tgt_amp) = match instruction {
            Instruction::AddSquare => (CUE, 1.0),
            Instruction::RemoveSquare => (1.0, 0.0),
        };
        let source = patch_average(&render(&background, &trajectory, src_amp)?, PATCH)?;
        let target = patch_average(&render(&background, &trajectory, tgt_amp)?, PATCH)?;
        let mask = LatentGrid::from_fn([1, 1, FRAMES, SIZE, SIZE], |_, _, f, y, x| {
            f64::from(u8::from(trajectory.contains(f, y, x)))
        })?;
        samples.push(ToySample {
            instruction,
            trajectory,
            source,
            target,
            mask,
        });
    }
    Ok(ToyDataset { seed, samples })
}
