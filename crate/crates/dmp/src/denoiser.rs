//! Per-voxel velocity MLP conditioned on an instruction embedding and time.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{DmpError, Result};

/// Input row: `[z_cat (2C), embedding (E), t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDenoiserParams {
    pub channels: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub vocab: usize,
    /// `vocab × embed_dim`.
    pub embed: Vec<f64>,
    /// `in_dim × hidden`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `hidden × channels`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ToyDenoiserParams {
    pub fn in_dim(&self) -> usize {
        2 * self.channels + self.embed_dim + 1
    }

    pub fn zeros(channels: usize, embed_dim: usize, hidden: usize, vocab: usize) -> Self {
        let in_dim = 2 * channels + embed_dim + 1;
        Self {
            channels,
            embed_dim,
            hidden,
            vocab,
            embed: vec![0.0; vocab * embed_dim],
            w1: vec![0.0; in_dim * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * channels],
            b2: vec![0.0; channels],
        }
    }

    pub fn init(channels: usize, embed_dim: usize, hidden: usize, vocab: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(channels, embed_dim, hidden, vocab);
        let unit = Normal::new(0.0, 1.0).expect("positive std");
        let n1 = Normal::new(0.0, (2.0 / p.in_dim() as f64).sqrt()).expect("positive std");
        let n2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("positive std");
        p.embed.iter_mut().for_each(|w| *w = unit.sample(rng));
        p.w1.iter_mut().for_each(|w| *w = n1.sample(rng));
        p.w2.iter_mut().for_each(|w| *w = n2.sample(rng));
        p
    }

    pub fn validate(&self) -> Result<()> {
        if [self.channels, self.embed_dim, self.hidden, self.vocab].contains(&0) {
            return Err(DmpError::invalid("denoiser params", "dimensions must be >= 1"));
        }
        let sizes = [
            (self.embed.len(), self.vocab * self.embed_dim),
            (self.w1.len(), self.in_dim() * self.hidden),
            (self.b1.len(), self.hidden),
            (self.w2.len(), self.hidden * self.channels),
            (self.b2.len(), self.channels),
        ];
        if let Some(&(got, want)) = sizes.iter().find(|(g, w)| g != w) {
            return Err(DmpError::shape(&[want], &[got]));
        }
        let all = [&self.embed, &self.w1, &self.b1, &self.w2, &self.b2];
        if all.iter().flat_map(|v| v.iter()).any(|v| !v.is_finite()) {
            return Err(DmpError::invalid("denoiser params", "non-finite value"));
        }
        Ok(())
    }

    pub fn embedding(&self, id: usize) -> &[f64] {
        &self.embed[id * self.embed_dim..(id + 1) * self.embed_dim]
    }
}
