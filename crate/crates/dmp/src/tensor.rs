//! Dense 5-d latent grids and token matrices.

use serde::{Deserialize, Serialize};

use crate::error::{DmpError, Result};

/// `B × C × F × H × W` grid, row-major with `W` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentGrid {
    batch: usize,
    channels: usize,
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

fn check_finite(what: &'static str, data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(DmpError::invalid(what, format!("non-finite value at {i}"))),
        None => Ok(()),
    }
}

impl LatentGrid {
    pub fn new(shape: [usize; 5], data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(DmpError::invalid("latent grid", format!("zero dimension in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(DmpError::shape(&[n], &[data.len()]));
        }
        check_finite("latent grid", &data)?;
        let [batch, channels, frames, height, width] = shape;
        Ok(Self {
            batch,
            channels,
            frames,
            height,
            width,
            data,
        })
    }

    pub fn zeros(shape: [usize; 5]) -> Result<Self> {
        Self::new(shape, vec![0.0; shape.iter().product()])
    }

    pub fn filled(shape: [usize; 5], value: f64) -> Result<Self> {
        Self::new(shape, vec![value; shape.iter().product()])
    }

    /// `f(b, c, t, y, x)` for every element.
    pub fn from_fn(shape: [usize; 5], mut f: impl FnMut(usize, usize, usize, usize, usize) -> f64) -> Result<Self> {
        let [b, c, t, h, w] = shape;
        let mut data = Vec::with_capacity(shape.iter().product());
        for bi in 0..b {
            for ci in 0..c {
                for ti in 0..t {
                    for y in 0..h {
                        for x in 0..w {
                            data.push(f(bi, ci, ti, y, x));
                        }
                    }
                }
            }
        }
        Self::new(shape, data)
    }

    /// Concatenates single grids along the batch axis.
    pub fn stack(items: &[&LatentGrid]) -> Result<Self> {
        let first = items.first().ok_or_else(|| DmpError::invalid("stack", "no grids"))?;
        let mut data = Vec::with_capacity(first.data.len() * items.len());
        let mut batch = 0;
        for g in items {
            if g.shape()[1..] != first.shape()[1..] {
                return Err(DmpError::shape(&first.shape(), &g.shape()));
            }
            batch += g.batch;
            data.extend_from_slice(&g.data);
        }
        let mut shape = first.shape();
        shape[0] = batch;
        Self::new(shape, data)
    }

    pub fn shape(&self) -> [usize; 5] {
        [self.batch, self.channels, self.frames, self.height, self.width]
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(F, H, W)`.
    pub fn volume(&self) -> (usize, usize, usize) {
        (self.frames, self.height, self.width)
    }

    pub fn voxels(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn index(&self, b: usize, c: usize, t: usize, y: usize, x: usize) -> usize {
        (((b * self.channels + c) * self.frames + t) * self.height + y) * self.width + x
    }

    pub fn at(&self, b: usize, c: usize, t: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(b, c, t, y, x)]
    }

    /// Batch element `b` as a grid with batch 1.
    pub fn item(&self, b: usize) -> Result<LatentGrid> {
        if b >= self.batch {
            return Err(DmpError::invalid("batch index", format!("{b} >= {}", self.batch)));
        }
        let n = self.channels * self.voxels();
        let mut shape = self.shape();
        shape[0] = 1;
        Self::new(shape, self.data[b * n..(b + 1) * n].to_vec())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<LatentGrid> {
        Self::new(self.shape(), self.data.iter().map(|&v| f(v)).collect())
    }
}

/// `B × L × D` token features. `layout` records the `(F_p, H_p, W_p)`
/// factorization of `L` when the tokens came from a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenGrid {
    batch: usize,
    tokens: usize,
    dim: usize,
    layout: Option<(usize, usize, usize)>,
    data: Vec<f64>,
}

impl TokenGrid {
    pub fn new(batch: usize, tokens: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if batch == 0 || tokens == 0 || dim == 0 {
            return Err(DmpError::invalid("token grid", "all dimensions must be >= 1"));
        }
        if data.len() != batch * tokens * dim {
            return Err(DmpError::shape(&[batch, tokens, dim], &[data.len()]));
        }
        check_finite("token grid", &data)?;
        Ok(Self {
            batch,
            tokens,
            dim,
            layout: None,
            data,
        })
    }

    pub fn with_layout(mut self, layout: (usize, usize, usize)) -> Result<Self> {
        if layout.0 * layout.1 * layout.2 != self.tokens {
            return Err(DmpError::invalid(
                "token layout",
                format!("{layout:?} does not factor L = {}", self.tokens),
            ));
        }
        self.layout = Some(layout);
        Ok(self)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> Option<(usize, usize, usize)> {
        self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Features of token `l` in batch element `b`.
    pub fn token(&self, b: usize, l: usize) -> &[f64] {
        let start = (b * self.tokens + l) * self.dim;
        &self.data[start..start + self.dim]
    }
}
