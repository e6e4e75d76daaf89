//! The mask predictor head: a two-layer GELU MLP applied to each token.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{DmpError, Result};
use crate::nn::{affine, affine_backward, gelu, gelu_grad};
use crate::tensor::TokenGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpParams {
    pub dim: usize,
    pub hidden: usize,
    /// `dim × hidden`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `hidden × 1`.
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl DmpParams {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            dim,
            hidden,
            w1: vec![0.0; dim * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// He-style first layer, small output layer so initial logits sit near 0.
    pub fn init(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(dim, hidden);
        let n1 = Normal::new(0.0, (2.0 / dim as f64).sqrt()).expect("positive std");
        let n2 = Normal::new(0.0, 0.1 / (hidden as f64).sqrt()).expect("positive std");
        p.w1.iter_mut().for_each(|w| *w = n1.sample(rng));
        p.w2.iter_mut().for_each(|w| *w = n2.sample(rng));
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.hidden == 0 {
            return Err(DmpError::invalid("dmp params", "dimensions must be >= 1"));
        }
        let sizes = [
            (self.w1.len(), self.dim * self.hidden),
            (self.b1.len(), self.hidden),
            (self.w2.len(), self.hidden),
        ];
        if let Some(&(got, want)) = sizes.iter().find(|(g, w)| g != w) {
            return Err(DmpError::shape(&[want], &[got]));
        }
        let all = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(std::iter::once(&self.b2));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(DmpError::invalid("dmp params", "non-finite value"));
        }
        Ok(())
    }
}

/// Intermediate values of one head evaluation.
#[derive(Debug, Clone)]
pub(crate) struct HeadCache {
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub logits: Vec<f64>,
}

pub(crate) fn head_forward(x: &[f64], rows: usize, p: &DmpParams) -> HeadCache {
    let pre = affine(x, rows, &p.w1, &p.b1, p.dim, p.hidden);
    let act: Vec<f64> = pre.iter().map(|&a| gelu(a)).collect();
    let logits = affine(&act, rows, &p.w2, std::slice::from_ref(&p.b2), p.hidden, 1);
    HeadCache { pre, act, logits }
}

/// Accumulates parameter gradients into `grad` and returns the gradient
/// with respect to the input tokens.
pub(crate) fn head_backward(x: &[f64], rows: usize, p: &DmpParams, cache: &HeadCache, dlogits: &[f64], grad: &mut DmpParams) -> Vec<f64> {
    let dact = affine_backward(
        &cache.act,
        dlogits,
        rows,
        &p.w2,
        p.hidden,
        1,
        &mut grad.w2,
        std::slice::from_mut(&mut grad.b2),
    );
    let dpre: Vec<f64> = dact.iter().zip(&cache.pre).map(|(&g, &a)| g * gelu_grad(a)).collect();
    affine_backward(x, &dpre, rows, &p.w1, p.dim, p.hidden, &mut grad.w1, &mut grad.b1)
}

/// One logit per token.
pub fn mlp_forward(x: &TokenGrid, params: &DmpParams) -> Result<TokenGrid> {
    params.validate()?;
    if x.dim() != params.dim {
        return Err(DmpError::shape(&[params.dim], &[x.dim()]));
    }
    let cache = head_forward(x.data(), x.batch() * x.tokens(), params);
    let out = TokenGrid::new(x.batch(), x.tokens(), 1, cache.logits)?;
    match x.layout() {
        Some(layout) => out.with_layout(layout),
        None => Ok(out),
    }
}
