//! Composite forward pass and exact reverse-mode gradients of the
//! three-term objective.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::ToyDenoiserParams;
use crate::error::{DmpError, Result};
use crate::loss::{broadcast_mask, loss_diff, loss_mask, loss_pred, sigmoid, total_loss, LossBreakdown, LossWeights, PROB_CLAMP};
use crate::nn::{affine, affine_backward, gelu, gelu_grad};
use crate::ops::{concat_latents, flatten_grid, patch_average, reshape_tokens, rf_interpolant, trilinear_upsample, trilinear_upsample_adjoint};
use crate::predictor::{head_backward, head_forward, DmpParams, HeadCache};
use crate::tensor::{LatentGrid, TokenGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub channels: usize,
    /// Denoiser hidden width, which is also the token feature dim `D`.
    pub hidden: usize,
    pub embed_dim: usize,
    pub vocab: usize,
    pub dmp_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: 4,
            hidden: 32,
            embed_dim: 8,
            vocab: 2,
            dmp_hidden: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dmp: DmpParams,
    pub denoiser: ToyDenoiserParams,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            dmp: DmpParams::zeros(cfg.hidden, cfg.dmp_hidden),
            denoiser: ToyDenoiserParams::zeros(cfg.channels, cfg.embed_dim, cfg.hidden, cfg.vocab),
        }
    }

    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let denoiser = ToyDenoiserParams::init(cfg.channels, cfg.embed_dim, cfg.hidden, cfg.vocab, rng);
        let dmp = DmpParams::init(cfg.hidden, cfg.dmp_hidden, rng);
        Self { dmp, denoiser }
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            channels: self.denoiser.channels,
            hidden: self.denoiser.hidden,
            embed_dim: self.denoiser.embed_dim,
            vocab: self.denoiser.vocab,
            dmp_hidden: self.dmp.hidden,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config())
    }

    pub fn validate(&self) -> Result<()> {
        self.dmp.validate()?;
        self.denoiser.validate()?;
        if self.dmp.dim != self.denoiser.hidden {
            return Err(DmpError::shape(&[self.denoiser.hidden], &[self.dmp.dim]));
        }
        Ok(())
    }

    /// Named parameter groups in a fixed order.
    pub fn groups(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("dmp.w1", &self.dmp.w1[..]),
            ("dmp.b1", &self.dmp.b1[..]),
            ("dmp.w2", &self.dmp.w2[..]),
            ("dmp.b2", std::slice::from_ref(&self.dmp.b2)),
            ("denoiser.embed", &self.denoiser.embed[..]),
            ("denoiser.w1", &self.denoiser.w1[..]),
            ("denoiser.b1", &self.denoiser.b1[..]),
            ("denoiser.w2", &self.denoiser.w2[..]),
            ("denoiser.b2", &self.denoiser.b2[..]),
        ]
    }

    pub fn groups_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("dmp.w1", &mut self.dmp.w1[..]),
            ("dmp.b1", &mut self.dmp.b1[..]),
            ("dmp.w2", &mut self.dmp.w2[..]),
            ("dmp.b2", std::slice::from_mut(&mut self.dmp.b2)),
            ("denoiser.embed", &mut self.denoiser.embed[..]),
            ("denoiser.w1", &mut self.denoiser.w1[..]),
            ("denoiser.b1", &mut self.denoiser.b1[..]),
            ("denoiser.w2", &mut self.denoiser.w2[..]),
            ("denoiser.b2", &mut self.denoiser.b2[..]),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }

    /// `self += alpha·other`.
    pub fn axpy(&mut self, alpha: f64, other: &ModelParams) {
        for ((_, dst), (_, src)) in self.groups_mut().into_iter().zip(other.groups()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.groups().iter().flat_map(|(_, g)| g.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One training example before stacking.
#[derive(Debug, Clone)]
pub struct BatchItem<'a> {
    pub source: &'a LatentGrid,
    pub target: &'a LatentGrid,
    pub noise: LatentGrid,
    pub t: f64,
    pub instruction: usize,
    /// Full-resolution binary mask, one channel.
    pub mask: &'a LatentGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub source: LatentGrid,
    pub z_t: LatentGrid,
    pub v_star: LatentGrid,
    pub t: Vec<f64>,
    pub instructions: Vec<usize>,
    /// Patch-averaged mask on the latent grid.
    pub mask_latent: LatentGrid,
    pub mask: LatentGrid,
}

impl Batch {
    pub fn new(items: &[BatchItem<'_>]) -> Result<Self> {
        if items.is_empty() {
            return Err(DmpError::invalid("batch", "no items"));
        }
        let mut z_t = Vec::new();
        let mut v_star = Vec::new();
        for it in items {
            if it.source.shape() != it.target.shape() {
                return Err(DmpError::shape(&it.source.shape(), &it.target.shape()));
            }
            let (z, v) = rf_interpolant(it.target, &it.noise, it.t)?;
            z_t.push(z);
            v_star.push(v);
        }
        let source = LatentGrid::stack(&items.iter().map(|i| i.source).collect::<Vec<_>>())?;
        let mask = LatentGrid::stack(&items.iter().map(|i| i.mask).collect::<Vec<_>>())?;
        let (fp, hp, wp) = source.volume();
        let (f, h, w) = mask.volume();
        if mask.channels() != 1 || f % fp != 0 || h % hp != 0 || w % wp != 0 {
            return Err(DmpError::invalid(
                "batch mask",
                format!("mask {:?} does not tile latent ({fp}, {hp}, {wp})", mask.shape()),
            ));
        }
        let mask_latent = patch_average(&mask, (f / fp, h / hp, w / wp))?;
        Ok(Self {
            z_t: LatentGrid::stack(&z_t.iter().collect::<Vec<_>>())?,
            v_star: LatentGrid::stack(&v_star.iter().collect::<Vec<_>>())?,
            source,
            t: items.iter().map(|i| i.t).collect(),
            instructions: items.iter().map(|i| i.instruction).collect(),
            mask_latent,
            mask,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Everything the backward pass needs from a forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub losses: LossBreakdown,
    pub v_pred: LatentGrid,
    /// Upsampled mask logits, `B × 1 × F × H × W`.
    pub logits: LatentGrid,
    /// Denoiser hidden activations, the predictor's input tokens.
    pub features: TokenGrid,
    inputs: Vec<f64>,
    pre: Vec<f64>,
    head: HeadCache,
}

fn denoiser_inputs(p: &ToyDenoiserParams, batch: &Batch) -> Result<Vec<f64>> {
    let zcat = flatten_grid(&concat_latents(&batch.source, &batch.z_t)?)?;
    let (b, l, c2) = (zcat.batch(), zcat.tokens(), zcat.dim());
    if c2 != 2 * p.channels {
        return Err(DmpError::shape(&[2 * p.channels], &[c2]));
    }
    let mut rows = Vec::with_capacity(b * l * p.in_dim());
    for bi in 0..b {
        let id = batch.instructions[bi];
        if id >= p.vocab {
            return Err(DmpError::invalid("instruction", format!("id {id} >= vocab {}", p.vocab)));
        }
        let emb = p.embedding(id);
        for li in 0..l {
            rows.extend_from_slice(zcat.token(bi, li));
            rows.extend_from_slice(emb);
            rows.push(batch.t[bi]);
        }
    }
    Ok(rows)
}

pub fn forward(params: &ModelParams, batch: &Batch, weights: &LossWeights) -> Result<ForwardPass> {
    params.validate()?;
    weights.validate()?;
    let dn = &params.denoiser;
    let [b, _, fp, hp, wp] = batch.source.shape();
    let l = fp * hp * wp;
    let rows = b * l;
    let inputs = denoiser_inputs(dn, batch)?;
    let pre = affine(&inputs, rows, &dn.w1, &dn.b1, dn.in_dim(), dn.hidden);
    let act: Vec<f64> = pre.iter().map(|&a| gelu(a)).collect();
    let v_tok = affine(&act, rows, &dn.w2, &dn.b2, dn.hidden, dn.channels);
    let v_pred = reshape_tokens(&TokenGrid::new(b, l, dn.channels, v_tok)?, fp, hp, wp)?;

    let features = TokenGrid::new(b, l, dn.hidden, act)?.with_layout((fp, hp, wp))?;
    let head = head_forward(features.data(), rows, &params.dmp);
    let logit_tokens = TokenGrid::new(b, l, 1, head.logits.clone())?;
    let logits = trilinear_upsample(&reshape_tokens(&logit_tokens, fp, hp, wp)?, batch.mask.volume())?;

    let l_diff = loss_diff(&v_pred, &batch.v_star)?;
    let l_mask = loss_mask(&v_pred, &batch.v_star, &batch.mask_latent)?;
    let l_pred = loss_pred(&logits, &batch.mask)?;
    Ok(ForwardPass {
        losses: total_loss(l_diff, l_mask, l_pred, weights),
        v_pred,
        logits,
        features,
        inputs,
        pre,
        head,
    })
}

/// Gradient of the total loss with respect to every parameter.
pub fn backward(params: &ModelParams, batch: &Batch, weights: &LossWeights, fw: &ForwardPass) -> Result<ModelParams> {
    let dn = &params.denoiser;
    let mut grad = params.zeros_like();
    let [b, c, fp, hp, wp] = fw.v_pred.shape();
    let l = fp * hp * wp;
    let rows = b * l;

    // velocity terms, on the grid layout
    let n_v = fw.v_pred.len() as f64;
    let m = broadcast_mask(&fw.v_pred, &batch.mask_latent)?;
    let dv_grid: Vec<f64> = fw
        .v_pred
        .data()
        .iter()
        .zip(batch.v_star.data())
        .zip(&m)
        .map(|((&v, &s), &w)| 2.0 * (v - s) * (1.0 + weights.lambda1 * w * w) / n_v)
        .collect();
    let dv = flatten_grid(&LatentGrid::new(fw.v_pred.shape(), dv_grid)?)?;

    // mask prediction term
    let n_m = fw.logits.len() as f64;
    let dlogits: Vec<f64> = fw
        .logits
        .data()
        .iter()
        .zip(batch.mask.data())
        .map(|(&z, &y)| {
            let p = sigmoid(z);
            if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                weights.lambda2 * (p - y) / n_m
            } else {
                0.0
            }
        })
        .collect();
    let dlat = trilinear_upsample_adjoint(&LatentGrid::new(fw.logits.shape(), dlogits)?, (fp, hp, wp))?;
    let dx = head_backward(fw.features.data(), rows, &params.dmp, &fw.head, dlat.data(), &mut grad.dmp);

    let mut dact = affine_backward(
        fw.features.data(),
        dv.data(),
        rows,
        &dn.w2,
        dn.hidden,
        c,
        &mut grad.denoiser.w2,
        &mut grad.denoiser.b2,
    );
    for ((d, &x), &a) in dact.iter_mut().zip(&dx).zip(&fw.pre) {
        *d = (*d + x) * gelu_grad(a);
    }
    let in_dim = dn.in_dim();
    let dinputs = affine_backward(
        &fw.inputs,
        &dact,
        rows,
        &dn.w1,
        in_dim,
        dn.hidden,
        &mut grad.denoiser.w1,
        &mut grad.denoiser.b1,
    );
    let (e0, e) = (2 * dn.channels, dn.embed_dim);
    for bi in 0..b {
        let id = batch.instructions[bi];
        let row = &mut grad.denoiser.embed[id * e..(id + 1) * e];
        for li in 0..l {
            let r = (bi * l + li) * in_dim + e0;
            for (g, &d) in row.iter_mut().zip(&dinputs[r..r + e]) {
                *g += d;
            }
        }
    }
    Ok(grad)
}

/// Forward then backward.
pub fn loss_and_grad(params: &ModelParams, batch: &Batch, weights: &LossWeights) -> Result<(ForwardPass, ModelParams)> {
    let fw = forward(params, batch, weights)?;
    let grad = backward(params, batch, weights, &fw)?;
    Ok((fw, grad))
}
