//! Velocity, mask-weighted velocity and mask-prediction losses.

use serde::{Deserialize, Serialize};

use crate::error::{DmpError, Result};
use crate::tensor::LatentGrid;

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda1) || !ok(self.lambda2) {
            return Err(DmpError::invalid("loss weights", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_diff: f64,
    pub l_mask: f64,
    pub l_pred: f64,
    pub total: f64,
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn same_shape(a: &LatentGrid, b: &LatentGrid) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(DmpError::shape(&a.shape(), &b.shape()));
    }
    Ok(())
}

/// Mean squared velocity error.
pub fn loss_diff(v_pred: &LatentGrid, v_star: &LatentGrid) -> Result<f64> {
    same_shape(v_pred, v_star)?;
    let sum = compensated_sum(v_pred.data().iter().zip(v_star.data()).map(|(a, b)| (a - b).powi(2)));
    Ok(sum / v_pred.len() as f64)
}

/// Mask value for every element of a velocity grid. A single-channel mask
/// broadcasts over velocity channels.
pub(crate) fn broadcast_mask(v: &LatentGrid, m: &LatentGrid) -> Result<Vec<f64>> {
    let (vs, ms) = (v.shape(), m.shape());
    if vs[0] != ms[0] || vs[2..] != ms[2..] || (ms[1] != 1 && ms[1] != vs[1]) {
        return Err(DmpError::shape(&vs, &ms));
    }
    if ms[1] == vs[1] {
        return Ok(m.data().to_vec());
    }
    let vox = v.voxels();
    let mut out = Vec::with_capacity(v.len());
    for b in 0..vs[0] {
        let plane = &m.data()[b * vox..(b + 1) * vox];
        for _ in 0..vs[1] {
            out.extend_from_slice(plane);
        }
    }
    Ok(out)
}

/// Mean of `((v_pred - v_star)·m)²` over all velocity elements.
pub fn loss_mask(v_pred: &LatentGrid, v_star: &LatentGrid, m_star: &LatentGrid) -> Result<f64> {
    same_shape(v_pred, v_star)?;
    let m = broadcast_mask(v_pred, m_star)?;
    let sum = compensated_sum(
        v_pred
            .data()
            .iter()
            .zip(v_star.data())
            .zip(&m)
            .map(|((a, b), w)| ((a - b) * w).powi(2)),
    );
    Ok(sum / v_pred.len() as f64)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of `sigmoid(logits)` against a binary target.
pub fn loss_pred(logits: &LatentGrid, m_star: &LatentGrid) -> Result<f64> {
    same_shape(logits, m_star)?;
    if let Some(v) = m_star.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(DmpError::invalid("mask target", format!("non-binary value {v}")));
    }
    let sum = compensated_sum(logits.data().iter().zip(m_star.data()).map(|(&z, &y)| {
        let p = sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
    }));
    Ok(sum / logits.len() as f64)
}

pub fn total_loss(l_diff: f64, l_mask: f64, l_pred: f64, w: &LossWeights) -> LossBreakdown {
    LossBreakdown {
        l_diff,
        l_mask,
        l_pred,
        total: l_diff + w.lambda1 * l_mask + w.lambda2 * l_pred,
    }
}
