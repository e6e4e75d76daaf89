//! Central-difference verification of analytic gradients.

use serde::{Deserialize, Serialize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::loss::LossWeights;
use crate::model::{forward, loss_and_grad, Batch, ModelConfig, ModelParams};
use crate::task::make_synthetic_task;
use crate::train::random_batch;

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Largest relative error of `grad` against central differences of `f` at `x`.
pub fn check_fn(f: impl Fn(&[f64]) -> f64, x: &[f64], grad: &[f64], step: f64) -> f64 {
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        worst = worst.max(relative_error(grad[i], (up - down) / (2.0 * step)));
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub name: String,
    pub params: usize,
    pub max_rel_error: f64,
    pub max_abs_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
    pub max_rel_error: f64,
}

/// Compares the analytic gradient of the total loss with central
/// differences of step `fd_step`, one parameter at a time.
pub fn grad_check(params: &ModelParams, batch: &Batch, weights: &LossWeights, fd_step: f64) -> Result<GradCheckReport> {
    let (_, grad) = loss_and_grad(params, batch, weights)?;
    let mut probe = params.clone();
    let mut groups = Vec::new();
    let names: Vec<&'static str> = params.groups().iter().map(|(n, _)| *n).collect();
    for (g, name) in names.into_iter().enumerate() {
        let analytic = grad.groups()[g].1.to_vec();
        let mut worst: f64 = 0.0;
        for (i, &a) in analytic.iter().enumerate() {
            let x = params.groups()[g].1[i];
            let mut eval = |v: f64| -> Result<f64> {
                probe.groups_mut()[g].1[i] = v;
                Ok(forward(&probe, batch, weights)?.losses.total)
            };
            let up = eval(x + fd_step)?;
            let down = eval(x - fd_step)?;
            eval(x)?;
            worst = worst.max(relative_error(a, (up - down) / (2.0 * fd_step)));
        }
        groups.push(GroupReport {
            name: name.to_string(),
            params: analytic.len(),
            max_rel_error: worst,
            max_abs_grad: analytic.iter().fold(0.0, |m, v| m.max(v.abs())),
        });
    }
    let max_rel_error = groups.iter().fold(0.0, |m: f64, g| m.max(g.max_rel_error));
    Ok(GradCheckReport { groups, max_rel_error })
}

/// Grad check of freshly initialized parameters on a random two-video
/// batch, everything drawn from `seed`.
pub fn toy_grad_check(seed: u64, weights: &LossWeights, fd_step: f64) -> Result<GradCheckReport> {
    let data = make_synthetic_task(seed, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ModelParams::init(&ModelConfig::default(), &mut rng);
    let batch = random_batch(&data, &[0, 1], &mut rng)?;
    grad_check(&params, &batch, weights, fd_step)
}
