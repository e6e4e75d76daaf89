//! Plain gradient descent on the toy task, loss curves and parameter files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DmpError, Result};
use crate::loss::{LossBreakdown, LossWeights};
use crate::model::{forward, loss_and_grad, Batch, BatchItem, ModelConfig, ModelParams};
use crate::task::{make_synthetic_task, ToyDataset, ToySample};
use crate::tensor::LatentGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weights: LossWeights,
    /// Seeds initialization and minibatch sampling.
    pub seed: u64,
    pub model: ModelConfig,
    /// Trailing window used to judge the end-of-run loss.
    pub tail_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            learning_rate: 0.3,
            batch_size: 8,
            weights: LossWeights::default(),
            seed: 0,
            model: ModelConfig::default(),
            tail_window: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.steps == 0 || self.batch_size == 0 || self.tail_window == 0 {
            return Err(DmpError::invalid("train config", "steps, batch_size and tail_window must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(DmpError::invalid("train config", "learning_rate must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Minibatch losses before each update.
    pub curve: Vec<LossBreakdown>,
}

impl TrainOutcome {
    pub fn initial_total(&self) -> f64 {
        self.curve[0].total
    }

    /// Mean total loss over the last `window` steps.
    pub fn tail_total(&self, window: usize) -> f64 {
        let tail = &self.curve[self.curve.len().saturating_sub(window.max(1))..];
        tail.iter().map(|b| b.total).sum::<f64>() / tail.len() as f64
    }

    /// Fractional drop from the step-0 loss to the trailing mean.
    pub fn reduction(&self, window: usize) -> f64 {
        1.0 - self.tail_total(window) / self.initial_total()
    }
}

fn noise_like(shape: [usize; 5], rng: &mut impl Rng) -> Result<LatentGrid> {
    let n = shape.iter().product();
    LatentGrid::new(shape, (0..n).map(|_| StandardNormal.sample(rng)).collect())
}

fn item<'a>(s: &'a ToySample, t: f64, rng: &mut impl Rng) -> Result<BatchItem<'a>> {
    Ok(BatchItem {
        source: &s.source,
        target: &s.target,
        noise: noise_like(s.target.shape(), rng)?,
        t,
        instruction: s.instruction.id(),
        mask: &s.mask,
    })
}

fn diverged(step: usize, e: DmpError) -> DmpError {
    match e {
        DmpError::Invalid { .. } => DmpError::Diverged {
            step,
            detail: e.to_string(),
        },
        other => other,
    }
}

/// A batch over `indices` with uniform times and standard normal noise.
pub fn random_batch(dataset: &ToyDataset, indices: &[usize], rng: &mut impl Rng) -> Result<Batch> {
    let items = indices
        .iter()
        .map(|&i| {
            let s = dataset
                .samples
                .get(i)
                .ok_or_else(|| DmpError::invalid("batch index", format!("{i} >= {}", dataset.len())))?;
            let t: f64 = rng.random();
            item(s, t, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Batch::new(&items)
}

/// Deterministic for a fixed `cfg.seed`.
pub fn train_toy(dataset: &ToyDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(DmpError::invalid("dataset", "no samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(&cfg.model, &mut rng);
    let mut curve = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let indices: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..dataset.len())).collect();
        let batch = random_batch(dataset, &indices, &mut rng)?;
        let (fw, grad) = loss_and_grad(&params, &batch, &cfg.weights).map_err(|e| diverged(step, e))?;
        if !fw.losses.total.is_finite() || !grad.max_abs().is_finite() {
            return Err(DmpError::Diverged {
                step,
                detail: format!("loss {:?}", fw.losses),
            });
        }
        curve.push(fw.losses);
        params.axpy(-cfg.learning_rate, &grad);
    }
    Ok(TrainOutcome { params, curve })
}

/// Mean IoU between `logit >= 0` and the target mask, evaluated at
/// diffusion time `t` with noise drawn from `seed`.
pub fn mask_iou(params: &ModelParams, dataset: &ToyDataset, t: f64, seed: u64) -> Result<f64> {
    if dataset.is_empty() {
        return Err(DmpError::invalid("dataset", "no samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for s in &dataset.samples {
        let batch = Batch::new(&[item(s, t, &mut rng)?])?;
        let fw = forward(params, &batch, &LossWeights::default())?;
        let (mut inter, mut union) = (0usize, 0usize);
        for (&z, &m) in fw.logits.data().iter().zip(s.mask.data()) {
            let (p, r) = (z >= 0.0, m == 1.0);
            inter += usize::from(p && r);
            union += usize::from(p || r);
        }
        total += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    }
    Ok(total / dataset.len() as f64)
}

/// The bundled reference run: train on one synthetic set, score masks on a
/// held-out set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    pub train: TrainConfig,
    pub train_seed: u64,
    pub train_count: usize,
    pub eval_seed: u64,
    pub eval_count: usize,
    pub eval_t: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            train_seed: 1,
            train_count: 64,
            eval_seed: 2,
            eval_count: 32,
            eval_t: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceReport {
    pub outcome: TrainOutcome,
    pub reduction: f64,
    pub mask_iou: f64,
}

pub fn run_reference(cfg: &ReferenceConfig) -> Result<ReferenceReport> {
    let train = make_synthetic_task(cfg.train_seed, cfg.train_count)?;
    let eval = make_synthetic_task(cfg.eval_seed, cfg.eval_count)?;
    let outcome = train_toy(&train, &cfg.train)?;
    let reduction = outcome.reduction(cfg.train.tail_window);
    let iou = mask_iou(&outcome.params, &eval, cfg.eval_t, cfg.eval_seed)?;
    Ok(ReferenceReport {
        outcome,
        reduction,
        mask_iou: iou,
    })
}

#[derive(Serialize)]
struct CurveRow {
    step: usize,
    l_diff: f64,
    l_mask: f64,
    l_pred: f64,
    total: f64,
}

/// CSV with columns `step, l_diff, l_mask, l_pred, total`.
pub fn write_loss_curve(path: &Path, curve: &[LossBreakdown]) -> Result<()> {
    let csv_err = |source| DmpError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (step, b) in curve.iter().enumerate() {
        w.serialize(CurveRow {
            step,
            l_diff: b.l_diff,
            l_mask: b.l_mask,
            l_pred: b.l_pred,
            total: b.total,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| DmpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamHeader {
    config: ModelConfig,
    groups: Vec<(String, usize)>,
}

/// Layout: `u64` LE header length, JSON header, then every parameter as
/// `f64` LE in group order.
pub fn save_params(path: &Path, params: &ModelParams) -> Result<()> {
    let io = |source| DmpError::Io {
        path: path.to_path_buf(),
        source,
    };
    let header = ParamHeader {
        config: params.config(),
        groups: params.groups().iter().map(|(n, g)| (n.to_string(), g.len())).collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    for (_, g) in params.groups() {
        for v in g {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_params(path: &Path) -> Result<ModelParams> {
    let bad = |reason: String| DmpError::ParamFormat {
        path: path.to_path_buf(),
        reason,
    };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|source| DmpError::Io {
        path: path.to_path_buf(),
        source,
    })?)
    .read_to_end(&mut bytes)
    .map_err(|source| DmpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.len() < 8 {
        return Err(bad("missing header length".into()));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(8..8 + hlen).ok_or_else(|| bad("truncated header".into()))?;
    let header: ParamHeader = serde_json::from_slice(body).map_err(|e| bad(e.to_string()))?;
    let mut params = ModelParams::zeros(&header.config);
    let expected: Vec<(String, usize)> = params.groups().iter().map(|(n, g)| (n.to_string(), g.len())).collect();
    if expected != header.groups {
        return Err(bad("parameter groups do not match the model config".into()));
    }
    let values = &bytes[8 + hlen..];
    if values.len() != params.num_params() * 8 {
        return Err(bad(format!("expected {} values, found {} bytes", params.num_params(), values.len())));
    }
    let mut chunks = values.chunks_exact(8);
    for (_, g) in params.groups_mut() {
        for v in g.iter_mut() {
            *v = f64::from_le_bytes(chunks.next().expect("length checked").try_into().expect("8 bytes"));
        }
    }
    params.validate()?;
    Ok(params)
}
