//! A desk-scale diffusion mask predictor: a toy rectified-flow denoiser whose
//! hidden tokens feed a small MLP that predicts the edit region, trained with
//! velocity, mask-weighted velocity and mask cross-entropy losses.

pub mod denoiser;
pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod model;
mod nn;
pub mod ops;
pub mod predictor;
pub mod task;
pub mod tensor;
pub mod train;

pub use denoiser::ToyDenoiserParams;
pub use error::{DmpError, Result};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use loss::{loss_diff, loss_mask, loss_pred, total_loss, LossBreakdown, LossWeights};
pub use model::{backward, forward, Batch, BatchItem, ModelConfig, ModelParams};
pub use nn::{gelu, gelu_grad};
pub use ops::{concat_latents, reshape_tokens, rf_interpolant, trilinear_upsample};
pub use predictor::{mlp_forward, DmpParams};
pub use task::{make_synthetic_task, Instruction, ToyDataset};
pub use tensor::{LatentGrid, TokenGrid};
pub use train::{run_reference, train_toy, ReferenceConfig, TrainConfig, TrainOutcome};
