//! Core data model and algorithms for flow-guided edit-mask propagation.
//!
//! The crate covers everything between "a source video exists" and "a
//! temporally coherent edit mask exists for every frame":
//!
//! * [`frame`], [`mask`], [`field`], [`record`]: validated domain types.
//! * [`io`]: numbered-PNG frame/mask directories and `.flo` flow files.
//! * [`flow`]: a coarse-to-fine Horn–Schunck estimator, flow statistics and
//!   analytic motion fields.
//! * [`warp`]: bilinear backward warping and forward–backward consistency.
//! * [`propagate`]: initial mask selection, morphology and propagation.
//! * [`eval`]: IoU / endpoint-error metrics and end-to-end drift scenarios.

pub mod error;
pub mod eval;
pub mod field;
pub mod flow;
pub mod frame;
pub mod io;
pub mod mask;
pub mod propagate;
pub mod record;
pub mod warp;

pub use error::{Error, Result};
pub use field::{FlowField, FlowSequence};
pub use frame::{Frame, GrayFrame, Video};
pub use mask::{MaskFrame, MaskKind, MaskSequence};
pub use record::{BBox, EditInstruction, EditPair, EditTask, PairStats, PairStatus, VideoMeta};
