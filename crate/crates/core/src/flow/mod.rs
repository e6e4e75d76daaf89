//! Dense optical flow: estimation, `.flo` ingestion, statistics and analytic fields.

pub mod flo;
pub mod hs;
pub mod stats;
pub mod synthetic;

pub use flo::{read_flo, write_flo, FLO_MAGIC};
pub use hs::{estimate_flow_hs, estimate_flow_sequence, HsParams, HsProblem};
pub use stats::{flow_magnitude_stats, FlowStats};
pub use synthetic::{synthetic_flow, SyntheticMotion};
