//! Edge-probing bias toolkit.
//!
//! Audits span-classification probing datasets for train/test memorization,
//! builds heuristic-filtered test sets, trains linear and one-hidden-layer
//! probes on frozen token embeddings, and reports accuracy drops and
//! codelengths for comparing pretrained against randomly initialized
//! encoders.
//!
//! The numerical core ([`probes`], [`optim`], [`mdl`]) is generic over a
//! [`Scalar`] (`f32` or `f64`). Production training runs in `f32`; the
//! gradient checks run the same code in `f64`.

pub mod corpus;
pub mod embedstore;
pub mod error;
pub mod mdl;
pub mod memaudit;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod probes;
pub mod scalar;
pub mod seed;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

/// Probe parameters in single precision, the on-disk and training default.
pub type ProbeModel32 = probes::ProbeModel<f32>;
/// Probe parameters in double precision, used for gradient verification.
pub type ProbeModel64 = probes::ProbeModel<f64>;
/// AdamW state in single precision.
pub type AdamW32 = optim::AdamW<f32>;
/// AdamW state in double precision.
pub type AdamW64 = optim::AdamW<f64>;

/// Toolkit version recorded in run manifests and model headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
