//! Random Gaussian ReLU layers as metric embeddings.
//!
//! - [`kernels`]: closed-form predictors for how one random layer distorts
//!   distances, angles and sign codes.
//! - [`models`]: low-dimensional model sets, Gaussian mean width, covering numbers.
//! - [`netsim`]: seeded random layers and networks, forward propagation, sign hashing.
//! - [`verify`]: Monte Carlo checks of the predictions, reported as [`verify::TheoremReport`]s.
//! - [`recover`]: input reconstruction from a layer's output.
//! - [`report`]: boundary-pair and angle-bin distortion analytics.

// `!(x > 0.0)` is how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod models;
pub mod netsim;
pub mod quad;
pub mod recover;
pub mod report;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use kernels::{AnglePair, DistortionPrediction};
pub use models::{CoveringCount, CoveringRecord, LabeledCloud, MeanWidthEstimate, ModelKind, ModelSet};
pub use netsim::{ActivationKind, Layer, LayerSpec, RandomNetwork};
pub use recover::{RecoveryMethod, RecoveryResult};
pub use report::{DistortionHistogram, PairObservation};
pub use verify::{TheoremId, TheoremReport, VerificationConfig};
