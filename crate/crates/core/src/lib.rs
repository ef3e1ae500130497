//! Batch-to-batch policy-gradient optimization of uncertain batch processes.
//!
//! The crate trains a recurrent Gaussian control policy offline on an
//! approximate plant model with REINFORCE (mean-return baseline, Adam
//! ascent), then adapts it to the "true" plant with a transfer-learning
//! freeze and a small online episode budget, and benchmarks the result
//! against a shrinking-horizon nominal NMPC on the smooth case studies.
//!
//! Modules:
//! - [`autodiff`]: reverse-mode differentiation over small dense graphs.
//! - [`policy`]: the recurrent Gaussian policy with bound squashing and
//!   layer freezing.
//! - [`plants`]: the three case-study plants plus the shared approximate
//!   model behind one interface.
//! - [`reinforce`]: rollout collection, baseline, gradient estimate, Adam.
//! - [`batch2batch`]: offline/online phase orchestration.
//! - [`nmpc`]: the shrinking-horizon comparator.
//! - [`config`], [`pipeline`], [`rundir`], [`plots`], [`eval`]: the CLI
//!   harness around everything.

pub mod autodiff;
pub mod batch2batch;
pub mod config;
pub mod error;
pub mod eval;
pub mod nmpc;
pub mod pipeline;
pub mod plants;
pub mod plots;
pub mod policy;
pub mod reinforce;
pub mod rng;
pub mod rundir;

pub use config::Config;
pub use error::{Error, Result};
