//! Online practice assessment for wearable IMU streams.
//!
//! The crate is organised as a pipeline:
//!
//! * [`stream`]: sensor data model, PAMAP2 parsing, synthetic session generation, replay.
//! * [`calibration`]: minima spacing per channel and the four global window lengths.
//! * [`features`]: incremental sliding-window statistics and variance-gated selection.
//! * [`models`]: online classifiers and clusterers behind the [`models::OnlineModel`] trait,
//!   registered by name in [`models::ModelRegistry`].
//! * [`labeling`]: best cluster-to-class mapping and judge tag expansion.
//! * [`evaluation`]: prequential runs over scenarios A–D and report emission.
//! * [`explain`]: decision-path feature ranking and natural-language explanations.
//! * [`session`]: the slot-at-a-time live pipeline used by the gateway service.

pub mod calibration;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod features;
pub mod labeling;
pub mod models;
pub mod session;
pub mod stream;

pub use error::{Error, Result};

/// Nearest integer, rounding half away from zero.
pub fn nint(x: f64) -> i64 {
    x.round() as i64
}
