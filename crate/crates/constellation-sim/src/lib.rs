//! Deterministic desk-scale simulator for a LEO constellation that
//! fine-tunes a segmentation surrogate onboard while exchanging model
//! parameters through intermittent ground-station or relay contacts, under
//! battery and thermal constraints.
//!
//! Modules:
//! - [`orbit`]: circular two-body geometry, eclipse and visibility
//!   predicates, contact-window extraction.
//! - [`constraints`]: battery/thermal integration and the standby rule.
//! - [`learner`]: synthetic water-body tiles and the per-pixel sigmoid
//!   model with analytic gradients, Adam, and IoU.
//! - [`protocol`]: transfer timing, server-side mixing, endpoint topology.
//! - [`engine`]: the fixed-timestep world loop and the event log.
//! - [`config`], [`artifacts`], [`plot`]: scenario files, run outputs, and
//!   static SVG plots.

// Validation guards use `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod constraints;
pub mod engine;
pub mod error;
pub mod learner;
pub mod orbit;
pub mod plot;
pub mod protocol;

pub use config::ScenarioConfig;
pub use engine::{run, RunResult, RunSummary};
pub use error::{Result, SimError};
