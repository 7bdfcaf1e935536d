//! Rain detection and rain-rate estimation from the SNR telemetry of
//! satellite downlink receivers.
//!
//! The engine smooths each station's Es/N0 stream with a slow and a fast
//! two-state Kalman tracker, declares rain when the fast tracker falls
//! below the slow one, converts the SNR drop into a rain attenuation and
//! inverts a two-layer (melting + liquid) slant-path attenuation model to
//! obtain a ground rain rate.
//!
//! Module map:
//!
//! - [`units`]: dB/linear conversions and quantization.
//! - [`link_budget`]: dry/wet SNR forward models, the noise-coupling
//!   constant ξ and rain attenuation extraction.
//! - [`rain_model`]: two-layer attenuation model and its inversion.
//! - [`trackers`]: constant-drift Kalman trackers.
//! - [`detector`]: rain start/stop state machine and per-sample rates.
//! - [`synth`]: seeded synthetic telemetry generator (ground-truth oracle).
//! - [`pipeline`]: multi-station ingestion and orchestration.
//! - [`validation`]: rain gauge processing and comparison metrics.
//! - [`config`]: the key = value engine configuration.
//! - [`cli`]: the `satrain` command-line front end.

pub mod cli;
pub mod config;
pub mod detector;
pub mod error;
pub mod link_budget;
pub mod pipeline;
pub mod rain_model;
pub mod synth;
pub mod time;
pub mod trackers;
pub mod units;
pub mod validation;

pub use error::{Error, Result};
