//! Single-camera lane tracking with a rule-based steering controller, a
//! deterministic closed-loop simulator, and a sign-classifier evaluation
//! harness.
//!
//! Data flow per frame: RGB frame → [`imaging::rgb_to_hsv`] →
//! [`imaging::threshold_mask`] → bird's-eye warp ([`geometry`]) →
//! [`lane::estimate_lane`] → [`control::Controller::step`].

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod lane;
pub mod pipeline;
pub mod signeval;
pub mod simworld;
pub mod telemetry;

pub use error::{Error, Result};
