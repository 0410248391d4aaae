//! Rule-based steering: a clamped linear law on normalized lane offset and
//! curvature, followed by output smoothing and a lane-lost hold policy.
//!
//! Sign convention: positive degrees steer right.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lane::LaneEstimate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringParams {
    /// Degrees per unit of offset normalized by half the image width.
    pub k_offset: f64,
    /// Degrees per px/row of curvature.
    pub k_curv: f64,
    pub theta_max: f64,
    /// EMA weight of the newest raw command, in `(0, 1]`.
    pub alpha: f64,
    /// Frames to hold the last command after the lane is lost.
    pub hold_frames: u32,
    /// Replace the EMA with a moving average over this many raw commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moving_average: Option<usize>,
}

impl Default for SteeringParams {
    fn default() -> Self {
        SteeringParams {
            k_offset: 25.0,
            k_curv: 20.0,
            theta_max: 30.0,
            alpha: 0.4,
            hold_frames: 15,
            moving_average: None,
        }
    }
}

impl SteeringParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_max > 0.0) || !self.theta_max.is_finite() {
            return Err(Error::config("theta_max must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !self.k_offset.is_finite() || !self.k_curv.is_finite() {
            return Err(Error::config("steering gains must be finite"));
        }
        if self.moving_average == Some(0) {
            return Err(Error::config("moving-average window must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringCommand {
    pub raw_deg: f64,
    pub smoothed_deg: f64,
    pub lane_lost: bool,
}

/// `clamp(k_offset * offset / (width / 2) + k_curv * curvature, ±theta_max)`.
pub fn steering_law(offset_px: f64, curvature: f64, width: usize, p: &SteeringParams) -> f64 {
    let normalized = offset_px / (width as f64 / 2.0);
    (p.k_offset * normalized + p.k_curv * curvature).clamp(-p.theta_max, p.theta_max)
}

/// First-order exponential moving average.
#[inline]
pub fn smooth(prev_smoothed: f64, raw: f64, alpha: f64) -> f64 {
    alpha * raw + (1.0 - alpha) * prev_smoothed
}

/// Per-vehicle controller memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Controller {
    smoothed: f64,
    lost_frames: u32,
    window: VecDeque<f64>,
}

impl Controller {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_smoothed(&self) -> f64 {
        self.smoothed
    }

    /// Valid estimate: law then smoothing. Invalid: hold the last smoothed
    /// command for `hold_frames`, then decay toward zero at the EMA rate.
    pub fn step(&mut self, est: &LaneEstimate, width: usize, p: &SteeringParams) -> SteeringCommand {
        if est.valid {
            self.lost_frames = 0;
            let raw = steering_law(est.offset_px, est.curvature, width, p);
            self.smoothed = match p.moving_average {
                Some(n) => {
                    self.window.push_back(raw);
                    while self.window.len() > n {
                        self.window.pop_front();
                    }
                    self.window.iter().sum::<f64>() / self.window.len() as f64
                }
                None => smooth(self.smoothed, raw, p.alpha),
            };
            return SteeringCommand {
                raw_deg: raw,
                smoothed_deg: self.smoothed,
                lane_lost: false,
            };
        }
        self.lost_frames = self.lost_frames.saturating_add(1);
        self.window.clear();
        if self.lost_frames <= p.hold_frames {
            SteeringCommand {
                raw_deg: self.smoothed,
                smoothed_deg: self.smoothed,
                lane_lost: true,
            }
        } else {
            self.smoothed = smooth(self.smoothed, 0.0, p.alpha);
            SteeringCommand {
                raw_deg: 0.0,
                smoothed_deg: self.smoothed,
                lane_lost: true,
            }
        }
    }
}
