//! Kinematic bicycle model, explicit Euler.

use serde::{Deserialize, Serialize};

/// Pose is at the rear axle; heading is counter-clockwise from +x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    /// m/s, constant during a run.
    pub speed: f64,
    pub wheelbase: f64,
    /// Front-wheel angle in radians, positive turns left.
    pub steer: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub speed: f64,
    pub wheelbase: f64,
    /// Body width, only used to sanity-check the lane width.
    pub width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            speed: 0.5,
            wheelbase: 0.15,
            width: 0.12,
        }
    }
}

/// Advances the state by one step of length `dt` with wheel angle `steer`.
pub fn vehicle_step(s: &VehicleState, steer: f64, dt: f64) -> VehicleState {
    let (sn, cs) = s.heading.sin_cos();
    VehicleState {
        x: s.x + s.speed * cs * dt,
        y: s.y + s.speed * sn * dt,
        heading: s.heading + s.speed / s.wheelbase * steer.tan() * dt,
        steer,
        ..*s
    }
}

/// Steering command in degrees (positive right) to wheel angle in radians
/// (positive left).
pub fn command_to_wheel_angle(deg: f64) -> f64 {
    -deg.to_radians()
}
