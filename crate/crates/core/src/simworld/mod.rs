//! Deterministic closed-loop testbed: track geometry, a kinematic vehicle,
//! a synthetic camera with illumination presets, and the perception →
//! control loop with an optional sign-classification side task.

mod calibrate;
mod render;
mod sim;
mod track;
mod vehicle;

pub use calibrate::{calibrate_thresholds, iou, mean_iou, CalibrationResult, LabeledFrame};
pub use render::{CameraModel, IlluminationPreset, Renderer, Streak, RENDER_RANGE_M};
pub use sim::{run_closed_loop, run_joint_pipeline, ClockMode, SimConfig};
pub use track::{
    generate_track, HsvColor, Projection, Segment, TrackKind, TrackParams, TrackSpec, Vec2,
};
pub use vehicle::{command_to_wheel_angle, vehicle_step, VehicleParams, VehicleState};
