//! The closed perception → control → vehicle loop.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::calibrate::LabeledFrame;
use super::render::{CameraModel, IlluminationPreset, Renderer};
use super::track::{generate_track, TrackKind, TrackParams, TrackSpec};
use super::vehicle::{command_to_wheel_angle, vehicle_step, VehicleParams, VehicleState};
use crate::config::config_hash;
use crate::error::{Error, Result};
use crate::imaging::Frame;
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::signeval::Classifier;
use crate::telemetry::{ClassEvent, RunLog, RunMeta, RunOutcome, RunSample};

/// Open tracks stop this far before their end so the view never runs out
/// of markings.
const END_MARGIN_M: f64 = 1.0;

/// How `proc_ms` is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// One tick per frame plus the classifier's nominal latency. Logs are
    /// bit-reproducible.
    #[default]
    Virtual,
    /// Measured wall time of perception, control and classification.
    Wall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub duration_s: f64,
    pub seed: u64,
    /// Frame geometry, lane bands and steering. Its threshold is replaced by
    /// the preset's.
    pub pipeline: PipelineConfig,
    pub preset: IlluminationPreset,
    pub track: TrackSpec,
    pub vehicle: VehicleParams,
    pub camera: CameraModel,
    /// Initial offset from the centerline, positive right.
    pub initial_lateral_m: f64,
    /// Initial heading relative to the track, positive left.
    pub initial_heading_rad: f64,
    #[serde(default)]
    pub clock: ClockMode,
}

impl SimConfig {
    /// Default 640x480 setup on the given stock track and preset.
    pub fn new(kind: TrackKind, preset: IlluminationPreset) -> Result<Self> {
        Ok(SimConfig {
            dt: 1.0 / 30.0,
            duration_s: 300.0,
            seed: 0,
            pipeline: PipelineConfig::default(),
            preset,
            track: generate_track(kind, &TrackParams::default())?,
            vehicle: VehicleParams::default(),
            camera: CameraModel::default(),
            initial_lateral_m: 0.0,
            initial_heading_rad: 0.0,
            clock: ClockMode::Virtual,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt must be positive"));
        }
        if !(self.duration_s >= 0.0) || !self.duration_s.is_finite() {
            return Err(Error::config("duration must be non-negative"));
        }
        if !(self.vehicle.speed > 0.0) || !(self.vehicle.wheelbase > 0.0) {
            return Err(Error::config("vehicle speed and wheelbase must be positive"));
        }
        if !(self.camera.px_per_m > 0.0) {
            return Err(Error::config("camera scale must be positive"));
        }
        self.track.validate()?;
        if !(self.track.lane_width > self.vehicle.width) {
            return Err(Error::config("lane must be wider than the vehicle"));
        }
        self.preset.validate()?;
        self.effective_pipeline().validate()
    }

    pub fn effective_pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            threshold: self.preset.thresholds,
            ..self.pipeline.clone()
        }
    }

    pub fn frame_count(&self) -> u64 {
        (self.duration_s / self.dt).round() as u64
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn initial_state(&self) -> VehicleState {
        let (p, h) = self.track.start_pose();
        // right of a heading h points along h - 90 degrees
        let (sn, cs) = h.sin_cos();
        VehicleState {
            x: p[0] + self.initial_lateral_m * sn,
            y: p[1] - self.initial_lateral_m * cs,
            heading: h + self.initial_heading_rad,
            speed: self.vehicle.speed,
            wheelbase: self.vehicle.wheelbase,
            steer: 0.0,
        }
    }

    pub fn renderer(&self) -> Result<Renderer> {
        let p = &self.pipeline;
        Renderer::new(
            &self.track,
            &self.preset,
            &self.camera,
            &p.homography()?,
            (p.frame_width, p.frame_height),
            (p.birdseye_width, p.birdseye_height),
        )
    }

    /// `count` rendered frames with ground-truth marking masks, from poses
    /// spread evenly along the track with seeded offsets of up to 6 cm and
    /// 0.1 rad. Noise follows `self.seed`.
    pub fn labeled_frames(&self, count: usize, seed: u64) -> Result<Vec<LabeledFrame>> {
        self.validate()?;
        if count == 0 {
            return Err(Error::invalid("need at least one labeled frame"));
        }
        let renderer = self.renderer()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let usable = if self.track.closed {
            self.track.total_length()
        } else {
            (self.track.total_length() - END_MARGIN_M).max(0.0)
        };
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let (p, h) = self.track.pose_at(usable * k as f64 / count as f64);
            let lateral: f64 = rng.gen_range(-0.06..=0.06);
            let dh: f64 = rng.gen_range(-0.1..=0.1);
            let (sn, cs) = h.sin_cos();
            let state = VehicleState {
                x: p[0] + lateral * sn,
                y: p[1] - lateral * cs,
                heading: h + dh,
                ..self.initial_state()
            };
            let (frame, truth) = renderer.render_labeled(&self.track, &state, self.seed, k as u64);
            out.push(LabeledFrame { frame, truth });
        }
        Ok(out)
    }
}

struct JointParts<'a> {
    classifier: &'a dyn Classifier,
    signs: &'a [Frame],
    period_s: f64,
}

fn run_loop(cfg: &SimConfig, joint: Option<JointParts<'_>>) -> Result<RunLog> {
    cfg.validate()?;
    if let Some(j) = &joint {
        if j.signs.is_empty() {
            return Err(Error::invalid("sign stream is empty"));
        }
    }
    let renderer = cfg.renderer()?;
    let mut pipeline = Pipeline::new(cfg.effective_pipeline())?;
    let width = cfg.pipeline.birdseye_width;
    let lux = cfg.preset.lux_label();
    let off_track_limit = 2.0 * cfg.track.lane_width;
    let track_len = cfg.track.total_length();

    let mut log = RunLog::new(RunMeta {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        image_width: width,
        steering: cfg.pipeline.steering,
        outcome: RunOutcome::Completed,
    });
    let mut state = cfg.initial_state();
    let mut last_class: Option<u64> = None;
    let mut sign_idx = 0usize;

    for i in 0..cfg.frame_count() {
        let gt = cfg.track.project([state.x, state.y]);
        if !cfg.track.closed && track_len - gt.s < END_MARGIN_M {
            break;
        }
        let frame = renderer.render(&cfg.track, &state, cfg.seed, i);

        let t0 = Instant::now();
        let out = pipeline.process(&frame)?;
        let mut virtual_ms = cfg.dt * 1e3;
        let mut class_event = None;
        if let Some(j) = &joint {
            let due = last_class.map_or(true, |k| (i - k) as f64 * cfg.dt >= j.period_s - 1e-9);
            if due {
                let c0 = Instant::now();
                let pred = j.classifier.classify(&j.signs[sign_idx % j.signs.len()])?;
                let measured = c0.elapsed().as_secs_f64() * 1e3;
                let nominal = j.classifier.nominal_latency_ms();
                let label = j
                    .classifier
                    .labels()
                    .get(pred.class_id)
                    .ok_or_else(|| Error::Inference(format!("class id {} out of range", pred.class_id)))?
                    .name
                    .clone();
                let latency_ms = match cfg.clock {
                    ClockMode::Virtual => nominal,
                    ClockMode::Wall => measured,
                };
                virtual_ms += nominal;
                class_event = Some(ClassEvent { label, latency_ms });
                last_class = Some(i);
                sign_idx += 1;
            }
        }
        let proc_ms = match cfg.clock {
            ClockMode::Virtual => virtual_ms,
            ClockMode::Wall => t0.elapsed().as_secs_f64() * 1e3,
        };

        let est = &out.estimate;
        log.samples.push(RunSample {
            t: i as f64 * cfg.dt,
            frame_idx: i,
            lux_label: lux.clone(),
            offset_px: est.valid.then_some(est.offset_px),
            gt_deviation_m: gt.lateral,
            curvature: est.valid.then_some(est.curvature),
            raw_deg: out.command.raw_deg,
            smoothed_deg: out.command.smoothed_deg,
            proc_ms,
            lane_lost: out.command.lane_lost,
            class_event,
        });
        if gt.lateral.abs() > off_track_limit {
            log.meta.outcome = RunOutcome::OffTrack {
                frame_idx: i,
                deviation_m: gt.lateral,
            };
            break;
        }
        state = vehicle_step(&state, command_to_wheel_angle(out.command.smoothed_deg), cfg.dt);
    }
    Ok(log)
}

/// Runs the loop for `cfg.duration_s`. An off-track abort is recorded in
/// the log's outcome rather than returned as an error.
pub fn run_closed_loop(cfg: &SimConfig) -> Result<RunLog> {
    run_loop(cfg, None)
}

/// The lane loop plus a classifier invoked at `class_rate_hz` on frames
/// drawn cyclically from `signs`. A rate of 0 disables classification.
pub fn run_joint_pipeline(
    cfg: &SimConfig,
    classifier: &dyn Classifier,
    signs: &[Frame],
    class_rate_hz: f64,
) -> Result<RunLog> {
    if !(class_rate_hz >= 0.0) || !class_rate_hz.is_finite() {
        return Err(Error::config("classification rate must be finite and non-negative"));
    }
    if class_rate_hz == 0.0 {
        return run_loop(cfg, None);
    }
    run_loop(
        cfg,
        Some(JointParts {
            classifier,
            signs,
            period_s: 1.0 / class_rate_hz,
        }),
    )
}
