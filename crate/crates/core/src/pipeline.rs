//! The per-frame perception and control chain:
//! RGB → HSV → threshold mask → bird's-eye warp → lane estimate → steering.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::control::{Controller, SteeringCommand, SteeringParams};
use crate::error::{Error, Result};
use crate::geometry::{homography_from_quads, Homography, QuadCorrespondence, WarpMap};
use crate::imaging::{rgb_to_hsv, threshold_mask, BinaryMask, Frame, HsvThreshold, RectRegion};
use crate::lane::{estimate_lane, LaneEstimate, LaneParams};
use crate::telemetry::mean_std;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub frame_width: usize,
    pub frame_height: usize,
    pub birdseye_width: usize,
    pub birdseye_height: usize,
    /// Camera trapezoid → bird's-eye rectangle.
    pub quad: QuadCorrespondence,
    pub lane: LaneParams,
    pub steering: SteeringParams,
    pub threshold: HsvThreshold,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            frame_width: 640,
            frame_height: 480,
            birdseye_width: 640,
            birdseye_height: 480,
            quad: QuadCorrespondence::default_for(640, 480, 640, 480),
            lane: LaneParams::default(),
            steering: SteeringParams::default(),
            threshold: HsvThreshold::everything(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(Error::config("frame size must be positive"));
        }
        if self.birdseye_width == 0 || self.birdseye_height == 0 {
            return Err(Error::config("bird's-eye size must be positive"));
        }
        self.steering.validate()?;
        self.threshold.validate()?;
        self.lane.regions(self.birdseye_width, self.birdseye_height)?;
        homography_from_quads(&self.quad).map_err(|e| Error::config(format!("warp quad: {e}")))?;
        Ok(())
    }

    pub fn homography(&self) -> Result<Homography> {
        homography_from_quads(&self.quad)
    }
}

/// Everything one frame produced, kept for logging and tests.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameOutput {
    pub estimate: LaneEstimate,
    pub command: SteeringCommand,
}

/// A configured pipeline with its own controller memory.
#[derive(Clone, Debug)]
pub struct Pipeline {
    cfg: PipelineConfig,
    warp: WarpMap,
    near: RectRegion,
    far: RectRegion,
    controller: Controller,
    birdseye: BinaryMask,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let h = cfg.homography()?;
        let warp = WarpMap::new(
            &h,
            cfg.frame_width,
            cfg.frame_height,
            cfg.birdseye_width,
            cfg.birdseye_height,
        )?;
        let (near, far) = cfg.lane.regions(cfg.birdseye_width, cfg.birdseye_height)?;
        let birdseye = BinaryMask::zeros(cfg.birdseye_width, cfg.birdseye_height);
        Ok(Pipeline {
            cfg,
            warp,
            near,
            far,
            controller: Controller::new(),
            birdseye,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn set_threshold(&mut self, t: HsvThreshold) -> Result<()> {
        t.validate()?;
        self.cfg.threshold = t;
        Ok(())
    }

    /// Forgets controller history.
    pub fn reset(&mut self) {
        self.controller = Controller::new();
    }

    /// Bird's-eye mask of the most recent frame.
    pub fn last_birdseye(&self) -> &BinaryMask {
        &self.birdseye
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        if frame.width() != self.cfg.frame_width || frame.height() != self.cfg.frame_height {
            return Err(Error::invalid(format!(
                "pipeline expects {}x{} frames, got {}x{}",
                self.cfg.frame_width,
                self.cfg.frame_height,
                frame.width(),
                frame.height()
            )));
        }
        Ok(())
    }

    /// Perception only; controller memory is untouched.
    pub fn perceive(&mut self, frame: &Frame) -> Result<LaneEstimate> {
        self.check_frame(frame)?;
        let hsv = rgb_to_hsv(frame)?;
        let mask = threshold_mask(&hsv, &self.cfg.threshold)?;
        self.warp.apply_into(&mask, &mut self.birdseye)?;
        estimate_lane(&self.birdseye, &self.near, &self.far, self.cfg.lane.min_peak_count)
    }

    pub fn process(&mut self, frame: &Frame) -> Result<FrameOutput> {
        let estimate = self.perceive(frame)?;
        let command = self
            .controller
            .step(&estimate, self.cfg.birdseye_width, &self.cfg.steering);
        Ok(FrameOutput { estimate, command })
    }
}

/// Wall-clock timing of the perception and control chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineBench {
    pub reps: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    /// `reps / total wall time`.
    pub fps: f64,
}

/// Times `reps` frames after `warmup` untimed frames, cycling through
/// `frames`. Frame rendering is not part of the measurement.
pub fn bench_pipeline(
    cfg: &PipelineConfig,
    frames: &[Frame],
    warmup: usize,
    reps: usize,
) -> Result<PipelineBench> {
    if frames.is_empty() {
        return Err(Error::invalid("bench needs at least one frame"));
    }
    if reps == 0 {
        return Err(Error::invalid("bench needs reps >= 1"));
    }
    let mut p = Pipeline::new(cfg.clone())?;
    for f in frames.iter().cycle().take(warmup) {
        p.process(f)?;
    }
    let mut lat = Vec::with_capacity(reps);
    let start = Instant::now();
    for f in frames.iter().cycle().take(reps) {
        let t0 = Instant::now();
        std::hint::black_box(p.process(f)?);
        lat.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let total = start.elapsed().as_secs_f64();
    let (mean_ms, std_ms) = mean_std(&lat);
    Ok(PipelineBench {
        reps,
        mean_ms,
        std_ms,
        fps: reps as f64 / total,
    })
}
