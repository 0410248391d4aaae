//! Application configuration: one JSON document covering simulation,
//! steering, presets and dataset paths, plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::SteeringParams;
use crate::error::{Error, Result};
use crate::geometry::QuadCorrespondence;
use crate::imaging::HsvThreshold;
use crate::lane::LaneParams;
use crate::pipeline::PipelineConfig;
use crate::simworld::{
    generate_track, CameraModel, ClockMode, IlluminationPreset, SimConfig, TrackKind, TrackParams,
    VehicleParams,
};

/// Hex SHA-256 of the value's JSON serialization. Struct fields serialize in
/// declaration order, so equal values hash equally.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config types serialize infallibly");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: u64,
    pub dt: f64,
    pub duration_s: f64,
    pub track: TrackKind,
    pub track_params: TrackParams,
    /// Name of the active preset in `presets`.
    pub preset: String,
    pub presets: Vec<IlluminationPreset>,
    pub frame_width: usize,
    pub frame_height: usize,
    pub birdseye_width: usize,
    pub birdseye_height: usize,
    /// Defaults to the stock trapezoid for the frame size when absent.
    pub quad: Option<QuadCorrespondence>,
    pub lane: LaneParams,
    pub steering: SteeringParams,
    pub vehicle: VehicleParams,
    pub camera: CameraModel,
    pub initial_lateral_m: f64,
    pub initial_heading_rad: f64,
    pub clock: ClockMode,
    pub class_rate_hz: f64,
    pub dataset_root: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            seed: 0,
            dt: 1.0 / 30.0,
            duration_s: 300.0,
            track: TrackKind::Oval,
            track_params: TrackParams::default(),
            preset: "low".into(),
            presets: vec![IlluminationPreset::low(), IlluminationPreset::high()],
            frame_width: 640,
            frame_height: 480,
            birdseye_width: 640,
            birdseye_height: 480,
            quad: None,
            lane: LaneParams::default(),
            steering: SteeringParams::default(),
            vehicle: VehicleParams::default(),
            camera: CameraModel::default(),
            initial_lateral_m: 0.0,
            initial_heading_rad: 0.0,
            clock: ClockMode::Virtual,
            class_rate_hz: 0.0,
            dataset_root: None,
            manifest: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub track: Option<TrackKind>,
    pub duration_s: Option<f64>,
}

impl AppConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config JSON: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.preset {
            self.preset = p.clone();
        }
        if let Some(t) = o.track {
            self.track = t;
        }
        if let Some(d) = o.duration_s {
            self.duration_s = d;
        }
    }

    pub fn active_preset(&self) -> Result<IlluminationPreset> {
        self.presets
            .iter()
            .find(|p| p.name == self.preset)
            .cloned()
            .ok_or_else(|| {
                let names: Vec<_> = self.presets.iter().map(|p| p.name.as_str()).collect();
                Error::config(format!("preset {:?} not in {names:?}", self.preset))
            })
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            frame_width: self.frame_width,
            frame_height: self.frame_height,
            birdseye_width: self.birdseye_width,
            birdseye_height: self.birdseye_height,
            quad: self.quad.unwrap_or_else(|| {
                QuadCorrespondence::default_for(
                    self.frame_width,
                    self.frame_height,
                    self.birdseye_width,
                    self.birdseye_height,
                )
            }),
            lane: self.lane,
            steering: self.steering,
            threshold: self
                .active_preset()
                .map_or_else(|_| HsvThreshold::everything(), |p| p.thresholds),
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            dt: self.dt,
            duration_s: self.duration_s,
            seed: self.seed,
            pipeline: self.pipeline_config(),
            preset: self.active_preset()?,
            track: generate_track(self.track, &self.track_params)?,
            vehicle: self.vehicle,
            camera: self.camera,
            initial_lateral_m: self.initial_lateral_m,
            initial_heading_rad: self.initial_heading_rad,
            clock: self.clock,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Full validation, run before any command does work.
    pub fn validate(&self) -> Result<()> {
        if !(self.class_rate_hz >= 0.0) || !self.class_rate_hz.is_finite() {
            return Err(Error::config("class_rate_hz must be finite and non-negative"));
        }
        let mut names: Vec<_> = self.presets.iter().map(|p| &p.name).collect();
        names.sort();
        names.dedup();
        if names.len() != self.presets.len() {
            return Err(Error::config("preset names must be unique"));
        }
        for p in &self.presets {
            p.validate()?;
        }
        self.sim_config().map(|_| ())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}
