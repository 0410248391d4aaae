//! Run logs and the tracking metrics computed from them.

mod logfile;
mod metrics;

pub use logfile::{export_csv, import_csv, CSV_COLUMNS, LOG_FORMAT_VERSION};
pub use metrics::{
    mean_std, normalized_rmse, pearson, rmse, summarize, MetricsReport,
};

use serde::{Deserialize, Serialize};

use crate::control::SteeringParams;

/// A classification invocation attached to a lane-loop frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEvent {
    pub label: String,
    pub latency_ms: f64,
}

/// One lane-loop frame. `offset_px` and `curvature` are absent when no lane
/// was detected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    pub t: f64,
    pub frame_idx: u64,
    pub lux_label: String,
    pub offset_px: Option<f64>,
    pub gt_deviation_m: f64,
    pub curvature: Option<f64>,
    pub raw_deg: f64,
    pub smoothed_deg: f64,
    pub proc_ms: f64,
    pub lane_lost: bool,
    pub class_event: Option<ClassEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    OffTrack { frame_idx: u64, deviation_m: f64 },
}

impl RunOutcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunOutcome::Completed)
    }
}

/// Header metadata carried with every log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub image_width: usize,
    pub steering: SteeringParams,
    pub outcome: RunOutcome,
}

impl Default for RunMeta {
    fn default() -> Self {
        RunMeta {
            config_hash: String::new(),
            seed: 0,
            image_width: 640,
            steering: SteeringParams::default(),
            outcome: RunOutcome::Completed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub meta: RunMeta,
    pub samples: Vec<RunSample>,
}

impl RunLog {
    pub fn new(meta: RunMeta) -> Self {
        RunLog {
            meta,
            samples: Vec::new(),
        }
    }

    pub fn class_events(&self) -> impl Iterator<Item = (&RunSample, &ClassEvent)> {
        self.samples
            .iter()
            .filter_map(|s| s.class_event.as_ref().map(|e| (s, e)))
    }
}
