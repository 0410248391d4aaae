//! The classifier contract and the nearest-centroid colour-histogram model.

use serde::{Deserialize, Serialize};

use super::{ClassLabel, NONE_NAME};
use crate::error::{Error, Result};
use crate::imaging::{rgb_to_hsv, Frame};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_id: usize,
    /// In `[0, 1]`.
    pub confidence: f64,
}

/// Anything that maps an RGB8 frame to one of its registered labels.
/// Implementations must be deterministic for a fixed model state and must
/// report failures as [`Error::Inference`] instead of answering "None".
pub trait Classifier {
    fn labels(&self) -> &[ClassLabel];

    fn classify(&self, frame: &Frame) -> Result<Prediction>;

    /// Latency charged per call when the simulator runs on a virtual clock.
    fn nominal_latency_ms(&self) -> f64 {
        0.0
    }
}

pub const HIST_H_BINS: usize = 8;
pub const HIST_S_BINS: usize = 4;
pub const HIST_V_BINS: usize = 4;
pub const HIST_LEN: usize = HIST_H_BINS * HIST_S_BINS * HIST_V_BINS;

/// Normalized 8x4x4 HSV histogram of an RGB8 frame.
pub fn hsv_histogram(frame: &Frame) -> Result<Vec<f64>> {
    let hsv = rgb_to_hsv(frame)?;
    let mut hist = vec![0.0; HIST_LEN];
    let px = hsv.hsv()?;
    for p in px.chunks_exact(3) {
        let h = ((p[0] / (360.0 / HIST_H_BINS as f32)) as usize).min(HIST_H_BINS - 1);
        let s = ((p[1] * HIST_S_BINS as f32) as usize).min(HIST_S_BINS - 1);
        let v = ((p[2] * HIST_V_BINS as f32) as usize).min(HIST_V_BINS - 1);
        hist[(h * HIST_S_BINS + s) * HIST_V_BINS + v] += 1.0;
    }
    let n = (px.len() / 3) as f64;
    hist.iter_mut().for_each(|c| *c /= n);
    Ok(hist)
}

/// Histogram intersection of two normalized histograms, in `[0, 1]`.
pub fn intersection(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum()
}

pub const DEFAULT_REJECT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineClassifier {
    labels: Vec<ClassLabel>,
    /// Mean histogram per class; `None` for classes without training images
    /// (allowed only for the rejection class).
    centroids: Vec<Option<Vec<f64>>>,
    reject_threshold: f64,
    none_id: usize,
}

impl BaselineClassifier {
    /// Averages the histograms of `(frame, class id)` training pairs. Every
    /// class except "None" needs at least one image.
    pub fn train(labels: &[ClassLabel], samples: &[(Frame, usize)], reject_threshold: f64) -> Result<Self> {
        let none_id = labels
            .iter()
            .position(|l| l.name == NONE_NAME)
            .ok_or_else(|| Error::config("label set has no \"None\" class"))?;
        if !(0.0..=1.0).contains(&reject_threshold) {
            return Err(Error::config("reject threshold must lie in [0, 1]"));
        }
        let mut sums = vec![vec![0.0; HIST_LEN]; labels.len()];
        let mut counts = vec![0usize; labels.len()];
        for (frame, id) in samples {
            let slot = sums
                .get_mut(*id)
                .ok_or_else(|| Error::invalid(format!("class id {id} out of range")))?;
            for (s, h) in slot.iter_mut().zip(hsv_histogram(frame)?) {
                *s += h;
            }
            counts[*id] += 1;
        }
        let mut centroids = Vec::with_capacity(labels.len());
        for (i, (sum, n)) in sums.into_iter().zip(&counts).enumerate() {
            if *n == 0 {
                if i != none_id {
                    return Err(Error::invalid(format!(
                        "class {:?} has no training images",
                        labels[i].name
                    )));
                }
                centroids.push(None);
            } else {
                centroids.push(Some(sum.into_iter().map(|s| s / *n as f64).collect()));
            }
        }
        Ok(BaselineClassifier {
            labels: labels.to_vec(),
            centroids,
            reject_threshold,
            none_id,
        })
    }

    pub fn reject_threshold(&self) -> f64 {
        self.reject_threshold
    }

    pub fn centroid(&self, class_id: usize) -> Option<&[f64]> {
        self.centroids.get(class_id)?.as_deref()
    }

    /// Similarity to every centroid (`None` where a class has no centroid).
    pub fn similarities(&self, frame: &Frame) -> Result<Vec<Option<f64>>> {
        let h = hsv_histogram(frame)?;
        Ok(self
            .centroids
            .iter()
            .map(|c| c.as_ref().map(|c| intersection(&h, c)))
            .collect())
    }
}

impl Classifier for BaselineClassifier {
    fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    /// Nearest centroid by histogram intersection, lowest id on ties;
    /// "None" when the best similarity falls below the reject threshold.
    fn classify(&self, frame: &Frame) -> Result<Prediction> {
        let sims = self
            .similarities(frame)
            .map_err(|e| Error::Inference(e.to_string()))?;
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in sims.iter().enumerate() {
            if let Some(s) = *s {
                if best.map_or(true, |(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
        }
        let (id, sim) = best.ok_or_else(|| Error::Inference("model has no centroids".into()))?;
        Ok(if sim < self.reject_threshold {
            Prediction {
                class_id: self.none_id,
                confidence: 1.0 - sim,
            }
        } else {
            Prediction {
                class_id: id,
                confidence: sim,
            }
        })
    }
}
