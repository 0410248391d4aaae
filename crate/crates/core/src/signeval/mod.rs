//! Sign-classification evaluation: datasets, the classifier contract, a
//! colour-histogram baseline, perturbations, metrics and benchmarking.

mod classifier;
mod dataset;
mod metrics;
mod perturb;
mod synth;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use classifier::{
    hsv_histogram, intersection, BaselineClassifier, Classifier, Prediction, DEFAULT_REJECT_THRESHOLD,
    HIST_LEN,
};
pub use dataset::{build_manifest, split_counts, DatasetManifest, ManifestEntry, Split, DEFAULT_FRACTIONS};
pub use metrics::{ClassScore, ConfusionMatrix};
pub use perturb::{parse_perturbations, perturb, perturb_all, Perturbation};
pub use synth::{sign_hue, synth_dataset, synth_sign, write_synthetic_dataset, SIGN_SIZE};

use crate::error::{Error, Result};
use crate::imaging::Frame;
use crate::telemetry::mean_std;

pub const NONE_NAME: &str = "None";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub id: usize,
    pub name: String,
}

/// Six generic sign classes plus the rejection class "None" (id 6).
pub fn default_labels() -> Vec<ClassLabel> {
    ["stop", "yield", "no_entry", "turn_left", "turn_right", "parking", NONE_NAME]
        .iter()
        .enumerate()
        .map(|(id, n)| ClassLabel {
            id,
            name: n.to_string(),
        })
        .collect()
}

/// Trains the baseline on the manifest's training split.
pub fn baseline_classifier_train(manifest: &DatasetManifest, reject_threshold: f64) -> Result<BaselineClassifier> {
    let train = manifest.load_split(Split::Train)?;
    BaselineClassifier::train(&manifest.labels, &train, reject_threshold)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub labels: Vec<String>,
    pub perturbations: Vec<String>,
    pub matrix: ConfusionMatrix,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScore>,
}

/// Classifies every sample (perturbed with a per-image seed) and scores it.
pub fn evaluate_samples(
    classifier: &dyn Classifier,
    samples: &[(Frame, usize)],
    perturbations: &[Perturbation],
    seed: u64,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let labels = classifier.labels();
    let mut matrix = ConfusionMatrix::new(labels.len());
    for (i, (frame, truth)) in samples.iter().enumerate() {
        let input = if perturbations.is_empty() {
            frame.clone()
        } else {
            perturb_all(frame, perturbations, seed.wrapping_add(i as u64))?
        };
        let pred = classifier.classify(&input)?;
        matrix.record(*truth, pred.class_id)?;
    }
    Ok(EvalReport {
        samples: samples.len(),
        labels: labels.iter().map(|l| l.name.clone()).collect(),
        perturbations: perturbations.iter().map(|p| p.to_string()).collect(),
        accuracy: matrix.accuracy()?,
        macro_f1: matrix.macro_f1()?,
        per_class: matrix.per_class(),
        matrix,
    })
}

pub fn evaluate(
    classifier: &dyn Classifier,
    manifest: &DatasetManifest,
    split: Split,
    perturbations: &[Perturbation],
    seed: u64,
) -> Result<EvalReport> {
    let samples = manifest.load_split(split)?;
    evaluate_samples(classifier, &samples, perturbations, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierBench {
    pub reps: usize,
    pub avg_inference_ms: f64,
    pub std_inference_ms: f64,
    /// `reps / total wall time`.
    pub fps: f64,
    /// Peak resident set size, when the platform exposes it.
    pub peak_memory_mb: Option<f64>,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Peak resident memory from `/proc/self/status` (Linux only).
pub fn peak_memory_mb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

/// Times `reps` classifications after `warmup` untimed ones, cycling through
/// `samples`. Accuracy fields come from one untimed pass over the samples.
pub fn bench(
    classifier: &dyn Classifier,
    samples: &[(Frame, usize)],
    warmup: usize,
    reps: usize,
) -> Result<ClassifierBench> {
    if reps == 0 {
        return Err(Error::invalid("bench needs reps >= 1"));
    }
    if samples.is_empty() {
        return Err(Error::invalid("bench needs at least one frame"));
    }
    for (f, _) in samples.iter().cycle().take(warmup) {
        classifier.classify(f)?;
    }
    let mut lat = Vec::with_capacity(reps);
    let start = Instant::now();
    for (f, _) in samples.iter().cycle().take(reps) {
        let t0 = Instant::now();
        std::hint::black_box(classifier.classify(f)?);
        lat.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let total = start.elapsed().as_secs_f64();
    let (avg, std) = mean_std(&lat);
    let report = evaluate_samples(classifier, samples, &[], 0)?;
    Ok(ClassifierBench {
        reps,
        avg_inference_ms: avg,
        std_inference_ms: std,
        fps: reps as f64 / total,
        peak_memory_mb: peak_memory_mb(),
        accuracy: report.accuracy,
        macro_f1: report.macro_f1,
    })
}
