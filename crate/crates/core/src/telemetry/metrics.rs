use serde::{Deserialize, Serialize};

use super::RunLog;
use crate::error::{Error, Result};

/// Root mean square of a non-empty series.
pub fn rmse(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::invalid("rmse of empty series"));
    }
    let ss: f64 = series.iter().map(|v| v * v).sum();
    Ok((ss / series.len() as f64).sqrt())
}

/// RMSE as a percentage of the image width.
pub fn normalized_rmse(rmse_px: f64, image_width_px: usize) -> f64 {
    rmse_px / image_width_px as f64 * 100.0
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "pearson needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "{} samples, need at least 2",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean and population standard deviation; `(0, 0)` for an empty series.
pub fn mean_std(series: &[f64]) -> (f64, f64) {
    if series.is_empty() {
        return (0.0, 0.0);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate tracking metrics for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sample_count: usize,
    pub lane_valid_count: usize,
    pub mean_abs_offset_px: f64,
    pub std_abs_offset_px: f64,
    pub mean_signed_offset_px: f64,
    pub offset_rmse_px: f64,
    pub normalized_rmse_pct: f64,
    /// Curvature vs smoothed steering over lane-valid, unclamped samples.
    /// `None` when either series is constant.
    pub curvature_steering_r: Option<f64>,
    pub correlation_samples: usize,
    pub mean_proc_ms: f64,
    pub std_proc_ms: f64,
    pub mean_fps: f64,
    pub std_fps: f64,
    /// Mean absolute frame-to-frame change of the smoothed command, degrees.
    pub jitter_deg: f64,
    pub gt_rmse_m: f64,
    pub class_events: usize,
    pub mean_class_latency_ms: Option<f64>,
}

/// Computes every report field from the samples of `log`.
pub fn summarize(log: &RunLog, image_width: usize) -> Result<MetricsReport> {
    if image_width == 0 {
        return Err(Error::invalid("image width must be positive"));
    }
    let samples = &log.samples;
    if samples.is_empty() {
        return Err(Error::invalid("cannot summarize an empty log"));
    }
    let offsets: Vec<f64> = samples
        .iter()
        .filter(|s| !s.lane_lost)
        .filter_map(|s| s.offset_px)
        .collect();
    if offsets.is_empty() {
        return Err(Error::invalid("log has no lane-valid samples"));
    }
    let theta_max = log.meta.steering.theta_max;
    let (curv, steer): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|s| !s.lane_lost && s.raw_deg.abs() < theta_max)
        .filter_map(|s| s.curvature.map(|c| (c, s.smoothed_deg)))
        .unzip();
    let r = match pearson(&curv, &steer) {
        Ok(r) => Some(r),
        // constant series over a usable sample set: report "no correlation"
        Err(Error::UndefinedCorrelation(_)) if curv.len() >= 2 => None,
        Err(e) => return Err(e),
    };

    let abs: Vec<f64> = offsets.iter().map(|v| v.abs()).collect();
    let (mean_abs, std_abs) = mean_std(&abs);
    let (mean_signed, _) = mean_std(&offsets);
    let rmse_px = rmse(&offsets)?;
    let proc: Vec<f64> = samples.iter().map(|s| s.proc_ms).collect();
    let (mean_proc, std_proc) = mean_std(&proc);
    let fps: Vec<f64> = proc.iter().map(|p| 1000.0 / p).collect();
    let (mean_fps, std_fps) = mean_std(&fps);
    let jitter = if samples.len() > 1 {
        samples
            .windows(2)
            .map(|w| (w[1].smoothed_deg - w[0].smoothed_deg).abs())
            .sum::<f64>()
            / (samples.len() - 1) as f64
    } else {
        0.0
    };
    let gt: Vec<f64> = samples.iter().map(|s| s.gt_deviation_m).collect();
    let latencies: Vec<f64> = log.class_events().map(|(_, e)| e.latency_ms).collect();
    Ok(MetricsReport {
        sample_count: samples.len(),
        lane_valid_count: offsets.len(),
        mean_abs_offset_px: mean_abs,
        std_abs_offset_px: std_abs,
        mean_signed_offset_px: mean_signed,
        offset_rmse_px: rmse_px,
        normalized_rmse_pct: normalized_rmse(rmse_px, image_width),
        curvature_steering_r: r,
        correlation_samples: curv.len(),
        mean_proc_ms: mean_proc,
        std_proc_ms: std_proc,
        mean_fps,
        std_fps,
        jitter_deg: jitter,
        gt_rmse_m: rmse(&gt)?,
        class_events: latencies.len(),
        mean_class_latency_ms: (!latencies.is_empty()).then(|| mean_std(&latencies).0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{RunMeta, RunSample};

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((rmse(&[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[-2.5; 7]).unwrap() - 2.5).abs() < 1e-15);
        assert!(rmse(&[]).is_err());
    }

    #[test]
    fn normalized_rmse_reproduces_reported_rows() {
        let low = normalized_rmse(20.2, 640);
        let high = normalized_rmse(19.5, 640);
        assert!((low - 3.15625).abs() < 1e-12);
        assert!((high - 3.046875).abs() < 1e-12);
        assert_eq!((low * 100.0).round() / 100.0, 3.16);
        assert_eq!((high * 100.0).round() / 100.0, 3.05);
        assert_eq!(normalized_rmse(0.0, 480), 0.0);
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        // direct covariance: dx = [-1.5,-.5,.5,1.5], dy = [-.5,-1.5,1.5,.5]
        // sxy = .75+.75+.75+.75 = 3, sxx = syy = 5
        assert!((pearson(&x, &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_degenerate_input() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(pearson(&[1.0], &[2.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    fn sample(i: u64, offset: f64, curv: f64, raw: f64, smoothed: f64, proc_ms: f64) -> RunSample {
        RunSample {
            t: i as f64 * 0.5,
            frame_idx: i,
            lux_label: "282.82".into(),
            offset_px: Some(offset),
            gt_deviation_m: 0.0,
            curvature: Some(curv),
            raw_deg: raw,
            smoothed_deg: smoothed,
            proc_ms,
            lane_lost: false,
            class_event: None,
        }
    }

    #[test]
    fn hand_computed_report() {
        let mut log = RunLog::new(RunMeta::default());
        log.samples = vec![
            sample(0, 3.0, 0.0, 0.0, 0.0, 10.0),
            sample(1, -4.0, 0.1, 2.0, 1.0, 20.0),
            sample(2, 0.0, 0.2, 4.0, 3.0, 40.0),
        ];
        let r = summarize(&log, 100).unwrap();
        assert_eq!(r.sample_count, 3);
        assert!((r.mean_abs_offset_px - 7.0 / 3.0).abs() < 1e-12);
        assert!((r.mean_signed_offset_px + 1.0 / 3.0).abs() < 1e-12);
        assert!((r.offset_rmse_px - (25.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r.normalized_rmse_pct - (25.0f64 / 3.0).sqrt()).abs() < 1e-12);
        // curvature [0,.1,.2] vs smoothed [0,1,3]: dx=[-.1,0,.1], dy=[-4/3,-1/3,5/3]
        // sxy=.3, sxx=.02, syy=42/9 -> r = .3/sqrt(.02*42/9)
        let expect_r = 0.3 / (0.02f64 * 42.0 / 9.0).sqrt();
        assert!((r.curvature_steering_r.unwrap() - expect_r).abs() < 1e-12);
        assert!((r.mean_proc_ms - 70.0 / 3.0).abs() < 1e-12);
        assert!((r.mean_fps - (100.0 + 50.0 + 25.0) / 3.0).abs() < 1e-12);
        assert!((r.jitter_deg - 1.5).abs() < 1e-12);
    }

    #[test]
    fn constructed_linearity_gives_unit_correlation() {
        let mut log = RunLog::new(RunMeta::default());
        log.samples = (0..50)
            .map(|i| {
                let c = ((i * 7) % 13) as f64 * 0.01 - 0.05;
                sample(i, 0.0, c, 20.0 * c, 20.0 * c, 5.0)
            })
            .collect();
        let r = summarize(&log, 640).unwrap();
        assert!((r.curvature_steering_r.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_skips_clamped_and_lost_samples() {
        let mut log = RunLog::new(RunMeta::default());
        let mut samples: Vec<RunSample> = (0..10)
            .map(|i| sample(i, 0.0, i as f64, i as f64, i as f64, 5.0))
            .collect();
        samples[3].raw_deg = 30.0;
        samples[3].smoothed_deg = -100.0;
        samples[5].lane_lost = true;
        samples[5].smoothed_deg = 500.0;
        log.samples = samples;
        let r = summarize(&log, 640).unwrap();
        assert_eq!(r.correlation_samples, 8);
        assert!((r.curvature_steering_r.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_sample_log_is_rejected() {
        let mut log = RunLog::new(RunMeta::default());
        log.samples = vec![sample(0, 1.0, 0.1, 1.0, 1.0, 5.0)];
        assert!(matches!(summarize(&log, 640), Err(Error::UndefinedCorrelation(_))));
        log.samples.clear();
        assert!(summarize(&log, 640).is_err());
    }

    #[test]
    fn constant_steering_reports_no_correlation() {
        let mut log = RunLog::new(RunMeta::default());
        log.samples = (0..5).map(|i| sample(i, 0.0, 0.0, 0.0, 0.0, 5.0)).collect();
        let r = summarize(&log, 640).unwrap();
        assert_eq!(r.curvature_steering_r, None);
        assert_eq!(r.offset_rmse_px, 0.0);
    }
}
