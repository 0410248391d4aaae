//! CSV encoding of run logs.
//!
//! Layout: `#`-prefixed metadata lines, the fixed column header, then one row
//! per sample. Floats use the shortest representation that parses back to the
//! identical value, so export/import is lossless.

use std::fmt::Write as _;

use super::{ClassEvent, RunLog, RunMeta, RunOutcome, RunSample};
use crate::control::SteeringParams;
use crate::error::{Error, Result};

pub const LOG_FORMAT_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 12] = [
    "t",
    "frame_idx",
    "lux_label",
    "offset_px",
    "gt_deviation_m",
    "curvature",
    "raw_deg",
    "smoothed_deg",
    "proc_ms",
    "lane_lost",
    "class_label",
    "class_latency_ms",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn export_csv(log: &RunLog) -> String {
    let m = &log.meta;
    let s = &m.steering;
    let mut out = String::new();
    let _ = writeln!(out, "# lanesim-runlog v{LOG_FORMAT_VERSION}");
    let _ = writeln!(
        out,
        "# config_hash={} seed={} image_width={}",
        m.config_hash, m.seed, m.image_width
    );
    let _ = write!(
        out,
        "# steering k_offset={} k_curv={} theta_max={} alpha={} hold_frames={}",
        s.k_offset, s.k_curv, s.theta_max, s.alpha, s.hold_frames
    );
    if let Some(n) = s.moving_average {
        let _ = write!(out, " moving_average={n}");
    }
    out.push('\n');
    match &m.outcome {
        RunOutcome::Completed => out.push_str("# outcome=completed\n"),
        RunOutcome::OffTrack {
            frame_idx,
            deviation_m,
        } => {
            let _ = writeln!(
                out,
                "# outcome=off_track frame_idx={frame_idx} deviation_m={deviation_m}"
            );
        }
    }
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for r in &log.samples {
        let (label, latency) = match &r.class_event {
            Some(e) => (e.label.as_str(), e.latency_ms.to_string()),
            None => ("", String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.frame_idx,
            r.lux_label,
            opt(r.offset_px),
            r.gt_deviation_m,
            opt(r.curvature),
            r.raw_deg,
            r.smoothed_deg,
            r.proc_ms,
            r.lane_lost as u8,
            label,
            latency
        );
    }
    out
}

fn kv_pairs(line: &str) -> impl Iterator<Item = (&str, &str)> {
    line.split_whitespace().filter_map(|tok| tok.split_once('='))
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad value {v:?} for {key}"),
    })
}

fn parse_meta(lines: &[(usize, &str)]) -> Result<RunMeta> {
    let mut meta = RunMeta::default();
    let mut saw_version = false;
    for &(ln, raw) in lines {
        let body = raw.trim_start_matches('#').trim();
        if let Some(v) = body.strip_prefix("lanesim-runlog v") {
            let version: u32 = parse_num(ln, "version", v)?;
            if version != LOG_FORMAT_VERSION {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("unsupported log version {version}"),
                });
            }
            saw_version = true;
        } else if let Some(rest) = body.strip_prefix("steering") {
            let mut s = SteeringParams {
                moving_average: None,
                ..SteeringParams::default()
            };
            for (k, v) in kv_pairs(rest) {
                match k {
                    "k_offset" => s.k_offset = parse_num(ln, k, v)?,
                    "k_curv" => s.k_curv = parse_num(ln, k, v)?,
                    "theta_max" => s.theta_max = parse_num(ln, k, v)?,
                    "alpha" => s.alpha = parse_num(ln, k, v)?,
                    "hold_frames" => s.hold_frames = parse_num(ln, k, v)?,
                    "moving_average" => s.moving_average = Some(parse_num(ln, k, v)?),
                    _ => {}
                }
            }
            meta.steering = s;
        } else if body.starts_with("outcome=") {
            let mut status = "";
            let (mut frame_idx, mut deviation_m) = (0u64, 0.0f64);
            for (k, v) in kv_pairs(body) {
                match k {
                    "outcome" => status = v,
                    "frame_idx" => frame_idx = parse_num(ln, k, v)?,
                    "deviation_m" => deviation_m = parse_num(ln, k, v)?,
                    _ => {}
                }
            }
            meta.outcome = match status {
                "completed" => RunOutcome::Completed,
                "off_track" => RunOutcome::OffTrack {
                    frame_idx,
                    deviation_m,
                },
                other => {
                    return Err(Error::Parse {
                        line: ln,
                        message: format!("unknown outcome {other:?}"),
                    })
                }
            };
        } else {
            for (k, v) in kv_pairs(body) {
                match k {
                    "config_hash" => meta.config_hash = v.to_string(),
                    "seed" => meta.seed = parse_num(ln, k, v)?,
                    "image_width" => meta.image_width = parse_num(ln, k, v)?,
                    _ => {}
                }
            }
        }
    }
    if !saw_version {
        return Err(Error::Parse {
            line: 1,
            message: "missing '# lanesim-runlog v1' header".into(),
        });
    }
    Ok(meta)
}

fn parse_row(ln: usize, rec: &csv::StringRecord) -> Result<RunSample> {
    if rec.len() != CSV_COLUMNS.len() {
        return Err(Error::Parse {
            line: ln,
            message: format!("row has {} fields, expected {}", rec.len(), CSV_COLUMNS.len()),
        });
    }
    let f = |i: usize| -> Result<f64> { parse_num(ln, CSV_COLUMNS[i], &rec[i]) };
    let of = |i: usize| -> Result<Option<f64>> {
        if rec[i].is_empty() {
            Ok(None)
        } else {
            f(i).map(Some)
        }
    };
    let lane_lost = match &rec[9] {
        "0" => false,
        "1" => true,
        other => {
            return Err(Error::Parse {
                line: ln,
                message: format!("lane_lost must be 0 or 1, got {other:?}"),
            })
        }
    };
    let class_event = match (&rec[10], of(11)?) {
        ("", None) => None,
        (label, Some(latency_ms)) if !label.is_empty() => Some(ClassEvent {
            label: label.to_string(),
            latency_ms,
        }),
        _ => {
            return Err(Error::Parse {
                line: ln,
                message: "class_label and class_latency_ms must be both set or both empty".into(),
            })
        }
    };
    Ok(RunSample {
        t: f(0)?,
        frame_idx: parse_num(ln, "frame_idx", &rec[1])?,
        lux_label: rec[2].to_string(),
        offset_px: of(3)?,
        gt_deviation_m: f(4)?,
        curvature: of(5)?,
        raw_deg: f(6)?,
        smoothed_deg: f(7)?,
        proc_ms: f(8)?,
        lane_lost,
        class_event,
    })
}

/// Parses a log written by [`export_csv`]. Errors carry 1-based line numbers.
pub fn import_csv(text: &str) -> Result<RunLog> {
    let mut meta_lines = Vec::new();
    let mut header_line = None;
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') {
            meta_lines.push((i + 1, line));
        } else {
            header_line = Some((i + 1, line));
            break;
        }
    }
    let meta = parse_meta(&meta_lines)?;
    let Some((hl, header)) = header_line else {
        return Err(Error::Parse {
            line: meta_lines.len() + 1,
            message: "missing column header".into(),
        });
    };
    if header.trim_end_matches('\r') != CSV_COLUMNS.join(",") {
        return Err(Error::Parse {
            line: hl,
            message: format!("column header mismatch: {header:?}"),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut samples: Vec<RunSample> = Vec::new();
    let mut rec = csv::StringRecord::new();
    let mut seen_header = false;
    loop {
        let more = reader.read_record(&mut rec).map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let ln = rec.position().map_or(0, |p| p.line() as usize);
        if !seen_header {
            seen_header = true;
            continue;
        }
        let sample = parse_row(ln, &rec)?;
        if samples.last().is_some_and(|prev| !(sample.t > prev.t)) {
            return Err(Error::Parse {
                line: ln,
                message: "timestamps must be strictly increasing".into(),
            });
        }
        samples.push(sample);
    }
    Ok(RunLog { meta, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_log() -> RunLog {
        let mut log = RunLog::new(RunMeta {
            config_hash: "abc123".into(),
            seed: 7,
            image_width: 640,
            steering: SteeringParams::default(),
            outcome: RunOutcome::OffTrack {
                frame_idx: 2,
                deviation_m: 1.25,
            },
        });
        log.samples = vec![
            RunSample {
                t: 0.0,
                frame_idx: 0,
                lux_label: "282.82".into(),
                offset_px: Some(-1.5),
                gt_deviation_m: 0.1 + 0.2,
                curvature: Some(1.0 / 3.0),
                raw_deg: 2.0,
                smoothed_deg: 0.8,
                proc_ms: 3.25,
                lane_lost: false,
                class_event: Some(ClassEvent {
                    label: "stop".into(),
                    latency_ms: 50.125,
                }),
            },
            RunSample {
                t: 1.0 / 30.0,
                frame_idx: 1,
                lux_label: "282.82".into(),
                offset_px: None,
                gt_deviation_m: -0.0,
                curvature: None,
                raw_deg: 0.8,
                smoothed_deg: 0.8,
                proc_ms: 3.0,
                lane_lost: true,
                class_event: None,
            },
        ];
        log
    }

    #[test]
    fn round_trip_is_lossless() {
        let log = demo_log();
        let text = export_csv(&log);
        assert_eq!(import_csv(&text).unwrap(), log);
    }

    #[test]
    fn empty_log_is_header_only() {
        let log = RunLog::new(RunMeta::default());
        let text = export_csv(&log);
        let last = text.lines().last().unwrap();
        assert_eq!(last, CSV_COLUMNS.join(","));
        assert!(text.lines().all(|l| l.starts_with('#') || l == last));
        assert_eq!(import_csv(&text).unwrap(), log);
    }

    #[test]
    fn malformed_row_is_named() {
        let mut text = export_csv(&demo_log());
        text.push_str("0.5,2,282.82,abc,0,0,0,0,1,0,,\n");
        match import_csv(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("offset_px"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let text = export_csv(&demo_log()).replace("smoothed_deg", "smooth");
        assert!(matches!(import_csv(&text), Err(Error::Parse { line: 5, .. })));
        assert!(import_csv("t,frame_idx\n").is_err());
    }
}
