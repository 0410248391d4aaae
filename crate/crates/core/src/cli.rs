//! The `lanesim` command line. Exit codes: 0 success, 1 runtime failure
//! (including an off-track run), 2 usage or configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{AppConfig, Overrides};
use crate::error::{Error, Result};
use crate::imaging::{read_mask_pgm, read_pnm, write_mask_pgm, write_pnm};
use crate::pipeline::bench_pipeline;
use crate::signeval::{
    baseline_classifier_train, build_manifest, default_labels, evaluate, parse_perturbations, synth_dataset,
    write_synthetic_dataset, BaselineClassifier, DatasetManifest, Split, DEFAULT_FRACTIONS,
    DEFAULT_REJECT_THRESHOLD,
};
use crate::simworld::{calibrate_thresholds, run_closed_loop, run_joint_pipeline, LabeledFrame, TrackKind};
use crate::telemetry::{export_csv, import_csv, summarize, RunLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lanesim", version, about = "Lane tracking simulator and evaluation harness")]
struct Cli {
    /// JSON configuration file. Unset fields take their defaults.
    #[arg(long, global = true, env = "LANESIM_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Illumination preset name, e.g. low or high.
    #[arg(long)]
    preset: Option<String>,
    /// straight, oval or s-curve.
    #[arg(long, value_parser = parse_track)]
    track: Option<TrackKind>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            preset: self.preset.clone(),
            track: self.track,
            duration_s: self.duration,
        }
    }
}

fn parse_track(s: &str) -> std::result::Result<TrackKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the closed loop; writes run.csv and metrics.json into --out.
    Simulate {
        #[command(flatten)]
        ov: OverrideArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search HSV thresholds from frames/<name>.ppm and labels/<name>.pgm.
    Calibrate {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render labeled frames for calibration into --out/frames and --out/labels.
    RenderFrames {
        #[command(flatten)]
        ov: OverrideArgs,
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Seed for the sampled vehicle poses.
        #[arg(long, default_value_t = 7)]
        pose_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the synthetic sign dataset and its split manifest.
    SynthSigns {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 0.02)]
        sigma: f32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the baseline on the train split and evaluate another split.
    EvalClassifier {
        /// Defaults to the manifest named in the config.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        /// e.g. motion_blur=5,noise=0.02,color=10:0:0
        #[arg(long)]
        perturb: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot-ready series from a run log: scatter.csv, offset_trace.csv, report.json.
    Report {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the perception and control chain on rendered frames.
    Bench {
        #[command(flatten)]
        ov: OverrideArgs,
        #[arg(long, default_value_t = 100)]
        warmup: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn load_config(path: Option<&Path>, ov: Option<&OverrideArgs>) -> Result<AppConfig> {
    let mut cfg = match path {
        Some(p) => AppConfig::load(p).map_err(|e| match e {
            Error::Io { .. } => Error::config(e.to_string()),
            other => other,
        })?,
        None => AppConfig::default(),
    };
    if let Some(o) = ov {
        cfg.apply(&o.overrides());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Simulate { ov, out } => simulate(&load_config(config, Some(ov))?, out),
        Command::Calibrate { frames, labels, out } => calibrate(&load_config(config, None)?, frames, labels, out),
        Command::RenderFrames {
            ov,
            count,
            pose_seed,
            out,
        } => render_frames(&load_config(config, Some(ov))?, *count, *pose_seed, out),
        Command::SynthSigns {
            seed,
            per_class,
            sigma,
            out,
        } => {
            let mut cfg = load_config(config, None)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            synth_signs(&cfg, *per_class, *sigma, out)
        }
        Command::EvalClassifier {
            manifest,
            split,
            perturb,
            seed,
            out,
        } => {
            let mut cfg = load_config(config, None)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let manifest = manifest
                .clone()
                .or_else(|| cfg.manifest.clone())
                .ok_or_else(|| Error::config("no manifest given and none in the config"))?;
            eval_classifier(&cfg, &manifest, *split, perturb.as_deref().unwrap_or(""), out)
        }
        Command::Report { log, out } => report(log, out),
        Command::Bench { ov, warmup, reps, out } => {
            bench(&load_config(config, Some(ov))?, *warmup, *reps, out.as_deref())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Every JSON output carries the effective config hash and seed.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: T,
}

fn simulate(cfg: &AppConfig, out: &Path) -> Result<i32> {
    let sim = cfg.sim_config()?;
    let hash = cfg.hash();
    let mut log = if cfg.class_rate_hz > 0.0 {
        let labels = default_labels();
        let classifier = match &cfg.manifest {
            Some(m) => baseline_classifier_train(&DatasetManifest::load(m)?, DEFAULT_REJECT_THRESHOLD)?,
            None => {
                let train = synth_dataset(&labels, 20, 0.02, cfg.seed)?;
                BaselineClassifier::train(&labels, &train, DEFAULT_REJECT_THRESHOLD)?
            }
        };
        let signs: Vec<_> = synth_dataset(&labels, 4, 0.02, cfg.seed.wrapping_add(1))?
            .into_iter()
            .map(|(f, _)| f)
            .collect();
        run_joint_pipeline(&sim, &classifier, &signs, cfg.class_rate_hz)?
    } else {
        run_closed_loop(&sim)?
    };
    log.meta.config_hash = hash.clone();
    let metrics = summarize(&log, cfg.birdseye_width)?;

    #[derive(Serialize)]
    struct Body<'a> {
        outcome: &'a crate::telemetry::RunOutcome,
        metrics: &'a crate::telemetry::MetricsReport,
        config: &'a AppConfig,
    }
    create_dir(out)?;
    write_file(&out.join("run.csv"), &export_csv(&log))?;
    write_file(
        &out.join("metrics.json"),
        &to_json(&Stamped {
            config_hash: &hash,
            seed: cfg.seed,
            body: Body {
                outcome: &log.meta.outcome,
                metrics: &metrics,
                config: cfg,
            },
        })?,
    )?;
    let r = metrics
        .curvature_steering_r
        .map_or_else(|| "undefined".to_string(), |r| format!("{r:.4}"));
    println!(
        "{} frames, normalized RMSE {:.3}%, curvature-steering r {r}, outcome {:?}",
        metrics.sample_count, metrics.normalized_rmse_pct, log.meta.outcome
    );
    Ok(if log.meta.outcome.is_completed() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn stems(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.extension().and_then(|x| x.to_str()) == Some(ext) {
            if let Some(s) = p.file_stem().and_then(|s| s.to_str()) {
                out.push(s.to_string());
            }
        }
    }
    out.sort();
    Ok(out)
}

fn calibrate(cfg: &AppConfig, frames: &Path, labels: &Path, out: &Path) -> Result<i32> {
    let f = stems(frames, "ppm")?;
    let l = stems(labels, "pgm")?;
    let unpaired: Vec<String> = f
        .iter()
        .filter(|s| l.binary_search(s).is_err())
        .map(|s| format!("{s}.ppm"))
        .chain(
            l.iter()
                .filter(|s| f.binary_search(s).is_err())
                .map(|s| format!("{s}.pgm")),
        )
        .collect();
    if !unpaired.is_empty() {
        return Err(Error::invalid(format!("unpaired files: {}", unpaired.join(", "))));
    }
    let samples = f
        .iter()
        .map(|s| {
            Ok(LabeledFrame {
                frame: read_pnm(frames.join(format!("{s}.ppm")))?,
                truth: read_mask_pgm(labels.join(format!("{s}.pgm")))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let result = calibrate_thresholds(&samples)?;

    #[derive(Serialize)]
    struct Body<'a> {
        frames: usize,
        threshold: &'a crate::imaging::HsvThreshold,
        mean_iou: f64,
    }
    write_file(
        out,
        &to_json(&Stamped {
            config_hash: &cfg.hash(),
            seed: cfg.seed,
            body: Body {
                frames: samples.len(),
                threshold: &result.threshold,
                mean_iou: result.mean_iou,
            },
        })?,
    )?;
    println!("{} frames, mean IoU {:.4}", samples.len(), result.mean_iou);
    Ok(EXIT_OK)
}

fn render_frames(cfg: &AppConfig, count: usize, pose_seed: u64, out: &Path) -> Result<i32> {
    let samples = cfg.sim_config()?.labeled_frames(count, pose_seed)?;
    let (fdir, ldir) = (out.join("frames"), out.join("labels"));
    create_dir(&fdir)?;
    create_dir(&ldir)?;
    for (i, s) in samples.iter().enumerate() {
        write_pnm(fdir.join(format!("{i:04}.ppm")), &s.frame)?;
        write_mask_pgm(ldir.join(format!("{i:04}.pgm")), &s.truth)?;
    }
    println!("wrote {count} labeled frames to {}", out.display());
    Ok(EXIT_OK)
}

fn synth_signs(cfg: &AppConfig, per_class: usize, sigma: f32, out: &Path) -> Result<i32> {
    if per_class == 0 {
        return Err(Error::config("per-class count must be positive"));
    }
    let labels = default_labels();
    write_synthetic_dataset(out, &labels, per_class, sigma, cfg.seed)?;
    let manifest = build_manifest(out, &labels, DEFAULT_FRACTIONS, cfg.seed)?;
    manifest.save(out.join("manifest.json"))?;
    println!(
        "wrote {} images, manifest {}",
        manifest.entries.len(),
        out.join("manifest.json").display()
    );
    Ok(EXIT_OK)
}

fn eval_classifier(cfg: &AppConfig, manifest: &Path, split: Split, perturb: &str, out: &Path) -> Result<i32> {
    let perturbations = parse_perturbations(perturb)?;
    let manifest = DatasetManifest::load(manifest)?;
    let model = baseline_classifier_train(&manifest, DEFAULT_REJECT_THRESHOLD)?;
    let report = evaluate(&model, &manifest, split, &perturbations, cfg.seed)?;

    #[derive(Serialize)]
    struct Body<'a> {
        split: Split,
        report: &'a crate::signeval::EvalReport,
    }
    write_file(
        out,
        &to_json(&Stamped {
            config_hash: &cfg.hash(),
            seed: cfg.seed,
            body: Body { split, report: &report },
        })?,
    )?;
    println!(
        "{split}: {} samples, accuracy {:.4}, macro F1 {:.4}",
        report.samples, report.accuracy, report.macro_f1
    );
    Ok(EXIT_OK)
}

/// Least-squares line `y = slope * x + intercept` and its R², or `None`
/// when `x` is constant.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some((slope, intercept, r2))
}

fn stamp_line(log: &RunLog) -> String {
    format!("# config_hash={} seed={}\n", log.meta.config_hash, log.meta.seed)
}

fn report(log_path: &Path, out: &Path) -> Result<i32> {
    let text = std::fs::read_to_string(log_path).map_err(|e| Error::io(log_path, e))?;
    let log = import_csv(&text)?;
    if log.samples.is_empty() {
        return Err(Error::invalid("log has no samples"));
    }
    let metrics = summarize(&log, log.meta.image_width)?;
    let theta_max = log.meta.steering.theta_max;
    let (curv, steer): (Vec<f64>, Vec<f64>) = log
        .samples
        .iter()
        .filter(|s| !s.lane_lost && s.raw_deg.abs() < theta_max)
        .filter_map(|s| s.curvature.map(|c| (c, s.smoothed_deg)))
        .unzip();

    let mut scatter = stamp_line(&log);
    scatter.push_str("curvature,smoothed_deg\n");
    for (c, s) in curv.iter().zip(&steer) {
        let _ = writeln!(scatter, "{c},{s}");
    }
    let mut trace = stamp_line(&log);
    trace.push_str("t,offset_px\n");
    for s in &log.samples {
        let _ = writeln!(trace, "{},{}", s.t, s.offset_px.map(|v| v.to_string()).unwrap_or_default());
    }
    let fit = linear_fit(&curv, &steer);

    #[derive(Serialize)]
    struct Body<'a> {
        scatter_points: usize,
        slope: Option<f64>,
        intercept: Option<f64>,
        r_squared: Option<f64>,
        metrics: &'a crate::telemetry::MetricsReport,
    }
    create_dir(out)?;
    write_file(&out.join("scatter.csv"), &scatter)?;
    write_file(&out.join("offset_trace.csv"), &trace)?;
    write_file(
        &out.join("report.json"),
        &to_json(&Stamped {
            config_hash: &log.meta.config_hash,
            seed: log.meta.seed,
            body: Body {
                scatter_points: curv.len(),
                slope: fit.map(|f| f.0),
                intercept: fit.map(|f| f.1),
                r_squared: fit.map(|f| f.2),
                metrics: &metrics,
            },
        })?,
    )?;
    match fit {
        Some((_, _, r2)) => println!("{} scatter points, R² {r2:.4}", curv.len()),
        None => println!("{} scatter points, no fit (constant curvature)", curv.len()),
    }
    Ok(EXIT_OK)
}

fn bench(cfg: &AppConfig, warmup: usize, reps: usize, out: Option<&Path>) -> Result<i32> {
    let sim = cfg.sim_config()?;
    let frames: Vec<_> = sim.labeled_frames(16, cfg.seed)?.into_iter().map(|s| s.frame).collect();
    let b = bench_pipeline(&sim.effective_pipeline(), &frames, warmup, reps)?;

    #[derive(Serialize)]
    struct Body<'a> {
        preset: &'a str,
        bench: &'a crate::pipeline::PipelineBench,
    }
    let json = to_json(&Stamped {
        config_hash: &cfg.hash(),
        seed: cfg.seed,
        body: Body {
            preset: &cfg.preset,
            bench: &b,
        },
    })?;
    match out {
        Some(p) => write_file(p, &json)?,
        None => print!("{json}"),
    }
    eprintln!("{} reps, {:.3} ± {:.3} ms, {:.1} FPS", b.reps, b.mean_ms, b.std_ms, b.fps);
    Ok(EXIT_OK)
}
