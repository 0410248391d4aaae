//! Property definitions shared by the proptest suite and the acceptance
//! runner. Each property is a strategy plus a check on one generated case.

#![allow(dead_code)]

use lanesim::control::{smooth, steering_law, Controller, SteeringParams};
use lanesim::geometry::{warp_frame, warp_mask, Homography};
use lanesim::imaging::{threshold_mask, BinaryMask, Frame, HsvThreshold, RectRegion};
use lanesim::lane::{column_histogram, detect_lane_bounds, estimate_lane, LaneEstimate, LaneParams};
use lanesim::simworld::{run_closed_loop, IlluminationPreset, SimConfig, TrackKind};
use lanesim::telemetry::{
    export_csv, import_csv, pearson, ClassEvent, RunLog, RunMeta, RunOutcome, RunSample,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const CASES: u32 = 1000;

/// Runs `check` on `cases` inputs drawn deterministically from `strategy`.
pub fn run_property<S, F>(cases: u32, strategy: S, check: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner.run(&strategy, check).map_err(|e| e.to_string())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

// homography round-trip

#[derive(Clone, Debug)]
pub struct HomographyCase {
    pub matrix: [[f64; 3]; 3],
    pub points: Vec<[f64; 2]>,
}

/// Near-identity linear part, translations up to 200 px and perspective
/// terms small enough that the denominator stays within [0.8, 1.2] on
/// a 640x480 frame.
pub fn homography_case() -> impl Strategy<Value = HomographyCase> {
    let lin = prop::array::uniform4(-0.4f64..0.4);
    let trans = prop::array::uniform2(-200.0f64..200.0);
    let persp = prop::array::uniform2(-1.5e-4f64..1.5e-4);
    let pts = prop::collection::vec((0.0f64..640.0, 0.0f64..480.0).prop_map(|(x, y)| [x, y]), 100);
    (lin, trans, persp, pts).prop_map(|(l, t, p, points)| HomographyCase {
        matrix: [
            [1.0 + l[0], l[1], t[0]],
            [l[2], 1.0 + l[3], t[1]],
            [p[0], p[1], 1.0],
        ],
        points,
    })
}

pub fn check_homography_round_trip(c: HomographyCase) -> Result<(), TestCaseError> {
    let h = Homography::from_matrix(c.matrix).map_err(|e| fail(e.to_string()))?;
    prop_assume!(h.determinant().abs() > 0.05);
    let inv = h.invert().map_err(|e| fail(e.to_string()))?;
    for p in &c.points {
        let q = h.apply(*p).map_err(|e| fail(e.to_string()))?;
        let back = inv.apply(q).map_err(|e| fail(e.to_string()))?;
        let err = (back[0] - p[0]).abs().max((back[1] - p[1]).abs());
        prop_assert!(err <= 1e-9, "round trip of {:?} off by {}", p, err);
    }
    Ok(())
}

// warp identity

#[derive(Clone, Debug)]
pub struct WarpCase {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
    pub bits: Vec<u8>,
}

pub fn warp_case() -> impl Strategy<Value = WarpCase> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        (
            prop::collection::vec(any::<u8>(), w * h * 3),
            prop::collection::vec(0u8..=1, w * h),
        )
            .prop_map(move |(rgb, bits)| WarpCase {
                width: w,
                height: h,
                rgb,
                bits,
            })
    })
}

pub fn check_warp_identity(c: WarpCase) -> Result<(), TestCaseError> {
    let frame = Frame::from_rgb8(c.width, c.height, c.rgb.clone()).map_err(|e| fail(e.to_string()))?;
    let id = Homography::identity();
    let out = warp_frame(&frame, &id, c.width, c.height).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(out.rgb8().unwrap(), &c.rgb[..]);
    let mask = BinaryMask::from_bits(c.width, c.height, c.bits.clone()).map_err(|e| fail(e.to_string()))?;
    let warped = warp_mask(&mask, &id, c.width, c.height).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(warped.bits(), &c.bits[..]);
    Ok(())
}

// threshold mask against a per-pixel oracle

#[derive(Clone, Debug)]
pub struct MaskCase {
    pub width: usize,
    pub height: usize,
    pub hsv: Vec<f32>,
    pub bounds: [(f32, f32); 3],
}

fn ordered(a: f32, b: f32) -> (f32, f32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// About a quarter of the pixel channels are copied from a bound so the
/// inclusive edges are exercised.
pub fn mask_case() -> impl Strategy<Value = MaskCase> {
    let bounds = (
        (0.0f32..360.0, 0.0f32..360.0),
        (0.0f32..=1.0, 0.0f32..=1.0),
        (0.0f32..=1.0, 0.0f32..=1.0),
    )
        .prop_map(|(h, s, v)| [ordered(h.0, h.1), ordered(s.0, s.1), ordered(v.0, v.1)]);
    (1usize..20, 1usize..20, bounds).prop_flat_map(|(w, h, bounds)| {
        let px = (0.0f32..360.0, 0.0f32..=1.0, 0.0f32..=1.0, 0u8..8, 0u8..8, 0u8..8).prop_map(
            move |(hh, s, v, eh, es, ev)| {
                let pick = |x: f32, e: u8, (lo, hi): (f32, f32)| match e {
                    0 => lo,
                    1 => hi,
                    _ => x,
                };
                [pick(hh, eh, bounds[0]), pick(s, es, bounds[1]), pick(v, ev, bounds[2])]
            },
        );
        prop::collection::vec(px, w * h).prop_map(move |pixels| MaskCase {
            width: w,
            height: h,
            hsv: pixels.concat(),
            bounds,
        })
    })
}

pub fn check_mask_oracle(c: MaskCase) -> Result<(), TestCaseError> {
    let [h, s, v] = c.bounds;
    let t = HsvThreshold::new(h, s, v).map_err(|e| fail(e.to_string()))?;
    let frame = Frame::from_hsv(c.width, c.height, c.hsv.clone()).map_err(|e| fail(e.to_string()))?;
    let mask = threshold_mask(&frame, &t).map_err(|e| fail(e.to_string()))?;
    for y in 0..c.height {
        for x in 0..c.width {
            let i = (y * c.width + x) * 3;
            let p = &c.hsv[i..i + 3];
            let inside = !(p[0] < h.0 || p[0] > h.1 || p[1] < s.0 || p[1] > s.1 || p[2] < v.0 || p[2] > v.1);
            prop_assert_eq!(mask.get(x, y), inside, "pixel ({}, {}) = {:?}", x, y, p);
        }
    }
    Ok(())
}

// column histogram against brute-force counting

#[derive(Clone, Debug)]
pub struct HistCase {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<u8>,
    pub roi: (usize, usize, usize, usize),
}

pub fn hist_case() -> impl Strategy<Value = HistCase> {
    (1usize..=32, 1usize..=32).prop_flat_map(|(w, h)| {
        let roi = (0..w, 0..h).prop_flat_map(move |(x0, y0)| {
            (Just(x0), Just(y0), (x0 + 1)..=w, (y0 + 1)..=h)
        });
        (prop::collection::vec(0u8..=1, w * h), roi).prop_map(move |(bits, roi)| HistCase {
            width: w,
            height: h,
            bits,
            roi,
        })
    })
}

pub fn check_histogram_count(c: HistCase) -> Result<(), TestCaseError> {
    let mask = BinaryMask::from_bits(c.width, c.height, c.bits.clone()).map_err(|e| fail(e.to_string()))?;
    let (x0, y0, x1, y1) = c.roi;
    let hist = column_histogram(&mask, &RectRegion::new(x0, y0, x1, y1)).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(hist.len(), x1 - x0);
    for (k, &count) in hist.iter().enumerate() {
        let mut n = 0u32;
        for y in y0..y1 {
            if c.bits[y * c.width + x0 + k] == 1 {
                n += 1;
            }
        }
        prop_assert_eq!(count, n, "column {}", x0 + k);
    }
    Ok(())
}

// mirror antisymmetry

pub const MIRROR_W: usize = 64;
pub const MIRROR_H: usize = 48;

#[derive(Clone, Debug)]
pub struct MirrorCase {
    pub bits: Vec<u8>,
}

/// Sparse noise plus, per band, an optional fully painted column in each half.
/// Column 0 and the midline stay empty so that `x -> W - x` maps the mask
/// onto itself without clipping.
pub fn mirror_case() -> impl Strategy<Value = MirrorCase> {
    let noise = prop::collection::vec(prop::bool::weighted(0.1), MIRROR_W * MIRROR_H);
    let left = 1usize..MIRROR_W / 2;
    let right = (MIRROR_W / 2 + 1)..MIRROR_W;
    let lanes = (left.clone(), right.clone(), left, right, any::<bool>(), any::<bool>());
    (noise, lanes).prop_map(|(noise, (nl, nr, fl, fr, near_on, far_on))| {
        let (near, far) = LaneParams::default().regions(MIRROR_W, MIRROR_H).unwrap();
        let mut bits: Vec<u8> = noise.into_iter().map(u8::from).collect();
        for (band, on, cols) in [(near, near_on, [nl, nr]), (far, far_on, [fl, fr])] {
            if on {
                for y in band.y0..band.y1 {
                    for x in cols {
                        bits[y * MIRROR_W + x] = 1;
                    }
                }
            }
        }
        for y in 0..MIRROR_H {
            bits[y * MIRROR_W] = 0;
            bits[y * MIRROR_W + MIRROR_W / 2] = 0;
        }
        MirrorCase { bits }
    })
}

/// Ties only matter when both halves reach the peak floor.
fn tie_free(hist: &[u32], min_peak: u32) -> bool {
    let mid = hist.len() / 2;
    let halves = [&hist[..mid], &hist[mid..]];
    let max = |h: &[u32]| h.iter().copied().max().unwrap_or(0);
    halves.iter().any(|h| max(h) < min_peak)
        || halves.iter().all(|h| h.iter().filter(|&&v| v == max(h)).count() == 1)
}

fn mirrored(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len()];
    for y in 0..MIRROR_H {
        for x in 1..MIRROR_W {
            out[y * MIRROR_W + (MIRROR_W - x)] = bits[y * MIRROR_W + x];
        }
    }
    out
}

pub fn check_mirror_antisymmetry(c: MirrorCase) -> Result<(), TestCaseError> {
    let lp = LaneParams::default();
    let (near, far) = lp.regions(MIRROR_W, MIRROR_H).unwrap();
    let mask = BinaryMask::from_bits(MIRROR_W, MIRROR_H, c.bits.clone()).unwrap();
    for band in [&near, &far] {
        prop_assume!(tie_free(&column_histogram(&mask, band).unwrap(), lp.min_peak_count));
    }
    let flipped = BinaryMask::from_bits(MIRROR_W, MIRROR_H, mirrored(&c.bits)).unwrap();
    let a = estimate_lane(&mask, &near, &far, lp.min_peak_count).map_err(|e| fail(e.to_string()))?;
    let b = estimate_lane(&flipped, &near, &far, lp.min_peak_count).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(a.valid, b.valid);
    prop_assert_eq!(a.degraded, b.degraded);
    if !a.valid {
        return Ok(());
    }
    prop_assert_eq!(b.offset_px, -a.offset_px);
    prop_assert_eq!(b.curvature, -a.curvature);
    let p = SteeringParams::default();
    let sa = Controller::new().step(&a, MIRROR_W, &p);
    let sb = Controller::new().step(&b, MIRROR_W, &p);
    prop_assert_eq!(sb.raw_deg, -sa.raw_deg);
    prop_assert_eq!(sb.smoothed_deg, -sa.smoothed_deg);
    prop_assert_eq!(
        steering_law(b.offset_px, b.curvature, MIRROR_W, &p),
        -steering_law(a.offset_px, a.curvature, MIRROR_W, &p)
    );
    Ok(())
}

// lane-bound detection against a scan over every column pair

pub fn bounds_case() -> impl Strategy<Value = (Vec<u32>, u32)> {
    (prop::collection::vec(0u32..12, 64), 0u32..10)
}

pub fn check_bounds_scan((hist, min_peak): (Vec<u32>, u32)) -> Result<(), TestCaseError> {
    let mid = hist.len() / 2;
    let mut best_l = 0;
    let mut best_r = mid;
    for x in 0..hist.len() {
        if x < mid && hist[x] > hist[best_l] {
            best_l = x;
        }
        if x >= mid && hist[x] > hist[best_r] {
            best_r = x;
        }
    }
    let expected = (hist[best_l] >= min_peak && hist[best_r] >= min_peak).then_some((best_l, best_r));
    prop_assert_eq!(detect_lane_bounds(&hist, min_peak), expected);
    Ok(())
}

// EMA boundedness and jitter contraction

#[derive(Clone, Debug)]
pub struct EmaCase {
    pub estimates: Vec<Option<(f64, f64)>>,
    pub alpha: f64,
    pub theta_max: f64,
}

pub fn ema_case() -> impl Strategy<Value = EmaCase> {
    let est = prop::option::weighted(0.85, (-400.0f64..400.0, -3.0f64..3.0));
    (prop::collection::vec(est, 2..200), 0.01f64..0.99, 1.0f64..60.0).prop_map(
        |(estimates, alpha, theta_max)| EmaCase {
            estimates,
            alpha,
            theta_max,
        },
    )
}

fn estimate_of(v: Option<(f64, f64)>) -> LaneEstimate {
    match v {
        Some((offset_px, curvature)) => LaneEstimate {
            center_x: 320.0 + offset_px,
            offset_px,
            curvature,
            valid: true,
            degraded: false,
            ..LaneEstimate::invalid(0.1)
        },
        None => LaneEstimate::invalid(0.0),
    }
}

/// The controller never exceeds the clamp, and an EMA primed with the
/// first raw command moves no more in total than the raw series does.
pub fn check_ema(c: EmaCase) -> Result<(), TestCaseError> {
    let p = SteeringParams {
        alpha: c.alpha,
        theta_max: c.theta_max,
        ..SteeringParams::default()
    };
    let mut ctl = Controller::new();
    for e in &c.estimates {
        let cmd = ctl.step(&estimate_of(*e), 640, &p);
        prop_assert!(cmd.smoothed_deg.abs() <= c.theta_max, "{} beyond {}", cmd.smoothed_deg, c.theta_max);
        prop_assert!(cmd.raw_deg.abs() <= c.theta_max);
    }

    let raw: Vec<f64> = c
        .estimates
        .iter()
        .map(|e| e.map_or(0.0, |(o, k)| steering_law(o, k, 640, &p)))
        .collect();
    let mut s = raw[0];
    let mut smoothed = vec![s];
    for &r in &raw[1..] {
        s = smooth(s, r, c.alpha);
        smoothed.push(s);
    }
    let total = |v: &[f64]| v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    let (ds, dr) = (total(&smoothed), total(&raw));
    prop_assert!(ds <= dr + 1e-9 * (1.0 + dr), "smoothed moved {} vs raw {}", ds, dr);
    Ok(())
}

// Pearson affine invariance

#[derive(Clone, Debug)]
pub struct PearsonCase {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn pearson_case() -> impl Strategy<Value = PearsonCase> {
    (3usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
            0.1f64..10.0,
            -100.0f64..100.0,
            0.1f64..10.0,
            -100.0f64..100.0,
        )
            .prop_map(|(x, y, a, b, c, d)| PearsonCase { x, y, a, b, c, d })
    })
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    max - min
}

pub fn check_pearson_affine(c: PearsonCase) -> Result<(), TestCaseError> {
    prop_assume!(spread(&c.x) > 1.0 && spread(&c.y) > 1.0);
    let r = pearson(&c.x, &c.y).map_err(|e| fail(e.to_string()))?;
    let x2: Vec<f64> = c.x.iter().map(|v| c.a * v + c.b).collect();
    let y2: Vec<f64> = c.y.iter().map(|v| c.c * v + c.d).collect();
    let r2 = pearson(&x2, &y2).map_err(|e| fail(e.to_string()))?;
    prop_assert!((r - r2).abs() <= 1e-9, "r {} vs transformed {}", r, r2);
    let flipped: Vec<f64> = c.x.iter().map(|v| -c.a * v + c.b).collect();
    let r3 = pearson(&flipped, &c.y).map_err(|e| fail(e.to_string()))?;
    prop_assert!((r + r3).abs() <= 1e-9, "negated slope gave {} for r {}", r3, r);
    Ok(())
}

// CSV round trip

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -1e3f64..1e3,
    ]
}

fn sample() -> impl Strategy<Value = RunSample> {
    let event = prop::option::weighted(0.2, ("[A-Za-z0-9_]{1,12}", finite()))
        .prop_map(|e| e.map(|(label, latency_ms)| ClassEvent { label, latency_ms }));
    (
        (finite(), any::<u64>(), "[a-z0-9_]{0,10}", prop::option::of(finite())),
        (finite(), prop::option::of(finite()), finite(), finite()),
        (finite(), any::<bool>(), event),
    )
        .prop_map(
            |((t, frame_idx, lux_label, offset_px), (gt, curvature, raw_deg, smoothed_deg), (proc_ms, lane_lost, class_event))| {
                RunSample {
                    t,
                    frame_idx,
                    lux_label,
                    offset_px,
                    gt_deviation_m: gt,
                    curvature,
                    raw_deg,
                    smoothed_deg,
                    proc_ms,
                    lane_lost,
                    class_event,
                }
            },
        )
}

pub fn run_log() -> impl Strategy<Value = RunLog> {
    let steering = (finite(), finite(), finite(), finite(), any::<u32>(), prop::option::of(1usize..100)).prop_map(
        |(k_offset, k_curv, theta_max, alpha, hold_frames, moving_average)| SteeringParams {
            k_offset,
            k_curv,
            theta_max,
            alpha,
            hold_frames,
            moving_average,
        },
    );
    let outcome = prop_oneof![
        Just(RunOutcome::Completed),
        (any::<u64>(), finite()).prop_map(|(frame_idx, deviation_m)| RunOutcome::OffTrack { frame_idx, deviation_m }),
    ];
    let meta = ("[0-9a-f]{64}", any::<u64>(), 1usize..4096, steering, outcome).prop_map(
        |(config_hash, seed, image_width, steering, outcome)| RunMeta {
            config_hash,
            seed,
            image_width,
            steering,
            outcome,
        },
    );
    let samples = (-1e6f64..1e6, prop::collection::vec((sample(), 1e-9f64..100.0), 0..20)).prop_map(|(t0, rows)| {
        // the importer requires strictly increasing timestamps
        let mut t = t0;
        rows.into_iter()
            .map(|(s, dt)| {
                t += dt;
                RunSample { t, ..s }
            })
            .collect::<Vec<_>>()
    });
    (meta, samples).prop_map(|(meta, samples)| RunLog { meta, samples })
}

pub fn check_csv_round_trip(log: RunLog) -> Result<(), TestCaseError> {
    let text = export_csv(&log);
    let back = import_csv(&text).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(&back, &log);
    prop_assert_eq!(export_csv(&back), text);
    Ok(())
}

// full-run determinism

pub const DETERMINISM_CASES: u32 = 6;

pub fn determinism_case() -> impl Strategy<Value = (u64, bool, bool)> {
    (any::<u64>(), any::<bool>(), any::<bool>())
}

/// Two runs of the same short configuration produce byte-identical logs.
pub fn check_determinism((seed, high, curvy): (u64, bool, bool)) -> Result<(), TestCaseError> {
    let preset = if high { IlluminationPreset::high() } else { IlluminationPreset::low() };
    let kind = if curvy { TrackKind::SCurve } else { TrackKind::Oval };
    let mut cfg = SimConfig::new(kind, preset).map_err(|e| fail(e.to_string()))?;
    cfg.seed = seed;
    cfg.duration_s = 2.0;
    let a = export_csv(&run_closed_loop(&cfg).map_err(|e| fail(e.to_string()))?);
    let b = export_csv(&run_closed_loop(&cfg).map_err(|e| fail(e.to_string()))?);
    prop_assert!(a == b, "logs differ for seed {}", seed);
    Ok(())
}
