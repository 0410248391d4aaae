//! Threshold calibration: grid search over HSV boxes maximizing mean IoU
//! against ground-truth masks.
//!
//! Each frame is reduced once to a cumulative 3-D histogram of all pixels
//! and of ground-truth pixels, so the IoU of any bin-aligned box costs 16
//! table lookups per frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{rgb_to_hsv, threshold_mask, BinaryMask, Frame, HsvThreshold, PixelFormat};

const H_BINS: usize = 90;
const S_BINS: usize = 64;
const V_BINS: usize = 64;
const H_STEP: f32 = 360.0 / H_BINS as f32;

#[derive(Clone, Debug)]
pub struct LabeledFrame {
    /// RGB8 or HSV.
    pub frame: Frame,
    pub truth: BinaryMask,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub threshold: HsvThreshold,
    pub mean_iou: f64,
}

/// Intersection over union; two empty masks agree perfectly.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::invalid("masks differ in size"));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x & y) as usize;
        union += (x | y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

fn as_hsv(f: &Frame) -> Result<Frame> {
    match f.format() {
        PixelFormat::Hsv => Ok(f.clone()),
        PixelFormat::Rgb8 => rgb_to_hsv(f),
        PixelFormat::Gray8 => Err(Error::invalid("calibration needs colour frames")),
    }
}

/// Mean IoU of `t` over the labeled set, evaluated pixel by pixel.
pub fn mean_iou(samples: &[LabeledFrame], t: &HsvThreshold) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no labeled frames"));
    }
    let mut total = 0.0;
    for s in samples {
        let m = threshold_mask(&as_hsv(&s.frame)?, t)?;
        total += iou(&m, &s.truth)?;
    }
    Ok(total / samples.len() as f64)
}

struct Cube {
    all: Vec<u32>,
    pos: Vec<u32>,
    positives: u32,
}

const SH: usize = S_BINS + 1;
const VH: usize = V_BINS + 1;

#[inline]
fn idx(h: usize, s: usize, v: usize) -> usize {
    (h * SH + s) * VH + v
}

fn bin_of(hsv: &[f32]) -> (usize, usize, usize) {
    let h = ((hsv[0] / H_STEP) as usize).min(H_BINS - 1);
    let s = ((hsv[1] * S_BINS as f32) as usize).min(S_BINS - 1);
    let v = ((hsv[2] * V_BINS as f32) as usize).min(V_BINS - 1);
    (h, s, v)
}

impl Cube {
    fn build(sample: &LabeledFrame) -> Result<Cube> {
        let hsv = as_hsv(&sample.frame)?;
        if hsv.width() != sample.truth.width() || hsv.height() != sample.truth.height() {
            return Err(Error::invalid("frame and ground-truth mask differ in size"));
        }
        let n = (H_BINS + 1) * SH * VH;
        let mut all = vec![0u32; n];
        let mut pos = vec![0u32; n];
        let mut positives = 0;
        for (px, &t) in hsv.hsv()?.chunks_exact(3).zip(sample.truth.bits()) {
            let (h, s, v) = bin_of(px);
            let i = idx(h + 1, s + 1, v + 1);
            all[i] += 1;
            pos[i] += t as u32;
            positives += t as u32;
        }
        for table in [&mut all, &mut pos] {
            for h in 1..=H_BINS {
                for s in 1..=S_BINS {
                    for v in 1..=V_BINS {
                        table[idx(h, s, v)] += table[idx(h, s, v - 1)];
                    }
                }
            }
            for h in 1..=H_BINS {
                for s in 1..=S_BINS {
                    for v in 1..=V_BINS {
                        table[idx(h, s, v)] += table[idx(h, s - 1, v)];
                    }
                }
            }
            for h in 1..=H_BINS {
                for s in 1..=S_BINS {
                    for v in 1..=V_BINS {
                        table[idx(h, s, v)] += table[idx(h - 1, s, v)];
                    }
                }
            }
        }
        Ok(Cube { all, pos, positives })
    }

    fn box_sum(t: &[u32], b: &GridBox) -> i64 {
        let [h0, h1, s0, s1, v0, v1] = b.0;
        let g = |h, s, v| t[idx(h, s, v)] as i64;
        g(h1, s1, v1) - g(h0, s1, v1) - g(h1, s0, v1) - g(h1, s1, v0) + g(h0, s0, v1) + g(h0, s1, v0)
            + g(h1, s0, v0)
            - g(h0, s0, v0)
    }

    fn iou(&self, b: &GridBox) -> f64 {
        let tp = Self::box_sum(&self.pos, b);
        let pred = Self::box_sum(&self.all, b);
        let union = self.positives as i64 + pred - tp;
        if union == 0 {
            1.0
        } else {
            tp as f64 / union as f64
        }
    }
}

/// Half-open bin ranges `[h0, h1) x [s0, s1) x [v0, v1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct GridBox([usize; 6]);

const LIMITS: [usize; 6] = [H_BINS, H_BINS, S_BINS, S_BINS, V_BINS, V_BINS];

impl GridBox {
    fn valid(&self) -> bool {
        let b = &self.0;
        b[0] < b[1] && b[2] < b[3] && b[4] < b[5] && b[1] <= H_BINS && b[3] <= S_BINS && b[5] <= V_BINS
    }

    fn threshold(&self) -> HsvThreshold {
        let [h0, h1, s0, s1, v0, v1] = self.0;
        let below = |x: f32| f32::from_bits(x.to_bits() - 1);
        let upper = |edge: usize, bins: usize, top: f32, step: f32| {
            if edge == bins && top == 1.0 {
                1.0
            } else {
                below(edge as f32 * step)
            }
        };
        HsvThreshold {
            h_low: h0 as f32 * H_STEP,
            h_high: upper(h1, H_BINS, 360.0, H_STEP),
            s_low: s0 as f32 / S_BINS as f32,
            s_high: upper(s1, S_BINS, 1.0, 1.0 / S_BINS as f32),
            v_low: v0 as f32 / V_BINS as f32,
            v_high: upper(v1, V_BINS, 1.0, 1.0 / V_BINS as f32),
        }
    }
}

fn score(cubes: &[Cube], b: &GridBox) -> f64 {
    cubes.iter().map(|c| c.iou(b)).sum::<f64>() / cubes.len() as f64
}

fn edges(bins: usize, step: usize) -> Vec<usize> {
    let mut e: Vec<usize> = (0..=bins).step_by(step).collect();
    if *e.last().unwrap() != bins {
        e.push(bins);
    }
    e
}

fn pairs(e: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &a) in e.iter().enumerate() {
        for &b in &e[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

/// Coarse grid over all boxes, then coordinate descent at single-bin
/// resolution. Strict improvements only, so the result is deterministic.
pub fn calibrate_thresholds(samples: &[LabeledFrame]) -> Result<CalibrationResult> {
    if samples.is_empty() {
        return Err(Error::invalid("calibration needs at least one labeled frame"));
    }
    let cubes = samples.iter().map(Cube::build).collect::<Result<Vec<_>>>()?;

    let hp = pairs(&edges(H_BINS, 6));
    let sp = pairs(&edges(S_BINS, 8));
    let vp = pairs(&edges(V_BINS, 8));
    let mut best = GridBox([0, H_BINS, 0, S_BINS, 0, V_BINS]);
    let mut best_score = score(&cubes, &best);
    for &(h0, h1) in &hp {
        for &(s0, s1) in &sp {
            for &(v0, v1) in &vp {
                let b = GridBox([h0, h1, s0, s1, v0, v1]);
                let sc = score(&cubes, &b);
                if sc > best_score {
                    best_score = sc;
                    best = b;
                }
            }
        }
    }

    for _round in 0..64 {
        let mut improved = false;
        for k in 0..6 {
            for val in 0..=LIMITS[k] {
                let mut cand = best;
                cand.0[k] = val;
                if !cand.valid() {
                    continue;
                }
                let sc = score(&cubes, &cand);
                if sc > best_score {
                    best_score = sc;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let threshold = best.threshold();
    Ok(CalibrationResult {
        threshold,
        mean_iou: mean_iou(samples, &threshold)?,
    })
}
