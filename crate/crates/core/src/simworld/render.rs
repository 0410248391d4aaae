//! Synthetic camera: the track is painted in vehicle-local ground
//! coordinates and projected into the camera through the inverse of the
//! pipeline's bird's-eye homography, so the pipeline warp undoes it exactly.

use std::sync::OnceLock;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::track::{FastSegment, HsvColor, TrackSpec};
use super::vehicle::VehicleState;
use crate::error::{Error, Result};
use crate::geometry::Homography;
use crate::imaging::{hsv_to_rgb_f32, BinaryMask, Frame, HsvThreshold};

/// Ground beyond this distance ahead is drawn as plain background.
pub const RENDER_RANGE_M: f64 = 3.0;

const SKY: HsvColor = [0.0, 0.0, 0.9];

const NOISE_TABLE_BITS: u32 = 16;

/// Fixed table of standard normal draws. Per-pixel noise picks entries with
/// 16-bit indices from the frame's random stream, four per 64-bit word.
fn noise_table() -> &'static [f32] {
    static TABLE: OnceLock<Vec<f32>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e6f_6973_6500);
        (0..1usize << NOISE_TABLE_BITS)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    })
}

/// Maps bird's-eye pixels to ground coordinates relative to the rear axle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub px_per_m: f64,
    /// Ground distance from the rear axle to the bottom edge of the
    /// bird's-eye view.
    pub near_m: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            px_per_m: 480.0,
            near_m: 0.2,
        }
    }
}

impl CameraModel {
    /// `(forward, right)` in meters for bird's-eye pixel `(u, v)`.
    pub fn ground_of(&self, u: f64, v: f64, be_w: usize, be_h: usize) -> (f64, f64) {
        let right = (u - be_w as f64 / 2.0) / self.px_per_m;
        let forward = self.near_m + (be_h as f64 - v) / self.px_per_m;
        (forward, right)
    }

    /// Bird's-eye column of a lateral position, the inverse of [`Self::ground_of`].
    pub fn column_of(&self, right_m: f64, be_w: usize) -> f64 {
        right_m * self.px_per_m + be_w as f64 / 2.0
    }
}

/// Soft diagonal highlight across the camera image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Streak {
    /// Horizontal position at mid-height, as a fraction of frame width.
    pub x_center: f64,
    /// Horizontal drift per row.
    pub slope: f64,
    pub half_width_px: f64,
    pub v_boost: f32,
    pub s_cut: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IlluminationPreset {
    pub name: String,
    /// Label only; no photometry is simulated.
    pub lux: f64,
    pub v_gain: f32,
    pub noise_sigma: f32,
    #[serde(default)]
    pub streak: Option<Streak>,
    pub thresholds: HsvThreshold,
}

impl IlluminationPreset {
    pub fn low() -> Self {
        IlluminationPreset {
            name: "low".into(),
            lux: 282.82,
            v_gain: 0.6,
            noise_sigma: 0.02,
            streak: None,
            // calibrated on SimConfig::labeled_frames(8, 7) with seed 99
            thresholds: HsvThreshold {
                h_low: 0.0,
                h_high: 359.99997,
                s_low: 0.0,
                s_high: 1.0,
                v_low: 0.0,
                v_high: 0.24999999,
            },
        }
    }

    pub fn high() -> Self {
        IlluminationPreset {
            name: "high".into(),
            lux: 487.90,
            v_gain: 1.0,
            noise_sigma: 0.02,
            streak: Some(Streak {
                x_center: 0.62,
                slope: 0.35,
                half_width_px: 70.0,
                v_boost: 0.075,
                s_cut: 0.15,
            }),
            // calibrated on SimConfig::labeled_frames(8, 7) with seed 99
            thresholds: HsvThreshold {
                h_low: 0.0,
                h_high: 287.99997,
                s_low: 0.0,
                s_high: 1.0,
                v_low: 0.0,
                v_high: 0.49999997,
            },
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "low" => Ok(Self::low()),
            "high" => Ok(Self::high()),
            other => Err(Error::config(format!("unknown preset {other:?} (expected low or high)"))),
        }
    }

    /// The lux value as written into run logs.
    pub fn lux_label(&self) -> String {
        format!("{:.2}", self.lux)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_gain > 0.0) {
            return Err(Error::config("v_gain must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::config("noise_sigma must be non-negative"));
        }
        self.thresholds.validate()
    }
}

/// Per-pixel state fixed for a camera, preset and track palette.
#[derive(Clone, Debug)]
pub struct Renderer {
    width: usize,
    height: usize,
    // (forward, right) per camera pixel; NaN above the horizon
    ground: Vec<[f32; 2]>,
    // class of every pixel when no marking is nearby: 2 sky, 0 background
    base_classes: Vec<u8>,
    tiles: Vec<Tile>,
    // farthest visible ground point from the rear axle
    reach_m: f64,
    // colours in 8-bit units
    marking_rgb: Vec<[f32; 3]>,
    background_rgb: Vec<[f32; 3]>,
    sky_rgb: [f32; 3],
    /// Noise table scaled to 8-bit units; empty when noise is off.
    noise_lut: Vec<f32>,
}

const TILE: usize = 16;

/// Block of pixels with in-range ground, bounded by a circle in
/// vehicle-local ground coordinates.
#[derive(Clone, Copy, Debug)]
struct Tile {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
    center: [f64; 2],
    radius: f64,
}

fn visible(g: [f32; 2]) -> bool {
    !g[0].is_nan() && g[0] as f64 <= RENDER_RANGE_M
}

fn build_tiles(ground: &[[f32; 2]], w: usize, h: usize) -> Vec<Tile> {
    let mut tiles = Vec::new();
    for y0 in (0..h).step_by(TILE) {
        for x0 in (0..w).step_by(TILE) {
            let (x1, y1) = ((x0 + TILE).min(w), (y0 + TILE).min(h));
            let pts: Vec<[f64; 2]> = (y0..y1)
                .flat_map(|y| (x0..x1).map(move |x| y * w + x))
                .map(|i| ground[i])
                .filter(|g| visible(*g))
                .map(|g| [g[0] as f64, g[1] as f64])
                .collect();
            if pts.is_empty() {
                continue;
            }
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in &pts {
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
            let radius = pts
                .iter()
                .map(|p| (p[0] - center[0]).hypot(p[1] - center[1]))
                .fold(0.0, f64::max);
            tiles.push(Tile {
                x0,
                y0,
                x1,
                y1,
                center,
                radius: radius * (1.0 + 1e-9) + 1e-9,
            });
        }
    }
    tiles
}

fn lit(c: HsvColor, gain: f32, glow: f32, streak: Option<&Streak>) -> [f32; 3] {
    let (s_cut, v_boost) = streak.map_or((0.0, 0.0), |s| (s.s_cut, s.v_boost));
    let s = c[1] * (1.0 - s_cut * glow);
    let v = (c[2] * gain + v_boost * glow).min(1.0);
    hsv_to_rgb_f32(c[0], s, v).map(|x| x * 255.0)
}

impl Renderer {
    /// `to_birdseye` maps camera pixels to bird's-eye pixels.
    pub fn new(
        track: &TrackSpec,
        preset: &IlluminationPreset,
        camera: &CameraModel,
        to_birdseye: &Homography,
        frame: (usize, usize),
        birdseye: (usize, usize),
    ) -> Result<Self> {
        preset.validate()?;
        let (w, h) = frame;
        if w == 0 || h == 0 {
            return Err(Error::invalid("frame size must be positive"));
        }
        // the bottom-centre pixel is on the ground, fixing the visible sign
        let (_, _, ref_den) = to_birdseye.apply_raw(w as f64 / 2.0, h as f64 - 1.0);
        let mut ground = Vec::with_capacity(w * h);
        let mut marking_rgb = Vec::with_capacity(w * h);
        let mut background_rgb = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (u, v, den) = to_birdseye.apply_raw(x as f64, y as f64);
                if den * ref_den > 0.0 {
                    let (f, r) = camera.ground_of(u, v, birdseye.0, birdseye.1);
                    ground.push([f as f32, r as f32]);
                } else {
                    ground.push([f32::NAN; 2]);
                }
                let glow = preset.streak.as_ref().map_or(0.0, |s| {
                    let xl = s.x_center * w as f64 + s.slope * (y as f64 - h as f64 / 2.0);
                    let d = (x as f64 - xl).abs() / (1.0 + s.slope * s.slope).sqrt();
                    (-(d / s.half_width_px).powi(2)).exp() as f32
                });
                marking_rgb.push(lit(track.track_color, preset.v_gain, glow, preset.streak.as_ref()));
                background_rgb.push(lit(
                    track.background_color,
                    preset.v_gain,
                    glow,
                    preset.streak.as_ref(),
                ));
            }
        }
        let base_classes = ground.iter().map(|g| if g[0].is_nan() { 2 } else { 0 }).collect();
        let tiles = build_tiles(&ground, w, h);
        let reach_m = ground
            .iter()
            .filter(|g| visible(**g))
            .map(|g| (g[0] as f64).hypot(g[1] as f64))
            .fold(0.0, f64::max);
        Ok(Renderer {
            width: w,
            height: h,
            ground,
            base_classes,
            tiles,
            reach_m,
            marking_rgb,
            background_rgb,
            sky_rgb: lit(SKY, preset.v_gain, 0.0, None),
            noise_lut: if preset.noise_sigma > 0.0 {
                noise_table().iter().map(|z| z * preset.noise_sigma * 255.0).collect()
            } else {
                Vec::new()
            },
        })
    }

    fn paint(&self, track: &TrackSpec, state: &VehicleState) -> Vec<u8> {
        let (sn, cs) = state.heading.sin_cos();
        let half_lane = track.lane_width / 2.0;
        let half_mark = track.marking_width / 2.0;
        let band = (half_lane - half_mark - 1e-9, half_lane + half_mark + 1e-9);
        let near = track.segments_near([state.x, state.y], self.reach_m + band.1);
        let segs: Vec<_> = near.iter().map(|&i| FastSegment::new(&track.segments[i])).collect();
        // forward along the heading, right is the heading rotated clockwise
        let to_world = |f: f64, r: f64| [state.x + f * cs + r * sn, state.y + f * sn - r * cs];
        let nearest = |p| segs.iter().map(|s: &FastSegment| s.distance(p)).fold(f64::INFINITY, f64::min);
        let mut classes = self.base_classes.clone();
        for t in &self.tiles {
            // distance to the centerline is 1-Lipschitz, so a tile whose
            // bounding circle misses the marking band has no marking pixel
            let d = nearest(to_world(t.center[0], t.center[1]));
            if d + t.radius < band.0 || d - t.radius > band.1 {
                continue;
            }
            for y in t.y0..t.y1 {
                for x in t.x0..t.x1 {
                    let i = y * self.width + x;
                    let g = self.ground[i];
                    if visible(g) {
                        let d = nearest(to_world(g[0] as f64, g[1] as f64));
                        classes[i] = ((d - half_lane).abs() <= half_mark) as u8;
                    }
                }
            }
        }
        classes
    }

    fn shade(&self, classes: &[u8], seed: u64, frame_idx: u64) -> Frame {
        let mut rgb = Vec::with_capacity(classes.len() * 3);
        for (i, &c) in classes.iter().enumerate() {
            rgb.extend_from_slice(match c {
                1 => &self.marking_rgb[i],
                2 => &self.sky_rgb,
                _ => &self.background_rgb[i],
            });
        }
        if !self.noise_lut.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(frame_idx);
            let per_word = (64 / NOISE_TABLE_BITS) as usize;
            let mask = (1u64 << NOISE_TABLE_BITS) - 1;
            for chunk in rgb.chunks_mut(per_word) {
                let mut bits = rng.next_u64();
                for v in chunk {
                    *v += self.noise_lut[(bits & mask) as usize];
                    bits >>= NOISE_TABLE_BITS;
                }
            }
        }
        // the float-to-int cast saturates
        let data = rgb.into_iter().map(|v| (v + 0.5) as u8).collect();
        Frame::from_rgb8(self.width, self.height, data).expect("buffer sized to the frame")
    }

    /// Camera frame for `state`. Noise depends only on `(seed, frame_idx)`.
    pub fn render(&self, track: &TrackSpec, state: &VehicleState, seed: u64, frame_idx: u64) -> Frame {
        let classes = self.paint(track, state);
        self.shade(&classes, seed, frame_idx)
    }

    /// Camera frame plus the ground-truth marking mask.
    pub fn render_labeled(
        &self,
        track: &TrackSpec,
        state: &VehicleState,
        seed: u64,
        frame_idx: u64,
    ) -> (Frame, BinaryMask) {
        let classes = self.paint(track, state);
        let bits = classes.iter().map(|&c| (c == 1) as u8).collect();
        let mask = BinaryMask::from_bits(self.width, self.height, bits).expect("mask sized to the frame");
        (self.shade(&classes, seed, frame_idx), mask)
    }
}
