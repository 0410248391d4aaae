//! Image perturbations: horizontal motion blur, HSV colour shift, sensor
//! noise.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{hsv_pixel_to_rgb8, Frame, FrameData};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Length-`k` horizontal box kernel with zero padding.
    MotionBlur { k: usize },
    /// Added in HSV (hue in degrees, wrapping), then clamped.
    ColorShift { dh: f32, ds: f32, dv: f32 },
    /// Gaussian noise per 8-bit channel, `sigma` in units of full scale.
    GaussianNoise { sigma: f32 },
}

impl Perturbation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Perturbation::MotionBlur { k } if k < 1 => Err(Error::config("motion blur length must be >= 1")),
            Perturbation::GaussianNoise { sigma } if !(sigma >= 0.0) || !sigma.is_finite() => {
                Err(Error::config("noise sigma must be finite and >= 0"))
            }
            Perturbation::ColorShift { dh, ds, dv } if !(dh.is_finite() && ds.is_finite() && dv.is_finite()) => {
                Err(Error::config("colour shift must be finite"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::MotionBlur { k } => write!(f, "motion_blur={k}"),
            Perturbation::ColorShift { dh, ds, dv } => write!(f, "color={dh}:{ds}:{dv}"),
            Perturbation::GaussianNoise { sigma } => write!(f, "noise={sigma}"),
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(format!("bad value {v:?} for {key}")))
}

/// Parses `motion_blur=K,noise=S,color=H:S:V` (any subset, any order).
pub fn parse_perturbations(spec: &str) -> Result<Vec<Perturbation>> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, val) = item
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value, got {item:?}")))?;
        let p = match key.trim() {
            "motion_blur" => Perturbation::MotionBlur { k: num(key, val)? },
            "noise" => Perturbation::GaussianNoise { sigma: num(key, val)? },
            "color" => {
                let parts: Vec<&str> = val.split(':').collect();
                let [h, s, v] = parts[..] else {
                    return Err(Error::config(format!("color needs H:S:V, got {val:?}")));
                };
                Perturbation::ColorShift {
                    dh: num(key, h)?,
                    ds: num(key, s)?,
                    dv: num(key, v)?,
                }
            }
            other => return Err(Error::config(format!("unknown perturbation {other:?}"))),
        };
        p.validate()?;
        out.push(p);
    }
    Ok(out)
}

fn map_channels(frame: &Frame, f: impl FnOnce(&[u8], usize, usize, usize) -> Vec<u8>) -> Result<Frame> {
    let (w, h) = (frame.width(), frame.height());
    match frame.data() {
        FrameData::Rgb8(d) => Frame::from_rgb8(w, h, f(d, w, h, 3)),
        FrameData::Gray8(d) => Frame::from_gray8(w, h, f(d, w, h, 1)),
        FrameData::Hsv(_) => Err(Error::invalid("perturbations apply to 8-bit frames")),
    }
}

fn motion_blur(frame: &Frame, k: usize) -> Result<Frame> {
    let lo = (k - 1) / 2;
    map_channels(frame, |d, w, h, c| {
        let mut out = vec![0u8; d.len()];
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let mut sum = 0u32;
                    for t in 0..k {
                        let xs = x as isize + t as isize - lo as isize;
                        if (0..w as isize).contains(&xs) {
                            sum += d[(y * w + xs as usize) * c + ch] as u32;
                        }
                    }
                    out[(y * w + x) * c + ch] = (sum as f64 / k as f64).round() as u8;
                }
            }
        }
        out
    })
}

fn color_shift(frame: &Frame, dh: f32, ds: f32, dv: f32) -> Result<Frame> {
    let hsv = crate::imaging::rgb_to_hsv(frame)?;
    let mut out = Vec::with_capacity(frame.width() * frame.height() * 3);
    for p in hsv.hsv()?.chunks_exact(3) {
        let h = (p[0] + dh).rem_euclid(360.0);
        let s = (p[1] + ds).clamp(0.0, 1.0);
        let v = (p[2] + dv).clamp(0.0, 1.0);
        out.extend_from_slice(&hsv_pixel_to_rgb8(h, s, v));
    }
    Frame::from_rgb8(frame.width(), frame.height(), out)
}

fn gaussian_noise(frame: &Frame, sigma: f32, seed: u64) -> Result<Frame> {
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let normal = Normal::new(0.0f32, sigma * 255.0).map_err(|e| Error::config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    map_channels(frame, |d, _, _, _| {
        d.iter()
            .map(|&v| (v as f32 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
            .collect()
    })
}

/// Applies one perturbation. Deterministic given `seed`.
pub fn perturb(frame: &Frame, p: &Perturbation, seed: u64) -> Result<Frame> {
    p.validate()?;
    match *p {
        Perturbation::MotionBlur { k: 1 } => Ok(frame.clone()),
        Perturbation::MotionBlur { k } => motion_blur(frame, k),
        Perturbation::ColorShift { dh, ds, dv } => color_shift(frame, dh, ds, dv),
        Perturbation::GaussianNoise { sigma } => gaussian_noise(frame, sigma, seed),
    }
}

/// Applies a chain in order, deriving a distinct seed for each step.
pub fn perturb_all(frame: &Frame, chain: &[Perturbation], seed: u64) -> Result<Frame> {
    let mut cur = frame.clone();
    for (i, p) in chain.iter().enumerate() {
        cur = perturb(&cur, p, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64))?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Frame {
        let data = (0..6 * 4 * 3).map(|i| (i * 7 % 256) as u8).collect();
        Frame::from_rgb8(6, 4, data).unwrap()
    }

    #[test]
    fn identities() {
        let f = ramp();
        assert_eq!(perturb(&f, &Perturbation::MotionBlur { k: 1 }, 0).unwrap(), f);
        assert_eq!(perturb(&f, &Perturbation::GaussianNoise { sigma: 0.0 }, 0).unwrap(), f);
    }

    #[test]
    fn impulse_blur_is_flat_streak() {
        let mut d = vec![0u8; 11 * 3];
        d[5] = 255;
        let f = Frame::from_gray8(11, 3, d).unwrap();
        let b = perturb(&f, &Perturbation::MotionBlur { k: 5 }, 0).unwrap();
        let g = b.gray8().unwrap();
        for x in 0..11 {
            assert_eq!(g[x], if (3..=7).contains(&x) { 51 } else { 0 }, "x={x}");
        }
        assert!(g[11..].iter().all(|&v| v == 0));
    }

    #[test]
    fn bad_params_are_rejected() {
        let f = ramp();
        assert!(perturb(&f, &Perturbation::MotionBlur { k: 0 }, 0).is_err());
        assert!(perturb(&f, &Perturbation::GaussianNoise { sigma: -0.1 }, 0).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let f = ramp();
        let p = Perturbation::GaussianNoise { sigma: 0.05 };
        assert_eq!(perturb(&f, &p, 4).unwrap(), perturb(&f, &p, 4).unwrap());
        assert_ne!(perturb(&f, &p, 4).unwrap(), perturb(&f, &p, 5).unwrap());
    }

    #[test]
    fn colour_shift_clamps() {
        let f = Frame::filled_rgb(2, 2, [200, 30, 30]).unwrap();
        let g = perturb(&f, &Perturbation::ColorShift { dh: 0.0, ds: 0.0, dv: 1.0 }, 0).unwrap();
        assert_eq!(g.rgb_at(0, 0)[0], 255);
        let g = perturb(&f, &Perturbation::ColorShift { dh: 120.0, ds: 0.0, dv: 0.0 }, 0).unwrap();
        let [r, gg, b] = g.rgb_at(1, 1);
        assert!(gg > r && gg > b);
    }

    #[test]
    fn parse_spec() {
        let ps = parse_perturbations("motion_blur=3, noise=0.02,color=10:-0.1:0.05").unwrap();
        assert_eq!(
            ps,
            vec![
                Perturbation::MotionBlur { k: 3 },
                Perturbation::GaussianNoise { sigma: 0.02 },
                Perturbation::ColorShift { dh: 10.0, ds: -0.1, dv: 0.05 },
            ]
        );
        assert_eq!(ps[2].to_string(), "color=10:-0.1:0.05");
        assert!(parse_perturbations("blur=3").is_err());
        assert!(parse_perturbations("color=1:2").is_err());
        assert!(parse_perturbations("").unwrap().is_empty());
    }
}
