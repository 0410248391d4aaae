//! Raster containers, RGB to HSV conversion and HSV box thresholding.
//!
//! HSV is stored as `f32` triples: hue in degrees `[0, 360)`, saturation and
//! value in `[0, 1]`. Achromatic pixels (zero chroma) get hue 0 so masks are
//! deterministic. Binary masks use one byte per pixel holding 0 or 1.

mod pnm;

pub use pnm::{read_mask_pgm, read_pnm, write_mask_pgm, write_pnm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel layout of a [`Frame`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PixelFormat {
    Rgb8,
    Hsv,
    Gray8,
}

impl PixelFormat {
    pub fn channels(self) -> usize {
        match self {
            PixelFormat::Rgb8 | PixelFormat::Hsv => 3,
            PixelFormat::Gray8 => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FrameData {
    Rgb8(Vec<u8>),
    Hsv(Vec<f32>),
    Gray8(Vec<u8>),
}

/// Row-major raster image.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: FrameData,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: FrameData) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        let frame = Frame {
            width,
            height,
            data,
        };
        let expected = width * height * frame.format().channels();
        let len = match &frame.data {
            FrameData::Rgb8(d) | FrameData::Gray8(d) => d.len(),
            FrameData::Hsv(d) => d.len(),
        };
        if len != expected {
            return Err(Error::invalid(format!(
                "buffer holds {len} values, {width}x{height} {:?} needs {expected}",
                frame.format()
            )));
        }
        if let FrameData::Hsv(d) = &frame.data {
            let bad = d.chunks_exact(3).any(|p| {
                !(0.0..360.0).contains(&p[0])
                    || !(0.0..=1.0).contains(&p[1])
                    || !(0.0..=1.0).contains(&p[2])
            });
            if bad {
                return Err(Error::invalid("HSV component out of range"));
            }
        }
        Ok(frame)
    }

    pub fn from_rgb8(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, FrameData::Rgb8(data))
    }

    pub fn from_gray8(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, FrameData::Gray8(data))
    }

    pub fn from_hsv(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(width, height, FrameData::Hsv(data))
    }

    /// Uniform RGB frame.
    pub fn filled_rgb(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::from_rgb8(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn format(&self) -> PixelFormat {
        match self.data {
            FrameData::Rgb8(_) => PixelFormat::Rgb8,
            FrameData::Hsv(_) => PixelFormat::Hsv,
            FrameData::Gray8(_) => PixelFormat::Gray8,
        }
    }

    pub fn data(&self) -> &FrameData {
        &self.data
    }

    pub fn into_data(self) -> FrameData {
        self.data
    }

    pub fn rgb8(&self) -> Result<&[u8]> {
        match &self.data {
            FrameData::Rgb8(d) => Ok(d),
            _ => Err(Error::invalid(format!(
                "expected RGB8 frame, got {:?}",
                self.format()
            ))),
        }
    }

    pub fn hsv(&self) -> Result<&[f32]> {
        match &self.data {
            FrameData::Hsv(d) => Ok(d),
            _ => Err(Error::invalid(format!(
                "expected HSV frame, got {:?}",
                self.format()
            ))),
        }
    }

    pub fn gray8(&self) -> Result<&[u8]> {
        match &self.data {
            FrameData::Gray8(d) => Ok(d),
            _ => Err(Error::invalid(format!(
                "expected GRAY8 frame, got {:?}",
                self.format()
            ))),
        }
    }

    /// RGB triple at `(x, y)`; panics on a non-RGB frame or out-of-range index.
    pub fn rgb_at(&self, x: usize, y: usize) -> [u8; 3] {
        let d = self.rgb8().expect("rgb_at on non-RGB frame");
        let i = (y * self.width + x) * 3;
        [d[i], d[i + 1], d[i + 2]]
    }

    pub fn hsv_at(&self, x: usize, y: usize) -> [f32; 3] {
        let d = self.hsv().expect("hsv_at on non-HSV frame");
        let i = (y * self.width + x) * 3;
        [d[i], d[i + 1], d[i + 2]]
    }
}

/// Inclusive HSV box. No hue wraparound: `h_low <= h_high`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsvThreshold {
    pub h_low: f32,
    pub h_high: f32,
    pub s_low: f32,
    pub s_high: f32,
    pub v_low: f32,
    pub v_high: f32,
}

impl HsvThreshold {
    pub fn new(h: (f32, f32), s: (f32, f32), v: (f32, f32)) -> Result<Self> {
        let t = HsvThreshold {
            h_low: h.0,
            h_high: h.1,
            s_low: s.0,
            s_high: s.1,
            v_low: v.0,
            v_high: v.1,
        };
        t.validate()?;
        Ok(t)
    }

    /// Box covering every HSV value.
    pub fn everything() -> Self {
        HsvThreshold {
            h_low: 0.0,
            h_high: 360.0,
            s_low: 0.0,
            s_high: 1.0,
            v_low: 0.0,
            v_high: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.h_low,
            self.h_high,
            self.s_low,
            self.s_high,
            self.v_low,
            self.v_high,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("threshold bounds must be finite"));
        }
        if self.h_low > self.h_high || self.s_low > self.s_high || self.v_low > self.v_high {
            return Err(Error::config(format!(
                "threshold bounds out of order: {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, h: f32, s: f32, v: f32) -> bool {
        self.h_low <= h
            && h <= self.h_high
            && self.s_low <= s
            && s <= self.s_high
            && self.v_low <= v
            && v <= self.v_high
    }
}

/// One byte per pixel, each 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be positive"));
        }
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask buffer holds {} values, expected {}",
                bits.len(),
                width * height
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y) as u8);
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn full_region(&self) -> RectRegion {
        RectRegion {
            x0: 0,
            y0: 0,
            x1: self.width,
            y1: self.height,
        }
    }
}

/// Pixel rectangle, inclusive start and exclusive end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RectRegion {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl RectRegion {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        RectRegion { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Checks `0 <= x0 < x1 <= width` and `0 <= y0 < y1 <= height`.
    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        if self.x0 >= self.x1 || self.y0 >= self.y1 {
            return Err(Error::invalid(format!("empty region {self:?}")));
        }
        if self.x1 > width || self.y1 > height {
            return Err(Error::invalid(format!(
                "region {self:?} exceeds {width}x{height} image"
            )));
        }
        Ok(())
    }

    /// Vertical midpoint in row units.
    pub fn center_row(&self) -> f64 {
        (self.y0 + self.y1) as f64 / 2.0
    }
}

#[inline]
fn rgb_pixel_to_hsv(r: u8, g: u8, b: u8) -> [f32; 3] {
    let (rf, gf, bf) = (r as f32, g as f32, b as f32);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let v = max as f32 / 255.0;
    if max == min {
        return [0.0, 0.0, v];
    }
    let delta = (max - min) as f32;
    let s = delta / max as f32;
    let mut h = if max == r {
        60.0 * ((gf - bf) / delta)
    } else if max == g {
        60.0 * ((bf - rf) / delta + 2.0)
    } else {
        60.0 * ((rf - gf) / delta + 4.0)
    };
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    [h, s, v]
}

/// Hexcone RGB to HSV, per pixel.
pub fn rgb_to_hsv(frame: &Frame) -> Result<Frame> {
    let rgb = frame.rgb8()?;
    let mut out = Vec::with_capacity(rgb.len());
    for px in rgb.chunks_exact(3) {
        out.extend_from_slice(&rgb_pixel_to_hsv(px[0], px[1], px[2]));
    }
    Ok(Frame {
        width: frame.width,
        height: frame.height,
        data: FrameData::Hsv(out),
    })
}

/// Single-pixel HSV to RGB in `[0, 1]` floating point.
#[inline]
pub fn hsv_to_rgb_f32(h: f32, s: f32, v: f32) -> [f32; 3] {
    let c = v * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - ((hp % 2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

#[inline]
pub(crate) fn unit_to_u8(v: f32) -> u8 {
    // the float-to-int cast saturates and maps NaN to 0
    (v * 255.0 + 0.5) as u8
}

/// Single-pixel HSV to 8-bit RGB.
pub fn hsv_pixel_to_rgb8(h: f32, s: f32, v: f32) -> [u8; 3] {
    let [r, g, b] = hsv_to_rgb_f32(h, s, v);
    [unit_to_u8(r), unit_to_u8(g), unit_to_u8(b)]
}

/// HSV frame back to RGB8.
pub fn hsv_to_rgb(frame: &Frame) -> Result<Frame> {
    let hsv = frame.hsv()?;
    let mut out = Vec::with_capacity(hsv.len());
    for px in hsv.chunks_exact(3) {
        out.extend_from_slice(&hsv_pixel_to_rgb8(px[0], px[1], px[2]));
    }
    Ok(Frame {
        width: frame.width,
        height: frame.height,
        data: FrameData::Rgb8(out),
    })
}

/// `mask(p) = 1` iff every channel of `p` lies inclusively inside `t`.
pub fn threshold_mask(frame: &Frame, t: &HsvThreshold) -> Result<BinaryMask> {
    t.validate()?;
    let hsv = frame.hsv()?;
    let bits = hsv
        .chunks_exact(3)
        .map(|p| t.contains(p[0], p[1], p[2]) as u8)
        .collect();
    Ok(BinaryMask {
        width: frame.width,
        height: frame.height,
        bits,
    })
}

/// Fraction of set pixels inside `roi`.
pub fn mask_coverage(mask: &BinaryMask, roi: &RectRegion) -> Result<f64> {
    roi.check_within(mask.width, mask.height)?;
    let ones: usize = (roi.y0..roi.y1)
        .map(|y| {
            let row = &mask.bits[y * mask.width + roi.x0..y * mask.width + roi.x1];
            row.iter().map(|&b| b as usize).sum::<usize>()
        })
        .sum();
    Ok(ones as f64 / roi.area() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(r: u8, g: u8, b: u8) -> [f32; 3] {
        let f = Frame::from_rgb8(1, 1, vec![r, g, b]).unwrap();
        rgb_to_hsv(&f).unwrap().hsv_at(0, 0)
    }

    #[test]
    fn hsv_reference_pixels() {
        assert_eq!(px(255, 0, 0), [0.0, 1.0, 1.0]);
        let gray = px(128, 128, 128);
        assert_eq!(gray[0], 0.0);
        assert_eq!(gray[1], 0.0);
        assert!((gray[2] - 0.502).abs() < 1e-3);
        assert_eq!(px(0, 0, 255), [240.0, 1.0, 1.0]);
        assert_eq!(px(0, 255, 0), [120.0, 1.0, 1.0]);
        assert_eq!(px(0, 0, 0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn rgb_to_hsv_rejects_wrong_layout() {
        let f = Frame::from_gray8(2, 2, vec![0; 4]).unwrap();
        assert!(matches!(rgb_to_hsv(&f), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hsv_round_trip_is_within_one_step() {
        for r in (0..=255).step_by(5) {
            for g in (0..=255).step_by(7) {
                for b in (0..=255).step_by(11) {
                    let [h, s, v] = px(r as u8, g as u8, b as u8);
                    let back = hsv_pixel_to_rgb8(h, s, v);
                    for (a, e) in back.iter().zip([r, g, b]) {
                        assert!((*a as i32 - e).abs() <= 1, "{r},{g},{b} -> {back:?}");
                    }
                }
            }
        }
    }

    fn t_box() -> HsvThreshold {
        HsvThreshold::new((100.0, 140.0), (0.2, 0.8), (0.2, 0.8)).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let f = Frame::from_hsv(2, 1, vec![120.0, 0.5, 0.5, 120.0, 0.5, 0.9]).unwrap();
        let m = threshold_mask(&f, &t_box()).unwrap();
        assert_eq!(m.bits(), &[1, 0]);
    }

    #[test]
    fn threshold_boundaries_are_inclusive() {
        let f = Frame::from_hsv(2, 1, vec![100.0, 0.2, 0.2, 140.0, 0.8, 0.8]).unwrap();
        let m = threshold_mask(&f, &t_box()).unwrap();
        assert_eq!(m.bits(), &[1, 1]);
    }

    #[test]
    fn uniform_in_range_frame_matches_per_pixel_oracle() {
        let data: Vec<f32> = [120.0f32, 0.5, 0.5].repeat(16);
        let f = Frame::from_hsv(4, 4, data).unwrap();
        let t = t_box();
        let m = threshold_mask(&f, &t).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let [h, s, v] = f.hsv_at(x, y);
                let oracle = (t.h_low <= h && h <= t.h_high)
                    && (t.s_low <= s && s <= t.s_high)
                    && (t.v_low <= v && v <= t.v_high);
                assert_eq!(m.get(x, y), oracle);
            }
        }
        assert_eq!(m.count_ones(), 16);
    }

    #[test]
    fn disordered_threshold_is_config_error() {
        let f = Frame::from_hsv(1, 1, vec![0.0, 0.0, 0.0]).unwrap();
        let t = HsvThreshold {
            s_low: 0.9,
            s_high: 0.1,
            ..HsvThreshold::everything()
        };
        assert!(matches!(threshold_mask(&f, &t), Err(Error::Config(_))));
        assert!(HsvThreshold::new((10.0, 5.0), (0.0, 1.0), (0.0, 1.0)).is_err());
    }

    #[test]
    fn coverage_examples() {
        let zeros = BinaryMask::zeros(10, 10);
        let roi = zeros.full_region();
        assert_eq!(mask_coverage(&zeros, &roi).unwrap(), 0.0);
        let ones = BinaryMask::from_fn(10, 10, |_, _| true);
        assert_eq!(mask_coverage(&ones, &roi).unwrap(), 1.0);
        let quarter = BinaryMask::from_fn(10, 10, |x, y| x < 5 && y < 5);
        assert_eq!(mask_coverage(&quarter, &roi).unwrap(), 0.25);
    }

    #[test]
    fn coverage_rejects_out_of_bounds_roi() {
        let m = BinaryMask::zeros(10, 10);
        assert!(mask_coverage(&m, &RectRegion::new(0, 0, 11, 10)).is_err());
        assert!(mask_coverage(&m, &RectRegion::new(3, 3, 3, 5)).is_err());
    }

    #[test]
    fn frame_rejects_bad_buffers() {
        assert!(Frame::from_rgb8(2, 2, vec![0; 11]).is_err());
        assert!(Frame::from_rgb8(0, 2, vec![]).is_err());
        assert!(Frame::from_hsv(1, 1, vec![360.0, 0.5, 0.5]).is_err());
        assert!(BinaryMask::from_bits(2, 1, vec![0, 2]).is_err());
    }
}
