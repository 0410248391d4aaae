//! Column-histogram lane boundary detection on the bird's-eye mask.
//!
//! Offsets are signed pixels relative to the image midpoint (`width / 2`),
//! positive when the lane center lies right of the midpoint. Curvature is
//! the horizontal drift of the lane center per row between a near and a far
//! band, positive when the lane bends right going away from the vehicle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{mask_coverage, BinaryMask};

pub use crate::imaging::RectRegion;

/// Default floor under which a histogram peak is treated as noise.
pub const DEFAULT_MIN_PEAK_COUNT: u32 = 5;

/// Per-frame lane measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneEstimate {
    pub left_x: Option<usize>,
    pub right_x: Option<usize>,
    pub far_left_x: Option<usize>,
    pub far_right_x: Option<usize>,
    pub center_x: f64,
    pub offset_px: f64,
    pub curvature: f64,
    pub valid: bool,
    /// Near band found both boundaries but the far band did not; curvature
    /// was forced to 0.
    pub degraded: bool,
    /// Fraction of set pixels in the near band.
    pub coverage: f64,
}

impl LaneEstimate {
    pub fn invalid(coverage: f64) -> Self {
        LaneEstimate {
            left_x: None,
            right_x: None,
            far_left_x: None,
            far_right_x: None,
            center_x: f64::NAN,
            offset_px: f64::NAN,
            curvature: f64::NAN,
            valid: false,
            degraded: false,
            coverage,
        }
    }
}

/// Fractional row ranges of the two histogram bands plus the peak floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneParams {
    /// `[start, end)` of the near band as fractions of image height.
    pub near_band: [f64; 2],
    pub far_band: [f64; 2],
    pub min_peak_count: u32,
}

impl Default for LaneParams {
    fn default() -> Self {
        LaneParams {
            near_band: [0.75, 1.0],
            far_band: [0.45, 0.70],
            min_peak_count: DEFAULT_MIN_PEAK_COUNT,
        }
    }
}

impl LaneParams {
    /// Resolves the fractional bands into full-width pixel regions.
    pub fn regions(&self, width: usize, height: usize) -> Result<(RectRegion, RectRegion)> {
        let band = |f: [f64; 2], name: &str| -> Result<RectRegion> {
            if !(0.0..=1.0).contains(&f[0]) || !(0.0..=1.0).contains(&f[1]) || f[0] >= f[1] {
                return Err(Error::config(format!("{name} band {f:?} is not a sub-range of [0,1]")));
            }
            let y0 = (f[0] * height as f64).round() as usize;
            let y1 = (f[1] * height as f64).round() as usize;
            let r = RectRegion::new(0, y0, width, y1.min(height));
            r.check_within(width, height)
                .map_err(|_| Error::config(format!("{name} band {f:?} is empty at height {height}")))?;
            Ok(r)
        };
        Ok((band(self.near_band, "near")?, band(self.far_band, "far")?))
    }
}

/// Count of set pixels per ROI column.
pub fn column_histogram(mask: &BinaryMask, roi: &RectRegion) -> Result<Vec<u32>> {
    roi.check_within(mask.width(), mask.height())?;
    let mut hist = vec![0u32; roi.width()];
    let w = mask.width();
    let bits = mask.bits();
    for y in roi.y0..roi.y1 {
        let row = &bits[y * w + roi.x0..y * w + roi.x1];
        for (h, &b) in hist.iter_mut().zip(row) {
            *h += b as u32;
        }
    }
    Ok(hist)
}

fn argmax_lowest(values: &[u32]) -> Option<(usize, u32)> {
    let mut best: Option<(usize, u32)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Splits the histogram at its midpoint and takes the argmax of each half
/// (lowest index on ties). Indices are relative to the histogram start.
/// Returns `None` if either half peaks below `min_peak_count`.
pub fn detect_lane_bounds(hist: &[u32], min_peak_count: u32) -> Option<(usize, usize)> {
    if hist.len() < 2 {
        return None;
    }
    let mid = hist.len() / 2;
    let (l, lv) = argmax_lowest(&hist[..mid])?;
    let (r, rv) = argmax_lowest(&hist[mid..])?;
    if lv < min_peak_count || rv < min_peak_count {
        return None;
    }
    Some((l, mid + r))
}

fn band_bounds(mask: &BinaryMask, roi: &RectRegion, min_peak: u32) -> Result<Option<(usize, usize)>> {
    let hist = column_histogram(mask, roi)?;
    Ok(detect_lane_bounds(&hist, min_peak).map(|(l, r)| (roi.x0 + l, roi.x0 + r)))
}

/// Two-band lane estimate on a bird's-eye mask.
pub fn estimate_lane(
    mask: &BinaryMask,
    near: &RectRegion,
    far: &RectRegion,
    min_peak_count: u32,
) -> Result<LaneEstimate> {
    near.check_within(mask.width(), mask.height())?;
    far.check_within(mask.width(), mask.height())?;
    if far.y1 > near.y0 {
        return Err(Error::config(format!(
            "far band {far:?} must lie strictly above near band {near:?}"
        )));
    }
    let coverage = mask_coverage(mask, near)?;
    let Some((l, r)) = band_bounds(mask, near, min_peak_count)? else {
        return Ok(LaneEstimate::invalid(coverage));
    };
    let near_center = (l + r) as f64 / 2.0;
    let half_width = mask.width() as f64 / 2.0;
    let mut est = LaneEstimate {
        left_x: Some(l),
        right_x: Some(r),
        far_left_x: None,
        far_right_x: None,
        center_x: near_center,
        offset_px: near_center - half_width,
        curvature: 0.0,
        valid: true,
        degraded: true,
        coverage,
    };
    if let Some((fl, fr)) = band_bounds(mask, far, min_peak_count)? {
        let far_center = (fl + fr) as f64 / 2.0;
        let rows = near.center_row() - far.center_row();
        est.far_left_x = Some(fl);
        est.far_right_x = Some(fr);
        est.curvature = (far_center - near_center) / rows;
        est.degraded = false;
    }
    Ok(est)
}
