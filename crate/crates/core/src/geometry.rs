//! Projective transforms and inverse-mapping image warps (bird's-eye view).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, Frame, FrameData};

pub type Point = [f64; 2];

const DET_EPS: f64 = 1e-12;

/// 3x3 projective transform, row-major. Normalized so `h[2][2] == 1` when
/// that entry is non-zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    h: [[f64; 3]; 3],
}

impl Homography {
    pub fn identity() -> Self {
        Homography {
            h: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Builds from raw entries, normalizing and rejecting singular matrices.
    pub fn from_matrix(h: [[f64; 3]; 3]) -> Result<Self> {
        if h.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite homography entry".into()));
        }
        let out = Homography { h: normalize(h) };
        if out.determinant().abs() <= DET_EPS {
            return Err(Error::Singular(format!(
                "homography determinant {:e} is too small",
                out.determinant()
            )));
        }
        Ok(out)
    }

    /// Keeps the matrix exactly as given (no normalization); used to check
    /// projective scale invariance.
    pub fn from_matrix_unnormalized(h: [[f64; 3]; 3]) -> Result<Self> {
        let out = Homography { h };
        if out.determinant().abs() <= DET_EPS * (h[2][2].abs().max(1.0)).powi(3) {
            return Err(Error::Singular("homography is singular".into()));
        }
        Ok(out)
    }

    pub fn scaling(sx: f64, sy: f64) -> Result<Self> {
        Self::from_matrix([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Homography {
            h: [[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]],
        }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.h
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.h)
    }

    /// Maps `p` through the transform.
    #[inline]
    pub fn apply(&self, p: Point) -> Result<Point> {
        let h = &self.h;
        let den = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
        if den == 0.0 || !den.is_finite() {
            return Err(Error::PointAtInfinity);
        }
        Ok([
            (h[0][0] * p[0] + h[0][1] * p[1] + h[0][2]) / den,
            (h[1][0] * p[0] + h[1][1] * p[1] + h[1][2]) / den,
        ])
    }

    /// Raw projective map without error handling; returns the denominator
    /// alongside so callers can test visibility.
    #[inline]
    pub(crate) fn apply_raw(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let h = &self.h;
        let den = h[2][0] * x + h[2][1] * y + h[2][2];
        (
            (h[0][0] * x + h[0][1] * y + h[0][2]) / den,
            (h[1][0] * x + h[1][1] * y + h[1][2]) / den,
            den,
        )
    }

    pub fn invert(&self) -> Result<Self> {
        let det = self.determinant();
        if det.abs() <= DET_EPS || !det.is_finite() {
            return Err(Error::Singular("cannot invert singular homography".into()));
        }
        let m = &self.h;
        let mut inv = [[0.0; 3]; 3];
        for (r, row) in inv.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                // adjugate is the transposed cofactor matrix
                *cell = cofactor(m, c, r) / det;
            }
        }
        Homography::from_matrix(inv)
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &Homography) -> Result<Self> {
        let a = &self.h;
        let b = &first.h;
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| a[r][k] * b[k][c]).sum();
            }
        }
        Homography::from_matrix(out)
    }
}

fn normalize(h: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let s = h[2][2];
    if s == 0.0 || s == 1.0 {
        return h;
    }
    h.map(|row| row.map(|v| v / s))
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn cofactor(m: &[[f64; 3]; 3], r: usize, c: usize) -> f64 {
    let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
    let cols: Vec<usize> = (0..3).filter(|&j| j != c).collect();
    let minor = m[rows[0]][cols[0]] * m[rows[1]][cols[1]] - m[rows[0]][cols[1]] * m[rows[1]][cols[0]];
    if (r + c) % 2 == 0 {
        minor
    } else {
        -minor
    }
}

/// Four source points and the four destination points they map to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadCorrespondence {
    pub src: [Point; 4],
    pub dst: [Point; 4],
}

impl QuadCorrespondence {
    /// Camera trapezoid over the lower 60% of a `w`x`h` frame mapped onto the
    /// full `out_w`x`out_h` bird's-eye raster.
    pub fn default_for(w: usize, h: usize, out_w: usize, out_h: usize) -> Self {
        let (w, h) = (w as f64, h as f64);
        let (ow, oh) = (out_w as f64, out_h as f64);
        let top = h * 0.4;
        QuadCorrespondence {
            src: [[0.0, h], [w, h], [w * 0.625, top], [w * 0.375, top]],
            dst: [[0.0, oh], [ow, oh], [ow, 0.0], [0.0, 0.0]],
        }
    }

    fn check_non_degenerate(points: &[Point; 4], which: &str) -> Result<()> {
        for i in 0..4 {
            for j in (i + 1)..4 {
                for k in (j + 1)..4 {
                    let (a, b, c) = (points[i], points[j], points[k]);
                    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                    if cross.abs() < 1e-9 {
                        return Err(Error::Singular(format!(
                            "{which} quad has collinear points {i}, {j}, {k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Solves the 8-unknown linear system (with `h33 = 1`) sending each source
/// corner to its destination corner.
pub fn homography_from_quads(q: &QuadCorrespondence) -> Result<Homography> {
    QuadCorrespondence::check_non_degenerate(&q.src, "source")?;
    QuadCorrespondence::check_non_degenerate(&q.dst, "destination")?;
    let mut a = [[0.0f64; 9]; 8];
    for (i, (s, d)) in q.src.iter().zip(q.dst.iter()).enumerate() {
        let (x, y, u, v) = (s[0], s[1], d[0], d[1]);
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
    }
    let sol = solve_augmented(a)?;
    Homography::from_matrix([
        [sol[0], sol[1], sol[2]],
        [sol[3], sol[4], sol[5]],
        [sol[6], sol[7], 1.0],
    ])
}

/// Gaussian elimination with partial pivoting on an 8x9 augmented matrix.
fn solve_augmented(mut a: [[f64; 9]; 8]) -> Result<[f64; 8]> {
    const N: usize = 8;
    let scale = a
        .iter()
        .flat_map(|r| r[..N].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::Singular("quad correspondence system is singular".into()));
        }
        a.swap(col, pivot);
        for row in (col + 1)..N {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..=N {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = ((row + 1)..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][N] - tail) / a[row][row];
    }
    Ok(x)
}

#[inline]
fn nearest_index(x: f64, y: f64, w: usize, h: usize) -> Option<usize> {
    let xi = (x + 0.5).floor();
    let yi = (y + 0.5).floor();
    if xi >= 0.0 && yi >= 0.0 && xi < w as f64 && yi < h as f64 {
        Some(yi as usize * w + xi as usize)
    } else {
        None
    }
}

/// Bilinear taps for a sample point, or `None` outside `[0, w-1] x [0, h-1]`.
#[inline]
fn bilinear_taps(x: f64, y: f64, w: usize, h: usize) -> Option<([usize; 4], [f64; 4])> {
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    Some((
        [y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1],
        [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ],
    ))
}

/// Inverse-mapping warp of a continuous-valued frame. Every output pixel
/// samples the source at `h⁻¹(out)` bilinearly; samples outside the source
/// produce 0.
pub fn warp_frame(frame: &Frame, h: &Homography, out_w: usize, out_h: usize) -> Result<Frame> {
    let inv = h.invert()?;
    let (w, hh) = (frame.width(), frame.height());
    let ch = frame.format().channels();
    let mut taps = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let (sx, sy, den) = inv.apply_raw(ox as f64, oy as f64);
            taps.push(if den == 0.0 {
                None
            } else {
                bilinear_taps(sx, sy, w, hh)
            });
        }
    }
    let data = match frame.data() {
        FrameData::Rgb8(src) => FrameData::Rgb8(sample_u8(src, ch, &taps)),
        FrameData::Gray8(src) => FrameData::Gray8(sample_u8(src, ch, &taps)),
        FrameData::Hsv(src) => {
            let mut out = vec![0.0f32; taps.len() * ch];
            for (i, t) in taps.iter().enumerate() {
                if let Some((idx, wts)) = t {
                    for c in 0..ch {
                        let v: f64 = idx
                            .iter()
                            .zip(wts)
                            .map(|(&j, &wt)| src[j * ch + c] as f64 * wt)
                            .sum();
                        out[i * ch + c] = v as f32;
                    }
                }
            }
            FrameData::Hsv(out)
        }
    };
    Frame::new(out_w, out_h, data)
}

fn sample_u8(src: &[u8], ch: usize, taps: &[Option<([usize; 4], [f64; 4])>]) -> Vec<u8> {
    let mut out = vec![0u8; taps.len() * ch];
    for (i, t) in taps.iter().enumerate() {
        if let Some((idx, wts)) = t {
            for c in 0..ch {
                let v: f64 = idx
                    .iter()
                    .zip(wts)
                    .map(|(&j, &wt)| src[j * ch + c] as f64 * wt)
                    .sum();
                out[i * ch + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

/// Nearest-neighbour inverse-mapping warp of a binary mask; keeps the {0,1}
/// alphabet.
pub fn warp_mask(mask: &BinaryMask, h: &Homography, out_w: usize, out_h: usize) -> Result<BinaryMask> {
    let map = WarpMap::new(h, mask.width(), mask.height(), out_w, out_h)?;
    map.apply(mask)
}

/// Precomputed nearest-neighbour source indices for repeated mask warps with
/// a fixed homography and fixed raster sizes.
#[derive(Clone, Debug)]
pub struct WarpMap {
    src_w: usize,
    src_h: usize,
    out_w: usize,
    out_h: usize,
    // u32::MAX marks samples falling outside the source
    index: Vec<u32>,
}

impl WarpMap {
    const OUTSIDE: u32 = u32::MAX;

    pub fn new(h: &Homography, src_w: usize, src_h: usize, out_w: usize, out_h: usize) -> Result<Self> {
        if out_w == 0 || out_h == 0 {
            return Err(Error::invalid("warp output size must be positive"));
        }
        let inv = h.invert()?;
        let mut index = Vec::with_capacity(out_w * out_h);
        for oy in 0..out_h {
            for ox in 0..out_w {
                let (sx, sy, den) = inv.apply_raw(ox as f64, oy as f64);
                let i = if den == 0.0 {
                    None
                } else {
                    nearest_index(sx, sy, src_w, src_h)
                };
                index.push(i.map_or(Self::OUTSIDE, |v| v as u32));
            }
        }
        Ok(WarpMap {
            src_w,
            src_h,
            out_w,
            out_h,
            index,
        })
    }

    pub fn out_size(&self) -> (usize, usize) {
        (self.out_w, self.out_h)
    }

    pub fn apply(&self, mask: &BinaryMask) -> Result<BinaryMask> {
        let mut out = BinaryMask::zeros(self.out_w, self.out_h);
        self.apply_into(mask, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, mask: &BinaryMask, out: &mut BinaryMask) -> Result<()> {
        if mask.width() != self.src_w || mask.height() != self.src_h {
            return Err(Error::invalid(format!(
                "warp map built for {}x{}, mask is {}x{}",
                self.src_w,
                self.src_h,
                mask.width(),
                mask.height()
            )));
        }
        if out.width() != self.out_w || out.height() != self.out_h {
            return Err(Error::invalid("warp output buffer has wrong size"));
        }
        let src = mask.bits();
        for (o, &i) in out.bits_mut().iter_mut().zip(&self.index) {
            *o = if i == Self::OUTSIDE { 0 } else { src[i as usize] };
        }
        Ok(())
    }
}
