//! Track centerlines built from line and arc pieces.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

const JOIN_TOL: f64 = 1e-6;

#[inline]
fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
fn fnorm(a: Vec2) -> f64 {
    (a[0] * a[0] + a[1] * a[1]).sqrt()
}

fn unit(angle: f64) -> Vec2 {
    [angle.cos(), angle.sin()]
}

/// One centerline piece. Angles in radians, counter-clockwise positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Line { start: Vec2, heading: f64, length: f64 },
    /// `start_angle` is the polar angle of the start point seen from
    /// `center`; positive `sweep` turns left.
    Arc { center: Vec2, radius: f64, start_angle: f64, sweep: f64 },
}

/// Closest-point query result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Euclidean distance to the centerline.
    pub distance: f64,
    /// Signed lateral offset, positive right of the direction of travel.
    pub lateral: f64,
    /// Arc length of the closest point from the track start.
    pub s: f64,
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { length, .. } => length,
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn start(&self) -> Vec2 {
        self.point_at(0.0)
    }

    pub fn end(&self) -> Vec2 {
        self.point_at(self.length())
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        match *self {
            Segment::Line { start, heading, .. } => {
                let d = unit(heading);
                [start[0] + s * d[0], start[1] + s * d[1]]
            }
            Segment::Arc { center, radius, start_angle, sweep } => {
                let a = start_angle + sweep.signum() * s / radius;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
        }
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        match *self {
            Segment::Line { heading, .. } => heading,
            Segment::Arc { radius, start_angle, sweep, .. } => {
                let a = start_angle + sweep.signum() * s / radius;
                a + sweep.signum() * FRAC_PI_2
            }
        }
    }

    /// Signed curvature in 1/m, positive for left turns.
    pub fn curvature(&self) -> f64 {
        match *self {
            Segment::Line { .. } => 0.0,
            Segment::Arc { radius, sweep, .. } => sweep.signum() / radius,
        }
    }

    fn endpoint_projection(&self, p: Vec2, at_end: bool) -> (f64, f64, f64) {
        let s = if at_end { self.length() } else { 0.0 };
        let q = self.point_at(s);
        let t = unit(self.heading_at(s));
        let d = sub(p, q);
        (norm(d), -cross(t, d), s)
    }

    /// `(distance, lateral, local s)` of the closest point on this piece.
    pub fn project(&self, p: Vec2) -> (f64, f64, f64) {
        match *self {
            Segment::Line { start, heading, length } => {
                let dir = unit(heading);
                let d = sub(p, start);
                let along = dot(d, dir);
                if along < 0.0 {
                    return self.endpoint_projection(p, false);
                }
                if along > length {
                    return self.endpoint_projection(p, true);
                }
                let lateral = -cross(dir, d);
                (lateral.abs(), lateral, along)
            }
            Segment::Arc { center, radius, start_angle, sweep } => {
                let q = sub(p, center);
                let a0 = unit(start_angle);
                let a1 = unit(start_angle + sweep);
                // |sweep| <= pi, so the sector is the intersection of two half-planes
                let inside = if sweep >= 0.0 {
                    cross(a0, q) >= 0.0 && cross(q, a1) >= 0.0
                } else {
                    cross(a0, q) <= 0.0 && cross(q, a1) <= 0.0
                };
                if !inside {
                    let (d0, l0, s0) = self.endpoint_projection(p, false);
                    let (d1, l1, s1) = self.endpoint_projection(p, true);
                    return if d0 <= d1 { (d0, l0, s0) } else { (d1, l1, s1) };
                }
                let r = norm(q);
                let radial = r - radius;
                // left turns have the center on the left, so outward is right
                let lateral = if sweep >= 0.0 { radial } else { -radial };
                let ang = cross(a0, q).atan2(dot(a0, q)).abs();
                (radial.abs(), lateral, ang * radius)
            }
        }
    }

    /// Unsigned distance only; cheaper than [`Segment::project`].
    #[inline]
    pub fn distance(&self, p: Vec2) -> f64 {
        match *self {
            Segment::Line { start, heading, length } => {
                let (sn, cs) = heading.sin_cos();
                let d = sub(p, start);
                let along = d[0] * cs + d[1] * sn;
                if along < 0.0 {
                    norm(d)
                } else if along > length {
                    norm([d[0] - length * cs, d[1] - length * sn])
                } else {
                    (d[0] * sn - d[1] * cs).abs()
                }
            }
            Segment::Arc { .. } => self.project(p).0,
        }
    }

    fn bounding_circle(&self) -> (Vec2, f64) {
        let len = self.length();
        let mid = self.point_at(len / 2.0);
        match self {
            Segment::Line { .. } => (mid, len / 2.0),
            Segment::Arc { .. } => {
                let r = norm(sub(self.start(), mid)).max(norm(sub(self.end(), mid)));
                (mid, r)
            }
        }
    }
}

/// Trig-free form of a segment for repeated unsigned distance queries.
#[derive(Clone, Copy, Debug)]
pub(crate) enum FastSegment {
    Line { start: Vec2, dir: Vec2, length: f64 },
    Arc { center: Vec2, radius: f64, a0: Vec2, a1: Vec2, ccw: bool, p0: Vec2, p1: Vec2 },
}

impl FastSegment {
    pub(crate) fn new(s: &Segment) -> Self {
        match *s {
            Segment::Line { start, heading, length } => FastSegment::Line {
                start,
                dir: unit(heading),
                length,
            },
            Segment::Arc { center, radius, start_angle, sweep } => FastSegment::Arc {
                center,
                radius,
                a0: unit(start_angle),
                a1: unit(start_angle + sweep),
                ccw: sweep >= 0.0,
                p0: s.start(),
                p1: s.end(),
            },
        }
    }

    #[inline]
    pub(crate) fn distance(&self, p: Vec2) -> f64 {
        match *self {
            FastSegment::Line { start, dir, length } => {
                let d = sub(p, start);
                let along = dot(d, dir);
                if along < 0.0 {
                    fnorm(d)
                } else if along > length {
                    fnorm([d[0] - length * dir[0], d[1] - length * dir[1]])
                } else {
                    cross(dir, d).abs()
                }
            }
            FastSegment::Arc { center, radius, a0, a1, ccw, p0, p1 } => {
                let q = sub(p, center);
                let inside = if ccw {
                    cross(a0, q) >= 0.0 && cross(q, a1) >= 0.0
                } else {
                    cross(a0, q) <= 0.0 && cross(q, a1) <= 0.0
                };
                if inside {
                    (fnorm(q) - radius).abs()
                } else {
                    fnorm(sub(p, p0)).min(fnorm(sub(p, p1)))
                }
            }
        }
    }
}

/// HSV triple: hue in degrees, saturation and value in `[0, 1]`.
pub type HsvColor = [f32; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackSpec {
    pub segments: Vec<Segment>,
    /// Distance between the two boundary markings, in meters.
    pub lane_width: f64,
    /// Painted width of each boundary marking, in meters.
    pub marking_width: f64,
    /// Color of the boundary markings.
    pub track_color: HsvColor,
    pub background_color: HsvColor,
    pub closed: bool,
}

impl TrackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::config("track has no segments"));
        }
        if !(self.lane_width > 0.0) || !(self.marking_width > 0.0) {
            return Err(Error::config("lane and marking widths must be positive"));
        }
        if self.marking_width >= self.lane_width {
            return Err(Error::config("markings wider than the lane"));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            match *seg {
                Segment::Line { length, .. } if !(length > 0.0) => {
                    return Err(Error::config(format!("segment {i}: non-positive length")));
                }
                Segment::Arc { radius, sweep, .. } => {
                    if !(radius > self.lane_width) {
                        return Err(Error::config(format!(
                            "segment {i}: radius {radius} m must exceed lane width {} m",
                            self.lane_width
                        )));
                    }
                    if sweep == 0.0 || sweep.abs() > PI + 1e-12 {
                        return Err(Error::config(format!("segment {i}: sweep must be in (0, pi]")));
                    }
                }
                _ => {}
            }
        }
        for (i, w) in self.segments.windows(2).enumerate() {
            if norm(sub(w[0].end(), w[1].start())) > JOIN_TOL {
                return Err(Error::config(format!("segments {i} and {} are not joined", i + 1)));
            }
        }
        if self.closed {
            let first = self.segments[0].start();
            let last = self.segments[self.segments.len() - 1].end();
            if norm(sub(first, last)) > JOIN_TOL {
                return Err(Error::config("closed track does not return to its start"));
            }
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Start position and heading.
    pub fn start_pose(&self) -> (Vec2, f64) {
        (self.segments[0].start(), self.segments[0].heading_at(0.0))
    }

    /// Point and heading at arc length `s`, wrapped on closed tracks and
    /// clamped on open ones.
    pub fn pose_at(&self, s: f64) -> (Vec2, f64) {
        let total = self.total_length();
        let mut s = if self.closed { s.rem_euclid(total) } else { s.clamp(0.0, total) };
        for seg in &self.segments {
            let len = seg.length();
            if s <= len {
                return (seg.point_at(s), seg.heading_at(s));
            }
            s -= len;
        }
        let last = self.segments.last().expect("validated track has segments");
        (last.end(), last.heading_at(last.length()))
    }

    /// Closest point on the whole centerline.
    pub fn project(&self, p: Vec2) -> Projection {
        let mut best = Projection {
            distance: f64::INFINITY,
            lateral: 0.0,
            s: 0.0,
        };
        let mut offset = 0.0;
        for seg in &self.segments {
            let (d, lat, s) = seg.project(p);
            if d < best.distance {
                best = Projection {
                    distance: d,
                    lateral: lat,
                    s: offset + s,
                };
            }
            offset += seg.length();
        }
        best
    }

    /// Indices of segments that come within `radius` of `p`.
    pub fn segments_near(&self, p: Vec2, radius: f64) -> Vec<usize> {
        self.segments
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                let (c, r) = s.bounding_circle();
                norm(sub(p, c)) <= r + radius
            })
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackKind {
    Oval,
    SCurve,
    Straight,
}

impl std::str::FromStr for TrackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oval" => Ok(TrackKind::Oval),
            "s-curve" => Ok(TrackKind::SCurve),
            "straight" => Ok(TrackKind::Straight),
            other => Err(Error::config(format!("unknown track kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackParams {
    /// Arc radius for the oval and the s-curve.
    pub radius: f64,
    /// Length of each oval straight.
    pub straight_length: f64,
    /// Length of the straight track.
    pub length: f64,
    pub lane_width: f64,
    pub marking_width: f64,
    pub track_color: HsvColor,
    pub background_color: HsvColor,
}

impl Default for TrackParams {
    fn default() -> Self {
        TrackParams {
            radius: 2.0,
            straight_length: 4.0,
            length: 50.0,
            lane_width: 0.5,
            // three bird's-eye pixels at 640 px/m
            marking_width: 3.0 / 640.0,
            track_color: [220.0, 0.6, 0.25],
            background_color: [35.0, 0.3, 0.8],
        }
    }
}

fn chain(start: Vec2, heading: f64, pieces: &[(f64, f64)]) -> Vec<Segment> {
    // each piece: (length for lines | radius for arcs, sweep; 0 sweep = line)
    let mut out = Vec::with_capacity(pieces.len());
    let (mut p, mut h) = (start, heading);
    for &(a, sweep) in pieces {
        let seg = if sweep == 0.0 {
            Segment::Line {
                start: p,
                heading: h,
                length: a,
            }
        } else {
            let side = sweep.signum() * FRAC_PI_2;
            let n = unit(h + side);
            let center = [p[0] + a * n[0], p[1] + a * n[1]];
            Segment::Arc {
                center,
                radius: a,
                start_angle: h + side + PI,
                sweep,
            }
        };
        p = seg.end();
        h = seg.heading_at(seg.length());
        out.push(seg);
    }
    out
}

/// Builds one of the stock tracks.
pub fn generate_track(kind: TrackKind, p: &TrackParams) -> Result<TrackSpec> {
    let (segments, closed) = match kind {
        TrackKind::Straight => (chain([0.0, 0.0], 0.0, &[(p.length, 0.0)]), false),
        TrackKind::Oval => {
            let mut segs = chain(
                [0.0, 0.0],
                0.0,
                &[
                    (p.straight_length, 0.0),
                    (p.radius, PI),
                    (p.straight_length, 0.0),
                    (p.radius, PI),
                ],
            );
            // snap the closing joint exactly onto the start
            if let Some(Segment::Arc { center, radius, start_angle, .. }) = segs.last_mut() {
                *center = [0.0, *radius];
                *start_angle = FRAC_PI_2;
            }
            (segs, true)
        }
        TrackKind::SCurve => {
            let q = FRAC_PI_2;
            (
                chain(
                    [0.0, 0.0],
                    0.0,
                    &[
                        (2.0, 0.0),
                        (p.radius, q),
                        (p.radius, -q),
                        (p.radius, -q),
                        (p.radius, q),
                        (4.0, 0.0),
                    ],
                ),
                false,
            )
        }
    };
    let spec = TrackSpec {
        segments,
        lane_width: p.lane_width,
        marking_width: p.marking_width,
        track_color: p.track_color,
        background_color: p.background_color,
        closed,
    };
    spec.validate()?;
    Ok(spec)
}
