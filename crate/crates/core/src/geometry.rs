//! Planar polyline machinery: buffer curves for the crossing test, conflict
//! point extraction, and centroid separation.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track::Track;

/// A point (or displacement) in the map frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Point::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, other: Point, u: f64) -> Point {
        self + (other - self) * u
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Two consecutive vertices closer than this are treated as coincident.
const VERTEX_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Point>,
}

/// Nearest point on a polyline to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub station: f64,
    pub distance: f64,
    pub segment: usize,
    /// Fraction along `segment`, in `[0, 1]`.
    pub fraction: f64,
    pub point: Point,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Degenerate(format!(
                "polyline needs at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::Degenerate("non-finite vertex".into()));
        }
        if vertices.windows(2).any(|w| w[0].distance(w[1]) <= VERTEX_EPS) {
            return Err(Error::Degenerate("consecutive vertices coincide".into()));
        }
        Ok(Polyline { vertices })
    }

    /// Builds a polyline from a point sequence, dropping repeated points.
    pub fn from_points_dedup(points: &[Point]) -> Result<Self> {
        let mut vertices: Vec<Point> = Vec::with_capacity(points.len());
        for &p in points {
            match vertices.last() {
                Some(&last) if last.distance(p) <= VERTEX_EPS => {}
                _ => vertices.push(p),
            }
        }
        if vertices.len() < 2 {
            return Err(Error::Degenerate("path has zero length".into()));
        }
        Polyline::new(vertices)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn first(&self) -> Point {
        self.vertices[0]
    }

    pub fn last(&self) -> Point {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.distance(b)).sum()
    }

    /// Arc length at every vertex, starting at zero.
    pub fn stations(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.vertices.len());
        let mut acc = 0.0;
        out.push(0.0);
        for (a, b) in self.segments() {
            acc += a.distance(b);
            out.push(acc);
        }
        out
    }

    /// Point at arc length `s`. Stations outside `[0, length]` continue along
    /// the first or last segment.
    pub fn point_at(&self, s: f64) -> Point {
        let stations = self.stations();
        self.point_at_with(&stations, s)
    }

    pub(crate) fn point_at_with(&self, stations: &[f64], s: f64) -> Point {
        let n = self.vertices.len();
        let seg = if s <= 0.0 {
            0
        } else if s >= stations[n - 1] {
            n - 2
        } else {
            // last station <= s
            stations.partition_point(|&x| x <= s).saturating_sub(1).min(n - 2)
        };
        let (a, b) = (self.vertices[seg], self.vertices[seg + 1]);
        let len = stations[seg + 1] - stations[seg];
        a.lerp(b, (s - stations[seg]) / len)
    }

    /// Unit tangent at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> Point {
        let stations = self.stations();
        let n = self.vertices.len();
        let seg = stations.partition_point(|&x| x <= s).saturating_sub(1).min(n - 2);
        (self.vertices[seg + 1] - self.vertices[seg])
            .normalized()
            .unwrap_or(Point::new(1.0, 0.0))
    }

    pub fn project(&self, p: Point) -> Projection {
        let stations = self.stations();
        let mut best: Option<Projection> = None;
        for (i, (a, b)) in self.segments().enumerate() {
            let (u, q) = closest_on_segment(p, a, b);
            let d = p.distance(q);
            if best.map_or(true, |bp| d < bp.distance) {
                best = Some(Projection {
                    station: stations[i] + u * a.distance(b),
                    distance: d,
                    segment: i,
                    fraction: u,
                    point: q,
                });
            }
        }
        best.expect("polyline has at least one segment")
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        self.segments()
            .map(|(a, b)| p.distance(closest_on_segment(p, a, b).1))
            .fold(f64::INFINITY, f64::min)
    }

    /// True if any segment of `self` intersects any segment of `other`.
    pub fn intersects(&self, other: &Polyline) -> bool {
        self.segments().any(|(a0, a1)| {
            other
                .segments()
                .any(|(b0, b1)| segment_intersection(a0, a1, b0, b1).is_some())
        })
    }
}

/// Parameter and point of the closest point to `p` on segment `ab`.
pub fn closest_on_segment(p: Point, a: Point, b: Point) -> (f64, Point) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (0.0, a);
    }
    let u = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (u, a + ab * u)
}

/// Proper or endpoint-touching intersection of segments `a0a1` and `b0b1`.
/// Returns the parameters along each segment. Parallel and collinear
/// segments report no intersection.
pub fn segment_intersection(a0: Point, a1: Point, b0: Point, b1: Point) -> Option<(f64, f64)> {
    const EPS: f64 = 1e-12;
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = r.cross(s);
    let scale = r.norm() * s.norm();
    if scale == 0.0 || denom.abs() <= EPS * scale {
        return None;
    }
    let qp = b0 - a0;
    let u = qp.cross(s) / denom;
    let w = qp.cross(r) / denom;
    let tol = 1e-12;
    if (-tol..=1.0 + tol).contains(&u) && (-tol..=1.0 + tol).contains(&w) {
        Some((u.clamp(0.0, 1.0), w.clamp(0.0, 1.0)))
    } else {
        None
    }
}

/// Left and right buffer curves at perpendicular distance `d`. Interior
/// joins are mitered; a miter longer than `4d` is replaced by a bevel.
pub fn offset_polylines(path: &Polyline, d: f64) -> Result<(Polyline, Polyline)> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Degenerate(format!("offset distance must be positive, got {d}")));
    }
    if path.length() <= VERTEX_EPS {
        return Err(Error::Degenerate("path has zero length".into()));
    }
    let left = offset_side(path, d, 1.0)?;
    let right = offset_side(path, d, -1.0)?;
    Ok((left, right))
}

fn offset_side(path: &Polyline, d: f64, side: f64) -> Result<Polyline> {
    let v = path.vertices();
    let normals: Vec<Point> = path
        .segments()
        .map(|(a, b)| (b - a).normalized().expect("distinct vertices").perp())
        .collect();
    let mut out = Vec::with_capacity(v.len() + 4);
    out.push(v[0] + normals[0] * (side * d));
    for i in 1..v.len() - 1 {
        let (n0, n1) = (normals[i - 1], normals[i]);
        let bisector = n0 + n1;
        let miter = bisector.normalized().and_then(|m| {
            let cos_half = m.dot(n0);
            let len = d / cos_half;
            (cos_half > 0.0 && len <= 4.0 * d).then_some(m * len)
        });
        match miter {
            Some(m) => out.push(v[i] + m * side),
            None => {
                out.push(v[i] + n0 * (side * d));
                out.push(v[i] + n1 * (side * d));
            }
        }
    }
    out.push(v[v.len() - 1] + normals[normals.len() - 1] * (side * d));
    Polyline::from_points_dedup(&out)
}

/// Buffer-curve crossing test, applied in both directions: each path must
/// intersect both buffer curves of the other.
pub fn crossing_test(path_a: &Polyline, d_a: f64, path_b: &Polyline, d_b: f64) -> bool {
    let crosses_both = |path: &Polyline, other: &Polyline, d: f64| match offset_polylines(other, d) {
        Ok((left, right)) => path.intersects(&left) && path.intersects(&right),
        Err(_) => false,
    };
    crosses_both(path_b, path_a, d_a) && crosses_both(path_a, path_b, d_b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictPoint {
    pub location: Point,
    pub t_first: f64,
    pub t_second: f64,
    pub first_agent: String,
    pub second_agent: String,
}

impl ConflictPoint {
    pub fn pet(&self) -> f64 {
        self.t_second - self.t_first
    }
}

/// One intersection between two timed trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub location: Point,
    pub t_a: f64,
    pub t_b: f64,
}

/// Every segment-pair intersection between two timed paths, with passage
/// times interpolated linearly inside each segment.
pub fn timed_crossings(times_a: &[f64], path_a: &[Point], times_b: &[f64], path_b: &[Point]) -> Vec<Crossing> {
    let mut out = Vec::new();
    for i in 0..path_a.len().saturating_sub(1) {
        let (a0, a1) = (path_a[i], path_a[i + 1]);
        if a0.distance(a1) <= VERTEX_EPS {
            continue;
        }
        let (ax0, ax1) = (a0.x.min(a1.x), a0.x.max(a1.x));
        let (ay0, ay1) = (a0.y.min(a1.y), a0.y.max(a1.y));
        for j in 0..path_b.len().saturating_sub(1) {
            let (b0, b1) = (path_b[j], path_b[j + 1]);
            if b0.x.max(b1.x) < ax0 || b0.x.min(b1.x) > ax1 || b0.y.max(b1.y) < ay0 || b0.y.min(b1.y) > ay1 {
                continue;
            }
            if b0.distance(b1) <= VERTEX_EPS {
                continue;
            }
            if let Some((u, w)) = segment_intersection(a0, a1, b0, b1) {
                let c = Crossing {
                    location: a0.lerp(a1, u),
                    t_a: times_a[i] + u * (times_a[i + 1] - times_a[i]),
                    t_b: times_b[j] + w * (times_b[j + 1] - times_b[j]),
                };
                // a hit on a shared vertex is found from both adjacent segments
                let seen = out.iter().any(|o: &Crossing| {
                    o.location.distance(c.location) <= VERTEX_EPS
                        && (o.t_a - c.t_a).abs() <= 1e-9
                        && (o.t_b - c.t_b).abs() <= 1e-9
                });
                if !seen {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Picks the conflict point among the crossings of two timed paths: the one
/// with the smallest passage-time difference. `id_a` must sort before `id_b`
/// for the tie-breaks to be order independent; [`conflict_point`] handles that.
pub fn conflict_from_paths(
    id_a: &str,
    times_a: &[f64],
    path_a: &[Point],
    id_b: &str,
    times_b: &[f64],
    path_b: &[Point],
) -> Result<ConflictPoint> {
    let (id_a, times_a, path_a, id_b, times_b, path_b) = if id_a <= id_b {
        (id_a, times_a, path_a, id_b, times_b, path_b)
    } else {
        (id_b, times_b, path_b, id_a, times_a, path_a)
    };
    let best = timed_crossings(times_a, path_a, times_b, path_b)
        .into_iter()
        .min_by(|p, q| {
            let dp = (p.t_a - p.t_b).abs();
            let dq = (q.t_a - q.t_b).abs();
            dp.total_cmp(&dq)
                .then(p.t_a.total_cmp(&q.t_a))
                .then(p.location.x.total_cmp(&q.location.x))
                .then(p.location.y.total_cmp(&q.location.y))
        })
        .ok_or(Error::NoIntersection)?;
    let a_first = best.t_a <= best.t_b;
    Ok(if a_first {
        ConflictPoint {
            location: best.location,
            t_first: best.t_a,
            t_second: best.t_b,
            first_agent: id_a.to_string(),
            second_agent: id_b.to_string(),
        }
    } else {
        ConflictPoint {
            location: best.location,
            t_first: best.t_b,
            t_second: best.t_a,
            first_agent: id_b.to_string(),
            second_agent: id_a.to_string(),
        }
    })
}

/// Conflict point of two tracks from their raw positions.
pub fn conflict_point(track_a: &Track, track_b: &Track) -> Result<ConflictPoint> {
    conflict_from_paths(
        &track_a.agent_id,
        &track_a.times(),
        &track_a.positions(),
        &track_b.agent_id,
        &track_b.times(),
        &track_b.positions(),
    )
}

/// Minimum centroid distance over the timesteps both tracks observe.
pub fn min_separation(track_a: &Track, track_b: &Track) -> Result<f64> {
    let by_frame: HashMap<i64, Point> = track_b.points.iter().map(|p| (p.frame(), p.position())).collect();
    track_a
        .points
        .iter()
        .filter_map(|p| by_frame.get(&p.frame()).map(|q| p.position().distance(*q)))
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
        .ok_or(Error::NoTemporalOverlap)
}
