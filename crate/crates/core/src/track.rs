//! Trajectory domain model and elementary kinematic computations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polyline};
use crate::mapproc::LaneGraph;

/// Sampling interval of the source recordings (10 Hz).
pub const SAMPLE_INTERVAL: f64 = 0.1;

/// Longest scenario the source recordings produce.
pub const MAX_SCENARIO_DURATION: f64 = 11.0;

const GRID_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Av,
    Vehicle,
    Pedestrian,
    Cyclist,
    Other,
}

impl AgentKind {
    pub fn is_vehicle(self) -> bool {
        matches!(self, AgentKind::Av | AgentKind::Vehicle)
    }

    pub fn is_vulnerable(self) -> bool {
        matches!(self, AgentKind::Pedestrian | AgentKind::Cyclist)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Av => "av",
            AgentKind::Vehicle => "vehicle",
            AgentKind::Pedestrian => "pedestrian",
            AgentKind::Cyclist => "cyclist",
            AgentKind::Other => "other",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "av" => Ok(AgentKind::Av),
            "vehicle" => Ok(AgentKind::Vehicle),
            "pedestrian" => Ok(AgentKind::Pedestrian),
            "cyclist" => Ok(AgentKind::Cyclist),
            "other" => Ok(AgentKind::Other),
            other => Err(Error::InvalidTrack(format!("unknown agent kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub heading: f64,
}

impl TrackPoint {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Point {
        Point::new(self.vx, self.vy)
    }

    /// Speed magnitude of the given velocity. Heading is never used here.
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// Index of this sample on the 10 Hz grid.
    pub fn frame(&self) -> i64 {
        (self.t / SAMPLE_INTERVAL).round() as i64
    }
}

/// Run of missing grid samples strictly between two observed ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub after: f64,
    pub before: f64,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub agent_id: String,
    pub kind: AgentKind,
    pub points: Vec<TrackPoint>,
}

impl Track {
    /// Validates grid alignment, ordering, and finiteness.
    pub fn new(agent_id: impl Into<String>, kind: AgentKind, points: Vec<TrackPoint>) -> Result<Self> {
        let agent_id = agent_id.into();
        if points.is_empty() {
            return Err(Error::InvalidTrack(format!("track {agent_id} has no points")));
        }
        for p in &points {
            let finite = [p.t, p.x, p.y, p.vx, p.vy, p.heading].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidTrack(format!("track {agent_id}: non-finite value at t={}", p.t)));
            }
            if p.t < -GRID_TOL {
                return Err(Error::InvalidTrack(format!("track {agent_id}: negative timestamp {}", p.t)));
            }
            if !on_grid(p.t) {
                return Err(Error::InvalidTrack(format!("track {agent_id}: t={} is off the 0.1 s grid", p.t)));
            }
        }
        for w in points.windows(2) {
            if w[1].frame() <= w[0].frame() {
                return Err(Error::InvalidTrack(format!(
                    "track {agent_id}: timestamps not strictly increasing at t={}",
                    w[1].t
                )));
            }
        }
        Ok(Track { agent_id, kind, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.points.iter().map(TrackPoint::position).collect()
    }

    pub fn velocities(&self) -> Vec<Point> {
        self.points.iter().map(TrackPoint::velocity).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.points.iter().map(TrackPoint::speed).collect()
    }

    pub fn headings(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.heading).collect()
    }

    pub fn start_time(&self) -> f64 {
        self.points[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.points[self.points.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    pub fn gaps(&self) -> Vec<Gap> {
        self.points
            .windows(2)
            .filter_map(|w| {
                let missing = (w[1].frame() - w[0].frame() - 1) as usize;
                (missing > 0).then_some(Gap { after: w[0].t, before: w[1].t, missing })
            })
            .collect()
    }

    pub fn is_contiguous(&self) -> bool {
        self.points.windows(2).all(|w| w[1].frame() - w[0].frame() == 1)
    }

    pub(crate) fn require_contiguous(&self) -> Result<()> {
        match self.gaps().first() {
            Some(g) => Err(Error::Gap { from: g.after, to: g.before }),
            None => Ok(()),
        }
    }

    /// Path polyline with repeated positions removed.
    pub fn polyline(&self) -> Result<Polyline> {
        Polyline::from_points_dedup(&self.positions())
    }

    /// Travelled distance along the raw positions.
    pub fn path_length(&self) -> f64 {
        polyline_length(&self.positions())
    }

    /// Position at continuous time `t`, linearly interpolated and clamped to
    /// the observed window.
    pub fn position_at(&self, t: f64) -> Point {
        interpolate_points(&self.times(), &self.positions(), t)
    }
}

fn on_grid(t: f64) -> bool {
    let k = t / SAMPLE_INTERVAL;
    (k - k.round()).abs() * SAMPLE_INTERVAL <= GRID_TOL
}

pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

pub(crate) fn interpolate_points(times: &[f64], points: &[Point], t: f64) -> Point {
    let n = times.len();
    if t <= times[0] {
        return points[0];
    }
    if t >= times[n - 1] {
        return points[n - 1];
    }
    let i = times.partition_point(|&x| x <= t) - 1;
    let u = (t - times[i]) / (times[i + 1] - times[i]);
    points[i].lerp(points[i + 1], u)
}

/// Linear interpolation of `values` sampled at `times`; `None` outside the
/// sampled window.
pub fn interpolate(times: &[f64], values: &[f64], t: f64) -> Option<f64> {
    let n = times.len();
    if n == 0 || t < times[0] - 1e-12 || t > times[n - 1] + 1e-12 {
        return None;
    }
    if n == 1 {
        return Some(values[0]);
    }
    let i = times.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
    let u = (t - times[i]) / (times[i + 1] - times[i]);
    Some(values[i] + u * (values[i + 1] - values[i]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scenario_id: String,
    pub tracks: Vec<Track>,
    pub lane_graph: LaneGraph,
    pub duration: f64,
}

impl Scenario {
    /// Validates the AV count and the recording length. `duration` is the span
    /// of all observed timestamps.
    pub fn new(scenario_id: impl Into<String>, tracks: Vec<Track>, lane_graph: LaneGraph) -> Result<Self> {
        let scenario_id = scenario_id.into();
        let av_count = tracks.iter().filter(|t| t.kind == AgentKind::Av).count();
        if av_count > 1 {
            return Err(Error::InvalidScenario(format!("{scenario_id}: {av_count} AV tracks")));
        }
        let mut ids: Vec<&str> = tracks.iter().map(|t| t.agent_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidScenario(format!("{scenario_id}: duplicate track id {}", w[0])));
        }
        let duration = if tracks.is_empty() {
            0.0
        } else {
            let start = tracks.iter().map(Track::start_time).fold(f64::INFINITY, f64::min);
            let end = tracks.iter().map(Track::end_time).fold(f64::NEG_INFINITY, f64::max);
            end - start
        };
        if duration > MAX_SCENARIO_DURATION + GRID_TOL {
            return Err(Error::InvalidScenario(format!(
                "{scenario_id}: duration {duration:.1} s exceeds {MAX_SCENARIO_DURATION} s"
            )));
        }
        Ok(Scenario { scenario_id, tracks, lane_graph, duration })
    }

    pub fn track(&self, agent_id: &str) -> Option<&Track> {
        self.tracks.iter().find(|t| t.agent_id == agent_id)
    }

    pub fn av(&self) -> Option<&Track> {
        self.tracks.iter().find(|t| t.kind == AgentKind::Av)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicProfile {
    pub t: Vec<f64>,
    pub speed: Vec<f64>,
    pub acceleration: Vec<f64>,
    pub jerk: Vec<f64>,
}

impl KinematicProfile {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Second-order accurate gradient on a possibly non-uniform grid: central in
/// the interior, one-sided three-point stencils at the ends. Exact for
/// quadratics everywhere.
pub fn gradient(values: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 || t.len() != n {
        return Err(Error::insufficient(3, n.min(t.len())));
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let hs = t[i] - t[i - 1];
        let hd = t[i + 1] - t[i];
        out[i] = (hs * hs * values[i + 1] + (hd * hd - hs * hs) * values[i] - hd * hd * values[i - 1])
            / (hs * hd * (hd + hs));
    }
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    out[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * values[0] + (h1 + h2) / (h1 * h2) * values[1]
        - h1 / (h2 * (h1 + h2)) * values[2];
    let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
    out[n - 1] = h2 / (h1 * (h1 + h2)) * values[n - 3] - (h1 + h2) / (h1 * h2) * values[n - 2]
        + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * values[n - 1];
    Ok(out)
}

/// Speed derived from consecutive position steps on a uniform grid:
/// the mean of the two adjacent step lengths over `2·dt` in the interior,
/// the single adjacent step over `dt` at each end.
pub fn position_based_speed_of(points: &[Point], dt: f64) -> Result<Vec<f64>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::insufficient(3, n));
    }
    let steps: Vec<f64> = points.windows(2).map(|w| w[0].distance(w[1])).collect();
    let mut out = Vec::with_capacity(n);
    out.push(steps[0] / dt);
    for i in 1..n - 1 {
        out.push((steps[i - 1] + steps[i]) / (2.0 * dt));
    }
    out.push(steps[n - 2] / dt);
    Ok(out)
}

pub fn position_based_speed(track: &Track) -> Result<Vec<f64>> {
    if track.len() < 3 {
        return Err(Error::insufficient(3, track.len()));
    }
    track.require_contiguous()?;
    position_based_speed_of(&track.positions(), SAMPLE_INTERVAL)
}

/// Mean absolute difference between the given speed magnitude and the
/// position-based speed.
pub fn speed_consistency_error(track: &Track) -> Result<f64> {
    let vp = position_based_speed(track)?;
    Ok(mean_abs_diff(&track.speeds(), &vp))
}

pub(crate) fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Trapezoidal integral of `values` over `t`.
pub fn trapezoid(values: &[f64], t: &[f64]) -> f64 {
    values
        .windows(2)
        .zip(t.windows(2))
        .map(|(v, t)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
        .sum()
}

/// |polyline length − ∫‖v‖dt|. Gaps are integrated across with the actual
/// time step.
pub fn length_inconsistency(track: &Track) -> Result<f64> {
    if track.len() < 2 {
        return Err(Error::insufficient(2, track.len()));
    }
    let integrated = trapezoid(&track.speeds(), &track.times());
    Ok((track.path_length() - integrated).abs())
}

pub fn kinematic_profile(speed: &[f64], t: &[f64]) -> Result<KinematicProfile> {
    if speed.len() != t.len() {
        return Err(Error::InvalidTrack(format!(
            "speed has {} samples but time has {}",
            speed.len(),
            t.len()
        )));
    }
    let acceleration = gradient(speed, t)?;
    let jerk = gradient(&acceleration, t)?;
    Ok(KinematicProfile { t: t.to_vec(), speed: speed.to_vec(), acceleration, jerk })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn track_from_xy(xy: impl Fn(f64) -> (f64, f64), n: usize) -> Track {
        let pts = (0..n)
            .map(|i| {
                let t = i as f64 * SAMPLE_INTERVAL;
                let (x, y) = xy(t);
                TrackPoint { t, x, y, vx: 0.0, vy: 0.0, heading: 0.0 }
            })
            .collect();
        Track::new("a", AgentKind::Vehicle, pts).unwrap()
    }

    #[test]
    fn uniform_motion_speed() {
        let tr = track_from_xy(|t| (10.0 * t, 0.0), 20);
        let v = position_based_speed(&tr).unwrap();
        assert!(v.iter().all(|s| (s - 10.0).abs() < 1e-9));
    }

    #[test]
    fn stationary_speed_is_zero() {
        let tr = track_from_xy(|_| (3.0, 4.0), 5);
        assert!(position_based_speed(&tr).unwrap().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn quadratic_position_gives_exact_interior_speed() {
        let tr = track_from_xy(|t| (t * t, 0.0), 30);
        let v = position_based_speed(&tr).unwrap();
        for (i, s) in v.iter().enumerate().take(29).skip(1) {
            let t = i as f64 * SAMPLE_INTERVAL;
            assert!((s - 2.0 * t).abs() < 1e-9, "i={i}: {s}");
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        let tr = track_from_xy(|t| (t, 0.0), 2);
        assert_eq!(position_based_speed(&tr), Err(Error::insufficient(3, 2)));
    }

    #[test]
    fn gap_is_flagged_not_interpolated() {
        let mut tr = track_from_xy(|t| (t, 0.0), 10);
        tr.points.remove(4);
        let tr = Track::new("a", AgentKind::Vehicle, tr.points).unwrap();
        assert_eq!(tr.gaps().len(), 1);
        assert_eq!(tr.gaps()[0].missing, 1);
        assert!(matches!(position_based_speed(&tr), Err(Error::Gap { .. })));
    }

    #[test]
    fn track_validation() {
        let p = |t: f64| TrackPoint { t, x: 0.0, y: 0.0, vx: 0.0, vy: 0.0, heading: 0.0 };
        assert!(Track::new("a", AgentKind::Vehicle, vec![p(0.0), p(0.0)]).is_err());
        assert!(Track::new("a", AgentKind::Vehicle, vec![p(0.0), p(0.15)]).is_err());
        assert!(Track::new("a", AgentKind::Vehicle, vec![p(0.2), p(0.1)]).is_err());
        let mut bad = p(0.0);
        bad.x = f64::NAN;
        assert!(Track::new("a", AgentKind::Vehicle, vec![bad]).is_err());
        assert!(Track::new("a", AgentKind::Vehicle, vec![p(0.1), p(0.3)]).is_ok());
    }

    #[test]
    fn consistency_error_constant_offset() {
        let pts = (0..30)
            .map(|i| {
                let t = i as f64 * 0.1;
                TrackPoint { t, x: 4.0 * t, y: 0.0, vx: 3.0, vy: 4.0, heading: 0.0 }
            })
            .collect();
        let tr = Track::new("a", AgentKind::Vehicle, pts).unwrap();
        assert!((speed_consistency_error(&tr).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn consistency_error_zero_fill_by_hand() {
        // 5 m/s along x, speeds 3..=5 zero-filled
        let pts: Vec<_> = (0..10)
            .map(|i| {
                let t = i as f64 * 0.1;
                let vx = if (3..=5).contains(&i) { 0.0 } else { 5.0 };
                TrackPoint { t, x: 5.0 * t, y: 0.0, vx, vy: 0.0, heading: 0.0 }
            })
            .collect();
        let tr = Track::new("a", AgentKind::Vehicle, pts).unwrap();
        // three samples off by 5, seven exact
        let expected = (5.0 + 5.0 + 5.0) / 10.0;
        assert!((speed_consistency_error(&tr).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn length_inconsistency_cases() {
        let mk = |scale: f64| {
            let pts = (0..=100)
                .map(|i| {
                    let t = i as f64 * 0.1;
                    TrackPoint { t, x: scale * t, y: 0.0, vx: 10.0, vy: 0.0, heading: 0.0 }
                })
                .collect();
            Track::new("a", AgentKind::Vehicle, pts).unwrap()
        };
        assert!(length_inconsistency(&mk(10.0)).unwrap() < 1e-9);
        assert!((length_inconsistency(&mk(9.8)).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn kinematic_profile_polynomials() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let constant = kinematic_profile(&vec![7.0; 40], &t).unwrap();
        assert!(constant.acceleration.iter().chain(&constant.jerk).all(|a| a.abs() < 1e-9));

        let linear: Vec<f64> = t.iter().map(|t| 2.0 * t).collect();
        let p = kinematic_profile(&linear, &t).unwrap();
        assert!(p.acceleration.iter().all(|a| (a - 2.0).abs() < 1e-9));
        assert!(p.jerk.iter().all(|j| j.abs() < 1e-9));

        let quad: Vec<f64> = t.iter().map(|t| t * t).collect();
        let p = kinematic_profile(&quad, &t).unwrap();
        assert!(p.jerk.iter().all(|j| (j - 2.0).abs() < 1e-6));
    }

    #[test]
    fn scenario_rejects_two_avs_and_long_recordings() {
        let mk = |id: &str, kind, n: usize| {
            let pts = (0..n)
                .map(|i| TrackPoint { t: i as f64 * 0.1, x: 0.0, y: 0.0, vx: 0.0, vy: 0.0, heading: 0.0 })
                .collect();
            Track::new(id, kind, pts).unwrap()
        };
        let g = LaneGraph::default();
        assert!(Scenario::new("s", vec![mk("a", AgentKind::Av, 3), mk("b", AgentKind::Av, 3)], g.clone()).is_err());
        assert!(Scenario::new("s", vec![mk("a", AgentKind::Av, 112)], g.clone()).is_err());
        let s = Scenario::new("s", vec![mk("a", AgentKind::Av, 110)], g).unwrap();
        assert!((s.duration - 10.9).abs() < 1e-9);
    }
}
