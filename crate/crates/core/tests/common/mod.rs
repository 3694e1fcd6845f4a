#![allow(dead_code)]

use conflict_core::geometry::Point;
use conflict_core::metrics::CurvilinearProfile;
use conflict_core::track::{AgentKind, Scenario, Track, TrackPoint};
use rand::Rng;

pub const DT: f64 = 0.1;

/// Track through `positions` sampled from `t0`, velocity by forward
/// differences (last sample repeats).
pub fn track_from(id: &str, kind: AgentKind, positions: &[Point], t0: f64) -> Track {
    let n = positions.len();
    let points = (0..n)
        .map(|i| {
            let (a, b) = if i + 1 < n { (positions[i], positions[i + 1]) } else { (positions[i - 1], positions[i]) };
            let v = (b - a) * (1.0 / DT);
            TrackPoint { t: t0 + i as f64 * DT, x: positions[i].x, y: positions[i].y, vx: v.x, vy: v.y, heading: v.y.atan2(v.x) }
        })
        .collect();
    Track::new(id, kind, points).unwrap()
}

pub fn straight(id: &str, kind: AgentKind, start: Point, vel: Point, n: usize, t0: f64) -> Track {
    let positions: Vec<Point> = (0..n).map(|i| start + vel * (i as f64 * DT)).collect();
    track_from(id, kind, &positions, t0)
}

/// Rotation by `theta` then translation by `shift`, applied to positions,
/// velocities and headings.
pub fn rigid(track: &Track, theta: f64, shift: Point) -> Track {
    let points = track
        .points
        .iter()
        .map(|p| {
            let q = p.position().rotate(theta) + shift;
            let v = p.velocity().rotate(theta);
            TrackPoint { t: p.t, x: q.x, y: q.y, vx: v.x, vy: v.y, heading: p.heading + theta }
        })
        .collect();
    Track { points, ..track.clone() }
}

pub fn rigid_scenario(s: &Scenario, theta: f64, shift: Point) -> Scenario {
    let tracks = s.tracks.iter().map(|t| rigid(t, theta, shift)).collect();
    Scenario::new(s.scenario_id.clone(), tracks, s.lane_graph.clone()).unwrap()
}

/// Speed history with constant acceleration `a` from `v0`, floored at `v_min`.
pub fn speed_law(v0: f64, a: f64, v_min: f64) -> impl Fn(f64) -> f64 {
    move |t| (v0 + a * t).max(v_min)
}

/// Curvilinear profile on `[0, t_end]` for a speed law, with the zero of `s`
/// at `t_pass`. Stations come from fine trapezoid integration.
pub fn profile_from_speed(v: impl Fn(f64) -> f64, t_end: f64, t_pass: f64) -> CurvilinearProfile {
    let n = (t_end / DT).round() as usize + 1;
    let t: Vec<f64> = (0..n).map(|i| i as f64 * DT).collect();
    let distance = |t_to: f64| {
        let m = 1000;
        let h = t_to / m as f64;
        (0..m).map(|k| 0.5 * (v(k as f64 * h) + v((k + 1) as f64 * h)) * h).sum::<f64>()
    };
    let s_pass = distance(t_pass);
    let s: Vec<f64> = t.iter().map(|&ti| distance(ti) - s_pass).collect();
    let speed: Vec<f64> = t.iter().map(|&ti| v(ti)).collect();
    let acceleration = t.iter().map(|&ti| (v(ti + 1e-4) - v((ti - 1e-4).max(0.0))) / (ti + 1e-4 - (ti - 1e-4).max(0.0))).collect();
    CurvilinearProfile { t, s, v: speed, acceleration, t_pass }
}

/// Random veh-veh pair: the first passes at `t1` in [4, 6], the second
/// `pet` later; both accelerate or brake moderately.
pub fn random_pair(rng: &mut impl Rng) -> (CurvilinearProfile, CurvilinearProfile) {
    let t1 = rng.random_range(4.0..6.0);
    let pet = rng.random_range(0.3..4.0);
    let first = profile_from_speed(speed_law(rng.random_range(5.0..14.0), rng.random_range(-1.5..1.5), 1.0), 11.0, t1);
    let second =
        profile_from_speed(speed_law(rng.random_range(5.0..14.0), rng.random_range(-1.5..1.5), 1.0), 11.0, t1 + pet);
    (first, second)
}
