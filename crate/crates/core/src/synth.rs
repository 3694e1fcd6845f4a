//! Seeded synthetic conflict scenarios with known ground truth.
//!
//! Two agents pass a common conflict point at prescribed times. Their paths
//! are straight legs joined by circular turns, so the relation of their
//! initial and final directions, the approach side and the PET are fixed
//! by construction. Optional corruption reproduces the flaws of recorded
//! data: a boundary time-warp of positions (the position-based speed drops
//! to half its neighbouring peak at both ends), zero-filled speed samples and
//! Gaussian speed noise.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assess::{Relation, RegimeLabel, Side};
use crate::error::{Error, Result};
use crate::geometry::{conflict_point, crossing_test, timed_crossings, Point, Polyline};
use crate::mapproc::{LaneGraph, LaneId, LaneSegment, LANE_VECTORS};
use crate::selection::{Category, PairKind, SelectionConfig};
use crate::track::{AgentKind, Scenario, Track, TrackPoint, SAMPLE_INTERVAL};

/// Samples per synthetic track (0.0 ..= 10.9 s).
pub const SYNTH_SAMPLES: usize = 110;
/// Length of the corrupted window at each end, in samples.
pub const BOUNDARY_SAMPLES: usize = 15;
/// Directions are read from the first and last this-many seconds; the
/// generator keeps turns outside them.
const LEG_MARGIN: f64 = 1.3;
const SIDE_MARGIN: f64 = 0.5;
const PET_TOLERANCE: f64 = 0.02;
const RAMP_START: f64 = 2.0;
const RAMP_END: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub speed_noise_sigma: f64,
    /// Per-track probability of one zero-filled speed run.
    pub zero_fill_probability: f64,
    pub boundary_corruption: bool,
}

impl NoiseModel {
    pub fn clean() -> Self {
        NoiseModel::default()
    }

    pub fn is_clean(&self) -> bool {
        self.speed_noise_sigma == 0.0 && self.zero_fill_probability == 0.0 && !self.boundary_corruption
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub regime: RegimeLabel,
    /// Kinds of the first and second passer.
    pub kinds: [AgentKind; 2],
    /// Initial speeds, m/s.
    pub speeds: [f64; 2],
    /// Speed change applied by a smooth ramp over the middle of the record.
    pub speed_change: [f64; 2],
    pub pet_target: f64,
    /// Time at which the first agent passes the conflict point.
    pub t_first: f64,
    pub noise: NoiseModel,
    /// Adds one parked vehicle near the conflict point and one far away.
    pub background: bool,
    /// Applies a seeded rotation and translation to the whole scene.
    pub random_placement: bool,
}

impl SynthSpec {
    pub fn new(regime: RegimeLabel, speeds: [f64; 2], pet_target: f64) -> Self {
        SynthSpec {
            regime,
            kinds: [AgentKind::Vehicle, AgentKind::Vehicle],
            speeds,
            speed_change: [0.0, 0.0],
            pet_target,
            t_first: 4.0,
            noise: NoiseModel::clean(),
            background: false,
            random_placement: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.pet_target >= 0.0) {
            return bad(format!("pet_target must be non-negative, got {}", self.pet_target));
        }
        for i in 0..2 {
            if !(self.speeds[i] > 0.0) || !(self.speeds[i] + self.speed_change[i] > 0.0) {
                return bad(format!("agent {} speed must stay positive", i + 1));
            }
        }
        if !self.kinds.iter().any(|k| k.is_vehicle()) {
            return bad("at least one agent must be a vehicle".into());
        }
        if self.kinds.iter().all(|&k| k == AgentKind::Av) {
            return bad("at most one AV".into());
        }
        let t_end = (SYNTH_SAMPLES - 1) as f64 * SAMPLE_INTERVAL;
        if self.t_first < 2.5 || self.t_first + self.pet_target > t_end - 2.5 {
            return bad("passage times must leave 2.5 s before and after".into());
        }
        let n = &self.noise;
        if !(n.speed_noise_sigma >= 0.0 && (0.0..=1.0).contains(&n.zero_fill_probability)) {
            return bad("noise parameters out of range".into());
        }
        Ok(())
    }

    pub fn pair_kind(&self) -> PairKind {
        PairKind::of(self.kinds[0], self.kinds[1]).expect("validated: one agent is a vehicle")
    }

    pub fn category(&self) -> Category {
        match self.kinds {
            [AgentKind::Av, _] => Category::AvFirst,
            [_, AgentKind::Av] => Category::AvSecond,
            _ => Category::AvFree,
        }
    }
}

/// Construction facts of a generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario_id: String,
    pub first_agent: String,
    pub second_agent: String,
    pub t_first: f64,
    pub t_second: f64,
    pub pet: f64,
    pub location: Point,
    pub category: Category,
    pub pair_kind: PairKind,
    /// Vehicle pairs only.
    pub regime: Option<RegimeLabel>,
    pub surrounding: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScenario {
    /// Observed data, corrupted per the noise model.
    pub scenario: Scenario,
    /// The same scenario before corruption.
    pub clean: Scenario,
    pub truth: GroundTruth,
}

/// Speed with a raised-cosine ramp of `change` between the ramp bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedProfile {
    pub v0: f64,
    pub change: f64,
}

impl SpeedProfile {
    pub fn speed(&self, t: f64) -> f64 {
        let w = RAMP_END - RAMP_START;
        let r = if t <= RAMP_START {
            0.0
        } else if t >= RAMP_END {
            1.0
        } else {
            0.5 * (1.0 - (PI * (t - RAMP_START) / w).cos())
        };
        self.v0 + self.change * r
    }

    /// Distance travelled since t = 0.
    pub fn distance(&self, t: f64) -> f64 {
        let w = RAMP_END - RAMP_START;
        let ramp = if t <= RAMP_START {
            0.0
        } else if t >= RAMP_END {
            0.5 * w + (t - RAMP_END)
        } else {
            let u = t - RAMP_START;
            0.5 * u - w / TAU * (PI * u / w).sin()
        };
        self.v0 * t + self.change * ramp
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Line { start: Point, heading: f64, len: f64 },
    /// `sweep` signed, positive counter-clockwise.
    Arc { start: Point, heading: f64, radius: f64, sweep: f64 },
}

impl Piece {
    fn len(&self) -> f64 {
        match *self {
            Piece::Line { len, .. } => len,
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn at(&self, s: f64) -> (Point, f64) {
        match *self {
            Piece::Line { start, heading, .. } => (start + Point::from_angle(heading) * s, heading),
            Piece::Arc { start, heading, radius, sweep } => {
                let sign = sweep.signum();
                let u = s / radius;
                let centre = start + Point::from_angle(heading).perp() * (sign * radius);
                let h = heading + sign * u;
                (centre - Point::from_angle(h).perp() * (sign * radius), h)
            }
        }
    }
}

/// Arc-length parameterized path of straight legs and circular turns.
#[derive(Debug, Clone, PartialEq)]
struct Path {
    pieces: Vec<Piece>,
}

enum Step {
    Straight(f64),
    Turn { radius: f64, sweep: f64 },
}

impl Path {
    fn build(start: Point, heading: f64, steps: &[Step]) -> Path {
        let (mut p, mut h) = (start, heading);
        let mut pieces = Vec::new();
        for step in steps {
            let piece = match *step {
                Step::Straight(len) => Piece::Line { start: p, heading: h, len },
                Step::Turn { sweep, .. } if sweep == 0.0 => continue,
                Step::Turn { radius, sweep } => Piece::Arc { start: p, heading: h, radius, sweep },
            };
            (p, h) = piece.at(piece.len());
            pieces.push(piece);
        }
        Path { pieces }
    }

    /// Position and heading at arc length `s`; straight extrapolation past
    /// either end.
    fn at(&self, s: f64) -> (Point, f64) {
        let mut rest = s;
        for (i, piece) in self.pieces.iter().enumerate() {
            let last = i + 1 == self.pieces.len();
            if rest <= piece.len() || last {
                if rest > piece.len() {
                    let (end, h) = piece.at(piece.len());
                    return (end + Point::from_angle(h) * (rest - piece.len()), h);
                }
                if rest < 0.0 {
                    let (p0, h) = piece.at(0.0);
                    return (p0 + Point::from_angle(h) * rest, h);
                }
                return piece.at(rest);
            }
            rest -= piece.len();
        }
        (Point::ORIGIN, 0.0)
    }

    fn translated(&self, by: Point) -> Path {
        let pieces = self
            .pieces
            .iter()
            .map(|p| match *p {
                Piece::Line { start, heading, len } => Piece::Line { start: start + by, heading, len },
                Piece::Arc { start, heading, radius, sweep } => Piece::Arc { start: start + by, heading, radius, sweep },
            })
            .collect();
        Path { pieces }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

fn turn_radius(kind: AgentKind) -> f64 {
    match kind {
        AgentKind::Pedestrian => 1.5,
        AgentKind::Cyclist => 4.0,
        _ => 8.0,
    }
}

fn times() -> Vec<f64> {
    (0..SYNTH_SAMPLES).map(|i| i as f64 * SAMPLE_INTERVAL).collect()
}

/// Samples a path driven with `profile`.
fn sample(id: &str, kind: AgentKind, path: &Path, profile: &SpeedProfile) -> Track {
    let points = times()
        .into_iter()
        .map(|t| {
            let (p, h) = path.at(profile.distance(t));
            let v = profile.speed(t);
            TrackPoint { t, x: p.x, y: p.y, vx: v * h.cos(), vy: v * h.sin(), heading: h }
        })
        .collect();
    Track::new(id, kind, points).expect("synthetic samples are on the grid")
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    a2: f64,
    turn1: f64,
    turn2: f64,
    mid2: f64,
    pre2: f64,
    post2: f64,
    post1: f64,
}

fn deg(d: f64) -> f64 {
    d.to_radians()
}

fn candidates(label: RegimeLabel) -> Vec<Candidate> {
    let a2s: Vec<f64> = match label.before {
        Relation::P => vec![0.0],
        Relation::C => vec![deg(90.0), deg(-90.0)],
        Relation::O => vec![PI],
    };
    let turns = [deg(-90.0), 0.0, deg(90.0)];
    let mids = [30.0, -30.0, 45.0, -45.0, 60.0, -60.0, 90.0, -90.0, 120.0, -120.0, 135.0, -135.0, 150.0, -150.0];
    let durations = [0.6, 1.0, 1.5, 2.5];
    let mut out = Vec::new();
    for &a2 in &a2s {
        for &turn1 in &turns {
            for &turn2 in &turns {
                let after = wrap_angle(a2 + turn2 - turn1).abs().to_degrees();
                if Relation::from_angle_deg(after) != label.after {
                    continue;
                }
                for &m in &mids {
                    let mid2 = deg(m);
                    if wrap_angle(mid2 - a2).abs() > deg(135.0) + 1e-9 || wrap_angle(a2 + turn2 - mid2).abs() > deg(135.0) + 1e-9 {
                        continue;
                    }
                    for &pre2 in &durations {
                        for &post2 in &durations {
                            for &post1 in &durations[..3] {
                                out.push(Candidate { a2, turn1, turn2, mid2, pre2, post2, post1 });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

struct Layout {
    paths: [Path; 2],
}

/// Paths in the local frame: conflict point at the origin, first agent
/// heading east through it.
fn layout(spec: &SynthSpec, c: &Candidate, profiles: &[SpeedProfile; 2]) -> Option<Layout> {
    let t_end = (SYNTH_SAMPLES - 1) as f64 * SAMPLE_INTERVAL;
    let (t1, t2) = (spec.t_first, spec.t_first + spec.pet_target);
    let (r1, r2) = (turn_radius(spec.kinds[0]), turn_radius(spec.kinds[1]));
    let (p1, p2) = (&profiles[0], &profiles[1]);

    // first agent: straight through the origin, then one turn
    let c1 = p1.distance(t1);
    let straight1 = c1 + (p1.distance(t1 + c.post1) - c1);
    let arc1 = r1 * c.turn1.abs();
    if straight1 + arc1 > p1.distance(t_end - LEG_MARGIN) {
        return None;
    }
    let path1 = Path::build(
        Point::new(-c1, 0.0),
        0.0,
        &[Step::Straight(straight1), Step::Turn { radius: r1, sweep: c.turn1 }, Step::Straight(1e3)],
    );

    // second agent: in-leg, turn onto the crossing leg, turn onto the out-leg
    let c2 = p2.distance(t2);
    let sweep_in = wrap_angle(c.mid2 - c.a2);
    let sweep_out = wrap_angle(c.a2 + c.turn2 - c.mid2);
    let pre = c2 - p2.distance(t2 - c.pre2);
    let post = p2.distance(t2 + c.post2) - c2;
    let in_len = c2 - pre - r2 * sweep_in.abs();
    if in_len < p2.distance(LEG_MARGIN) {
        return None;
    }
    if c2 + post + r2 * sweep_out.abs() > p2.distance(t_end - LEG_MARGIN) {
        return None;
    }
    let local = Path::build(
        Point::ORIGIN,
        c.a2,
        &[
            Step::Straight(in_len),
            Step::Turn { radius: r2, sweep: sweep_in },
            Step::Straight(pre + post),
            Step::Turn { radius: r2, sweep: sweep_out },
            Step::Straight(1e3),
        ],
    );
    let (at_conflict, _) = local.at(c2);
    Some(Layout { paths: [path1, local.translated(-at_conflict)] })
}

fn mirrored(track: &Track) -> Track {
    let points = track
        .points
        .iter()
        .map(|p| TrackPoint { y: -p.y, vy: -p.vy, heading: wrap_angle(-p.heading), ..*p })
        .collect();
    Track { points, ..track.clone() }
}

fn transformed(track: &Track, theta: f64, shift: Point) -> Track {
    let points = track
        .points
        .iter()
        .map(|p| {
            let q = p.position().rotate(theta) + shift;
            let v = p.velocity().rotate(theta);
            TrackPoint { t: p.t, x: q.x, y: q.y, vx: v.x, vy: v.y, heading: wrap_angle(p.heading + theta) }
        })
        .collect();
    Track { points, ..track.clone() }
}

fn agent_id(kind: AgentKind, role: usize) -> String {
    match kind {
        AgentKind::Av => "AV".into(),
        AgentKind::Vehicle => format!("veh-{role}"),
        AgentKind::Pedestrian => format!("ped-{role}"),
        AgentKind::Cyclist => format!("cyc-{role}"),
        AgentKind::Other => format!("other-{role}"),
    }
}

/// Checks a candidate layout against the target: one transversal crossing
/// that passes the buffer test, the requested PET and a clear approach side.
fn accept(tracks: &[Track; 2], spec: &SynthSpec, sel: &SelectionConfig) -> Option<f64> {
    let (a, b) = (&tracks[0], &tracks[1]);
    let crossings = timed_crossings(&a.times(), &a.positions(), &b.times(), &b.positions());
    if crossings.len() != 1 {
        return None;
    }
    let (pa, pb) = (Polyline::new(a.positions()).ok()?, Polyline::new(b.positions()).ok()?);
    if !crossing_test(&pa, sel.buffer_for(a.kind), &pb, sel.buffer_for(b.kind)) {
        return None;
    }
    let c = conflict_point(a, b).ok()?;
    if c.first_agent != a.agent_id || (c.pet() - spec.pet_target).abs() > PET_TOLERANCE {
        return None;
    }
    // first agent heads east through the origin, so the side is the sign
    // of the second agent's y at the first passage
    let y = b.position_at(spec.t_first).y;
    (y.abs() >= SIDE_MARGIN).then_some(y)
}

/// Generates one scenario. Fails only for specs whose geometry cannot be
/// realised (e.g. speeds too low for the turns to fit).
pub fn synth(scenario_id: &str, spec: &SynthSpec, seed: u64) -> Result<SynthScenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles = [
        SpeedProfile { v0: spec.speeds[0], change: spec.speed_change[0] },
        SpeedProfile { v0: spec.speeds[1], change: spec.speed_change[1] },
    ];
    let ids = [agent_id(spec.kinds[0], 1), agent_id(spec.kinds[1], 2)];
    let sel = SelectionConfig::default();

    let mut cands = candidates(spec.regime);
    cands.shuffle(&mut rng);
    let mut chosen = None;
    for c in &cands {
        let Some(l) = layout(spec, c, &profiles) else { continue };
        let tracks = [
            sample(&ids[0], spec.kinds[0], &l.paths[0], &profiles[0]),
            sample(&ids[1], spec.kinds[1], &l.paths[1], &profiles[1]),
        ];
        if let Some(y) = accept(&tracks, spec, &sel) {
            chosen = Some((tracks, y));
            break;
        }
    }
    let (mut movers, y) = chosen.ok_or_else(|| Error::Degenerate(format!("no geometry realises {}", spec.regime)))?;
    let want_left = spec.regime.side == Side::LeftToRight;
    if (y > 0.0) != want_left {
        movers = [mirrored(&movers[0]), mirrored(&movers[1])];
    }

    let mut clean_tracks: Vec<Track> = movers.to_vec();
    let mut surrounding = BTreeSet::new();
    if spec.background {
        let paths: Vec<Vec<Point>> = movers.iter().map(Track::positions).collect();
        for (name, radius) in [("parked-near", 10.0), ("parked-far", 60.0)] {
            let spot = parking_spot(&paths, radius, &mut rng);
            let heading = rng.random_range(-PI..PI);
            let points = times().into_iter().map(|t| TrackPoint { t, x: spot.x, y: spot.y, vx: 0.0, vy: 0.0, heading }).collect();
            clean_tracks.push(Track::new(name, AgentKind::Vehicle, points)?);
            if radius <= sel.surround_radius {
                surrounding.insert(name.to_string());
            }
        }
    }

    let (theta, shift) = if spec.random_placement {
        (rng.random_range(-PI..PI), Point::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0)))
    } else {
        (0.0, Point::ORIGIN)
    };
    let clean_tracks: Vec<Track> = clean_tracks.iter().map(|t| transformed(t, theta, shift)).collect();
    let mut lane_segments = four_leg_intersection();
    for s in &mut lane_segments {
        let pts = s.centerline.vertices().iter().map(|p| p.rotate(theta) + shift).collect();
        s.centerline = Polyline::new(pts)?;
    }
    let lane_graph = LaneGraph::from_segments(&lane_segments)?;

    let observed: Vec<Track> = clean_tracks.iter().map(|t| corrupt(t, &spec.noise, &mut rng)).collect();
    let pair_kind = spec.pair_kind();
    let truth = GroundTruth {
        scenario_id: scenario_id.to_string(),
        first_agent: ids[0].clone(),
        second_agent: ids[1].clone(),
        t_first: spec.t_first,
        t_second: spec.t_first + spec.pet_target,
        pet: spec.pet_target,
        location: shift,
        category: spec.category(),
        pair_kind,
        regime: (pair_kind == PairKind::VehVeh).then_some(spec.regime),
        surrounding,
    };
    Ok(SynthScenario {
        clean: Scenario::new(scenario_id, clean_tracks, lane_graph.clone())?,
        scenario: Scenario::new(scenario_id, observed, lane_graph)?,
        truth,
    })
}

/// Point at `radius` from the origin, as far from both paths as possible.
fn parking_spot(paths: &[Vec<Point>], radius: f64, rng: &mut ChaCha8Rng) -> Point {
    let offset = rng.random_range(0.0..15.0);
    (0..24)
        .map(|k| Point::from_angle(deg(offset + 15.0 * k as f64)) * radius)
        .max_by(|p, q| clearance(paths, *p).total_cmp(&clearance(paths, *q)))
        .unwrap_or(Point::new(radius, 0.0))
}

fn clearance(paths: &[Vec<Point>], p: Point) -> f64 {
    paths.iter().flatten().map(|q| q.distance(p)).fold(f64::INFINITY, f64::min)
}

/// Endpoint-preserving warp of normalized time; slope 2/3 at the ends and
/// 4/3 in the middle.
fn boundary_warp(tau: f64) -> f64 {
    tau - (1.0 / 3.0) * (TAU * tau).sin() / TAU
}

/// Applies the noise model to a moving track; static tracks are returned
/// unchanged.
pub fn corrupt(track: &Track, noise: &NoiseModel, rng: &mut ChaCha8Rng) -> Track {
    if noise.is_clean() || track.path_length() == 0.0 {
        return track.clone();
    }
    let n = track.len();
    let mut points = track.points.clone();
    let window = BOUNDARY_SAMPLES as f64;

    if noise.boundary_corruption && n > 2 * BOUNDARY_SAMPLES {
        let orig = track.positions();
        let times = track.times();
        let at = |t: f64| crate::track::interpolate_points(&times, &orig, t);
        for i in 0..=BOUNDARY_SAMPLES {
            let w = boundary_warp(i as f64 / window) * window;
            let p = at(times[0] + w * SAMPLE_INTERVAL);
            points[i].x = p.x;
            points[i].y = p.y;
            let j = n - 1 - i;
            let q = at(times[n - 1] - w * SAMPLE_INTERVAL);
            points[j].x = q.x;
            points[j].y = q.y;
        }
    }

    if noise.speed_noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.speed_noise_sigma).expect("sigma is finite and positive");
        for p in &mut points {
            let v = (p.speed() + normal.sample(rng)).max(0.0);
            p.vx = v * p.heading.cos();
            p.vy = v * p.heading.sin();
        }
    }

    if noise.zero_fill_probability > 0.0 && rng.random_bool(noise.zero_fill_probability) && n > 44 {
        // keep the dropped distance under 1.5 m
        let v = track.speeds().iter().copied().fold(0.0, f64::max);
        let run = if 2.0 * v * SAMPLE_INTERVAL <= 1.5 { 2 } else { 1 };
        let start = rng.random_range(20..n - 20 - run);
        for p in &mut points[start..start + run] {
            p.vx = 0.0;
            p.vy = 0.0;
        }
    }
    Track { points, ..track.clone() }
}

/// Composition of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub scenarios: usize,
    pub noise: NoiseModel,
    pub background: bool,
}

/// A corpus cycling through all 18 regime labels for vehicle pairs, with
/// AV placement alternating first / second / absent and every fourth
/// scenario a vehicle–pedestrian or vehicle–cyclist pair.
pub fn synth_corpus(spec: &CorpusSpec, seed: u64) -> Result<Vec<SynthScenario>> {
    let labels = RegimeLabel::all();
    let mut veh_pairs = 0;
    let mut out = Vec::with_capacity(spec.scenarios);
    for i in 0..spec.scenarios {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let av = i % 3 != 2;
        let vehicle = |rng: &mut ChaCha8Rng| (rng.random_range(7.0..12.0), rng.random_range(-3.0..3.0));
        let (kinds, speeds, change, regime) = if i % 4 == 3 {
            let vru = if (i / 4) % 2 == 0 { AgentKind::Pedestrian } else { AgentKind::Cyclist };
            let vru_speed = if vru == AgentKind::Pedestrian { rng.random_range(1.2..1.6) } else { rng.random_range(3.0..5.0) };
            let (vs, dv) = vehicle(&mut rng);
            let veh = if av { AgentKind::Av } else { AgentKind::Vehicle };
            let label = RegimeLabel { before: Relation::C, after: Relation::C, side: if rng.random_bool(0.5) { Side::LeftToRight } else { Side::RightToLeft } };
            if rng.random_bool(0.5) {
                ([veh, vru], [vs, vru_speed], [dv, 0.0], label)
            } else {
                ([vru, veh], [vru_speed, vs], [0.0, dv], label)
            }
        } else {
            let label = labels[veh_pairs % labels.len()];
            veh_pairs += 1;
            let kinds = match i % 3 {
                0 => [AgentKind::Av, AgentKind::Vehicle],
                1 => [AgentKind::Vehicle, AgentKind::Av],
                _ => [AgentKind::Vehicle, AgentKind::Vehicle],
            };
            let (a, da) = vehicle(&mut rng);
            let (b, db) = vehicle(&mut rng);
            (kinds, [a, b], [da, db], label)
        };
        let s = SynthSpec {
            regime,
            kinds,
            speeds,
            speed_change: change,
            pet_target: rng.random_range(1.0..2.8),
            t_first: rng.random_range(3.5..4.5),
            noise: spec.noise.clone(),
            background: spec.background,
            random_placement: true,
        };
        out.push(synth(&format!("synth-{i:04}"), &s, rng.random())?);
    }
    Ok(out)
}

/// Segment id offsets of the intersection fixture.
const INBOUND: LaneId = 100;
const OUTBOUND: LaneId = 200;
const CONNECTOR: LaneId = 300;

/// Four-leg intersection at the origin with right-hand traffic. Each arm
/// carries one inbound and one outbound lane (±1.75 m from the arm axis),
/// each split into three 15 m segments between 10 m and 55 m from the
/// centre. Every inbound lane connects to the outbound lanes of the three
/// other arms.
pub fn four_leg_intersection() -> Vec<LaneSegment> {
    let (half_width, inner, seg_len, segs) = (1.75, 10.0, 15.0, 3u64);
    let mut segments = Vec::new();
    let arm = |k: u64| Point::from_angle(k as f64 * FRAC_PI_2);
    // inbound travels towards the centre with the arm's left side on its right
    let inbound_point = |k: u64, r: f64| arm(k) * r + arm(k).perp() * half_width;
    let outbound_point = |k: u64, r: f64| arm(k) * r - arm(k).perp() * half_width;
    for k in 0..4 {
        for j in 0..segs {
            let (far, near) = (inner + seg_len * (segs - j) as f64, inner + seg_len * (segs - j - 1) as f64);
            let id = INBOUND + 10 * k + j;
            let line = Polyline::new(vec![inbound_point(k, far), inbound_point(k, near)]).expect("distinct endpoints");
            let succ: Vec<LaneId> =
                if j + 1 < segs { vec![id + 1] } else { (0..4).filter(|&m| m != k).map(|m| CONNECTOR + 10 * k + m).collect() };
            segments.push(LaneSegment::new(id, line, succ));

            let (near, far) = (inner + seg_len * j as f64, inner + seg_len * (j + 1) as f64);
            let id = OUTBOUND + 10 * k + j;
            let line = Polyline::new(vec![outbound_point(k, near), outbound_point(k, far)]).expect("distinct endpoints");
            let succ: Vec<LaneId> = if j + 1 < segs { vec![id + 1] } else { vec![] };
            segments.push(LaneSegment::new(id, line, succ));
        }
    }
    for k in 0..4 {
        for m in (0..4).filter(|&m| m != k) {
            let (a, b) = (inbound_point(k, inner), outbound_point(m, inner));
            let pts = if (k + 2) % 4 == m {
                vec![a, b]
            } else {
                // circular arc tangent to both lane lines, in equal pieces
                let corner = corner_point(a, -arm(k), b, arm(m)).expect("turning lanes are not parallel");
                let centre = a + (b - corner);
                let (ra, rb) = (a - centre, b - centre);
                let sweep = ra.cross(rb).atan2(ra.dot(rb));
                (0..=LANE_VECTORS).map(|i| centre + ra.rotate(sweep * i as f64 / LANE_VECTORS as f64)).collect()
            };
            segments.push(LaneSegment::new(CONNECTOR + 10 * k + m, Polyline::new(pts).expect("distinct points"), [OUTBOUND + 10 * m]));
        }
    }
    segments
}

/// Intersection of the lines `a + s·da` and `b + t·db`.
fn corner_point(a: Point, da: Point, b: Point, db: Point) -> Option<Point> {
    let den = da.cross(db);
    if den.abs() < 1e-12 {
        return None;
    }
    let s = (b - a).cross(db) / den;
    Some(a + da * s)
}
