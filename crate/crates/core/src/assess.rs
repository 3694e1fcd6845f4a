//! Kinematic plausibility checks and conflict-regime labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::enhance::EnhancedTrack;
use crate::error::{Error, Result};
use crate::geometry::{ConflictPoint, Point};
use crate::track::{kinematic_profile, speed_consistency_error, AgentKind, KinematicProfile, Track};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyConfig {
    pub accel_min: f64,
    pub accel_max: f64,
    pub jerk_min: f64,
    pub jerk_max: f64,
    /// Sliding window for jerk sign reversals, s.
    pub jsi_window: f64,
    /// |jerk| at or below this carries no sign.
    pub jsi_deadband: f64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        AnomalyConfig { accel_min: -8.0, accel_max: 5.0, jerk_min: -15.0, jerk_max: 15.0, jsi_window: 1.0, jsi_deadband: 0.05 }
    }
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.accel_min < self.accel_max && self.jerk_min < self.jerk_max) {
            return Err(Error::InvalidConfig("anomaly bounds must satisfy min < max".into()));
        }
        if !(self.jsi_window > 0.0 && self.jsi_deadband >= 0.0) {
            return Err(Error::InvalidConfig("anomaly.jsi_window must be positive and jsi_deadband non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnomalyFlags {
    pub acceleration: Vec<bool>,
    pub jerk: Vec<bool>,
    pub jsi: Vec<bool>,
}

/// Per-sample anomaly flags. A sample gets a JSI flag when the window of
/// `jsi_window` seconds ending at it holds two or more jerk sign reversals.
pub fn anomaly_flags(profile: &KinematicProfile, cfg: &AnomalyConfig) -> AnomalyFlags {
    let acceleration = profile.acceleration.iter().map(|&a| a < cfg.accel_min || a > cfg.accel_max).collect();
    let jerk = profile.jerk.iter().map(|&j| j < cfg.jerk_min || j > cfg.jerk_max).collect();

    // times of sign reversals between consecutive signed samples
    let mut reversals = Vec::new();
    let mut last_sign = 0.0;
    for (i, &j) in profile.jerk.iter().enumerate() {
        if j.abs() <= cfg.jsi_deadband {
            continue;
        }
        let sign = j.signum();
        if last_sign != 0.0 && sign != last_sign {
            reversals.push(profile.t[i]);
        }
        last_sign = sign;
    }
    let eps = 1e-9;
    let jsi = profile
        .t
        .iter()
        .map(|&t| reversals.iter().filter(|&&r| r <= t + eps && r > t - cfg.jsi_window + eps).count() >= 2)
        .collect();
    AnomalyFlags { acceleration, jerk, jsi }
}

/// Kinematics and consistency of one conflicting vehicle, raw or enhanced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackQuality {
    pub kind: AgentKind,
    pub profile: KinematicProfile,
    pub delta_v: f64,
}

impl TrackQuality {
    /// Raw kinematics from the recorded speed; `None` for tracks too short or
    /// gapped to differentiate.
    pub fn raw(track: &Track) -> Option<Self> {
        let profile = kinematic_profile(&track.speeds(), &track.times()).ok()?;
        let delta_v = speed_consistency_error(track).ok()?;
        Some(TrackQuality { kind: track.kind, profile, delta_v })
    }

    pub fn enhanced(track: &EnhancedTrack) -> Option<Self> {
        Some(TrackQuality { kind: track.kind(), profile: track.profile.clone()?, delta_v: track.consistency_mae()? })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnomalyStats {
    pub tracks: usize,
    pub samples: usize,
    /// Mean over tracks of the per-track position/speed consistency error.
    pub delta_v: f64,
    pub acc_pct: f64,
    pub jerk_pct: f64,
    pub jsi_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub av: Option<AnomalyStats>,
    pub hv: Option<AnomalyStats>,
    pub all: AnomalyStats,
}

fn aggregate<'a>(items: impl Iterator<Item = &'a TrackQuality>, cfg: &AnomalyConfig) -> Option<AnomalyStats> {
    let mut s = AnomalyStats::default();
    let (mut acc, mut jerk, mut jsi, mut dv) = (0usize, 0usize, 0usize, 0.0);
    for q in items {
        let f = anomaly_flags(&q.profile, cfg);
        s.tracks += 1;
        s.samples += q.profile.len();
        acc += f.acceleration.iter().filter(|&&b| b).count();
        jerk += f.jerk.iter().filter(|&&b| b).count();
        jsi += f.jsi.iter().filter(|&&b| b).count();
        dv += q.delta_v;
    }
    if s.tracks == 0 || s.samples == 0 {
        return None;
    }
    let pct = |k: usize| 100.0 * k as f64 / s.samples as f64;
    s.delta_v = dv / s.tracks as f64;
    s.acc_pct = pct(acc);
    s.jerk_pct = pct(jerk);
    s.jsi_pct = pct(jsi);
    Some(s)
}

/// Timestep percentages and mean consistency error, split AV / HV.
pub fn anomaly_report(tracks: &[TrackQuality], cfg: &AnomalyConfig) -> Result<AnomalyReport> {
    let all = aggregate(tracks.iter(), cfg).ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    Ok(AnomalyReport {
        av: aggregate(tracks.iter().filter(|q| q.kind == AgentKind::Av), cfg),
        hv: aggregate(tracks.iter().filter(|q| q.kind != AgentKind::Av), cfg),
        all,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// Parallel
    P,
    /// Crossing
    C,
    /// Opposite
    O,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::P, Relation::C, Relation::O];

    /// Classifies the angle between two directions. Exactly 45° and 135°
    /// count as crossing.
    pub fn from_angle_deg(theta: f64) -> Relation {
        if theta < 45.0 {
            Relation::P
        } else if theta > 135.0 {
            Relation::O
        } else {
            Relation::C
        }
    }

    pub fn between(a: Point, b: Point) -> Relation {
        let c = (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0);
        Relation::from_angle_deg(c.acos().to_degrees())
    }

    fn letter(self) -> char {
        match self {
            Relation::P => 'P',
            Relation::C => 'C',
            Relation::O => 'O',
        }
    }
}

/// Side from which the second passer approaches, seen from the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    LeftToRight,
    RightToLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegimeLabel {
    pub before: Relation,
    pub after: Relation,
    pub side: Side,
}

impl RegimeLabel {
    pub fn all() -> Vec<RegimeLabel> {
        let mut out = Vec::with_capacity(18);
        for before in Relation::ALL {
            for after in Relation::ALL {
                for side in [Side::LeftToRight, Side::RightToLeft] {
                    out.push(RegimeLabel { before, after, side });
                }
            }
        }
        out
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::LeftToRight => 'L',
            Side::RightToLeft => 'R',
        };
        write!(f, "{}>{}:{}", self.before.letter(), self.after.letter(), side)
    }
}

impl FromStr for RegimeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidScenario(format!("malformed regime label {s:?}"));
        let rel = |c: char| match c {
            'P' => Some(Relation::P),
            'C' => Some(Relation::C),
            'O' => Some(Relation::O),
            _ => None,
        };
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 5 || chars[1] != '>' || chars[3] != ':' {
            return Err(bad());
        }
        let side = match chars[4] {
            'L' => Side::LeftToRight,
            'R' => Side::RightToLeft,
            _ => return Err(bad()),
        };
        Ok(RegimeLabel { before: rel(chars[0]).ok_or_else(bad)?, after: rel(chars[2]).ok_or_else(bad)?, side })
    }
}

impl Serialize for RegimeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RegimeLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Length of the averaging window for direction vectors, s.
pub const DIRECTION_WINDOW: f64 = 1.0;
/// Tracks shorter than this have no usable direction, m.
const MIN_TRAVEL: f64 = 0.1;

/// Mean unit heading over the first (`at_end = false`) or last second.
pub fn direction_vector(track: &Track, at_end: bool) -> Result<Point> {
    if track.path_length() < MIN_TRAVEL {
        return Err(Error::DirectionUndefined(format!("{} does not move", track.agent_id)));
    }
    let eps = 1e-9;
    let sum = if at_end {
        let from = track.end_time() - DIRECTION_WINDOW - eps;
        track.points.iter().filter(|p| p.t >= from).fold(Point::ORIGIN, |acc, p| acc + Point::from_angle(p.heading))
    } else {
        let to = track.start_time() + DIRECTION_WINDOW + eps;
        track.points.iter().filter(|p| p.t <= to).fold(Point::ORIGIN, |acc, p| acc + Point::from_angle(p.heading))
    };
    sum.normalized()
        .ok_or_else(|| Error::DirectionUndefined(format!("{}: headings cancel out", track.agent_id)))
}

/// Before/after relation and approach side of a conflict pair. `first` is
/// the agent passing the conflict point first.
pub fn classify_regime(first: &Track, second: &Track, conflict: &ConflictPoint) -> Result<RegimeLabel> {
    let (d1_in, d2_in) = (direction_vector(first, false)?, direction_vector(second, false)?);
    let (d1_out, d2_out) = (direction_vector(first, true)?, direction_vector(second, true)?);
    let t = conflict.t_first;
    let offset = second.position_at(t) - first.position_at(t);
    let side = if d1_in.cross(offset) > 0.0 { Side::LeftToRight } else { Side::RightToLeft };
    Ok(RegimeLabel { before: Relation::between(d1_in, d2_in), after: Relation::between(d1_out, d2_out), side })
}
