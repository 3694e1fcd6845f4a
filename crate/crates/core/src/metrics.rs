//! Safety and efficiency measures for a conflict case.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assess::RegimeLabel;
use crate::enhance::EnhancedTrack;
use crate::error::{Error, Result};
use crate::geometry::{conflict_from_paths, min_separation, ConflictPoint, Point};
use crate::selection::{Category, ConflictCase, PairKind};
use crate::track::{interpolate, interpolate_points};

/// Passage point further than this from the path is rejected, m.
pub const OFF_PATH_TOLERANCE: f64 = 0.5;
const EPS: f64 = 1e-9;

/// Signed arc length to the conflict point (negative while approaching),
/// with speed and acceleration, as functions of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvilinearProfile {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub acceleration: Vec<f64>,
    /// Time at which `s` crosses zero.
    pub t_pass: f64,
}

impl CurvilinearProfile {
    pub fn s_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.t, &self.s, t)
    }

    pub fn v_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.t, &self.v, t)
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Same profile observed `dt` seconds later.
    pub fn shifted(&self, dt: f64) -> Self {
        CurvilinearProfile {
            t: self.t.iter().map(|t| t + dt).collect(),
            t_pass: self.t_pass + dt,
            ..self.clone()
        }
    }
}

/// Builds the profile from sampled positions. The zero of `s` sits at the
/// path station reached at `t_pass`; that position must lie within
/// [`OFF_PATH_TOLERANCE`] of `location`.
pub fn curvilinear_profile_of(
    times: &[f64],
    positions: &[Point],
    speed: &[f64],
    acceleration: Option<&[f64]>,
    location: Point,
    t_pass: f64,
) -> Result<CurvilinearProfile> {
    let n = times.len();
    if n < 2 || positions.len() != n || speed.len() != n || acceleration.is_some_and(|a| a.len() != n) {
        return Err(Error::insufficient(2, n));
    }
    if t_pass < times[0] - EPS || t_pass > times[n - 1] + EPS {
        return Err(Error::OffPath { distance: f64::INFINITY });
    }
    let passage = interpolate_points(times, positions, t_pass);
    let distance = passage.distance(location);
    if distance > OFF_PATH_TOLERANCE {
        return Err(Error::OffPath { distance });
    }
    let mut stations = Vec::with_capacity(n);
    let mut acc = 0.0;
    stations.push(0.0);
    for w in positions.windows(2) {
        acc += w[0].distance(w[1]);
        stations.push(acc);
    }
    let s_c = interpolate(times, &stations, t_pass).unwrap_or(0.0);
    Ok(CurvilinearProfile {
        t: times.to_vec(),
        s: stations.iter().map(|s| s - s_c).collect(),
        v: speed.to_vec(),
        acceleration: acceleration.map_or_else(|| vec![0.0; n], <[f64]>::to_vec),
        t_pass,
    })
}

pub fn curvilinear_profile(track: &EnhancedTrack, location: Point, t_pass: f64) -> Result<CurvilinearProfile> {
    curvilinear_profile_of(
        &track.times(),
        &track.positions,
        track.speed(),
        track.profile.as_ref().map(|p| p.acceleration.as_slice()),
        location,
        t_pass,
    )
}

/// Instantaneous PSD: remaining distance over the stopping distance at
/// deceleration `a_max`.
pub fn psd(distance: f64, v: f64, a_max: f64) -> f64 {
    distance / (v * v / (2.0 * a_max.abs()))
}

/// Minimum PSD before passage over samples moving faster than `min_speed`
/// and still short of the conflict point.
pub fn psd_min(profile: &CurvilinearProfile, a_max: f64, min_speed: f64) -> Option<f64> {
    profile
        .t
        .iter()
        .zip(profile.s.iter().zip(&profile.v))
        .filter(|&(&t, (&s, &v))| t < profile.t_pass && v > min_speed && s < 0.0)
        .map(|(_, (&s, &v))| psd(-s, v, a_max))
        .min_by(f64::total_cmp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecelStats {
    /// Most negative acceleration before passage, m/s².
    pub max_decel: f64,
    /// Time from that sample to passage, s.
    pub lead_time: f64,
}

/// Earliest minimum of the acceleration before passage.
pub fn decel_stats(profile: &CurvilinearProfile) -> Option<DecelStats> {
    let mut best: Option<(f64, f64)> = None;
    for (&t, &a) in profile.t.iter().zip(&profile.acceleration) {
        if t >= profile.t_pass {
            break;
        }
        if best.is_none_or(|(b, _)| a < b) {
            best = Some((a, t));
        }
    }
    best.map(|(a, t)| DecelStats { max_decel: a, lead_time: profile.t_pass - t })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MrctParams {
    pub headway_slope: f64,
    pub headway_offset: f64,
    pub gap_slope: f64,
    pub gap_floor: f64,
    pub search_resolution: f64,
    pub search_max: f64,
}

impl Default for MrctParams {
    fn default() -> Self {
        MrctParams {
            headway_slope: 2.0,
            headway_offset: 8.0,
            gap_slope: 2.0,
            gap_floor: 8.0,
            search_resolution: 0.01,
            search_max: 30.0,
        }
    }
}

/// Final bracket width of the bisection, s.
pub const MRCT_REFINEMENT: f64 = 0.001;

impl MrctParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("headway_slope", self.headway_slope),
            ("headway_offset", self.headway_offset),
            ("gap_slope", self.gap_slope),
            ("gap_floor", self.gap_floor),
            ("search_resolution", self.search_resolution),
            ("search_max", self.search_max),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("mrct.{name} must be positive, got {v}")));
            }
        }
        if self.search_resolution > self.search_max {
            return Err(Error::InvalidConfig("mrct.search_resolution exceeds mrct.search_max".into()));
        }
        Ok(())
    }

    /// Same-stream spacing d_h(v).
    pub fn critical_headway(&self, v: f64) -> f64 {
        self.headway_slope * v + self.headway_offset
    }

    /// Cross-stream clearance d_g(v).
    pub fn critical_gap(&self, v: f64) -> f64 {
        (self.gap_slope * v).max(self.gap_floor)
    }
}

pub fn critical_headway(v: f64) -> f64 {
    MrctParams::default().critical_headway(v)
}

pub fn critical_gap(v: f64) -> f64 {
    MrctParams::default().critical_gap(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MrctFailure {
    #[error("trajectory segments needed by the constraints are missing")]
    NoSolution,
    #[error("no feasible clearance time within the search range")]
    Infeasible,
}

impl MrctFailure {
    pub fn as_str(self) -> &'static str {
        match self {
            MrctFailure::NoSolution => "no_solution",
            MrctFailure::Infeasible => "infeasible",
        }
    }
}

/// Headway constraint of one stream: every sample up to `t_end` keeps
/// d_h behind its own position Δt earlier. Samples whose shifted time
/// precedes the data are skipped. Returns (satisfied, evaluated count).
fn headway_ok(p: &CurvilinearProfile, t_end: f64, dt: f64, params: &MrctParams) -> (bool, usize) {
    let mut count = 0;
    for (&t, &s) in p.t.iter().zip(&p.s) {
        if t > t_end + EPS {
            break;
        }
        let earlier = t - dt;
        if earlier < p.start() - EPS {
            continue;
        }
        let (Some(s0), Some(v0)) = (p.s_at(earlier), p.v_at(earlier)) else { continue };
        count += 1;
        if s - s0 < params.critical_headway(v0) - EPS {
            return (false, count);
        }
    }
    (true, count)
}

/// Whether a clearance time `dt` satisfies all constraints; `None` when the
/// cross-stream constraint falls outside the first vehicle's data.
pub fn mrct_feasible(first: &CurvilinearProfile, second: &CurvilinearProfile, dt: f64, params: &MrctParams) -> Option<bool> {
    let tau = second.t_pass - dt;
    if tau < first.start() - EPS || tau > first.end() + EPS {
        return None;
    }
    let gap = -first.s_at(tau)? >= params.critical_gap(first.v_at(tau)?) - EPS;
    Some(gap && headway_ok(first, first.t_pass, dt, params).0 && headway_ok(second, second.t_pass, dt, params).0)
}

fn has_approach(p: &CurvilinearProfile) -> bool {
    p.t.len() >= 2 && p.start() < p.t_pass
}

/// Scans Δt on the search grid, then bisects the first feasible bracket.
/// `edge` is the largest evaluable Δt when the data bound it; it is probed
/// too, so a feasible window closing between grid points is not missed.
fn scan_and_refine(
    mut feasible: impl FnMut(f64) -> Option<bool>,
    params: &MrctParams,
    edge: Option<f64>,
) -> std::result::Result<f64, MrctFailure> {
    let res = params.search_resolution;
    let steps = (params.search_max / res + EPS).floor() as usize;
    let mut grid: Vec<f64> = (1..=steps).map(|k| k as f64 * res).collect();
    if let Some(e) = edge.filter(|&e| e > EPS && e <= params.search_max) {
        let at = grid.partition_point(|&g| g < e - EPS);
        if grid.get(at).is_none_or(|&g| (g - e).abs() > EPS) {
            grid.insert(at, e);
        }
    }
    let mut evaluable = false;
    let mut prev = 0.0;
    for dt in grid {
        match feasible(dt) {
            Some(true) => {
                let (mut lo, mut hi) = (prev, dt);
                while hi - lo > MRCT_REFINEMENT + EPS {
                    let mid = 0.5 * (lo + hi);
                    if feasible(mid) == Some(true) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(hi);
            }
            Some(false) => evaluable = true,
            None => {}
        }
        prev = dt;
    }
    Err(if evaluable { MrctFailure::Infeasible } else { MrctFailure::NoSolution })
}

/// Minimum recurrent clearance time of a vehicle pair.
pub fn mrct(first: &CurvilinearProfile, second: &CurvilinearProfile, params: &MrctParams) -> std::result::Result<f64, MrctFailure> {
    if !has_approach(first) || !has_approach(second) {
        return Err(MrctFailure::NoSolution);
    }
    scan_and_refine(|dt| mrct_feasible(first, second, dt, params), params, Some(second.t_pass - first.start()))
}

/// Clearance time with the crossing stream removed: only the leader's own
/// headway constraint over its whole record.
pub fn mrct_car_following(profile: &CurvilinearProfile, params: &MrctParams) -> std::result::Result<f64, MrctFailure> {
    if profile.t.len() < 2 {
        return Err(MrctFailure::NoSolution);
    }
    scan_and_refine(
        |dt| match headway_ok(profile, profile.end(), dt, params) {
            (_, 0) => None,
            (ok, _) => Some(ok),
        },
        params,
        None,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Maximum acceptable deceleration magnitude for PSD, m/s².
    pub a_max: f64,
    /// PSD is evaluated only above this speed, m/s.
    pub psd_min_speed: f64,
    pub mrct: MrctParams,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { a_max: 3.35, psd_min_speed: 0.5, mrct: MrctParams::default() }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_max != 0.0 && self.a_max.is_finite()) {
            return Err(Error::InvalidConfig("metrics.a_max must be non-zero".into()));
        }
        if !(self.psd_min_speed >= 0.0) {
            return Err(Error::InvalidConfig("metrics.psd_min_speed must be non-negative".into()));
        }
        self.mrct.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub case_id: String,
    pub category: Category,
    pub pair_kind: PairKind,
    pub regime: Option<RegimeLabel>,
    pub pet: f64,
    pub min_sep: f64,
    pub psd_min: Option<f64>,
    pub max_decel: Option<f64>,
    pub decel_lead_time: Option<f64>,
    pub mrct: Option<f64>,
    pub pre_conflict: Option<f64>,
    pub flow: Option<f64>,
    /// Why MRCT is absent for a vehicle pair.
    pub mrct_failure: Option<MrctFailure>,
}

/// Conflict point on the enhanced tracks, keeping the selected passing
/// order. Falls back to the selection-time point when the enhanced paths no
/// longer cross or swap order.
fn enhanced_conflict(case: &ConflictCase, first: &EnhancedTrack, second: &EnhancedTrack) -> ConflictPoint {
    conflict_from_paths(
        first.agent_id(),
        &first.times(),
        &first.positions,
        second.agent_id(),
        &second.times(),
        &second.positions,
    )
    .ok()
    .filter(|c| c.first_agent == case.first_agent)
    .unwrap_or_else(|| case.conflict.clone())
}

/// All metrics of one case from its enhanced tracks. PSD and deceleration
/// are reported for vehicle second-passers; MRCT for vehicle pairs.
pub fn case_metrics(case: &ConflictCase, first: &EnhancedTrack, second: &EnhancedTrack, cfg: &MetricsConfig) -> MetricsRecord {
    let conflict = enhanced_conflict(case, first, second);
    let min_sep = min_separation(&first.to_track(), &second.to_track()).unwrap_or(case.min_sep);
    let mut record = MetricsRecord {
        case_id: case.case_id(),
        category: case.category,
        pair_kind: case.pair_kind,
        regime: case.regime,
        pet: conflict.pet(),
        min_sep,
        psd_min: None,
        max_decel: None,
        decel_lead_time: None,
        mrct: None,
        pre_conflict: None,
        flow: None,
        mrct_failure: None,
    };
    let p2 = curvilinear_profile(second, conflict.location, conflict.t_second).ok();
    if second.kind().is_vehicle() {
        if let Some(p2) = &p2 {
            record.psd_min = psd_min(p2, cfg.a_max, cfg.psd_min_speed);
            if let Some(d) = decel_stats(p2) {
                record.max_decel = Some(d.max_decel);
                record.decel_lead_time = Some(d.lead_time);
            }
        }
    }
    if first.kind().is_vehicle() && second.kind().is_vehicle() {
        let p1 = curvilinear_profile(first, conflict.location, conflict.t_first).ok();
        let outcome = match (p1, p2) {
            (Some(p1), Some(p2)) => mrct(&p1, &p2, &cfg.mrct),
            _ => Err(MrctFailure::NoSolution),
        };
        match outcome {
            Ok(m) => {
                record.mrct = Some(m);
                record.pre_conflict = Some(m - record.pet);
                record.flow = Some(1.0 / m);
            }
            Err(f) => record.mrct_failure = Some(f),
        }
    }
    record
}
