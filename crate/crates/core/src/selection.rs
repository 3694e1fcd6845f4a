//! Conflict-case extraction from a scenario.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assess::RegimeLabel;
use crate::error::{Error, Result};
use crate::geometry::{closest_on_segment, conflict_point, crossing_test, min_separation, ConflictPoint, Point};
use crate::track::{AgentKind, Scenario, Track};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub buffer_vehicle: f64,
    pub buffer_vru: f64,
    pub pet_max: f64,
    pub min_sep_max: f64,
    pub travel_min: f64,
    pub pet_soft: f64,
    pub speed_var_min: f64,
    pub surround_radius: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            buffer_vehicle: 3.0,
            buffer_vru: 1.5,
            pet_max: 5.0,
            min_sep_max: 8.0,
            travel_min: 8.0,
            pet_soft: 3.0,
            speed_var_min: 3.0,
            surround_radius: 30.0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("buffer_vehicle", self.buffer_vehicle),
            ("buffer_vru", self.buffer_vru),
            ("pet_max", self.pet_max),
            ("min_sep_max", self.min_sep_max),
            ("travel_min", self.travel_min),
            ("pet_soft", self.pet_soft),
            ("speed_var_min", self.speed_var_min),
            ("surround_radius", self.surround_radius),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("selection.{name} must be positive, got {v}")));
            }
        }
        if self.pet_soft >= self.pet_max {
            return Err(Error::InvalidConfig("selection.pet_soft must be below selection.pet_max".into()));
        }
        Ok(())
    }

    /// Buffer half-width used for an agent's path in the crossing test.
    pub fn buffer_for(&self, kind: AgentKind) -> f64 {
        if kind.is_vulnerable() {
            self.buffer_vru
        } else {
            self.buffer_vehicle
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "AV_first")]
    AvFirst,
    #[serde(rename = "AV_second")]
    AvSecond,
    #[serde(rename = "AV_free")]
    AvFree,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::AvFirst, Category::AvSecond, Category::AvFree];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::AvFirst => "AV_first",
            Category::AvSecond => "AV_second",
            Category::AvFree => "AV_free",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    VehVeh,
    VehPed,
    VehCyc,
    VehOther,
}

impl PairKind {
    pub const ALL: [PairKind; 4] = [PairKind::VehVeh, PairKind::VehPed, PairKind::VehCyc, PairKind::VehOther];

    /// `None` when neither agent is a vehicle.
    pub fn of(a: AgentKind, b: AgentKind) -> Option<PairKind> {
        let other = match (a.is_vehicle(), b.is_vehicle()) {
            (true, true) => return Some(PairKind::VehVeh),
            (true, false) => b,
            (false, true) => a,
            (false, false) => return None,
        };
        Some(match other {
            AgentKind::Pedestrian => PairKind::VehPed,
            AgentKind::Cyclist => PairKind::VehCyc,
            _ => PairKind::VehOther,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::VehVeh => "veh_veh",
            PairKind::VehPed => "veh_ped",
            PairKind::VehCyc => "veh_cyc",
            PairKind::VehOther => "veh_other",
        }
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PairKind::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown pair kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictCase {
    pub scenario_id: String,
    pub first_agent: String,
    pub second_agent: String,
    pub conflict: ConflictPoint,
    pub pet: f64,
    pub min_sep: f64,
    pub category: Category,
    pub pair_kind: PairKind,
    pub surrounding: BTreeSet<String>,
    /// Filled by regime classification; vehicle pairs only.
    pub regime: Option<RegimeLabel>,
}

impl ConflictCase {
    pub fn case_id(&self) -> String {
        format!("{}:{}:{}", self.scenario_id, self.first_agent, self.second_agent)
    }
}

pub fn pet(conflict: &ConflictPoint) -> f64 {
    conflict.pet()
}

/// Range of speed over the samples up to and including `t_pass`.
pub fn speed_variation(track: &Track, t_pass: f64) -> f64 {
    let (lo, hi) = track
        .points
        .iter()
        .take_while(|p| p.t <= t_pass + 1e-9)
        .map(|p| p.speed())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Travel and behaviour rule for a candidate pair.
pub fn behaviour_change_ok(conflict: &ConflictPoint, first: &Track, second: &Track, cfg: &SelectionConfig) -> bool {
    let travels = first.path_length() > cfg.travel_min || second.path_length() > cfg.travel_min;
    if !travels {
        return false;
    }
    conflict.pet() <= cfg.pet_soft
        || speed_variation(first, conflict.t_first) > cfg.speed_var_min
        || speed_variation(second, conflict.t_second) > cfg.speed_var_min
}

/// Ids of non-conflicting tracks with any part of their path within `r` of
/// the conflict location.
pub fn surrounding_agents(scenario: &Scenario, conflict: &ConflictPoint, r: f64) -> BTreeSet<String> {
    let c = conflict.location;
    scenario
        .tracks
        .iter()
        .filter(|t| t.agent_id != conflict.first_agent && t.agent_id != conflict.second_agent)
        .filter(|t| path_within(&t.positions(), c, r))
        .map(|t| t.agent_id.clone())
        .collect()
}

fn path_within(points: &[Point], c: Point, r: f64) -> bool {
    match points {
        [] => false,
        [p] => p.distance(c) <= r,
        _ => points.windows(2).any(|w| closest_on_segment(c, w[0], w[1]).1.distance(c) <= r),
    }
}

/// All qualifying conflict cases of a scenario, ordered by agent pair.
pub fn select_conflicts(scenario: &Scenario, cfg: &SelectionConfig) -> Vec<ConflictCase> {
    let mut tracks: Vec<&Track> = scenario.tracks.iter().collect();
    tracks.sort_by(|a, b| a.agent_id.cmp(&b.agent_id));
    let mut out = Vec::new();
    for (i, a) in tracks.iter().enumerate() {
        for b in &tracks[i + 1..] {
            if let Some(case) = evaluate_pair(scenario, a, b, cfg) {
                out.push(case);
            }
        }
    }
    out
}

fn evaluate_pair(scenario: &Scenario, a: &Track, b: &Track, cfg: &SelectionConfig) -> Option<ConflictCase> {
    let pair_kind = PairKind::of(a.kind, b.kind)?;
    let (pa, pb) = (a.polyline().ok()?, b.polyline().ok()?);
    if !crossing_test(&pa, cfg.buffer_for(a.kind), &pb, cfg.buffer_for(b.kind)) {
        return None;
    }
    let conflict = conflict_point(a, b).ok()?;
    // pairs never observed together cannot interact
    let min_sep = min_separation(a, b).ok()?;
    let pet = conflict.pet();
    if pet > cfg.pet_max && min_sep > cfg.min_sep_max {
        return None;
    }
    let (first, second) = if conflict.first_agent == a.agent_id { (a, b) } else { (b, a) };
    if !behaviour_change_ok(&conflict, first, second, cfg) {
        return None;
    }
    let category = if first.kind == AgentKind::Av {
        Category::AvFirst
    } else if second.kind == AgentKind::Av {
        Category::AvSecond
    } else {
        Category::AvFree
    };
    let surrounding = surrounding_agents(scenario, &conflict, cfg.surround_radius);
    Some(ConflictCase {
        scenario_id: scenario.scenario_id.clone(),
        first_agent: first.agent_id.clone(),
        second_agent: second.agent_id.clone(),
        pet,
        min_sep,
        category,
        pair_kind,
        surrounding,
        regime: None,
        conflict,
    })
}
