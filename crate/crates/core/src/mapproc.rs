//! Lane-graph compaction: chains of lane segments joined at unbranched
//! links become merged lanes, each stored as 20 tail-to-head vectors, with
//! an adjacency matrix built from endpoint coincidence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polyline};

pub type LaneId = u64;

/// Vectors per merged lane.
pub const LANE_VECTORS: usize = 20;

/// Endpoint coincidence tolerance for adjacency and chain joins, meters.
pub const ENDPOINT_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct LaneSegment {
    pub id: LaneId,
    pub centerline: Polyline,
    pub successors: BTreeSet<LaneId>,
    pub predecessors: BTreeSet<LaneId>,
}

impl LaneSegment {
    pub fn new(id: LaneId, centerline: Polyline, successors: impl IntoIterator<Item = LaneId>) -> Self {
        LaneSegment { id, centerline, successors: successors.into_iter().collect(), predecessors: BTreeSet::new() }
    }
}

/// Fills predecessor sets from successor sets. Links to segments outside the
/// collection (lanes leaving the local map) are dropped.
pub fn link_segments(mut segments: Vec<LaneSegment>) -> Result<Vec<LaneSegment>> {
    let ids: BTreeSet<LaneId> = segments.iter().map(|s| s.id).collect();
    if ids.len() != segments.len() {
        return Err(Error::LaneGraph("duplicate lane segment id".into()));
    }
    let mut preds: BTreeMap<LaneId, BTreeSet<LaneId>> = BTreeMap::new();
    for s in &mut segments {
        s.successors.retain(|id| ids.contains(id));
        for &succ in &s.successors {
            preds.entry(succ).or_default().insert(s.id);
        }
    }
    for s in &mut segments {
        s.predecessors = preds.remove(&s.id).unwrap_or_default();
    }
    Ok(segments)
}

/// Checks that every successor link has the matching predecessor link and
/// vice versa.
pub fn validate_connectivity(segments: &[LaneSegment]) -> Result<()> {
    let by_id: BTreeMap<LaneId, &LaneSegment> = segments.iter().map(|s| (s.id, s)).collect();
    if by_id.len() != segments.len() {
        return Err(Error::LaneGraph("duplicate lane segment id".into()));
    }
    for s in segments {
        for succ in &s.successors {
            match by_id.get(succ) {
                Some(n) if n.predecessors.contains(&s.id) => {}
                Some(_) => return Err(Error::LaneGraph(format!("{succ} does not list {} as predecessor", s.id))),
                None => return Err(Error::LaneGraph(format!("{} links to unknown lane {succ}", s.id))),
            }
        }
        for pred in &s.predecessors {
            match by_id.get(pred) {
                Some(p) if p.successors.contains(&s.id) => {}
                Some(_) => return Err(Error::LaneGraph(format!("{pred} does not list {} as successor", s.id))),
                None => return Err(Error::LaneGraph(format!("{} links to unknown lane {pred}", s.id))),
            }
        }
    }
    Ok(())
}

/// A maximal chain of segments, in driving order.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedPath {
    pub segment_ids: Vec<LaneId>,
    pub polyline: Polyline,
    /// Sum of the source segment lengths.
    pub source_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub paths: Vec<MergedPath>,
    /// Segments at which a closed chain was cut open.
    pub cut_cycles: Vec<LaneId>,
}

/// Merges `A` into `B` whenever `B` is the only successor of `A` and `A` the
/// only predecessor of `B`. Output is sorted by the first segment id, so the
/// result does not depend on input order.
pub fn merge_lanes(segments: &[LaneSegment]) -> Result<MergeOutcome> {
    validate_connectivity(segments)?;
    let by_id: BTreeMap<LaneId, &LaneSegment> = segments.iter().map(|s| (s.id, s)).collect();
    let next_of = |id: LaneId| -> Option<LaneId> {
        let s = by_id[&id];
        if s.successors.len() != 1 {
            return None;
        }
        let succ = *s.successors.iter().next().unwrap();
        (by_id[&succ].predecessors.len() == 1).then_some(succ)
    };
    let merged_into: BTreeSet<LaneId> = by_id.keys().filter_map(|&id| next_of(id)).collect();

    let mut visited = BTreeSet::new();
    let mut chains: Vec<Vec<LaneId>> = Vec::new();
    let walk = |start: LaneId, visited: &mut BTreeSet<LaneId>| {
        let mut chain = vec![start];
        visited.insert(start);
        let mut cur = start;
        while let Some(n) = next_of(cur) {
            if !visited.insert(n) {
                break;
            }
            chain.push(n);
            cur = n;
        }
        chain
    };
    for &id in by_id.keys() {
        if !merged_into.contains(&id) {
            chains.push(walk(id, &mut visited));
        }
    }
    // whatever is left sits on closed unbranched loops; cut at the lowest id
    let mut cut_cycles = Vec::new();
    for &id in by_id.keys() {
        if !visited.contains(&id) {
            cut_cycles.push(id);
            chains.push(walk(id, &mut visited));
        }
    }

    let mut paths = chains
        .into_iter()
        .map(|ids| {
            let mut vertices: Vec<Point> = Vec::new();
            let mut source_length = 0.0;
            for id in &ids {
                let line = &by_id[id].centerline;
                source_length += line.length();
                let mut verts = line.vertices();
                if let Some(&last) = vertices.last() {
                    if last.distance(verts[0]) <= ENDPOINT_TOLERANCE {
                        verts = &verts[1..];
                    }
                }
                vertices.extend_from_slice(verts);
            }
            Ok(MergedPath { polyline: Polyline::from_points_dedup(&vertices)?, segment_ids: ids, source_length })
        })
        .collect::<Result<Vec<_>>>()?;
    paths.sort_by_key(|p| p.segment_ids[0]);
    Ok(MergeOutcome { paths, cut_cycles })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedLane {
    pub id: LaneId,
    /// `LANE_VECTORS + 1` breakpoints; vector k runs from breakpoint k to k+1.
    pub breakpoints: Vec<Point>,
    /// Arc length of the source centerline.
    pub source_length: f64,
}

impl MergedLane {
    pub fn vectors(&self) -> Vec<(Point, Point)> {
        self.breakpoints.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn tail(&self) -> Point {
        self.breakpoints[0]
    }

    pub fn head(&self) -> Point {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    pub fn vector_length(&self) -> f64 {
        self.vectors().iter().map(|(a, b)| a.distance(*b)).sum()
    }
}

/// Splits a lane into [`LANE_VECTORS`] vectors of equal arc length.
pub fn resegment_lane(id: LaneId, polyline: &Polyline) -> Result<MergedLane> {
    let length = polyline.length();
    if !(length > 0.0) {
        return Err(Error::Degenerate(format!("lane {id} has zero length")));
    }
    let stations = polyline.stations();
    // already resampled: keep the vertices so that resegmenting is idempotent
    let even = stations.len() == LANE_VECTORS + 1
        && stations.iter().enumerate().all(|(k, s)| (s - length * k as f64 / LANE_VECTORS as f64).abs() <= 1e-9 * length);
    if even {
        return Ok(MergedLane { id, breakpoints: polyline.vertices().to_vec(), source_length: length });
    }
    let mut breakpoints: Vec<Point> = (0..=LANE_VECTORS)
        .map(|k| polyline.point_at_with(&stations, length * k as f64 / LANE_VECTORS as f64))
        .collect();
    // pin the ends exactly
    breakpoints[0] = polyline.first();
    breakpoints[LANE_VECTORS] = polyline.last();
    Ok(MergedLane { id, breakpoints, source_length: length })
}

pub fn build_adjacency(lanes: &[MergedLane]) -> Vec<Vec<bool>> {
    lanes
        .iter()
        .map(|from| lanes.iter().map(|to| from.head().distance(to.tail()) <= ENDPOINT_TOLERANCE).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LaneGraph {
    pub lanes: Vec<MergedLane>,
    pub adjacency: Vec<Vec<bool>>,
}

impl LaneGraph {
    /// Full compaction: link, merge chains, resegment, index endpoints.
    /// Predecessor sets are derived from successors. Merged lanes take the id
    /// of their first segment.
    pub fn from_segments(segments: &[LaneSegment]) -> Result<LaneGraph> {
        let outcome = merge_lanes(&link_segments(segments.to_vec())?)?;
        let lanes = outcome
            .paths
            .iter()
            .map(|p| resegment_lane(p.segment_ids[0], &p.polyline))
            .collect::<Result<Vec<_>>>()?;
        let adjacency = build_adjacency(&lanes);
        Ok(LaneGraph { lanes, adjacency })
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    /// `(from, to)` lane index pairs of the adjacency matrix.
    pub fn adjacency_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.adjacency.iter().enumerate() {
            for (j, &linked) in row.iter().enumerate() {
                if linked {
                    out.push((i, j));
                }
            }
        }
        out
    }
}
