//! Canonical tabular interchange format.
//!
//! One CSV file per scenario with the header
//! `scenario_id,track_id,agent_kind,t,x,y,vx,vy,heading`. An optional lane
//! map sits next to it as `<stem>.lanes.json`:
//!
//! ```json
//! {"segments": [{"id": 1, "centerline": [[0.0, 0.0], [15.0, 0.0]], "successors": [2]}]}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::geometry::{Point, Polyline};
use crate::mapproc::{LaneGraph, LaneId, LaneSegment};
use crate::track::{AgentKind, Scenario, Track, TrackPoint, SAMPLE_INTERVAL};

pub const TRACK_COLUMNS: [&str; 9] = ["scenario_id", "track_id", "agent_kind", "t", "x", "y", "vx", "vy", "heading"];
pub const LANES_SUFFIX: &str = ".lanes.json";
/// Written by the generator next to its scenarios; skipped when a directory is ingested.
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: header {found:?} does not match {TRACK_COLUMNS:?}", path.display())]
    Header { path: PathBuf, found: Vec<String> },
    #[error("{}:{line}: {message}", path.display())]
    Row { path: PathBuf, line: u64, message: String },
    #[error("{}:{line}: duplicate sample scenario={scenario} track={track} t={t}", path.display())]
    Duplicate { path: PathBuf, line: u64, scenario: String, track: String, t: f64 },
    #[error("{}: {source}", path.display())]
    Model {
        path: PathBuf,
        #[source]
        source: Error,
    },
    #[error("{}: lane map: {message}", path.display())]
    Lanes { path: PathBuf, message: String },
}

/// Anything that can produce validated scenarios.
pub trait ScenarioSource {
    fn scenarios(&self) -> Result<Vec<Scenario>, IngestError>;
}

/// A file or a directory of files in the canonical format.
#[derive(Debug, Clone)]
pub struct CanonicalSource {
    pub path: PathBuf,
}

impl ScenarioSource for CanonicalSource {
    fn scenarios(&self) -> Result<Vec<Scenario>, IngestError> {
        ingest(&self.path)
    }
}

/// Reads every scenario under `path` (a CSV file or a directory of them),
/// sorted by scenario id.
pub fn ingest(path: &Path) -> Result<Vec<Scenario>, IngestError> {
    let io_err = |source| IngestError::Io { path: path.to_path_buf(), source };
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io_err)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io_err)?;
        files.retain(|p| {
            p.extension().is_some_and(|e| e == "csv") && p.file_name().is_some_and(|n| n != GROUND_TRUTH_FILE) && p.is_file()
        });
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    let mut out = Vec::new();
    for f in files {
        out.extend(read_scenario_file(&f)?);
    }
    out.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    if let Some(w) = out.windows(2).find(|w| w[0].scenario_id == w[1].scenario_id) {
        return Err(IngestError::Model {
            path: path.to_path_buf(),
            source: Error::InvalidScenario(format!("scenario {} appears in more than one file", w[0].scenario_id)),
        });
    }
    Ok(out)
}

/// Path of the lane map belonging to a scenario file.
pub fn lanes_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv_path.with_file_name(format!("{stem}{LANES_SUFFIX}"))
}

fn parse_f64(field: &str, name: &str) -> Result<f64, String> {
    let v: f64 = field.trim().parse().map_err(|_| format!("{name}: cannot parse {field:?} as a number"))?;
    if !v.is_finite() {
        return Err(format!("{name}: non-finite value {field:?}"));
    }
    Ok(v)
}

struct Row {
    scenario: String,
    track: String,
    kind: AgentKind,
    point: TrackPoint,
}

fn parse_row(rec: &csv::StringRecord) -> Result<Row, String> {
    if rec.len() != TRACK_COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", TRACK_COLUMNS.len(), rec.len()));
    }
    let scenario = rec[0].trim().to_string();
    let track = rec[1].trim().to_string();
    if scenario.is_empty() || track.is_empty() {
        return Err("empty scenario_id or track_id".into());
    }
    let kind: AgentKind = rec[2].parse().map_err(|e: Error| e.to_string())?;
    let t = parse_f64(&rec[3], "t")?;
    let frames = t / SAMPLE_INTERVAL;
    if t < 0.0 || (frames - frames.round()).abs() > 1e-6 {
        return Err(format!("t = {t} is not on the {SAMPLE_INTERVAL} s grid"));
    }
    let point = TrackPoint {
        t,
        x: parse_f64(&rec[4], "x")?,
        y: parse_f64(&rec[5], "y")?,
        vx: parse_f64(&rec[6], "vx")?,
        vy: parse_f64(&rec[7], "vy")?,
        heading: parse_f64(&rec[8], "heading")?,
    };
    Ok(Row { scenario, track, kind, point })
}

/// Reads one scenario file and its lane map, if present.
pub fn read_scenario_file(path: &Path) -> Result<Vec<Scenario>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(|h| h.trim().to_string()).collect();
    if header != TRACK_COLUMNS {
        return Err(IngestError::Header { path: path.to_path_buf(), found: header });
    }

    // scenario -> track -> (kind, points)
    let mut grouped: BTreeMap<String, BTreeMap<String, (AgentKind, Vec<TrackPoint>)>> = BTreeMap::new();
    let mut seen: HashSet<(String, String, i64)> = HashSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_err = |message| IngestError::Row { path: path.to_path_buf(), line, message };
        let row = parse_row(&rec).map_err(row_err)?;
        if !seen.insert((row.scenario.clone(), row.track.clone(), row.point.frame())) {
            return Err(IngestError::Duplicate {
                path: path.to_path_buf(),
                line,
                scenario: row.scenario,
                track: row.track,
                t: row.point.t,
            });
        }
        let entry = grouped.entry(row.scenario).or_default().entry(row.track.clone()).or_insert((row.kind, Vec::new()));
        if entry.0 != row.kind {
            return Err(row_err(format!("track {} changes agent_kind from {} to {}", row.track, entry.0, row.kind)));
        }
        entry.1.push(row.point);
    }

    let lane_graph = read_lane_graph(&lanes_path(path))?;
    let model_err = |source| IngestError::Model { path: path.to_path_buf(), source };
    let mut out = Vec::with_capacity(grouped.len());
    for (scenario_id, tracks) in grouped {
        let mut built = Vec::with_capacity(tracks.len());
        for (id, (kind, mut points)) in tracks {
            points.sort_by(|a, b| a.t.total_cmp(&b.t));
            let track = Track::new(id.clone(), kind, points)
                .map_err(|e| model_err(Error::InvalidTrack(format!("scenario {scenario_id}, track {id}: {e}"))))?;
            built.push(track);
        }
        out.push(Scenario::new(scenario_id, built, lane_graph.clone()).map_err(model_err)?);
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Row { path: path.to_path_buf(), line, message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub id: LaneId,
    pub centerline: Vec<[f64; 2]>,
    #[serde(default)]
    pub successors: Vec<LaneId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneFile {
    pub segments: Vec<SegmentRecord>,
}

impl LaneFile {
    pub fn to_segments(&self) -> crate::Result<Vec<LaneSegment>> {
        self.segments
            .iter()
            .map(|r| {
                let pts = r.centerline.iter().map(|&[x, y]| Point::new(x, y)).collect();
                Ok(LaneSegment::new(r.id, Polyline::new(pts)?, r.successors.iter().copied()))
            })
            .collect()
    }

    pub fn from_segments(segments: &[LaneSegment]) -> Self {
        LaneFile {
            segments: segments
                .iter()
                .map(|s| SegmentRecord {
                    id: s.id,
                    centerline: s.centerline.vertices().iter().map(|p| [p.x, p.y]).collect(),
                    successors: s.successors.iter().copied().collect(),
                })
                .collect(),
        }
    }

    /// Merged lanes written back as segments, linked by adjacency.
    pub fn from_graph(graph: &LaneGraph) -> Self {
        LaneFile {
            segments: graph
                .lanes
                .iter()
                .enumerate()
                .map(|(i, lane)| SegmentRecord {
                    id: lane.id,
                    centerline: lane.breakpoints.iter().map(|p| [p.x, p.y]).collect(),
                    successors: (0..graph.lanes.len()).filter(|&j| graph.adjacency[i][j]).map(|j| graph.lanes[j].id).collect(),
                })
                .collect(),
        }
    }
}

/// Lane graph from a lane file; an absent file gives an empty graph.
pub fn read_lane_graph(path: &Path) -> Result<LaneGraph, IngestError> {
    if !path.exists() {
        return Ok(LaneGraph::default());
    }
    let lanes_err = |message: String| IngestError::Lanes { path: path.to_path_buf(), message };
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let file: LaneFile = serde_json::from_str(&text).map_err(|e| lanes_err(e.to_string()))?;
    let segments = file.to_segments().map_err(|e| lanes_err(e.to_string()))?;
    LaneGraph::from_segments(&segments).map_err(|e| lanes_err(e.to_string()))
}

/// Compact lane export: each lane as `[id, [[x, y] × 21]]`, adjacency as
/// index pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactLanes {
    pub lanes: Vec<(LaneId, Vec<[f64; 2]>)>,
    pub adjacency: Vec<(usize, usize)>,
}

impl CompactLanes {
    pub fn from_graph(graph: &LaneGraph) -> Self {
        CompactLanes {
            lanes: graph.lanes.iter().map(|l| (l.id, l.breakpoints.iter().map(|p| [round6(p.x), round6(p.y)]).collect())).collect(),
            adjacency: graph.adjacency_pairs(),
        }
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Fixed 6-decimal rendering used for all numeric output.
pub fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    // avoid "-0.000000"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0.000000".into()
    } else {
        s
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

fn io_error(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io { path: path.to_path_buf(), source }
}

/// Serializes the tracks of a scenario in the canonical format.
pub fn scenario_csv(scenario: &Scenario) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACK_COLUMNS)?;
    let mut tracks: Vec<&Track> = scenario.tracks.iter().collect();
    tracks.sort_by(|a, b| a.agent_id.cmp(&b.agent_id));
    for tr in tracks {
        for p in &tr.points {
            w.write_record([
                scenario.scenario_id.clone(),
                tr.agent_id.clone(),
                tr.kind.as_str().to_string(),
                format!("{:.1}", p.t),
                fmt6(p.x),
                fmt6(p.y),
                fmt6(p.vx),
                fmt6(p.vy),
                fmt6(p.heading),
            ])?;
        }
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

/// Writes `<dir>/<scenario_id>.csv` and, for a non-empty lane graph, the
/// companion lane file. Returns the CSV path.
pub fn write_scenario(dir: &Path, scenario: &Scenario) -> Result<PathBuf, IngestError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(format!("{}.csv", scenario.scenario_id));
    let bytes = scenario_csv(scenario).map_err(|e| csv_error(&path, e))?;
    fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    if !scenario.lane_graph.is_empty() {
        let lp = lanes_path(&path);
        let json = serde_json::to_string(&LaneFile::from_graph(&scenario.lane_graph))
            .map_err(|e| IngestError::Lanes { path: lp.clone(), message: e.to_string() })?;
        fs::write(&lp, json).map_err(|e| io_error(&lp, e))?;
    }
    Ok(path)
}
