//! Batch orchestration: ingest → select → enhance → assess → metrics →
//! report, with one worker per scenario and sorted, byte-stable output.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assess::{anomaly_report, classify_regime, AnomalyReport, AnomalyStats, RegimeLabel, TrackQuality};
use crate::config::PipelineConfig;
use crate::enhance::{enhance_track, EnhanceStatus, EnhancedTrack};
use crate::io::{fmt6, fmt_opt, ingest, scenario_csv, CompactLanes, IngestError, LaneFile, LANES_SUFFIX};
use crate::metrics::{case_metrics, MetricsRecord};
use crate::selection::{select_conflicts, Category, ConflictCase, PairKind};
use crate::synth::{synth_corpus, CorpusSpec, GroundTruth, NoiseModel};
use crate::track::{speed_consistency_error, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Synth,
    Select,
    Enhance,
    Assess,
    Metrics,
    Report,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Synth => "synth",
            Stage::Select => "select",
            Stage::Enhance => "enhance",
            Stage::Assess => "assess",
            Stage::Metrics => "metrics",
            Stage::Report => "report",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[{stage}] {message}")]
    Input { stage: Stage, message: String },
    #[error("[{stage}] invariant violated: {message}")]
    Invariant { stage: Stage, message: String },
    #[error("[write] {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 1 for bad input, 2 for violated invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input { .. } | PipelineError::Write { .. } => 1,
            PipelineError::Invariant { .. } => 2,
        }
    }

    fn input(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Input { stage, message: e.to_string() }
    }
}

impl From<IngestError> for PipelineError {
    fn from(e: IngestError) -> Self {
        PipelineError::input(Stage::Ingest, e)
    }
}

/// Everything computed for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario_id: String,
    pub cases: Vec<ConflictCase>,
    pub enhanced: Vec<EnhancedTrack>,
    pub metrics: Vec<MetricsRecord>,
    /// Conflicting vehicles, raw data.
    pub raw_quality: Vec<TrackQuality>,
    /// Conflicting vehicles after enhancement.
    pub enhanced_quality: Vec<TrackQuality>,
    pub lanes: CompactLanes,
    pub warnings: Vec<String>,
}

/// Selection only.
pub fn select_stage(scenario: &Scenario, cfg: &PipelineConfig) -> Vec<ConflictCase> {
    select_conflicts(scenario, &cfg.selection)
}

/// Enhances every track; agents of any case are treated as conflicting.
pub fn enhance_stage(scenario: &Scenario, cases: &[ConflictCase], cfg: &PipelineConfig) -> Vec<EnhancedTrack> {
    let conflicting: BTreeSet<&str> =
        cases.iter().flat_map(|c| [c.first_agent.as_str(), c.second_agent.as_str()]).collect();
    let mut out: Vec<EnhancedTrack> = scenario
        .tracks
        .iter()
        .map(|t| enhance_track(t, conflicting.contains(t.agent_id.as_str()), &cfg.enhance))
        .collect();
    out.sort_by(|a, b| a.agent_id().cmp(b.agent_id()));
    out
}

/// Full per-scenario analysis.
pub fn process_scenario(scenario: &Scenario, cfg: &PipelineConfig) -> ScenarioResult {
    let mut cases = select_stage(scenario, cfg);
    let enhanced = enhance_stage(scenario, &cases, cfg);
    let by_id: HashMap<&str, &EnhancedTrack> = enhanced.iter().map(|e| (e.agent_id(), e)).collect();
    let mut warnings: Vec<String> = enhanced
        .iter()
        .flat_map(|e| e.warnings.iter().map(move |w| format!("{}/{}: {w}", scenario.scenario_id, e.agent_id())))
        .collect();

    for case in &mut cases {
        if case.pair_kind != PairKind::VehVeh {
            continue;
        }
        let (a, b) = (by_id[case.first_agent.as_str()], by_id[case.second_agent.as_str()]);
        match classify_regime(&a.to_track(), &b.to_track(), &case.conflict) {
            Ok(label) => case.regime = Some(label),
            Err(e) => warnings.push(format!("{}: regime undefined: {e}", case.case_id())),
        }
    }

    let mut vehicles = BTreeSet::new();
    for case in &cases {
        for id in [&case.first_agent, &case.second_agent] {
            if by_id[id.as_str()].kind().is_vehicle() {
                vehicles.insert(id.as_str());
            }
        }
    }
    let mut raw_quality = Vec::new();
    let mut enhanced_quality = Vec::new();
    for id in vehicles {
        let e = by_id[id];
        raw_quality.extend(TrackQuality::raw(&e.base));
        enhanced_quality.extend(TrackQuality::enhanced(e));
    }

    let metrics = cases
        .iter()
        .map(|c| case_metrics(c, by_id[c.first_agent.as_str()], by_id[c.second_agent.as_str()], &cfg.metrics))
        .collect();

    ScenarioResult {
        scenario_id: scenario.scenario_id.clone(),
        cases,
        enhanced,
        metrics,
        raw_quality,
        enhanced_quality,
        lanes: CompactLanes::from_graph(&scenario.lane_graph),
        warnings,
    }
}

/// Runs [`process_scenario`] over all scenarios on a pool of `jobs` threads.
/// Results are sorted by scenario id.
pub fn analyse(scenarios: &[Scenario], cfg: &PipelineConfig) -> Result<Vec<ScenarioResult>, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| PipelineError::input(Stage::Config, e))?;
    let mut results: Vec<ScenarioResult> = pool.install(|| scenarios.par_iter().map(|s| process_scenario(s, cfg)).collect());
    results.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    check_invariants(&results)?;
    Ok(results)
}

fn check_invariants(results: &[ScenarioResult]) -> Result<(), PipelineError> {
    let violation = |stage, message: String| Err(PipelineError::Invariant { stage, message });
    for r in results {
        for c in &r.cases {
            if !(c.pet >= 0.0) || (c.pet - c.conflict.pet()).abs() > 1e-9 {
                return violation(Stage::Select, format!("{}: inconsistent PET {}", c.case_id(), c.pet));
            }
            if c.conflict.first_agent != c.first_agent || c.conflict.second_agent != c.second_agent {
                return violation(Stage::Select, format!("{}: conflict agents disagree with case", c.case_id()));
            }
        }
        for m in &r.metrics {
            if let Some(mrct) = m.mrct {
                let ok = mrct >= m.pet - 1e-9
                    && m.pre_conflict.is_some_and(|p| (p - (mrct - m.pet)).abs() < 1e-9)
                    && m.flow.is_some_and(|f| (f * mrct - 1.0).abs() < 1e-12);
                if !ok {
                    return violation(Stage::Metrics, format!("{}: MRCT record inconsistent", m.case_id));
                }
            }
        }
        for e in &r.enhanced {
            let n = e.base.len();
            if e.positions.len() != n || e.heading.len() != n || e.corrected_speed.len() != n {
                return violation(Stage::Enhance, format!("{}/{}: array lengths differ", r.scenario_id, e.agent_id()));
            }
        }
    }
    Ok(())
}

/// Scenarios from the configured input, or a synthetic corpus when no input
/// is set.
pub fn load_scenarios(cfg: &PipelineConfig) -> Result<Vec<Scenario>, PipelineError> {
    match &cfg.input {
        Some(path) => {
            if !path.exists() {
                return Err(PipelineError::input(Stage::Ingest, format!("{} does not exist", path.display())));
            }
            Ok(ingest(path)?)
        }
        None => {
            let s = &cfg.synth;
            let spec = CorpusSpec {
                scenarios: s.scenarios,
                noise: NoiseModel {
                    speed_noise_sigma: s.speed_noise_sigma,
                    zero_fill_probability: s.zero_fill_probability,
                    boundary_corruption: s.boundary_corruption,
                },
                background: true,
            };
            let corpus = synth_corpus(&spec, cfg.seed).map_err(|e| PipelineError::input(Stage::Synth, e))?;
            Ok(corpus.into_iter().map(|s| s.scenario).collect())
        }
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, PipelineError> {
    let err = |e: csv::Error| PipelineError::input(Stage::Report, e);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| PipelineError::input(Stage::Report, e.error()))
}

fn regime_str(r: Option<RegimeLabel>) -> String {
    r.map(|l| l.to_string()).unwrap_or_default()
}

pub const CASES_HEADER: [&str; 15] = [
    "case_id",
    "scenario_id",
    "first_agent",
    "second_agent",
    "category",
    "pair_kind",
    "regime",
    "pet_s",
    "min_sep_m",
    "conflict_x",
    "conflict_y",
    "t_first",
    "t_second",
    "surrounding",
    "mrct_status",
];

pub fn cases_csv(results: &[ScenarioResult]) -> Result<Vec<u8>, PipelineError> {
    let rows = results.iter().flat_map(|r| {
        r.cases.iter().enumerate().map(move |(i, c)| {
            let status = r.metrics.get(i).and_then(|m| m.mrct_failure).map(|f| f.as_str().to_string()).unwrap_or_default();
            vec![
                c.case_id(),
                c.scenario_id.clone(),
                c.first_agent.clone(),
                c.second_agent.clone(),
                c.category.to_string(),
                c.pair_kind.to_string(),
                regime_str(c.regime),
                fmt6(c.pet),
                fmt6(c.min_sep),
                fmt6(c.conflict.location.x),
                fmt6(c.conflict.location.y),
                fmt6(c.conflict.t_first),
                fmt6(c.conflict.t_second),
                c.surrounding.iter().cloned().collect::<Vec<_>>().join(";"),
                status,
            ]
        })
    });
    csv_bytes(&CASES_HEADER, rows)
}

pub const METRICS_HEADER: [&str; 12] = [
    "case_id",
    "category",
    "pair_kind",
    "regime",
    "pet_s",
    "min_sep_m",
    "psd_min",
    "max_decel_mps2",
    "decel_lead_s",
    "mrct_s",
    "preconf_s",
    "flow_vps",
];

pub fn metrics_csv(records: &[&MetricsRecord]) -> Result<Vec<u8>, PipelineError> {
    let rows = records.iter().map(|m| {
        vec![
            m.case_id.clone(),
            m.category.to_string(),
            m.pair_kind.to_string(),
            regime_str(m.regime),
            fmt6(m.pet),
            fmt6(m.min_sep),
            fmt_opt(m.psd_min),
            fmt_opt(m.max_decel),
            fmt_opt(m.decel_lead_time),
            fmt_opt(m.mrct),
            fmt_opt(m.pre_conflict),
            fmt_opt(m.flow),
        ]
    });
    csv_bytes(&METRICS_HEADER, rows)
}

/// Raw and enhanced anomaly reports over all conflicting vehicles; `None`
/// when there are none.
pub fn anomaly_reports(results: &[ScenarioResult], cfg: &PipelineConfig) -> (Option<AnomalyReport>, Option<AnomalyReport>) {
    let raw: Vec<TrackQuality> = results.iter().flat_map(|r| r.raw_quality.iter().cloned()).collect();
    let enh: Vec<TrackQuality> = results.iter().flat_map(|r| r.enhanced_quality.iter().cloned()).collect();
    (anomaly_report(&raw, &cfg.anomaly).ok(), anomaly_report(&enh, &cfg.anomaly).ok())
}

pub fn anomaly_csv(raw: Option<&AnomalyReport>, enhanced: Option<&AnomalyReport>) -> Result<Vec<u8>, PipelineError> {
    let mut rows = Vec::new();
    for (stage, report) in [("raw", raw), ("enhanced", enhanced)] {
        let Some(r) = report else { continue };
        for (group, stats) in [("AV", r.av.as_ref()), ("HV", r.hv.as_ref()), ("all", Some(&r.all))] {
            let Some(s): Option<&AnomalyStats> = stats else { continue };
            rows.push(vec![
                stage.to_string(),
                group.to_string(),
                s.tracks.to_string(),
                s.samples.to_string(),
                fmt6(s.delta_v),
                fmt6(s.acc_pct),
                fmt6(s.jerk_pct),
                fmt6(s.jsi_pct),
            ]);
        }
    }
    csv_bytes(&["data", "group", "tracks", "samples", "delta_v_mps", "acc_pct", "jerk_pct", "jsi_pct"], rows)
}

/// Counts of every regime label per category, all 18 labels listed.
pub fn regimes_csv(results: &[ScenarioResult]) -> Result<Vec<u8>, PipelineError> {
    let mut counts: BTreeMap<(RegimeLabel, Category), usize> = BTreeMap::new();
    for c in results.iter().flat_map(|r| &r.cases) {
        if let Some(l) = c.regime {
            *counts.entry((l, c.category)).or_default() += 1;
        }
    }
    let rows = RegimeLabel::all().into_iter().map(|l| {
        let per: Vec<usize> = Category::ALL.iter().map(|&c| counts.get(&(l, c)).copied().unwrap_or(0)).collect();
        let total: usize = per.iter().sum();
        let mut row = vec![l.to_string()];
        row.extend(per.iter().map(usize::to_string));
        row.push(total.to_string());
        row
    });
    csv_bytes(&["regime", "AV_first", "AV_second", "AV_free", "total"], rows)
}

/// Fixed-width bin counts `(bin_lo, bin_hi, count)` covering the data range.
pub fn histogram(values: &[f64], width: f64) -> Vec<(f64, f64, usize)> {
    let bins: Vec<i64> = values.iter().filter(|v| v.is_finite()).map(|v| (v / width).floor() as i64).collect();
    let (Some(&lo), Some(&hi)) = (bins.iter().min(), bins.iter().max()) else { return Vec::new() };
    (lo..=hi)
        .map(|k| (k as f64 * width, (k + 1) as f64 * width, bins.iter().filter(|&&b| b == k).count()))
        .collect()
}

pub fn histograms_csv(records: &[&MetricsRecord], cfg: &PipelineConfig) -> Result<Vec<u8>, PipelineError> {
    type Getter = fn(&MetricsRecord) -> Option<f64>;
    let metrics: [(&str, Getter, f64); 4] = [
        ("pet_s", |m| Some(m.pet), cfg.report.pet_bin),
        ("psd_min", |m| m.psd_min, cfg.report.psd_bin),
        ("mrct_s", |m| m.mrct, cfg.report.mrct_bin),
        ("max_decel_mps2", |m| m.max_decel, cfg.report.decel_bin),
    ];
    let groups: Vec<(&str, Option<Category>)> =
        std::iter::once(("all", None)).chain(Category::ALL.iter().map(|c| (c.as_str(), Some(*c)))).collect();
    let mut rows = Vec::new();
    for (name, get, width) in metrics {
        for (group, cat) in &groups {
            let values: Vec<f64> =
                records.iter().filter(|m| cat.is_none_or(|c| m.category == c)).filter_map(|m| get(m)).collect();
            for (lo, hi, n) in histogram(&values, width) {
                rows.push(vec![name.to_string(), group.to_string(), fmt6(lo), fmt6(hi), n.to_string()]);
            }
        }
    }
    csv_bytes(&["metric", "category", "bin_lo", "bin_hi", "count"], rows)
}

pub const ENHANCEMENT_HEADER: [&str; 9] = [
    "scenario_id",
    "agent_id",
    "agent_kind",
    "status",
    "skip_reason",
    "outliers",
    "unrepaired_runs",
    "delta_v_raw",
    "delta_v_enhanced",
];

pub fn enhancement_csv(results: &[ScenarioResult]) -> Result<Vec<u8>, PipelineError> {
    let rows = results.iter().flat_map(|r| {
        r.enhanced.iter().map(move |e| {
            vec![
                r.scenario_id.clone(),
                e.agent_id().to_string(),
                e.kind().to_string(),
                match e.status {
                    EnhanceStatus::Enhanced => "enhanced".into(),
                    EnhanceStatus::PreservedRaw => "preserved_raw".into(),
                },
                e.skip_reason.map(|s| s.as_str().to_string()).unwrap_or_default(),
                e.repair.outliers.to_string(),
                e.repair.unrepaired.len().to_string(),
                fmt_opt(speed_consistency_error(&e.base).ok()),
                fmt_opt(e.consistency_mae()),
            ]
        })
    });
    csv_bytes(&ENHANCEMENT_HEADER, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenarios: usize,
    pub scenarios_with_cases: usize,
    pub cases: usize,
    pub cases_by_category: BTreeMap<String, usize>,
    pub cases_by_pair_kind: BTreeMap<String, usize>,
    pub mrct_solved: usize,
    pub tracks_enhanced: usize,
    pub tracks_preserved_raw: usize,
    pub smoother: String,
    pub warnings: Vec<String>,
}

pub fn summary(results: &[ScenarioResult], cfg: &PipelineConfig) -> Summary {
    let cases: Vec<&ConflictCase> = results.iter().flat_map(|r| &r.cases).collect();
    let mut by_cat = BTreeMap::new();
    let mut by_kind = BTreeMap::new();
    for c in &cases {
        *by_cat.entry(c.category.to_string()).or_default() += 1;
        *by_kind.entry(c.pair_kind.to_string()).or_default() += 1;
    }
    let enhanced = results.iter().flat_map(|r| &r.enhanced);
    let n_enh = enhanced.clone().filter(|e| e.status == EnhanceStatus::Enhanced).count();
    Summary {
        scenarios: results.len(),
        scenarios_with_cases: results.iter().filter(|r| !r.cases.is_empty()).count(),
        cases: cases.len(),
        cases_by_category: by_cat,
        cases_by_pair_kind: by_kind,
        mrct_solved: results.iter().flat_map(|r| &r.metrics).filter(|m| m.mrct.is_some()).count(),
        tracks_enhanced: n_enh,
        tracks_preserved_raw: enhanced.count() - n_enh,
        smoother: cfg.enhance.smoother_description(),
        warnings: results.iter().flat_map(|r| r.warnings.iter().cloned()).collect(),
    }
}

/// All report files, name → bytes, in a fixed order.
pub fn render_reports(results: &[ScenarioResult], cfg: &PipelineConfig) -> Result<Vec<(String, Vec<u8>)>, PipelineError> {
    let records: Vec<&MetricsRecord> = results.iter().flat_map(|r| &r.metrics).collect();
    let (raw, enh) = anomaly_reports(results, cfg);
    let lanes: BTreeMap<&str, &CompactLanes> =
        results.iter().filter(|r| !r.lanes.lanes.is_empty()).map(|r| (r.scenario_id.as_str(), &r.lanes)).collect();
    Ok(vec![
        ("cases.csv".into(), cases_csv(results)?),
        ("metrics.csv".into(), metrics_csv(&records)?),
        ("anomaly.csv".into(), anomaly_csv(raw.as_ref(), enh.as_ref())?),
        ("regimes.csv".into(), regimes_csv(results)?),
        ("histograms.csv".into(), histograms_csv(&records, cfg)?),
        ("enhancement.csv".into(), enhancement_csv(results)?),
        ("lanes.json".into(), json(&lanes)?),
        ("summary.json".into(), json(&summary(results, cfg))?),
    ])
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, PipelineError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::input(Stage::Report, e))?;
    v.push(b'\n');
    Ok(v)
}

/// Writes all files into `dir`. On any failure the files written so far
/// are removed.
pub fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>, PipelineError> {
    let fail = |path: &Path, source| PipelineError::Write { path: path.to_path_buf(), source };
    fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(fail(&path, e));
        }
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub results: Vec<ScenarioResult>,
    pub files: Vec<PathBuf>,
}

/// Whole pipeline per the configuration; outputs land in `cfg.output`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::input(Stage::Config, e))?;
    let out = cfg.output.clone().ok_or_else(|| PipelineError::input(Stage::Config, "no output directory configured"))?;
    let scenarios = load_scenarios(cfg)?;
    let results = analyse(&scenarios, cfg)?;
    let files = render_reports(&results, cfg)?;
    let files = write_outputs(&out, &files)?;
    Ok(PipelineRun { results, files })
}

pub const GROUND_TRUTH_HEADER: [&str; 12] = [
    "scenario_id",
    "first_agent",
    "second_agent",
    "category",
    "pair_kind",
    "regime",
    "pet_s",
    "t_first",
    "t_second",
    "conflict_x",
    "conflict_y",
    "surrounding",
];

/// Construction facts of a synthetic corpus, one row per scenario.
pub fn ground_truth_csv(truth: &[GroundTruth]) -> Result<Vec<u8>, PipelineError> {
    let rows = truth.iter().map(|g| {
        vec![
            g.scenario_id.clone(),
            g.first_agent.clone(),
            g.second_agent.clone(),
            g.category.to_string(),
            g.pair_kind.to_string(),
            regime_str(g.regime),
            fmt6(g.pet),
            fmt6(g.t_first),
            fmt6(g.t_second),
            fmt6(g.location.x),
            fmt6(g.location.y),
            g.surrounding.iter().cloned().collect::<Vec<_>>().join(";"),
        ]
    });
    csv_bytes(&GROUND_TRUTH_HEADER, rows)
}

/// Canonical scenario files of `scenarios`, name → bytes, lane files
/// included.
pub fn scenario_files(scenarios: &[Scenario]) -> Result<Vec<(String, Vec<u8>)>, PipelineError> {
    let mut files = Vec::new();
    for s in scenarios {
        let bytes = scenario_csv(s).map_err(|e| PipelineError::input(Stage::Write, e))?;
        files.push((format!("{}.csv", s.scenario_id), bytes));
        if !s.lane_graph.is_empty() {
            files.push((format!("{}{LANES_SUFFIX}", s.scenario_id), json(&LaneFile::from_graph(&s.lane_graph))?));
        }
    }
    Ok(files)
}
