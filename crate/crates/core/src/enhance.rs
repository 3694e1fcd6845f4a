//! Trajectory repair and reconstruction.
//!
//! Speed is treated as the trusted signal. Outliers (implausible
//! acceleration or zero padding) are replaced by local cubic fits; AV
//! positions are re-integrated over the first and last 1.5 s; other agents
//! are re-paced along their raw polyline so that positions and speed agree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polyline};
use crate::quadrature::{cumulative_simpson, simpson};
use crate::track::{
    kinematic_profile, length_inconsistency, mean_abs_diff, position_based_speed_of, AgentKind, KinematicProfile,
    Track, TrackPoint, SAMPLE_INTERVAL,
};
use crate::wavelet::{denoise, ShrinkMethod, ThresholdMode, Wavelet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceConfig {
    /// |dv/dt| above this marks a speed outlier, m/s².
    pub outlier_accel: f64,
    /// Samples within this many seconds of a zero speed are outliers.
    pub zero_window: f64,
    /// Tracks whose speed never reaches this are static; zeros are genuine.
    pub static_speed: f64,
    /// Support window on each side of an outlier run for the cubic fit, s.
    pub repair_window: f64,
    /// AV positions re-integrated over this much time at each end, s.
    pub boundary_window: f64,
    pub min_duration: f64,
    pub min_length: f64,
    pub max_length_inconsistency: f64,
    pub wavelet_level: usize,
    pub wavelet_sigma: f64,
    pub wavelet_mode: ThresholdMode,
    pub wavelet_method: ShrinkMethod,
    /// Chord length below which the previous heading is held, m.
    pub heading_min_step: f64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig {
            outlier_accel: 10.0,
            zero_window: 0.3,
            static_speed: 0.1,
            repair_window: 1.0,
            boundary_window: 1.5,
            min_duration: 5.0,
            min_length: 8.0,
            max_length_inconsistency: 2.0,
            wavelet_level: 3,
            wavelet_sigma: 0.5,
            wavelet_mode: ThresholdMode::Soft,
            wavelet_method: ShrinkMethod::BayesShrink,
            heading_min_step: 0.01,
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outlier_accel", self.outlier_accel),
            ("zero_window", self.zero_window),
            ("static_speed", self.static_speed),
            ("repair_window", self.repair_window),
            ("boundary_window", self.boundary_window),
            ("min_duration", self.min_duration),
            ("min_length", self.min_length),
            ("max_length_inconsistency", self.max_length_inconsistency),
            ("wavelet_sigma", self.wavelet_sigma),
            ("heading_min_step", self.heading_min_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("enhance.{name} must be positive, got {v}")));
            }
        }
        if self.wavelet_level == 0 {
            return Err(Error::InvalidConfig("enhance.wavelet_level must be at least 1".into()));
        }
        Ok(())
    }

    /// Human-readable smoother settings, e.g. `db6/soft/level 3/sigma 0.5`.
    pub fn smoother_description(&self) -> String {
        let mode = match self.wavelet_mode {
            ThresholdMode::Soft => "soft",
            ThresholdMode::Hard => "hard",
        };
        format!("db6/{mode}/level {}/sigma {}", self.wavelet_level, self.wavelet_sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhanceStatus {
    Enhanced,
    PreservedRaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    TooShortDuration,
    TooShortLength,
    TooInconsistent,
    /// Missing timesteps inside the track.
    MissingSamples,
    /// Raw path has zero length, so there is no geometry to follow.
    DegeneratePath,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::TooShortDuration => "too_short_duration",
            SkipReason::TooShortLength => "too_short_length",
            SkipReason::TooInconsistent => "too_inconsistent",
            SkipReason::MissingSamples => "missing_samples",
            SkipReason::DegeneratePath => "degenerate_path",
        }
    }
}

/// Contiguous run of sample indices, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRun {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RepairReport {
    pub outliers: usize,
    /// Runs without enough support; left at their raw values.
    pub unrepaired: Vec<SampleRun>,
    /// Runs fitted from one side only (touching the track boundary).
    pub one_sided: Vec<SampleRun>,
}

/// Outlier mask for a uniformly sampled speed series.
pub fn detect_speed_outliers(speed: &[f64], dt: f64, cfg: &EnhanceConfig) -> Vec<bool> {
    let n = speed.len();
    let mut mask = vec![false; n];
    if n < 3 {
        return mask;
    }
    for i in 0..n {
        let fwd = (i + 1 < n).then(|| (speed[i + 1] - speed[i]).abs() / dt);
        let bwd = (i > 0).then(|| (speed[i] - speed[i - 1]).abs() / dt);
        if fwd.into_iter().chain(bwd).any(|a| a > cfg.outlier_accel) {
            mask[i] = true;
        }
    }
    let is_static = speed.iter().all(|&v| v < cfg.static_speed);
    if !is_static {
        let reach = (cfg.zero_window / dt + 1e-9).floor() as usize;
        for i in (0..n).filter(|&i| speed[i] == 0.0) {
            for m in &mut mask[i.saturating_sub(reach)..=(i + reach).min(n - 1)] {
                *m = true;
            }
        }
    }
    mask
}

fn runs(mask: &[bool]) -> Vec<SampleRun> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if mask[i] {
            let start = i;
            while i + 1 < mask.len() && mask[i + 1] {
                i += 1;
            }
            out.push(SampleRun { start, end: i });
        }
        i += 1;
    }
    out
}

/// Least-squares cubic through `(t, v)`; coefficients in powers of
/// `(t - centre) / scale`.
fn fit_cubic(ts: &[f64], vs: &[f64], centre: f64, scale: f64) -> Option<[f64; 4]> {
    let mut ata = [[0.0; 4]; 4];
    let mut atb = [0.0; 4];
    for (&t, &v) in ts.iter().zip(vs) {
        let x = (t - centre) / scale;
        let basis = [1.0, x, x * x, x * x * x];
        for r in 0..4 {
            atb[r] += basis[r] * v;
            for c in 0..4 {
                ata[r][c] += basis[r] * basis[c];
            }
        }
    }
    solve4(ata, atb)
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Replaces masked samples of each series by a cubic-in-time least-squares
/// fit to the unmasked samples within `repair_window` of the run. All
/// series share the mask, so vector components are repaired together.
pub fn repair_outliers(
    series: &[&[f64]],
    mask: &[bool],
    t: &[f64],
    cfg: &EnhanceConfig,
) -> (Vec<Vec<f64>>, RepairReport) {
    let mut out: Vec<Vec<f64>> = series.iter().map(|s| s.to_vec()).collect();
    let mut report = RepairReport { outliers: mask.iter().filter(|&&m| m).count(), ..Default::default() };
    for run in runs(mask) {
        let (t0, t1) = (t[run.start], t[run.end]);
        let support: Vec<usize> = (0..t.len())
            .filter(|&j| !mask[j] && t[j] >= t0 - cfg.repair_window - 1e-9 && t[j] <= t1 + cfg.repair_window + 1e-9)
            .collect();
        if support.len() < 4 {
            report.unrepaired.push(run);
            continue;
        }
        if support.iter().all(|&j| j < run.start) || support.iter().all(|&j| j > run.end) {
            report.one_sided.push(run);
        }
        let centre = 0.5 * (t0 + t1);
        let scale = 0.5 * (t1 - t0) + cfg.repair_window;
        let ts: Vec<f64> = support.iter().map(|&j| t[j]).collect();
        let mut fits = Vec::with_capacity(series.len());
        for s in series {
            let vs: Vec<f64> = support.iter().map(|&j| s[j]).collect();
            fits.push(fit_cubic(&ts, &vs, centre, scale));
        }
        if fits.iter().any(Option::is_none) {
            report.unrepaired.push(run);
            continue;
        }
        for (values, coef) in out.iter_mut().zip(fits.into_iter().flatten()) {
            for i in run.start..=run.end {
                let x = (t[i] - centre) / scale;
                values[i] = coef[0] + x * (coef[1] + x * (coef[2] + x * coef[3]));
            }
        }
    }
    (out, report)
}

/// Re-integrates the first and last `window` seconds of positions from the
/// corrected velocity, anchored at the samples exactly `window` seconds from
/// each end. Interior positions are untouched.
pub fn reconstruct_boundaries(positions: &[Point], velocity: &[Point], dt: f64, window: f64) -> Result<Vec<Point>> {
    let n = positions.len();
    let k = (window / dt).round() as usize;
    if n < 2 * k + 1 || velocity.len() != n {
        return Err(Error::insufficient(2 * k + 1, n.min(velocity.len())));
    }
    let mut out = positions.to_vec();

    let anchor = positions[k];
    let rev_x: Vec<f64> = velocity[..=k].iter().rev().map(|v| v.x).collect();
    let rev_y: Vec<f64> = velocity[..=k].iter().rev().map(|v| v.y).collect();
    let (fx, fy) = (cumulative_simpson(&rev_x, dt), cumulative_simpson(&rev_y, dt));
    for m in 1..=k {
        out[k - m] = anchor - Point::new(fx[m], fy[m]);
    }

    let a = n - 1 - k;
    let anchor = positions[a];
    let vx: Vec<f64> = velocity[a..].iter().map(|v| v.x).collect();
    let vy: Vec<f64> = velocity[a..].iter().map(|v| v.y).collect();
    let (fx, fy) = (cumulative_simpson(&vx, dt), cumulative_simpson(&vy, dt));
    for m in 1..=k {
        out[a + m] = anchor + Point::new(fx[m], fy[m]);
    }
    Ok(out)
}

pub fn reconstruct_av_boundaries(track: &Track, corrected_velocity: &[Point], cfg: &EnhanceConfig) -> Result<Vec<Point>> {
    track.require_contiguous()?;
    reconstruct_boundaries(&track.positions(), corrected_velocity, SAMPLE_INTERVAL, cfg.boundary_window)
}

/// Positions re-paced along a raw path.
#[derive(Debug, Clone, PartialEq)]
pub struct Resegmented {
    pub positions: Vec<Point>,
    /// Arc-length station of each position from the start of the raw path.
    pub stations: Vec<f64>,
}

/// Places one point per sample along the raw polyline, starting at its first
/// vertex. Each step covers the interval's mean speed times `dt`; steps are
/// scaled together so the final station equals the Simpson integral of the
/// speed. Stations past the path end continue along the last segment.
pub fn resegment_along(raw: &[Point], speed: &[f64], dt: f64) -> Result<Resegmented> {
    if raw.len() != speed.len() {
        return Err(Error::InvalidTrack("positions and speed differ in length".into()));
    }
    if speed.len() < 2 {
        return Err(Error::insufficient(2, speed.len()));
    }
    let path = Polyline::from_points_dedup(raw)?;
    let steps: Vec<f64> = speed.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).collect();
    let paced: f64 = steps.iter().sum();
    let target = simpson(speed, dt);
    let scale = if paced > 0.0 { target / paced } else { 1.0 };
    let mut stations = Vec::with_capacity(speed.len());
    let mut s = 0.0;
    stations.push(0.0);
    for step in steps {
        s += step * scale;
        stations.push(s);
    }
    let vertex_stations = path.stations();
    let positions = stations.iter().map(|&s| path.point_at_with(&vertex_stations, s)).collect();
    Ok(Resegmented { positions, stations })
}

pub fn resegment_positions(track: &Track, corrected_speed: &[f64]) -> Result<Vec<Point>> {
    track.require_contiguous()?;
    Ok(resegment_along(&track.positions(), corrected_speed, SAMPLE_INTERVAL)?.positions)
}

/// First applicable reason to keep a track unmodified. The length rule only
/// applies to background (non-conflicting) agents.
pub fn preserve_raw_gate(track: &Track, conflicting: bool, cfg: &EnhanceConfig) -> Option<SkipReason> {
    if track.len() < 2 || track.duration() < cfg.min_duration - 1e-9 {
        return Some(SkipReason::TooShortDuration);
    }
    if !conflicting && track.path_length() < cfg.min_length {
        return Some(SkipReason::TooShortLength);
    }
    match length_inconsistency(track) {
        Ok(d) if d > cfg.max_length_inconsistency => Some(SkipReason::TooInconsistent),
        _ => None,
    }
}

/// Minimum samples for the wavelet smoother.
pub const MIN_SMOOTH_SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub speed: Vec<f64>,
    pub warning: Option<String>,
}

/// Wavelet shrinkage of an AV speed series (db6).
pub fn smooth_av_speed(speed: &[f64], cfg: &EnhanceConfig) -> Smoothed {
    if speed.len() < MIN_SMOOTH_SAMPLES {
        return Smoothed {
            speed: speed.to_vec(),
            warning: Some(format!(
                "speed series of {} samples is too short to smooth (need {MIN_SMOOTH_SAMPLES})",
                speed.len()
            )),
        };
    }
    let out = denoise(speed, &Wavelet::db6(), cfg.wavelet_level, cfg.wavelet_sigma, cfg.wavelet_mode, cfg.wavelet_method);
    Smoothed { speed: out, warning: None }
}

/// Tangent direction from local chords. Where the chord is shorter than
/// `min_step` the previous well-defined heading is held.
pub fn derive_heading(positions: &[Point], min_step: f64) -> Result<Vec<f64>> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::insufficient(2, n));
    }
    let chord = |i: usize| -> Point {
        match i {
            0 => positions[1] - positions[0],
            i if i == n - 1 => positions[n - 1] - positions[n - 2],
            i => positions[i + 1] - positions[i - 1],
        }
    };
    let raw: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let c = chord(i);
            (c.norm() >= min_step).then(|| c.angle())
        })
        .collect();
    let first = raw.iter().flatten().next().copied().ok_or_else(|| Error::Degenerate("all-static track".into()))?;
    let mut held = first;
    Ok(raw
        .into_iter()
        .map(|h| {
            if let Some(h) = h {
                held = h;
            }
            held
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedTrack {
    /// The raw input, retained.
    pub base: Track,
    pub status: EnhanceStatus,
    pub skip_reason: Option<SkipReason>,
    /// Speed after outlier repair, before any smoothing.
    pub corrected_speed: Vec<f64>,
    pub positions: Vec<Point>,
    /// Final speed, acceleration and jerk. `None` only for tracks too short
    /// to differentiate.
    pub profile: Option<KinematicProfile>,
    pub heading: Vec<f64>,
    /// Heading copied from the raw field because positions never move.
    pub heading_from_raw: bool,
    pub repair: RepairReport,
    pub warnings: Vec<String>,
}

impl EnhancedTrack {
    pub fn agent_id(&self) -> &str {
        &self.base.agent_id
    }

    pub fn kind(&self) -> AgentKind {
        self.base.kind
    }

    pub fn times(&self) -> Vec<f64> {
        self.base.times()
    }

    /// Speed carried downstream: the final profile speed, or the corrected
    /// speed when no profile exists.
    pub fn speed(&self) -> &[f64] {
        self.profile.as_ref().map_or(&self.corrected_speed, |p| &p.speed)
    }

    /// Mean |position-based speed − carried speed|. `None` with fewer than 3
    /// samples or missing timesteps.
    pub fn consistency_mae(&self) -> Option<f64> {
        if !self.base.is_contiguous() {
            return None;
        }
        let vp = position_based_speed_of(&self.positions, SAMPLE_INTERVAL).ok()?;
        Some(mean_abs_diff(&vp, self.speed()))
    }

    /// The enhanced state as a plain track: velocity is the carried speed
    /// along the derived heading.
    pub fn to_track(&self) -> Track {
        let speed = self.speed();
        let points = self
            .base
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let h = self.heading[i];
                TrackPoint {
                    t: p.t,
                    x: self.positions[i].x,
                    y: self.positions[i].y,
                    vx: speed[i] * h.cos(),
                    vy: speed[i] * h.sin(),
                    heading: h,
                }
            })
            .collect();
        Track { agent_id: self.base.agent_id.clone(), kind: self.base.kind, points }
    }
}

fn preserved(track: &Track, reason: SkipReason, warnings: Vec<String>) -> EnhancedTrack {
    let speed = track.speeds();
    let profile = kinematic_profile(&speed, &track.times()).ok();
    EnhancedTrack {
        base: track.clone(),
        status: EnhanceStatus::PreservedRaw,
        skip_reason: Some(reason),
        corrected_speed: speed,
        positions: track.positions(),
        profile,
        heading: track.headings(),
        heading_from_raw: true,
        repair: RepairReport::default(),
        warnings,
    }
}

/// Full repair chain for one track. `conflicting` marks the two agents of a
/// selected case, which are exempt from the minimum-length rule.
pub fn enhance_track(track: &Track, conflicting: bool, cfg: &EnhanceConfig) -> EnhancedTrack {
    if let Some(reason) = preserve_raw_gate(track, conflicting, cfg) {
        return preserved(track, reason, Vec::new());
    }
    if !track.is_contiguous() {
        return preserved(track, SkipReason::MissingSamples, Vec::new());
    }
    let t = track.times();
    let dt = SAMPLE_INTERVAL;
    let mut warnings = Vec::new();

    let speed = track.speeds();
    let mask = detect_speed_outliers(&speed, dt, cfg);
    let vx: Vec<f64> = track.points.iter().map(|p| p.vx).collect();
    let vy: Vec<f64> = track.points.iter().map(|p| p.vy).collect();
    let (repaired, repair) = repair_outliers(&[&vx, &vy], &mask, &t, cfg);
    let velocity: Vec<Point> = repaired[0].iter().zip(&repaired[1]).map(|(&x, &y)| Point::new(x, y)).collect();
    let corrected_speed: Vec<f64> = velocity.iter().map(|v| v.norm()).collect();
    if !repair.unrepaired.is_empty() {
        warnings.push(format!("{} outlier run(s) left unrepaired", repair.unrepaired.len()));
    }

    let (positions, final_speed) = if track.kind == AgentKind::Av {
        let positions = match reconstruct_boundaries(&track.positions(), &velocity, dt, cfg.boundary_window) {
            Ok(p) => p,
            Err(e) => {
                warnings.push(format!("boundary reconstruction skipped: {e}"));
                return preserved(track, SkipReason::TooShortDuration, warnings);
            }
        };
        let smoothed = smooth_av_speed(&corrected_speed, cfg);
        warnings.extend(smoothed.warning);
        (positions, smoothed.speed)
    } else {
        match resegment_along(&track.positions(), &corrected_speed, dt) {
            Ok(r) => (r.positions, corrected_speed.clone()),
            Err(_) => return preserved(track, SkipReason::DegeneratePath, warnings),
        }
    };

    let profile = kinematic_profile(&final_speed, &t).ok();
    let (heading, heading_from_raw) = match derive_heading(&positions, cfg.heading_min_step) {
        Ok(h) => (h, false),
        Err(_) => {
            warnings.push("static positions; heading copied from raw data".into());
            (track.headings(), true)
        }
    };
    EnhancedTrack {
        base: track.clone(),
        status: EnhanceStatus::Enhanced,
        skip_reason: None,
        corrected_speed,
        positions,
        profile,
        heading,
        heading_from_raw,
        repair,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 0.1;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * DT).collect()
    }

    #[test]
    fn smooth_ramp_has_no_outliers() {
        let v: Vec<f64> = grid(50).iter().map(|t| 3.0 + 2.0 * t).collect();
        assert!(detect_speed_outliers(&v, DT, &EnhanceConfig::default()).iter().all(|&m| !m));
    }

    #[test]
    fn isolated_zero_flags_seven_samples() {
        let mut v = vec![10.0; 30];
        v[15] = 0.0;
        let mask = detect_speed_outliers(&v, DT, &EnhanceConfig::default());
        let flagged: Vec<usize> = (0..30).filter(|&i| mask[i]).collect();
        assert_eq!(flagged, (12..=18).collect::<Vec<_>>());
    }

    #[test]
    fn step_to_zero_flags_jump_and_zero_window() {
        let v: Vec<f64> = (0..30).map(|i| if i < 15 { 10.0 } else { 0.0 }).collect();
        let mask = detect_speed_outliers(&v, DT, &EnhanceConfig::default());
        assert!(mask[14] && mask[15]);
        assert!((12..30).all(|i| mask[i]));
        assert!((0..12).all(|i| !mask[i]));
    }

    #[test]
    fn static_track_zeros_are_genuine() {
        let v = vec![0.0; 20];
        assert!(detect_speed_outliers(&v, DT, &EnhanceConfig::default()).iter().all(|&m| !m));
    }

    #[test]
    fn cubic_repair_is_exact_on_cubic_data() {
        let t = grid(60);
        let truth: Vec<f64> = t.iter().map(|t| 0.1 * t * t * t - t * t + 5.0).collect();
        let mut v = truth.clone();
        v[30] = -40.0;
        let mut mask = vec![false; 60];
        mask[30] = true;
        let (out, report) = repair_outliers(&[&v], &mask, &t, &EnhanceConfig::default());
        assert!((out[0][30] - truth[30]).abs() < 1e-9);
        assert!(report.unrepaired.is_empty());
        for i in (0..60).filter(|&i| i != 30) {
            assert_eq!(out[0][i], v[i]);
        }
    }

    #[test]
    fn repair_without_mask_is_identity() {
        let t = grid(20);
        let v: Vec<f64> = t.iter().map(|t| t.sin()).collect();
        let (out, report) = repair_outliers(&[&v], &[false; 20], &t, &EnhanceConfig::default());
        assert_eq!(out[0], v);
        assert_eq!(report.outliers, 0);
    }

    #[test]
    fn constant_run_repairs_to_constant() {
        let t = grid(40);
        let mut v = vec![8.0; 40];
        let mut mask = vec![false; 40];
        for i in 20..23 {
            v[i] = 0.0;
            mask[i] = true;
        }
        let (out, _) = repair_outliers(&[&v], &mask, &t, &EnhanceConfig::default());
        for i in 20..23 {
            assert!((out[0][i] - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn run_without_support_is_reported() {
        let t = grid(5);
        let v = vec![1.0; 5];
        let mask = [true, true, false, false, false];
        let (out, report) = repair_outliers(&[&v], &mask, &t, &EnhanceConfig::default());
        assert_eq!(report.unrepaired, vec![SampleRun { start: 0, end: 1 }]);
        assert_eq!(out[0], v);
    }

    #[test]
    fn boundary_run_is_one_sided() {
        let t = grid(40);
        let v: Vec<f64> = t.iter().map(|t| 2.0 + t).collect();
        let mut mask = vec![false; 40];
        mask[0] = true;
        mask[1] = true;
        let (out, report) = repair_outliers(&[&v], &mask, &t, &EnhanceConfig::default());
        assert_eq!(report.one_sided.len(), 1);
        assert!((out[0][0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn boundary_reconstruction_constant_velocity() {
        let n = 60;
        let pos = vec![Point::ORIGIN; n];
        let vel = vec![Point::new(3.0, 4.0); n];
        let out = reconstruct_boundaries(&pos, &vel, DT, 1.5).unwrap();
        let end = out[n - 1];
        assert!((end.x - 4.5).abs() < 1e-12 && (end.y - 6.0).abs() < 1e-12);
        assert!((out[0].x + 4.5).abs() < 1e-12);
        assert_eq!(&out[15..n - 15], &pos[15..n - 15]);
    }

    #[test]
    fn boundary_reconstruction_braking_profile() {
        // vx = 10 - 4τ over the tail, τ measured from the anchor
        let n = 50;
        let a = n - 16;
        let vel: Vec<Point> = (0..n).map(|i| Point::new(10.0 - 4.0 * (i as f64 - a as f64) * DT, 0.0)).collect();
        let out = reconstruct_boundaries(&vec![Point::ORIGIN; n], &vel, DT, 1.5).unwrap();
        assert!((out[n - 1].x - 10.5).abs() < 1e-9);
    }

    #[test]
    fn boundary_reconstruction_needs_three_seconds() {
        let n = 30;
        assert!(reconstruct_boundaries(&vec![Point::ORIGIN; n], &vec![Point::ORIGIN; n], DT, 1.5).is_err());
    }

    #[test]
    fn resegment_straight_line() {
        let raw: Vec<Point> = (0..101).map(|i| Point::new(i as f64, 0.0)).collect();
        let out = resegment_along(&raw, &vec![9.0; 101], DT).unwrap();
        for (i, p) in out.positions.iter().enumerate() {
            assert!((p.x - 0.9 * i as f64).abs() < 1e-9 && p.y == 0.0);
        }
        assert!((out.stations[100] - 90.0).abs() < 1e-9);
    }

    #[test]
    fn resegment_is_a_fixed_point_for_consistent_motion() {
        let raw: Vec<Point> = (0..60).map(|i| Point::new(0.7 * i as f64, 0.7 * i as f64)).collect();
        let v = vec![0.7 * 2f64.sqrt() / DT; 60];
        let out = resegment_along(&raw, &v, DT).unwrap();
        for (a, b) in raw.iter().zip(&out.positions) {
            assert!(a.distance(*b) < 1e-6);
        }
    }

    #[test]
    fn gate_order_and_thresholds() {
        let mk = |n: usize, step: f64, speed: f64| {
            let pts = (0..n)
                .map(|i| TrackPoint { t: i as f64 * DT, x: step * i as f64, y: 0.0, vx: speed, vy: 0.0, heading: 0.0 })
                .collect();
            Track::new("a", AgentKind::Pedestrian, pts).unwrap()
        };
        let cfg = EnhanceConfig::default();
        assert_eq!(preserve_raw_gate(&mk(50, 1.0, 10.0), false, &cfg), Some(SkipReason::TooShortDuration));
        // 7 m over 7 s, consistent
        assert_eq!(preserve_raw_gate(&mk(71, 0.1, 1.0), false, &cfg), Some(SkipReason::TooShortLength));
        assert_eq!(preserve_raw_gate(&mk(71, 0.1, 1.0), true, &cfg), None);
        // 60 m of positions, 57.5 m of speed
        assert_eq!(preserve_raw_gate(&mk(61, 1.0, 9.5833333333), false, &cfg), Some(SkipReason::TooInconsistent));
        assert_eq!(preserve_raw_gate(&mk(61, 1.0, 10.0), false, &cfg), None);
    }

    #[test]
    fn smoothing_constant_is_identity() {
        let v = vec![6.5; 110];
        let out = smooth_av_speed(&v, &EnhanceConfig::default());
        assert!(out.warning.is_none());
        assert!(out.speed.iter().all(|s| (s - 6.5).abs() < 1e-9));
    }

    #[test]
    fn smoothing_short_signal_warns() {
        let out = smooth_av_speed(&[1.0; 10], &EnhanceConfig::default());
        assert_eq!(out.speed, vec![1.0; 10]);
        assert!(out.warning.is_some());
    }

    #[test]
    fn smoother_settings_echo() {
        assert_eq!(EnhanceConfig::default().smoother_description(), "db6/soft/level 3/sigma 0.5");
    }

    #[test]
    fn heading_cases() {
        let east: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 0.0)).collect();
        assert!(derive_heading(&east, 0.01).unwrap().iter().all(|h| h.abs() < 1e-12));
        let north: Vec<Point> = (0..5).map(|i| Point::new(0.0, i as f64)).collect();
        assert!(derive_heading(&north, 0.01).unwrap().iter().all(|h| (h - std::f64::consts::FRAC_PI_2).abs() < 1e-12));
        assert!(derive_heading(&[Point::ORIGIN; 4], 0.01).is_err());
        // stop in the middle keeps the last heading
        let mut stop = east.clone();
        stop.extend(std::iter::repeat(Point::new(4.0, 0.0)).take(5));
        stop.extend((5..8).map(|i| Point::new(4.0, (i - 4) as f64)));
        let h = derive_heading(&stop, 0.01).unwrap();
        assert!(h[7].abs() < 1e-12);
    }

    #[test]
    fn quarter_circle_heading_matches_tangent() {
        let r = 20.0;
        let n = 40;
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
                Point::new(r * a.cos(), r * a.sin())
            })
            .collect();
        let h = derive_heading(&pts, 0.01).unwrap();
        for (i, hi) in h.iter().enumerate().take(n - 1).skip(1) {
            let a = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
            let tangent = a + std::f64::consts::FRAC_PI_2;
            assert!((hi - tangent).abs() < 0.02);
        }
    }

    #[test]
    fn short_track_is_preserved_bit_for_bit() {
        let pts: Vec<TrackPoint> = (0..30)
            .map(|i| TrackPoint { t: i as f64 * DT, x: 1.3 * i as f64, y: 0.1, vx: 1.1, vy: 0.2, heading: 0.3 })
            .collect();
        let tr = Track::new("p", AgentKind::Pedestrian, pts).unwrap();
        let e = enhance_track(&tr, true, &EnhanceConfig::default());
        assert_eq!(e.status, EnhanceStatus::PreservedRaw);
        assert_eq!(e.skip_reason, Some(SkipReason::TooShortDuration));
        assert_eq!(e.positions, tr.positions());
        assert_eq!(e.corrected_speed, tr.speeds());
        assert_eq!(e.heading, tr.headings());
    }

    #[test]
    fn zero_filled_vehicle_is_repaired_and_consistent() {
        let pts: Vec<TrackPoint> = (0..90)
            .map(|i| {
                let t = i as f64 * DT;
                let v = if (40..42).contains(&i) { 0.0 } else { 8.0 };
                TrackPoint { t, x: 8.0 * t, y: 2.0, vx: v, vy: 0.0, heading: 0.0 }
            })
            .collect();
        let tr = Track::new("h", AgentKind::Vehicle, pts).unwrap();
        let e = enhance_track(&tr, true, &EnhanceConfig::default());
        assert_eq!(e.status, EnhanceStatus::Enhanced);
        assert!(e.corrected_speed.iter().all(|v| (v - 8.0).abs() < 1e-9));
        assert!(e.consistency_mae().unwrap() < 0.05);
    }
}
