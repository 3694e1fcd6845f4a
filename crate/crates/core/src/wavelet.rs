//! Discrete wavelet transform with half-sample symmetric extension and
//! wavelet-shrinkage denoising.
//!
//! The transform follows the usual convention for boundary-extended DWTs:
//! a length-`N` signal filtered by a length-`F` filter yields
//! `floor((N + F - 1) / 2)` coefficients per band, and reconstruction is the
//! adjoint of analysis restricted to the original support.

use serde::{Deserialize, Serialize};

/// Daubechies scaling filter with 6 vanishing moments (12 taps),
/// reconstruction low-pass ordering.
const DB6_SCALING: [f64; 12] = [
    0.11154074335010947,
    0.49462389039845306,
    0.7511339080210954,
    0.31525035170919763,
    -0.22626469396543983,
    -0.12976686756726194,
    0.09750160558732304,
    0.027522865530305727,
    -0.03158203931748603,
    0.0005538422011614961,
    0.004777257510945511,
    -0.0010773010853084796,
];

/// Orthogonal wavelet described by its analysis filters.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet {
    name: &'static str,
    dec_lo: Vec<f64>,
    dec_hi: Vec<f64>,
}

impl Wavelet {
    /// Builds the filter bank from a scaling (reconstruction low-pass) filter.
    pub fn from_scaling_filter(name: &'static str, scaling: &[f64]) -> Self {
        let f = scaling.len();
        let dec_lo: Vec<f64> = scaling.iter().rev().copied().collect();
        let dec_hi = (0..f)
            .map(|k| if k % 2 == 0 { -dec_lo[f - 1 - k] } else { dec_lo[f - 1 - k] })
            .collect();
        Wavelet { name, dec_lo, dec_hi }
    }

    pub fn db6() -> Self {
        Wavelet::from_scaling_filter("db6", &DB6_SCALING)
    }

    pub fn haar() -> Self {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        Wavelet::from_scaling_filter("haar", &[c, c])
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn filter_len(&self) -> usize {
        self.dec_lo.len()
    }
}

/// Half-sample symmetric extension: `x[-1] = x[0]`, `x[N] = x[N-1]`.
fn symmetric_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    k as usize
}

fn analysis(x: &[f64], filter: &[f64]) -> Vec<f64> {
    let n = x.len();
    let f = filter.len();
    let m = (n + f - 1) / 2;
    (0..m)
        .map(|o| {
            let centre = (2 * o + 1) as isize;
            filter
                .iter()
                .enumerate()
                .map(|(j, h)| h * x[symmetric_index(centre - j as isize, n)])
                .sum()
        })
        .collect()
}

/// Single-level forward transform: (approximation, detail).
pub fn dwt(x: &[f64], w: &Wavelet) -> (Vec<f64>, Vec<f64>) {
    (analysis(x, &w.dec_lo), analysis(x, &w.dec_hi))
}

/// Single-level inverse transform producing `n` samples.
pub fn idwt(approx: &[f64], detail: &[f64], w: &Wavelet, n: usize) -> Vec<f64> {
    let f = w.filter_len();
    (0..n)
        .map(|i| {
            // coefficient o touches sample i through tap 2o+1-i
            let lo = i.saturating_sub(1).div_ceil(2);
            let hi = ((i + f - 2) / 2).min(approx.len().saturating_sub(1));
            (lo..=hi)
                .map(|o| {
                    let tap = 2 * o + 1 - i;
                    approx[o] * w.dec_lo[tap] + detail[o] * w.dec_hi[tap]
                })
                .sum()
        })
        .collect()
}

/// Multilevel decomposition. `details[0]` is the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    /// Signal length entering each level, finest first.
    lengths: Vec<usize>,
}

pub fn wavedec(x: &[f64], w: &Wavelet, level: usize) -> Decomposition {
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(level);
    let mut lengths = Vec::with_capacity(level);
    for _ in 0..level {
        lengths.push(approx.len());
        let (a, d) = dwt(&approx, w);
        approx = a;
        details.push(d);
    }
    Decomposition { approx, details, lengths }
}

pub fn waverec(dec: &Decomposition, w: &Wavelet) -> Vec<f64> {
    let mut approx = dec.approx.clone();
    for (detail, &n) in dec.details.iter().zip(&dec.lengths).rev() {
        approx = idwt(&approx, detail, w, n);
    }
    approx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkMethod {
    /// Per-level threshold `σ² / sqrt(max(var(d) − σ², ε))`.
    BayesShrink,
    /// Universal threshold `σ·sqrt(2 ln N)`.
    VisuShrink,
}

pub fn threshold(value: f64, t: f64, mode: ThresholdMode) -> f64 {
    match mode {
        ThresholdMode::Soft => value.signum() * (value.abs() - t).max(0.0),
        ThresholdMode::Hard => {
            if value.abs() > t {
                value
            } else {
                0.0
            }
        }
    }
}

fn bayes_threshold(detail: &[f64], variance: f64) -> f64 {
    let dvar = detail.iter().map(|d| d * d).sum::<f64>() / detail.len() as f64;
    variance / (dvar - variance).max(f64::EPSILON).sqrt()
}

/// Shrinks detail coefficients at every level and reconstructs. The
/// approximation band is left untouched.
pub fn denoise(x: &[f64], w: &Wavelet, level: usize, sigma: f64, mode: ThresholdMode, method: ShrinkMethod) -> Vec<f64> {
    let mut dec = wavedec(x, w, level);
    let universal = sigma * (2.0 * (x.len() as f64).ln()).sqrt();
    for detail in &mut dec.details {
        let t = match method {
            ShrinkMethod::BayesShrink => bayes_threshold(detail, sigma * sigma),
            ShrinkMethod::VisuShrink => universal,
        };
        for d in detail.iter_mut() {
            *d = threshold(*d, t, mode);
        }
    }
    let mut out = waverec(&dec, w);
    out.truncate(x.len());
    out
}
