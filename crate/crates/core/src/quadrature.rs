//! Cumulative Simpson integration on a uniform grid.

/// Running integral `F[k] = ∫ f` from sample 0 to sample k with step `h`.
///
/// Even k uses composite Simpson; odd k ≥ 3 uses Simpson's 3/8 rule on the
/// first three intervals followed by composite Simpson. The first interval
/// uses a four-point stencil. Every entry is exact for cubic integrands.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let f = values;
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    match n {
        2 => {
            out[1] = 0.5 * h * (f[0] + f[1]);
            return out;
        }
        3 => out[1] = h * (5.0 * f[0] + 8.0 * f[1] - f[2]) / 12.0,
        _ => out[1] = h * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0,
    }
    let simpson = |k: usize| h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
    for k in (2..n).step_by(2) {
        out[k] = out[k - 2] + simpson(k);
    }
    if n > 3 {
        out[3] = 3.0 * h / 8.0 * (f[0] + 3.0 * f[1] + 3.0 * f[2] + f[3]);
        for k in (5..n).step_by(2) {
            out[k] = out[k - 2] + simpson(k);
        }
    }
    out
}

/// Integral over the whole sampled window.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    cumulative_simpson(values, h).last().copied().unwrap_or(0.0)
}
