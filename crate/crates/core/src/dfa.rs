//! Detrended fluctuation analysis (order 1).
//!
//! The series is integrated into a mean-removed profile `B`, the profile is
//! cut into non-overlapping windows of size `s`, a least-squares line is
//! removed from each window, and `F(s)` is the RMS of what remains. The slope
//! of `log F` against `log s` is the scaling exponent `theta`; roughly 0.5 for
//! white noise, 1.0 for 1/f noise and 1.5 for a random walk.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SERIES_LEN: usize = 16;
pub const MIN_SCALE: usize = 4;
pub const DEFAULT_GRID_POINTS: usize = 20;
pub const MIN_FIT_POINTS: usize = 4;
pub const MIN_CROSSOVER_POINTS: usize = 8;
/// Relative SSE reduction a two-segment fit must reach to be reported.
pub const CROSSOVER_MIN_GAIN: f64 = 0.2;
/// Maximum fraction of undefined entries that may be mean-filled.
pub const MAX_GAP_FRACTION: f64 = 0.10;

/// Largest admissible window size for a series of length `len`.
pub fn max_scale(len: usize) -> usize {
    len / 4
}

/// Replaces undefined entries with the mean of the defined ones. Returns the
/// filled series and the fraction that was filled.
pub fn fill_gaps(series: &[Option<f64>]) -> Result<(Vec<f64>, f64)> {
    let defined: Vec<f64> = series.iter().flatten().copied().collect();
    let missing = series.len() - defined.len();
    if series.is_empty() || missing as f64 > MAX_GAP_FRACTION * series.len() as f64 {
        return Err(Error::TooManyGaps { missing, len: series.len() });
    }
    let fill = defined.iter().sum::<f64>() / defined.len() as f64;
    let filled = series.iter().map(|x| x.unwrap_or(fill)).collect();
    Ok((filled, missing as f64 / series.len() as f64))
}

/// `B(t') = sum_{t'' <= t'} (A(t'') - A_ave)`.
pub fn dfa_profile(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort { len: series.len(), min: MIN_SERIES_LEN });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::UndefinedEntries);
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut acc = 0.0;
    Ok(series
        .iter()
        .map(|&a| {
            acc += a - mean;
            acc
        })
        .collect())
}

/// About twenty log-spaced integer scales in `[4, len / 4]`, deduplicated.
pub fn default_scales(len: usize) -> Vec<usize> {
    let hi = max_scale(len);
    if hi < MIN_SCALE {
        return Vec::new();
    }
    let ratio = (hi as f64 / MIN_SCALE as f64).ln();
    let mut scales: Vec<usize> = (0..DEFAULT_GRID_POINTS)
        .map(|k| {
            let s = MIN_SCALE as f64 * (ratio * k as f64 / (DEFAULT_GRID_POINTS - 1) as f64).exp();
            (s.round() as usize).clamp(MIN_SCALE, hi)
        })
        .collect();
    scales.dedup();
    scales
}

/// Sum of squared residuals of the least-squares line through
/// `(1, y_1), ..., (s, y_s)`.
fn window_sse(y: &[f64]) -> f64 {
    let s = y.len() as f64;
    let x_mean = (s + 1.0) / 2.0;
    let y_mean = y.iter().sum::<f64>() / s;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (k, &v) in y.iter().enumerate() {
        let dx = (k + 1) as f64 - x_mean;
        sxx += dx * dx;
        sxy += dx * (v - y_mean);
    }
    let slope = sxy / sxx;
    y.iter()
        .enumerate()
        .map(|(k, &v)| {
            let resid = v - y_mean - slope * ((k + 1) as f64 - x_mean);
            resid * resid
        })
        .sum()
}

/// `F(s)` for each scale. The profile is tiled from its start by
/// `floor(T / s)` windows; the trailing remainder is dropped and the mean
/// square is taken over the tiled length.
pub fn fluctuation_function(profile: &[f64], scales: &[usize]) -> Result<Vec<f64>> {
    let hi = max_scale(profile.len());
    if let Some(&bad) = scales.iter().find(|&&s| s < MIN_SCALE || s > hi) {
        return Err(Error::ScaleOutOfRange { scale: bad, max: hi });
    }
    Ok(scales
        .par_iter()
        .map(|&s| {
            let windows = profile.len() / s;
            let tiled = windows * s;
            let sse: f64 = profile[..tiled].chunks_exact(s).map(window_sse).sum();
            (sse / tiled as f64).sqrt()
        })
        .collect())
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub sse: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    LineFit { slope, intercept, sse }
}

/// `(ln s, ln F)` for the points with `F > 0`, warning about the rest.
fn log_points(scales: &[usize], fluct: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let (mut xs, mut ys, mut kept) = (Vec::new(), Vec::new(), Vec::new());
    for (&s, &f) in scales.iter().zip(fluct) {
        if f > 0.0 && f.is_finite() {
            xs.push((s as f64).ln());
            ys.push(f.ln());
            kept.push(s);
        } else {
            log::warn!("dropping scale {s} with F = {f} from the log-log fit");
        }
    }
    (xs, ys, kept)
}

/// Slope of `ln F` against `ln s` over the scales in `[lo, hi]`.
pub fn fit_exponent(scales: &[usize], fluct: &[f64], range: (usize, usize)) -> Result<f64> {
    let (sel_s, sel_f): (Vec<usize>, Vec<f64>) = scales
        .iter()
        .zip(fluct)
        .filter(|(&s, _)| s >= range.0 && s <= range.1)
        .map(|(&s, &f)| (s, f))
        .unzip();
    let (xs, ys, _) = log_points(&sel_s, &sel_f);
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints(format!(
            "{} usable points in scale range [{}, {}], need {MIN_FIT_POINTS}",
            xs.len(),
            range.0,
            range.1
        )));
    }
    Ok(fit_line(&xs, &ys).slope)
}

/// Default fit range: drop the two smallest and two largest scales when at
/// least eight are available, otherwise use all of them.
pub fn default_fit_range(scales: &[usize]) -> Option<(usize, usize)> {
    match scales.len() {
        0 => None,
        n if n >= 8 => Some((scales[2], scales[n - 3])),
        n => Some((scales[0], scales[n - 1])),
    }
}

/// Two-segment power-law fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub t_c: usize,
    pub theta_below: f64,
    pub theta_above: f64,
    /// `(SSE_single - SSE_two) / SSE_single`.
    pub sse_gain: f64,
}

/// Scans every interior scale as a breakpoint shared by both segments (each
/// segment keeps at least three points) and returns the split with the
/// smallest total SSE, regardless of gain.
pub fn best_breakpoint(scales: &[usize], fluct: &[f64]) -> Result<Crossover> {
    let (xs, ys, kept) = log_points(scales, fluct);
    let n = xs.len();
    if n < MIN_CROSSOVER_POINTS {
        return Err(Error::InsufficientPoints(format!("{n} usable points, crossover needs {MIN_CROSSOVER_POINTS}")));
    }
    if (kept[n - 1] as f64) < 10.0 * kept[0] as f64 {
        return Err(Error::InsufficientPoints(format!(
            "scales {}..{} span less than a decade",
            kept[0],
            kept[n - 1]
        )));
    }
    let single = fit_line(&xs, &ys).sse;
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let total_ss: f64 = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let mut best: Option<(f64, usize, LineFit, LineFit)> = None;
    for b in 2..=n - 3 {
        let below = fit_line(&xs[..=b], &ys[..=b]);
        let above = fit_line(&xs[b..], &ys[b..]);
        let total = below.sse + above.sse;
        if best.as_ref().is_none_or(|(sse, ..)| total < *sse) {
            best = Some((total, b, below, above));
        }
    }
    let (two, b, below, above) = best.expect("at least one breakpoint candidate");
    // A single line that already explains everything up to rounding leaves
    // nothing for a second segment to gain.
    let sse_gain = if single > 1e-12 * total_ss { ((single - two) / single).max(0.0) } else { 0.0 };
    Ok(Crossover { t_c: kept[b], theta_below: below.slope, theta_above: above.slope, sse_gain })
}

/// Like [`best_breakpoint`], but only reports the split when its SSE gain
/// reaches [`CROSSOVER_MIN_GAIN`].
pub fn fit_crossover(scales: &[usize], fluct: &[f64]) -> Result<Option<Crossover>> {
    let c = best_breakpoint(scales, fluct)?;
    Ok((c.sse_gain >= CROSSOVER_MIN_GAIN).then_some(c))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DfaOptions {
    /// Defaults to [`default_scales`].
    pub scales: Option<Vec<usize>>,
    /// Defaults to [`default_fit_range`].
    pub fit_range: Option<(usize, usize)>,
    pub crossover: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaResult {
    pub scales: Vec<usize>,
    pub fluctuations: Vec<f64>,
    pub theta: f64,
    pub fit_range: (usize, usize),
    pub crossover: Option<Crossover>,
    /// Fraction of entries that were mean-filled before the analysis.
    pub gap_fraction: f64,
}

impl DfaResult {
    /// Writes `scale,F`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "scale,F")?;
        for (s, f) in self.scales.iter().zip(&self.fluctuations) {
            writeln!(out, "{s},{f}")?;
        }
        out.flush()
    }

    /// JSON sidecar with the fit parameters.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "theta": self.theta,
            "fit_range": [self.fit_range.0, self.fit_range.1],
            "crossover": self.crossover,
            "gap_fraction": self.gap_fraction,
            "n_scales": self.scales.len(),
        })
    }
}

/// Full DFA of a complete series.
pub fn analyze(series: &[f64], opts: &DfaOptions) -> Result<DfaResult> {
    analyze_filled(series, 0.0, opts)
}

/// Full DFA of a series with undefined entries, mean-filled first.
pub fn analyze_with_gaps(series: &[Option<f64>], opts: &DfaOptions) -> Result<DfaResult> {
    let (filled, gap_fraction) = fill_gaps(series)?;
    analyze_filled(&filled, gap_fraction, opts)
}

fn analyze_filled(series: &[f64], gap_fraction: f64, opts: &DfaOptions) -> Result<DfaResult> {
    let profile = dfa_profile(series)?;
    let scales = match &opts.scales {
        Some(s) => {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            s
        }
        None => default_scales(series.len()),
    };
    let fluctuations = fluctuation_function(&profile, &scales)?;
    let fit_range = opts
        .fit_range
        .or_else(|| default_fit_range(&scales))
        .ok_or_else(|| Error::InsufficientPoints("no scales".into()))?;
    let theta = fit_exponent(&scales, &fluctuations, fit_range)?;
    let crossover = if opts.crossover { fit_crossover(&scales, &fluctuations)? } else { None };
    Ok(DfaResult { scales, fluctuations, theta, fit_range, crossover, gap_fraction })
}
