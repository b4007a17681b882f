//! Instantaneous cross-correlations and the static/dynamic threshold
//! baselines.
//!
//! `G_ij(t) = r_i(t) r_j(t)` is a rank-one proxy for the correlation of two
//! stocks on a single day. The static baseline `Q_s` averages it over all
//! pairs and days; the dynamic baseline `Q_d(t)` averages over pairs only.
//!
//! All pair reductions use one canonical order: for each day, pairs `(i, j)`
//! with `i < j` in row-major order; day sums are then combined in day order.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::ReturnMatrix;
use crate::matrix::RowMatrix;

/// `G(t)` for one day. `t` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFrame {
    pub t: usize,
    pub values: RowMatrix,
}

impl CorrelationFrame {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }
}

fn check_day(t: usize, n_days: usize) -> Result<()> {
    if t == 0 || t > n_days {
        return Err(Error::DayOutOfRange { t, max: n_days });
    }
    Ok(())
}

/// Builds `G_ij(t)` for all pairs including the diagonal. Each off-diagonal
/// product is computed once and mirrored.
pub fn cross_correlation_frame(returns: &ReturnMatrix, t: usize) -> Result<CorrelationFrame> {
    check_day(t, returns.n_days())?;
    let day: Vec<f64> = (0..returns.n_stocks()).map(|i| returns.get(i, t - 1)).collect();
    Ok(frame_from_day(t, &day))
}

pub(crate) fn frame_from_day(t: usize, day: &[f64]) -> CorrelationFrame {
    let n = day.len();
    let mut values = RowMatrix::zeros(n, n);
    for i in 0..n {
        values.set(i, i, day[i] * day[i]);
        for j in i + 1..n {
            let g = day[i] * day[j];
            values.set(i, j, g);
            values.set(j, i, g);
        }
    }
    CorrelationFrame { t, values }
}

/// Day-major copy of the normalized returns: entry `[t][i] = r_i(t)`.
pub(crate) fn day_major(returns: &ReturnMatrix) -> RowMatrix {
    let (n, t_len) = (returns.n_stocks(), returns.n_days());
    let mut out = RowMatrix::zeros(t_len, n);
    for i in 0..n {
        for (t, &x) in returns.row(i).iter().enumerate() {
            out.set(t, i, x);
        }
    }
    out
}

/// Pair sum plus the smallest and largest pair product of one day. The
/// extremes come from the two smallest and two largest values, which give
/// the same floating-point products as the pairs they stand for.
fn pair_stats(day: &[f64]) -> (f64, f64, f64) {
    let mut acc = 0.0;
    for i in 0..day.len() {
        let ri = day[i];
        for &rj in &day[i + 1..] {
            acc += ri * rj;
        }
    }
    let (mut s0, mut s1) = (f64::INFINITY, f64::INFINITY);
    let (mut l0, mut l1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &x in day {
        if x < s0 {
            s1 = s0;
            s0 = x;
        } else if x < s1 {
            s1 = x;
        }
        if x > l0 {
            l1 = l0;
            l0 = x;
        } else if x > l1 {
            l1 = x;
        }
    }
    let lo = (s0 * l0).min(s0 * s1).min(l1 * l0);
    let hi = (l0 * l1).max(s0 * s1);
    (acc, lo, hi)
}

/// `(sum_{i<j} G_ij(t), min, max)` for every day, in day order.
fn day_pair_stats(returns: &ReturnMatrix) -> Vec<(f64, f64, f64)> {
    let days = day_major(returns);
    (0..days.rows()).into_par_iter().map(|t| pair_stats(days.row(t))).collect()
}

fn pair_count(n: usize) -> f64 {
    (n * (n - 1)) as f64 / 2.0
}

/// The rounded mean is kept inside the range of the products it averages,
/// so a day of equal products has `Q_d` equal to that product.
fn day_mean((sum, lo, hi): (f64, f64, f64), pairs: f64) -> f64 {
    (sum / pairs).clamp(lo, hi)
}

/// `Q_s = 2 / (N (N-1) T) * sum_t sum_{i<j} G_ij(t)`.
pub fn static_baseline(returns: &ReturnMatrix) -> f64 {
    baselines(returns).0
}

/// `Q_d(t) = 2 / (N (N-1)) * sum_{i<j} G_ij(t)`, one value per day.
pub fn dynamic_baseline(returns: &ReturnMatrix) -> Vec<f64> {
    baselines(returns).1
}

/// Both baselines from a single pass.
pub fn baselines(returns: &ReturnMatrix) -> (f64, Vec<f64>) {
    let stats = day_pair_stats(returns);
    let pairs = pair_count(returns.n_stocks());
    let total: f64 = stats.iter().map(|s| s.0).sum();
    let q_s = total / (pairs * returns.n_days() as f64);
    (q_s, stats.into_iter().map(|s| day_mean(s, pairs)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Static,
    Dynamic,
}

impl ThresholdKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdKind::Static => "static",
            ThresholdKind::Dynamic => "dynamic",
        }
    }

    /// Multiplier range studied for this kind in the reference analysis.
    pub fn studied_range(self) -> (f64, f64) {
        match self {
            ThresholdKind::Static => (0.25, 4.0),
            ThresholdKind::Dynamic => (0.25, 6.0),
        }
    }
}

impl std::fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(ThresholdKind::Static),
            "dynamic" => Ok(ThresholdKind::Dynamic),
            other => Err(Error::Config(format!("unknown threshold kind {other:?}"))),
        }
    }
}

/// Edge-creation rule: `zeta = multiplier * Q_s` or `zeta(t) = multiplier * Q_d(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPolicy {
    kind: ThresholdKind,
    multiplier: f64,
    q_static: Option<f64>,
    q_dynamic: Option<Vec<f64>>,
}

impl ThresholdPolicy {
    pub fn fixed(multiplier: f64, q_static: f64) -> Result<Self> {
        check_multiplier(ThresholdKind::Static, multiplier)?;
        Ok(Self { kind: ThresholdKind::Static, multiplier, q_static: Some(q_static), q_dynamic: None })
    }

    pub fn per_day(multiplier: f64, q_dynamic: Vec<f64>) -> Result<Self> {
        check_multiplier(ThresholdKind::Dynamic, multiplier)?;
        Ok(Self { kind: ThresholdKind::Dynamic, multiplier, q_static: None, q_dynamic: Some(q_dynamic) })
    }

    /// Computes the baseline of `kind` from `returns`.
    pub fn from_returns(kind: ThresholdKind, multiplier: f64, returns: &ReturnMatrix) -> Result<Self> {
        match kind {
            ThresholdKind::Static => Self::fixed(multiplier, static_baseline(returns)),
            ThresholdKind::Dynamic => Self::per_day(multiplier, dynamic_baseline(returns)),
        }
    }

    pub fn kind(&self) -> ThresholdKind {
        self.kind
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn q_static(&self) -> Option<f64> {
        self.q_static
    }

    pub fn q_dynamic(&self) -> Option<&[f64]> {
        self.q_dynamic.as_deref()
    }

    /// Whether the multiplier lies in the range studied for this kind.
    pub fn in_studied_range(&self) -> bool {
        let (lo, hi) = self.kind.studied_range();
        (lo..=hi).contains(&self.multiplier)
    }

    /// `zeta` on day `t` (1-based).
    pub fn threshold_at(&self, t: usize) -> Result<f64> {
        match (self.kind, self.q_static, &self.q_dynamic) {
            (ThresholdKind::Static, Some(q), _) => Ok(self.multiplier * q),
            (ThresholdKind::Dynamic, _, Some(q)) => {
                check_day(t, q.len())?;
                Ok(self.multiplier * q[t - 1])
            }
            _ => unreachable!("policy constructed without its baseline"),
        }
    }
}

fn check_multiplier(kind: ThresholdKind, multiplier: f64) -> Result<()> {
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(Error::Config(format!("multiplier must be positive, got {multiplier}")));
    }
    let (lo, hi) = kind.studied_range();
    if !(lo..=hi).contains(&multiplier) {
        log::info!("{kind} multiplier {multiplier} is outside the studied range [{lo}, {hi}]");
    }
    Ok(())
}

/// Writes `# Q_s=<value>` followed by `t,Q_d` rows (1-based `t`).
pub fn write_thresholds_csv<W: Write>(q_static: f64, q_dynamic: &[f64], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# Q_s={q_static}")?;
    writeln!(out, "t,Q_d")?;
    for (k, q) in q_dynamic.iter().enumerate() {
        writeln!(out, "{},{}", k + 1, q)?;
    }
    out.flush()
}
