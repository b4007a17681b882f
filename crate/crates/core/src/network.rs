//! Per-day threshold graphs and their topology metrics.
//!
//! Stocks are nodes; an undirected edge `{i, j}` exists on day `t` iff
//! `G_ij(t) > zeta(t)` (strict). From each snapshot we take the average
//! clustering coefficient `C(t)`, the average degree `K(t)` and the degree
//! assortativity `r(t)`, then average them over time and pool all node
//! degrees into an ensemble histogram.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::correlation::{day_major, CorrelationFrame, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::market_data::ReturnMatrix;

/// Undirected simple graph for one day, stored as one adjacency bitset per
/// node. Rows are kept symmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotGraph {
    t: usize,
    n: usize,
    words: usize,
    bits: Vec<u64>,
    degrees: Vec<u32>,
    edge_count: usize,
}

impl SnapshotGraph {
    pub fn empty(t: usize, n: usize) -> Self {
        let words = n.div_ceil(64);
        Self { t, n, words, bits: vec![0; n * words], degrees: vec![0; n], edge_count: 0 }
    }

    /// Builds a graph from an explicit edge list. Self-loops and duplicate
    /// edges are ignored.
    pub fn from_edges(t: usize, n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(t, n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        assert!(a < self.n && b < self.n, "node out of range");
        if a == b || self.has_edge(a, b) {
            return;
        }
        self.bits[a * self.words + b / 64] |= 1 << (b % 64);
        self.bits[b * self.words + a / 64] |= 1 << (a % 64);
        self.degrees[a] += 1;
        self.degrees[b] += 1;
        self.edge_count += 1;
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.degrees[i]
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words + b / 64] & (1 << (b % 64)) != 0
    }

    fn row_bits(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_bits(i).iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            })
        })
    }

    /// Edges `(i, j)` with `i < j`, ordered by `i` then `j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    /// Number of edges among the neighbours of `i`.
    fn links_among_neighbors(&self, i: usize) -> u64 {
        let row = self.row_bits(i);
        let twice: u64 = self
            .neighbors(i)
            .map(|j| {
                row.iter()
                    .zip(self.row_bits(j))
                    .map(|(a, b)| (a & b).count_ones() as u64)
                    .sum::<u64>()
            })
            .sum();
        twice / 2
    }
}

/// Applies the strict edge rule `G_ij > zeta` to every off-diagonal pair.
pub fn build_snapshot(frame: &CorrelationFrame, zeta: f64) -> SnapshotGraph {
    let n = frame.n();
    let mut g = SnapshotGraph::empty(frame.t, n);
    for i in 0..n {
        for j in i + 1..n {
            if frame.get(i, j) > zeta {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Same result as `build_snapshot(frame_from_day(t, day), zeta)` without
/// materializing the frame.
pub(crate) fn snapshot_from_day(t: usize, day: &[f64], zeta: f64) -> SnapshotGraph {
    let n = day.len();
    let mut g = SnapshotGraph::empty(t, n);
    for i in 0..n {
        for j in i + 1..n {
            if day[i] * day[j] > zeta {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Local clustering coefficient; 0 for nodes with fewer than two neighbours.
pub fn node_clustering(g: &SnapshotGraph, i: usize) -> f64 {
    let k = g.degree(i) as u64;
    if k < 2 {
        return 0.0;
    }
    g.links_among_neighbors(i) as f64 / (k * (k - 1) / 2) as f64
}

/// `C(t) = (1/N) sum_i c_i(t)`.
pub fn average_clustering(g: &SnapshotGraph) -> f64 {
    let sum: f64 = (0..g.n()).map(|i| node_clustering(g, i)).sum();
    sum / g.n() as f64
}

/// `K(t) = (1/N) sum_i k_i(t) = 2M / N`.
pub fn average_degree(g: &SnapshotGraph) -> f64 {
    let sum: u64 = g.degrees().iter().map(|&k| k as u64).sum();
    sum as f64 / g.n() as f64
}

/// Degree assortativity over edge endpoints.
///
/// With `S1 = sum j k`, `S2 = sum (j + k)` and `S3 = sum (j^2 + k^2)` over the
/// `M` edges, the coefficient is `(4 M S1 - S2^2) / (2 M S3 - S2^2)`. The
/// integer form makes the zero-denominator test exact. Returns `None` when
/// there are no edges or every endpoint has the same degree.
pub fn degree_assortativity(g: &SnapshotGraph) -> Option<f64> {
    let m = g.edge_count() as i128;
    if m == 0 {
        return None;
    }
    let (mut s1, mut s2, mut s3) = (0i128, 0i128, 0i128);
    for (a, b) in g.edges() {
        let (j, k) = (g.degree(a) as i128, g.degree(b) as i128);
        s1 += j * k;
        s2 += j + k;
        s3 += j * j + k * k;
    }
    let num = 4 * m * s1 - s2 * s2;
    let den = 2 * m * s3 - s2 * s2;
    if den == 0 {
        return None;
    }
    Some(num as f64 / den as f64)
}

/// Metrics of one snapshot, plus its degree vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DayTopology {
    pub clustering: f64,
    pub degree: f64,
    pub assortativity: Option<f64>,
    pub edge_count: usize,
    pub degrees: Vec<u32>,
}

impl DayTopology {
    pub fn of(g: &SnapshotGraph) -> Self {
        Self {
            clustering: average_clustering(g),
            degree: average_degree(g),
            assortativity: degree_assortativity(g),
            edge_count: g.edge_count(),
            degrees: g.degrees().to_vec(),
        }
    }
}

/// Builds every day's snapshot under `policy` and measures it. Days are
/// evaluated in parallel on the current rayon pool; output is in day order.
pub fn analyze_days(returns: &ReturnMatrix, policy: &ThresholdPolicy) -> Result<Vec<DayTopology>> {
    let t_len = returns.n_days();
    let zetas = (1..=t_len).map(|t| policy.threshold_at(t)).collect::<Result<Vec<_>>>()?;
    let days = day_major(returns);
    Ok((0..t_len)
        .into_par_iter()
        .map(|t| DayTopology::of(&snapshot_from_day(t + 1, days.row(t), zetas[t])))
        .collect())
}

/// Time series `C(t)`, `K(t)`, `r(t)` and their time averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologySeries {
    pub clustering: Vec<f64>,
    pub degree: Vec<f64>,
    pub assortativity: Vec<Option<f64>>,
    pub mean_clustering: f64,
    pub mean_degree: f64,
    /// Mean over the days where `r(t)` is defined.
    pub mean_assortativity: Option<f64>,
}

impl TopologySeries {
    pub fn from_days(days: &[DayTopology]) -> Self {
        let clustering: Vec<f64> = days.iter().map(|d| d.clustering).collect();
        let degree: Vec<f64> = days.iter().map(|d| d.degree).collect();
        let assortativity: Vec<Option<f64>> = days.iter().map(|d| d.assortativity).collect();
        let defined: Vec<f64> = assortativity.iter().flatten().copied().collect();
        Self {
            mean_clustering: mean(&clustering),
            mean_degree: mean(&degree),
            mean_assortativity: (!defined.is_empty()).then(|| mean(&defined)),
            clustering,
            degree,
            assortativity,
        }
    }

    pub fn len(&self) -> usize {
        self.degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degree.is_empty()
    }

    /// Writes `t,C,K,r` with an empty `r` cell where it is undefined.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,C,K,r")?;
        for t in 0..self.len() {
            let r = self.assortativity[t].map(|r| r.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", t + 1, self.clustering[t], self.degree[t], r)?;
        }
        out.flush()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn topology_series(returns: &ReturnMatrix, policy: &ThresholdPolicy) -> Result<TopologySeries> {
    Ok(TopologySeries::from_days(&analyze_days(returns, policy)?))
}

/// Mean of `K(t)` over the closed 1-based window `[t_start, t_end]`.
pub fn windowed_average_degree(series: &TopologySeries, t_start: usize, t_end: usize) -> Result<f64> {
    let t_len = series.len();
    if t_start == 0 || t_start > t_end || t_end > t_len {
        return Err(Error::Config(format!("window {t_start}:{t_end} not within 1..={t_len}")));
    }
    Ok(mean(&series.degree[t_start - 1..t_end]))
}

/// Quantile with linear interpolation between order statistics (`q` in `[0, 1]`).
/// Used to summarize the lower and upper envelopes of `K(t)`.
pub fn quantile(series: &[f64], q: f64) -> f64 {
    assert!(!series.is_empty(), "quantile of empty series");
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Histogram of node degrees pooled over all nodes and days.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeEnsemble {
    /// `counts[k]` for `k` in `0..N`.
    pub counts: Vec<u64>,
    pub total: u64,
}

impl DegreeEnsemble {
    pub fn from_days(n: usize, days: &[DayTopology]) -> Self {
        let mut counts = vec![0u64; n];
        for day in days {
            for &k in &day.degrees {
                counts[k as usize] += 1;
            }
        }
        Self { counts, total: (n * days.len()) as u64 }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Looks for a mode at `k = 0` and a second mode above it separated by a
    /// strictly lower valley. The upper mode is the most populated degree in
    /// `1..N`; ties go to the smaller degree.
    pub fn two_peaks(&self) -> Option<TwoPeaks> {
        let c = &self.counts;
        if c.len() < 3 || c[0] <= c[1] {
            return None;
        }
        let upper = (1..c.len()).fold(1, |best, k| if c[k] > c[best] { k } else { best });
        if upper < 2 {
            return None;
        }
        let valley = (1..upper).fold(1, |best, k| if c[k] < c[best] { k } else { best });
        (c[valley] < c[0] && c[valley] < c[upper]).then_some(TwoPeaks { lower: 0, valley, upper })
    }

    /// Writes `k,count,probability`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,count,probability")?;
        for (k, (&c, p)) in self.counts.iter().zip(self.probabilities()).enumerate() {
            writeln!(out, "{k},{c},{p}")?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TwoPeaks {
    pub lower: usize,
    pub valley: usize,
    pub upper: usize,
}

pub fn degree_ensemble(returns: &ReturnMatrix, policy: &ThresholdPolicy) -> Result<DegreeEnsemble> {
    Ok(DegreeEnsemble::from_days(returns.n_stocks(), &analyze_days(returns, policy)?))
}
