//! Eigen-analysis of the cross-correlation matrix of node degree series.
//!
//! Each stock's degree series `k_i(t)` is standardized, the equal-time
//! correlation matrix `F_ij = (1/T) sum_t k~_i(t) k~_j(t)` is built, and its
//! eigenvectors are compared against sector labels. The leading eigenvector
//! is expected to be the market mode (all components of one sign); the next
//! few localize on groups of co-moving stocks.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::correlation::ThresholdPolicy;
use crate::error::{Error, Result};
use crate::market_data::{is_degenerate, mean_and_pop_std, ReturnMatrix, SectorMap};
use crate::matrix::RowMatrix;
use crate::network::{analyze_days, DayTopology};

/// Number of eigenvectors reported by default.
pub const DEFAULT_TOP_M: usize = 4;

/// Node-major degree matrix (`N x T`) from per-day topology results.
pub fn degree_matrix(n: usize, days: &[DayTopology]) -> RowMatrix {
    let mut m = RowMatrix::zeros(n, days.len());
    for (t, day) in days.iter().enumerate() {
        for (i, &k) in day.degrees.iter().enumerate() {
            m.set(i, t, k as f64);
        }
    }
    m
}

/// Standardized degree series of the nodes with non-constant degree.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDegrees {
    pub ids: Vec<String>,
    pub excluded: Vec<String>,
    pub values: RowMatrix,
}

/// `k~_i(t) = (k_i(t) - <k_i>) / sigma_{k_i}` with the population sigma.
/// Constant series are moved to `excluded`.
pub fn normalize_degree_series(ids: &[String], degrees: &RowMatrix) -> Result<NormalizedDegrees> {
    assert_eq!(ids.len(), degrees.rows());
    let mut kept_ids = Vec::new();
    let mut excluded = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let row = degrees.row(i);
        let (mean, std) = mean_and_pop_std(row);
        if row.is_empty() || is_degenerate(row, std) {
            excluded.push(id.clone());
            continue;
        }
        kept_ids.push(id.clone());
        rows.push(row.iter().map(|&k| (k - mean) / std).collect());
    }
    if rows.is_empty() {
        return Err(Error::AllZeroVariance);
    }
    Ok(NormalizedDegrees { ids: kept_ids, excluded, values: RowMatrix::from_rows(&rows) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeCorrelationMatrix {
    pub ids: Vec<String>,
    pub values: RowMatrix,
    pub excluded: Vec<String>,
}

impl DegreeCorrelationMatrix {
    pub fn effective_n(&self) -> usize {
        self.ids.len()
    }

    pub fn trace(&self) -> f64 {
        (0..self.effective_n()).map(|i| self.values.get(i, i)).sum()
    }
}

/// `F_ij = (1/T) sum_t k~_i(t) k~_j(t)`, summed over `t` in order and
/// mirrored from the upper triangle.
pub fn degree_correlation_matrix(norm: &NormalizedDegrees) -> DegreeCorrelationMatrix {
    let n = norm.values.rows();
    let t_len = norm.values.cols() as f64;
    let mut values = RowMatrix::zeros(n, n);
    for i in 0..n {
        let a = norm.values.row(i);
        for j in i..n {
            let b = norm.values.row(j);
            let s: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            values.set(i, j, s / t_len);
            values.set(j, i, s / t_len);
        }
    }
    DegreeCorrelationMatrix { ids: norm.ids.clone(), values, excluded: norm.excluded.clone() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenReport {
    pub ids: Vec<String>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[m][i]` is component `i` of the vector for `eigenvalues[m]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Dense symmetric eigendecomposition. Eigenvalues come out descending; each
/// eigenvector is signed so its largest-magnitude component (first one on
/// ties) is positive.
pub fn eigen_decompose(matrix: &DegreeCorrelationMatrix) -> Result<EigenReport> {
    let n = matrix.effective_n();
    let m = DMatrix::from_row_slice(n, n, matrix.values.as_slice());
    let eig = m.clone().try_symmetric_eigen(f64::EPSILON, 10_000).ok_or_else(|| {
        let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
        Error::EigenNoConvergence {
            n,
            max_abs: m.amax(),
            diag_min: diag.iter().cloned().fold(f64::INFINITY, f64::min),
            diag_max: diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok(EigenReport { ids: matrix.ids.clone(), eigenvalues, eigenvectors })
}

fn fix_sign(v: &mut [f64]) {
    let lead = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Mean `|u_i|` per sector for one eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorProjection {
    pub index: usize,
    pub eigenvalue: f64,
    pub sector_means: BTreeMap<String, f64>,
    /// Sector with the largest mean; ties go to the first code in order.
    pub dominant: String,
}

pub fn sector_projection(report: &EigenReport, sectors: &SectorMap, top_m: usize) -> Result<Vec<SectorProjection>> {
    let labels = labels_for(&report.ids, sectors)?;
    Ok((0..top_m.min(report.eigenvalues.len()))
        .map(|m| {
            let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
            for (label, u) in labels.iter().zip(&report.eigenvectors[m]) {
                let e = sums.entry(label.to_string()).or_default();
                e.0 += u.abs();
                e.1 += 1;
            }
            let sector_means: BTreeMap<String, f64> =
                sums.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect();
            let dominant = sector_means
                .iter()
                .fold(None::<(&String, f64)>, |best, (k, &v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((k, v)),
                })
                .map(|(k, _)| k.clone())
                .unwrap_or_default();
            SectorProjection { index: m, eigenvalue: report.eigenvalues[m], sector_means, dominant }
        })
        .collect())
}

fn labels_for<'a>(ids: &[String], sectors: &'a SectorMap) -> Result<Vec<&'a str>> {
    ids.iter()
        .map(|id| {
            sectors
                .get(id)
                .map(String::as_str)
                .ok_or_else(|| Error::Sectors(format!("no sector label for stock {id:?}")))
        })
        .collect()
}

/// Degree correlation matrix and its decomposition for the networks built
/// from `returns` under `policy`.
pub fn degree_spectrum(
    returns: &ReturnMatrix,
    policy: &ThresholdPolicy,
) -> Result<(DegreeCorrelationMatrix, EigenReport)> {
    let days = analyze_days(returns, policy)?;
    let degrees = degree_matrix(returns.n_stocks(), &days);
    let matrix = degree_correlation_matrix(&normalize_degree_series(returns.stock_ids(), &degrees)?);
    let report = eigen_decompose(&matrix)?;
    Ok((matrix, report))
}

/// Groups stocks by their components on eigenvectors `1..groups` (the
/// market mode is skipped) with deterministic k-means. With `g` planted
/// groups plus a market mode, the group structure lives in that
/// `(g - 1)`-dimensional subspace.
pub fn eigenvector_clusters(report: &EigenReport, groups: usize) -> Vec<usize> {
    let n = report.ids.len();
    let dims: Vec<&Vec<f64>> = report.eigenvectors.iter().skip(1).take(groups.saturating_sub(1)).collect();
    if groups <= 1 || dims.is_empty() {
        return vec![0; n];
    }
    let points: Vec<Vec<f64>> = (0..n).map(|i| dims.iter().map(|v| v[i]).collect()).collect();
    kmeans(&points, groups)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd iterations from a farthest-point start seeded at the point with the
/// largest norm.
fn kmeans(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = points.len();
    let k = k.min(n);
    let origin = vec![0.0; points[0].len()];
    let first = (0..n).fold(0, |b, i| if dist2(&points[i], &origin) > dist2(&points[b], &origin) { i } else { b });
    let mut centers = vec![points[first].clone()];
    while centers.len() < k {
        let far = (0..n)
            .map(|i| (i, centers.iter().map(|c| dist2(&points[i], c)).fold(f64::INFINITY, f64::min)))
            .fold((0, -1.0), |b, (i, d)| if d > b.1 { (i, d) } else { b })
            .0;
        centers.push(points[far].clone());
    }
    let mut assign = vec![usize::MAX; n];
    for _ in 0..200 {
        let next: Vec<usize> = points
            .iter()
            .map(|p| {
                (0..k).fold(0, |b, c| if dist2(p, &centers[c]) < dist2(p, &centers[b]) { c } else { b })
            })
            .collect();
        if next == assign {
            break;
        }
        assign = next;
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for (d, x) in center.iter_mut().enumerate() {
                *x = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    assign
}

/// Fraction of stocks whose cluster maps to their sector label under the
/// best one-to-one matching of clusters to sectors.
pub fn partition_agreement(ids: &[String], clusters: &[usize], sectors: &SectorMap) -> Result<f64> {
    let labels = labels_for(ids, sectors)?;
    let mut codes: Vec<&str> = labels.clone();
    codes.sort_unstable();
    codes.dedup();
    let n_clusters = clusters.iter().copied().max().map_or(0, |m| m + 1);
    // contingency[c][s]
    let mut table = vec![vec![0usize; codes.len()]; n_clusters];
    for (&c, l) in clusters.iter().zip(&labels) {
        let s = codes.binary_search(l).expect("label present");
        table[c][s] += 1;
    }
    let best = best_matching(&table, 0, &mut vec![false; codes.len()]);
    Ok(best as f64 / ids.len() as f64)
}

fn best_matching(table: &[Vec<usize>], row: usize, used: &mut [bool]) -> usize {
    if row == table.len() {
        return 0;
    }
    let mut best = best_matching(table, row + 1, used);
    for s in 0..used.len() {
        if !used[s] {
            used[s] = true;
            best = best.max(table[row][s] + best_matching(table, row + 1, used));
            used[s] = false;
        }
    }
    best
}

/// Writes `index,eigenvalue`.
pub fn write_eigenvalues_csv<W: Write>(report: &EigenReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "index,eigenvalue")?;
    for (m, l) in report.eigenvalues.iter().enumerate() {
        writeln!(out, "{m},{l}")?;
    }
    out.flush()
}

/// Writes `stock_id,sector,u0,...` for the leading `top_m` eigenvectors. The
/// sector cell is empty when no label is known.
pub fn write_eigenvectors_csv<W: Write>(
    report: &EigenReport,
    sectors: Option<&SectorMap>,
    top_m: usize,
    mut out: W,
) -> std::io::Result<()> {
    let m = top_m.min(report.eigenvectors.len());
    let header: Vec<String> = (0..m).map(|k| format!("u{k}")).collect();
    writeln!(out, "stock_id,sector{}", header.iter().map(|h| format!(",{h}")).collect::<String>())?;
    for (i, id) in report.ids.iter().enumerate() {
        let sector = sectors.and_then(|s| s.get(id)).map(String::as_str).unwrap_or("");
        let comps: String = (0..m).map(|k| format!(",{}", report.eigenvectors[k][i])).collect();
        writeln!(out, "{id},{sector}{comps}")?;
    }
    out.flush()
}
