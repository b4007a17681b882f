//! End-to-end analysis run: prices in, figure data and a checksummed
//! manifest out.
//!
//! Outputs are staged in a sibling temporary directory and moved into place
//! only when every artifact has been written, so a failed run leaves nothing
//! behind.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::correlation::{baselines, write_thresholds_csv, ThresholdKind, ThresholdPolicy};
use crate::dfa::{self, DfaOptions, DfaResult};
use crate::error::{Error, ErrorClass, Result};
use crate::market_data::{parse_prices, parse_sectors, returns_from_panel, ReturnMatrix, SectorMap};
use crate::network::{analyze_days, quantile, windowed_average_degree, DegreeEnsemble, TopologySeries};
use crate::spectral::{self, DEFAULT_TOP_M};
use crate::synthetic::DayWindow;

/// Default multiplier sweep, applied to each threshold kind.
pub const DEFAULT_MULTIPLIERS: [f64; 8] = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesName {
    Clustering,
    Degree,
    Assortativity,
}

impl SeriesName {
    pub const ALL: [SeriesName; 3] = [SeriesName::Clustering, SeriesName::Degree, SeriesName::Assortativity];

    pub fn as_str(self) -> &'static str {
        match self {
            SeriesName::Clustering => "clustering",
            SeriesName::Degree => "degree",
            SeriesName::Assortativity => "assortativity",
        }
    }
}

impl std::str::FromStr for SeriesName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeriesName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown series {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSelection {
    Static,
    Dynamic,
    Both,
}

impl ThresholdSelection {
    pub fn kinds(self) -> Vec<ThresholdKind> {
        match self {
            ThresholdSelection::Static => vec![ThresholdKind::Static],
            ThresholdSelection::Dynamic => vec![ThresholdKind::Dynamic],
            ThresholdSelection::Both => vec![ThresholdKind::Static, ThresholdKind::Dynamic],
        }
    }
}

impl std::str::FromStr for ThresholdSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(ThresholdSelection::Static),
            "dynamic" => Ok(ThresholdSelection::Dynamic),
            "both" => Ok(ThresholdSelection::Both),
            other => Err(Error::Config(format!("unknown threshold {other:?}; use static, dynamic or both"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input_prices: PathBuf,
    pub input_sectors: Option<PathBuf>,
    pub threshold: ThresholdSelection,
    pub multipliers: Vec<f64>,
    pub dfa_series: Vec<SeriesName>,
    pub windows: Vec<DayWindow>,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses all cores.
    pub parallelism: Option<usize>,
    pub dfa_fit_range: Option<(usize, usize)>,
    pub crossover: bool,
    pub top_m: usize,
    /// Replace a non-empty output directory.
    pub overwrite: bool,
}

impl RunConfig {
    pub fn new(input_prices: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input_prices: input_prices.into(),
            input_sectors: None,
            threshold: ThresholdSelection::Both,
            multipliers: DEFAULT_MULTIPLIERS.to_vec(),
            dfa_series: SeriesName::ALL.to_vec(),
            windows: Vec::new(),
            output_dir: output_dir.into(),
            parallelism: None,
            dfa_fit_range: None,
            crossover: true,
            top_m: DEFAULT_TOP_M,
            overwrite: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.multipliers.is_empty() {
            return Err(Error::Config("no multipliers".into()));
        }
        if let Some(m) = self.multipliers.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Config(format!("multipliers must be positive, got {m}")));
        }
        if self.parallelism == Some(0) {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        if let Some((lo, hi)) = self.dfa_fit_range {
            if lo > hi {
                return Err(Error::Config(format!("fit range {lo}:{hi} is reversed")));
            }
        }
        Ok(())
    }

    /// The part of the config that determines the results. Output location
    /// and worker count are left out so reruns elsewhere or with other
    /// parallelism produce the same manifest.
    fn provenance(&self) -> Value {
        json!({
            "input_prices": self.input_prices,
            "input_sectors": self.input_sectors,
            "threshold": self.threshold,
            "multipliers": self.multipliers,
            "dfa_series": self.dfa_series,
            "windows": self.windows,
            "dfa_fit_range": self.dfa_fit_range,
            "crossover": self.crossover,
            "top_m": self.top_m,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: Value,
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
}

/// Results of one `(kind, multiplier)` cell of the sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub kind: ThresholdKind,
    pub multiplier: f64,
    pub series: TopologySeries,
    pub ensemble: DegreeEnsemble,
    /// Failed analyses keep their error message.
    pub dfa: BTreeMap<SeriesName, std::result::Result<DfaResult, String>>,
    pub spectral: std::result::Result<SpectralOutcome, String>,
}

#[derive(Debug, Clone)]
pub struct SpectralOutcome {
    pub report: spectral::EigenReport,
    pub excluded: Vec<String>,
    pub projections: Option<Vec<spectral::SectorProjection>>,
}

impl SweepCell {
    pub fn dir_name(&self) -> String {
        format!("{}_x{}", self.kind, self.multiplier)
    }
}

/// Everything computed by a run, before it is written out.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub returns: ReturnMatrix,
    pub sectors: Option<SectorMap>,
    pub q_static: f64,
    pub q_dynamic: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn dfa_options(config: &RunConfig) -> DfaOptions {
    DfaOptions { scales: None, fit_range: config.dfa_fit_range, crossover: config.crossover }
}

fn is_fatal(e: &Error) -> bool {
    matches!(e, Error::EigenNoConvergence { .. }) || e.class() == ErrorClass::Io
}

/// Runs every module over the sweep without touching the filesystem.
pub fn analyze(returns: ReturnMatrix, sectors: Option<SectorMap>, config: &RunConfig) -> Result<Analysis> {
    config.validate()?;
    for w in &config.windows {
        if w.t_start == 0 || w.t_start > w.t_end || w.t_end > returns.n_days() {
            return Err(Error::Config(format!("window {}:{} not within 1..={}", w.t_start, w.t_end, returns.n_days())));
        }
    }
    let (q_static, q_dynamic) = baselines(&returns);
    let opts = dfa_options(config);
    let mut cells = Vec::new();
    for kind in config.threshold.kinds() {
        for &multiplier in &config.multipliers {
            let policy = match kind {
                ThresholdKind::Static => ThresholdPolicy::fixed(multiplier, q_static)?,
                ThresholdKind::Dynamic => ThresholdPolicy::per_day(multiplier, q_dynamic.clone())?,
            };
            let days = analyze_days(&returns, &policy)?;
            let series = TopologySeries::from_days(&days);
            let ensemble = DegreeEnsemble::from_days(returns.n_stocks(), &days);

            let mut dfa_results = BTreeMap::new();
            for &name in &config.dfa_series {
                let r = match name {
                    SeriesName::Clustering => dfa::analyze(&series.clustering, &opts),
                    SeriesName::Degree => dfa::analyze(&series.degree, &opts),
                    SeriesName::Assortativity => dfa::analyze_with_gaps(&series.assortativity, &opts),
                };
                let r = r.map_err(|e| {
                    log::warn!("{kind} x{multiplier}: DFA of {} failed: {e}", name.as_str());
                    e.to_string()
                });
                dfa_results.insert(name, r);
            }

            let spectral = match spectral_outcome(&returns, &days, sectors.as_ref(), config.top_m) {
                Err(e) if is_fatal(&e) => return Err(e),
                Err(e) => {
                    log::warn!("{kind} x{multiplier}: spectral analysis skipped: {e}");
                    Err(e.to_string())
                }
                Ok(o) => Ok(o),
            };
            cells.push(SweepCell { kind, multiplier, series, ensemble, dfa: dfa_results, spectral });
        }
    }
    Ok(Analysis { returns, sectors, q_static, q_dynamic, cells })
}

fn spectral_outcome(
    returns: &ReturnMatrix,
    days: &[crate::network::DayTopology],
    sectors: Option<&SectorMap>,
    top_m: usize,
) -> Result<SpectralOutcome> {
    let degrees = spectral::degree_matrix(returns.n_stocks(), days);
    let norm = spectral::normalize_degree_series(returns.stock_ids(), &degrees)?;
    let matrix = spectral::degree_correlation_matrix(&norm);
    let report = spectral::eigen_decompose(&matrix)?;
    let projections = sectors.map(|s| spectral::sector_projection(&report, s, top_m)).transpose()?;
    Ok(SpectralOutcome { report, excluded: matrix.excluded, projections })
}

/// Collects files under a directory and checksums them.
struct ArtifactWriter {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl ArtifactWriter {
    fn write(&mut self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Error::io(rel, e))?;
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        out.write_all(&buf).and_then(|_| out.flush()).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(Artifact { path: rel.to_string(), sha256: sha256_hex(&buf), bytes: buf.len() as u64 });
        Ok(())
    }

    fn write_json(&mut self, rel: &str, value: &Value) -> Result<()> {
        self.write(rel, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value).map_err(std::io::Error::other)?;
            buf.push(b'\n');
            Ok(())
        })
    }
}

fn dfa_json(r: &std::result::Result<DfaResult, String>) -> Value {
    match r {
        Ok(d) => d.sidecar(),
        Err(e) => json!({ "theta": null, "error": e }),
    }
}

/// Per-cell summary entry; also the body of `summary.json` rows.
fn cell_summary(cell: &SweepCell, windows: &[DayWindow]) -> Value {
    let s = &cell.series;
    let window_rows: Vec<Value> = windows
        .iter()
        .map(|w| {
            json!({
                "t_start": w.t_start,
                "t_end": w.t_end,
                "mean_degree": windowed_average_degree(s, w.t_start, w.t_end).ok(),
            })
        })
        .collect();
    let dfa: BTreeMap<&str, Value> = cell.dfa.iter().map(|(k, v)| (k.as_str(), dfa_json(v))).collect();
    let spectral = match &cell.spectral {
        Ok(o) => json!({
            "eigenvalues": o.report.eigenvalues.iter().take(cell_top_m(o)).collect::<Vec<_>>(),
            "effective_n": o.report.ids.len(),
            "excluded": o.excluded,
            "projections": o.projections,
        }),
        Err(e) => json!({ "error": e }),
    };
    let (lo, hi) = cell.kind.studied_range();
    let in_studied_range = (lo..=hi).contains(&cell.multiplier);
    json!({
        "kind": cell.kind,
        "multiplier": cell.multiplier,
        "in_studied_range": in_studied_range,
        "mean_clustering": s.mean_clustering,
        "mean_degree": s.mean_degree,
        "mean_assortativity": s.mean_assortativity,
        "assortativity_defined_days": s.assortativity.iter().flatten().count(),
        "degree_envelope": {
            "q05": quantile(&s.degree, 0.05),
            "q50": quantile(&s.degree, 0.5),
            "q95": quantile(&s.degree, 0.95),
        },
        "windows": window_rows,
        "two_peaks": cell.ensemble.two_peaks(),
        "theta": cell.dfa.iter().map(|(k, v)| (k.as_str(), v.as_ref().ok().map(|d| d.theta))).collect::<BTreeMap<_, _>>(),
        "dfa": dfa,
        "spectral": spectral,
    })
}

fn cell_top_m(o: &SpectralOutcome) -> usize {
    o.projections.as_ref().map_or(DEFAULT_TOP_M, |p| p.len().max(1)).min(o.report.eigenvalues.len())
}

/// Writes every artifact of `analysis` under `root` and returns the list.
pub fn emit_figure_data(analysis: &Analysis, config: &RunConfig, root: &Path) -> Result<Vec<Artifact>> {
    let mut w = ArtifactWriter { root: root.to_path_buf(), artifacts: Vec::new() };
    w.write("thresholds.csv", |b| write_thresholds_csv(analysis.q_static, &analysis.q_dynamic, b))?;

    let mut sweep = String::from("kind,multiplier,C_mean,K_mean,r_mean\n");
    let mut cells_json = Vec::new();
    for cell in &analysis.cells {
        let dir = cell.dir_name();
        w.write(&format!("{dir}/topology.csv"), |b| cell.series.write_csv(b))?;
        w.write(&format!("{dir}/degree_hist.csv"), |b| cell.ensemble.write_csv(b))?;
        for (name, r) in &cell.dfa {
            if let Ok(d) = r {
                w.write(&format!("{dir}/dfa_{}.csv", name.as_str()), |b| d.write_csv(b))?;
            }
            w.write_json(&format!("{dir}/dfa_{}.json", name.as_str()), &dfa_json(r))?;
        }
        if !config.windows.is_empty() {
            w.write(&format!("{dir}/windows.csv"), |b| {
                writeln!(b, "t_start,t_end,K_window,K_total")?;
                for win in &config.windows {
                    let k = windowed_average_degree(&cell.series, win.t_start, win.t_end).map_err(std::io::Error::other)?;
                    writeln!(b, "{},{},{},{}", win.t_start, win.t_end, k, cell.series.mean_degree)?;
                }
                Ok(())
            })?;
        }
        if let Ok(o) = &cell.spectral {
            w.write(&format!("{dir}/eigen.csv"), |b| spectral::write_eigenvalues_csv(&o.report, b))?;
            w.write(&format!("{dir}/eigenvectors.csv"), |b| {
                spectral::write_eigenvectors_csv(&o.report, analysis.sectors.as_ref(), config.top_m, b)
            })?;
        }
        let r = cell.series.mean_assortativity.map(|r| r.to_string()).unwrap_or_default();
        sweep.push_str(&format!(
            "{},{},{},{},{}\n",
            cell.kind, cell.multiplier, cell.series.mean_clustering, cell.series.mean_degree, r
        ));
        cells_json.push(cell_summary(cell, &config.windows));
    }
    w.write("sweep.csv", |b| b.write_all(sweep.as_bytes()))?;
    let summary = json!({
        "n_stocks": analysis.returns.n_stocks(),
        "n_days": analysis.returns.n_days(),
        "q_static": analysis.q_static,
        "cells": cells_json,
    });
    w.write_json("summary.json", &summary)?;
    let mut artifacts = w.artifacts;
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(artifacts)
}

fn prepare_output_dir(config: &RunConfig) -> Result<PathBuf> {
    let out = &config.output_dir;
    if out.exists() {
        let non_empty = fs::read_dir(out).map_err(|e| Error::io(out, e))?.next().is_some();
        if non_empty && !config.overwrite {
            return Err(Error::Config(format!("output directory {} is not empty", out.display())));
        }
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    Ok(parent)
}

/// Reads the inputs, runs the sweep, writes all artifacts and
/// `manifest.json`. On error nothing is left in the output directory.
pub fn run_pipeline(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let parent = prepare_output_dir(config)?;

    let price_bytes = read_file(&config.input_prices)?;
    let mut inputs = BTreeMap::new();
    inputs.insert("prices_sha256".to_string(), sha256_hex(&price_bytes));
    let mut panel = parse_prices(price_bytes.as_slice())?;
    if let Some(path) = &config.input_sectors {
        let bytes = read_file(path)?;
        inputs.insert("sectors_sha256".to_string(), sha256_hex(&bytes));
        panel = panel.with_sectors(parse_sectors(bytes.as_slice())?)?;
    }
    let returns = returns_from_panel(&panel)?;
    let sectors = panel.sectors().cloned();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.parallelism {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let analysis = pool.install(|| analyze(returns, sectors, config))?;

    let staging = tempfile::Builder::new()
        .prefix(".corrnet-staging-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(&parent, e))?;
    let artifacts = emit_figure_data(&analysis, config, staging.path())?;
    let manifest = Manifest { config: config.provenance(), inputs, artifacts };
    let mut body = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::io("manifest.json", std::io::Error::other(e)))?;
    body.push(b'\n');
    let manifest_path = staging.path().join("manifest.json");
    fs::write(&manifest_path, &body).map_err(|e| Error::io(&manifest_path, e))?;

    let out = &config.output_dir;
    if out.exists() {
        fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    let staged = staging.keep();
    fs::rename(&staged, out).map_err(|e| {
        let _ = fs::remove_dir_all(&staged);
        Error::io(out, e)
    })?;
    Ok(manifest)
}

/// Reads a one-column series. A non-numeric first cell is taken as a header;
/// empty cells and `NA`/`NaN` are undefined entries. Blank lines are skipped,
/// so one-column files should mark gaps with `NA`. With `column`, that named column of a
/// headed multi-column file is used instead.
pub fn read_series_csv<R: Read>(source: R, column: Option<&str>) -> Result<Vec<Option<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut rows = reader.records();
    let mut out = Vec::new();
    let mut col = 0;
    let mut row_no = 0;
    if let Some(name) = column {
        let header = rows.next().ok_or_else(|| Error::Csv { row: 1, message: "empty input".into() })?;
        let header = header.map_err(|e| Error::Csv { row: 1, message: e.to_string() })?;
        col = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv { row: 1, message: format!("no column named {name:?}") })?;
        row_no = 1;
    }
    for rec in rows {
        row_no += 1;
        let rec = rec.map_err(|e| Error::Csv { row: row_no, message: e.to_string() })?;
        if column.is_none() && rec.len() > 1 {
            return Err(Error::RaggedRow { row: row_no, expected: 1, found: rec.len() });
        }
        let cell = rec.get(col).unwrap_or("");
        if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
            out.push(None);
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(Some(v)),
            _ if row_no == 1 && column.is_none() => {}
            _ => {
                return Err(Error::Csv { row: row_no, message: format!("non-numeric value {cell:?} in column {}", col + 1) })
            }
        }
    }
    Ok(out)
}

/// Standalone DFA: writes `dfa_<stem>.csv` and `dfa_<stem>.json` under `out_dir`.
pub fn run_dfa_file(
    input: &Path,
    column: Option<&str>,
    opts: &DfaOptions,
    out_dir: &Path,
) -> Result<DfaResult> {
    let bytes = read_file(input)?;
    let series = read_series_csv(bytes.as_slice(), column)?;
    let result = dfa::analyze_with_gaps(&series, opts)?;
    let stem = column
        .map(str::to_string)
        .or_else(|| input.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "series".into());
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv_path = out_dir.join(format!("dfa_{stem}.csv"));
    let mut buf = Vec::new();
    result.write_csv(&mut buf).map_err(|e| Error::io(&csv_path, e))?;
    fs::write(&csv_path, buf).map_err(|e| Error::io(&csv_path, e))?;
    let json_path = out_dir.join(format!("dfa_{stem}.json"));
    let mut body = serde_json::to_vec_pretty(&result.sidecar()).map_err(|e| Error::io(&json_path, std::io::Error::other(e)))?;
    body.push(b'\n');
    fs::write(&json_path, body).map_err(|e| Error::io(&json_path, e))?;
    Ok(result)
}
