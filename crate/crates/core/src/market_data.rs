//! Price panel ingestion and return normalization.
//!
//! A panel is `N` stocks observed on `T + 1` consecutive trading days. Log
//! returns over one day give an `N x T` matrix, which is then standardized
//! per stock to zero mean and unit population standard deviation.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

pub const MIN_STOCKS: usize = 3;
/// Minimum number of returns; the panel needs one more price day.
pub const MIN_RETURNS: usize = 2;
/// Return horizon in days. Fixed.
pub const RETURN_HORIZON_DAYS: usize = 1;

/// Stock id to sector code.
pub type SectorMap = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    stock_ids: Vec<String>,
    dates: Vec<String>,
    /// Row-major, `[stock][day]`.
    prices: RowMatrix,
    sectors: Option<SectorMap>,
}

impl PricePanel {
    /// Builds a panel after checking every invariant (unique ids, increasing
    /// dates, positive prices, minimum size).
    pub fn new(stock_ids: Vec<String>, dates: Vec<String>, prices: RowMatrix) -> Result<Self> {
        let mut seen = HashSet::new();
        for (col, id) in stock_ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateStock { id: id.clone(), column: col + 2 });
            }
        }
        if prices.rows() != stock_ids.len() || prices.cols() != dates.len() {
            return Err(Error::Csv {
                row: 0,
                message: format!(
                    "price matrix is {}x{}, expected {}x{}",
                    prices.rows(),
                    prices.cols(),
                    stock_ids.len(),
                    dates.len()
                ),
            });
        }
        for d in 1..dates.len() {
            if !date_less(&dates[d - 1], &dates[d]) {
                return Err(Error::DatesNotIncreasing {
                    row: d + 2,
                    previous: dates[d - 1].clone(),
                    current: dates[d].clone(),
                });
            }
        }
        for i in 0..prices.rows() {
            for (d, &p) in prices.row(i).iter().enumerate() {
                if !p.is_finite() {
                    return Err(Error::NonNumericPrice { row: d + 2, column: i + 2, text: p.to_string() });
                }
                if p <= 0.0 {
                    return Err(Error::NonPositivePrice { row: d + 2, column: i + 2, value: p });
                }
            }
        }
        if stock_ids.len() < MIN_STOCKS || dates.len() < MIN_RETURNS + 1 {
            return Err(Error::PanelTooSmall {
                stocks: stock_ids.len(),
                days: dates.len(),
                min_stocks: MIN_STOCKS,
                min_days: MIN_RETURNS + 1,
            });
        }
        Ok(Self { stock_ids, dates, prices, sectors: None })
    }

    /// Attaches a sector map. Every listed stock must exist in the panel;
    /// stocks missing from the map are allowed here and only rejected by
    /// operations that need full coverage.
    pub fn with_sectors(mut self, sectors: SectorMap) -> Result<Self> {
        for id in sectors.keys() {
            if !self.stock_ids.contains(id) {
                return Err(Error::Sectors(format!("unknown stock id {id:?}")));
            }
        }
        self.sectors = Some(sectors);
        Ok(self)
    }

    pub fn stock_ids(&self) -> &[String] {
        &self.stock_ids
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn prices(&self) -> &RowMatrix {
        &self.prices
    }

    pub fn sectors(&self) -> Option<&SectorMap> {
        self.sectors.as_ref()
    }

    pub fn n_stocks(&self) -> usize {
        self.stock_ids.len()
    }

    /// Number of returns, `T` (one less than the number of dates).
    pub fn n_returns(&self) -> usize {
        self.dates.len() - 1
    }

    /// Writes the panel in the same layout `parse_prices` reads. Floats use the
    /// shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = Vec::with_capacity(self.n_stocks() + 1);
        header.push("date".to_string());
        header.extend(self.stock_ids.iter().cloned());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (d, date) in self.dates.iter().enumerate() {
            record.clear();
            record.push(date.clone());
            for i in 0..self.n_stocks() {
                record.push(self.prices.get(i, d).to_string());
            }
            w.write_record(&record)?;
        }
        w.flush()
    }
}

/// Dates are opaque labels. Two labels that both parse as numbers compare
/// numerically; anything else compares as text, which orders ISO dates.
fn date_less(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x < y,
        _ => a < b,
    }
}

/// Parses a price CSV with header `date,<id_1>,...,<id_N>`.
///
/// Rows and columns in error messages are 1-based and count the header row
/// and the date column.
pub fn parse_prices<R: Read>(source: R) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(1, e))?,
        None => return Err(Error::Csv { row: 1, message: "empty input".into() }),
    };
    if header.len() < 2 {
        return Err(Error::Csv { row: 1, message: "header needs a date column and at least one stock".into() });
    }
    let stock_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    for (k, id) in stock_ids.iter().enumerate() {
        if id.is_empty() {
            return Err(Error::Csv { row: 1, message: format!("empty stock id at column {}", k + 2) });
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateStock { id: id.clone(), column: k + 2 });
        }
    }

    let n = stock_ids.len();
    let mut dates: Vec<String> = Vec::new();
    let mut by_day: Vec<f64> = Vec::new();
    for (k, rec) in records.enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| csv_error(row, e))?;
        if rec.len() == 1 && rec.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if rec.len() != n + 1 {
            return Err(Error::RaggedRow { row, expected: n + 1, found: rec.len() });
        }
        let date = rec.get(0).unwrap_or_default().to_string();
        if let Some(prev) = dates.last() {
            if !date_less(prev, &date) {
                return Err(Error::DatesNotIncreasing { row, previous: prev.clone(), current: date });
            }
        }
        for (c, cell) in rec.iter().enumerate().skip(1) {
            let value: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumericPrice { row, column: c + 1, text: cell.to_string() })?;
            if value <= 0.0 {
                return Err(Error::NonPositivePrice { row, column: c + 1, value });
            }
            by_day.push(value);
        }
        dates.push(date);
    }

    let days = dates.len();
    let mut prices = RowMatrix::zeros(n, days);
    for d in 0..days {
        for i in 0..n {
            prices.set(i, d, by_day[d * n + i]);
        }
    }
    PricePanel::new(stock_ids, dates, prices)
}

fn csv_error(row: usize, e: csv::Error) -> Error {
    Error::Csv { row, message: e.to_string() }
}

/// Parses `stock_id,sector_code` rows. A leading header row with exactly
/// those names is skipped.
pub fn parse_sectors<R: Read>(source: R) -> Result<SectorMap> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut map = SectorMap::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| csv_error(row, e))?;
        if rec.len() == 1 && rec.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::RaggedRow { row, expected: 2, found: rec.len() });
        }
        let (id, code) = (&rec[0], &rec[1]);
        if row == 1 && id.eq_ignore_ascii_case("stock_id") && code.eq_ignore_ascii_case("sector_code") {
            continue;
        }
        if id.is_empty() || code.is_empty() {
            return Err(Error::Sectors(format!("empty field at row {row}")));
        }
        if map.insert(id.to_string(), code.to_string()).is_some() {
            return Err(Error::Sectors(format!("duplicate stock id {id:?} at row {row}")));
        }
    }
    Ok(map)
}

pub fn write_sectors<W: Write>(sectors: &SectorMap, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stock_id", "sector_code"])?;
    for (id, code) in sectors {
        w.write_record([id, code])?;
    }
    w.flush()
}

/// One-day log returns, `N x T`, with the stock ids carried along.
#[derive(Debug, Clone, PartialEq)]
pub struct LogReturns {
    pub stock_ids: Vec<String>,
    pub values: RowMatrix,
}

/// `R_i(t) = ln P_i(t+1) - ln P_i(t)` for every stock and consecutive day pair.
pub fn log_returns(panel: &PricePanel) -> LogReturns {
    let n = panel.n_stocks();
    let t_len = panel.n_returns();
    let mut values = RowMatrix::zeros(n, t_len);
    for i in 0..n {
        let row = panel.prices().row(i);
        for t in 0..t_len {
            values.set(i, t, (row[t + RETURN_HORIZON_DAYS] / row[t]).ln());
        }
    }
    LogReturns { stock_ids: panel.stock_ids().to_vec(), values }
}

/// Normalized returns `r_i(t)`, `N x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    stock_ids: Vec<String>,
    values: RowMatrix,
    raw_means: Vec<f64>,
    raw_stds: Vec<f64>,
}

impl ReturnMatrix {
    pub fn stock_ids(&self) -> &[String] {
        &self.stock_ids
    }

    pub fn n_stocks(&self) -> usize {
        self.values.rows()
    }

    pub fn n_days(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &RowMatrix {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    /// `r_i(t)` with 0-based `i` and `t`.
    #[inline]
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values.get(i, t)
    }

    pub fn raw_means(&self) -> &[f64] {
        &self.raw_means
    }

    pub fn raw_stds(&self) -> &[f64] {
        &self.raw_stds
    }

    /// Reorders stocks; `order[k]` is the old index placed at position `k`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.n_stocks());
        let mut values = RowMatrix::zeros(self.n_stocks(), self.n_days());
        for (k, &old) in order.iter().enumerate() {
            values.row_mut(k).copy_from_slice(self.values.row(old));
        }
        Self {
            stock_ids: order.iter().map(|&o| self.stock_ids[o].clone()).collect(),
            values,
            raw_means: order.iter().map(|&o| self.raw_means[o]).collect(),
            raw_stds: order.iter().map(|&o| self.raw_stds[o]).collect(),
        }
    }
}

/// Population mean and standard deviation (divisor `len`).
pub(crate) fn mean_and_pop_std(row: &[f64]) -> (f64, f64) {
    let len = row.len() as f64;
    let mean = row.iter().sum::<f64>() / len;
    let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / len;
    (mean, var.sqrt())
}

/// True when a row carries no variation beyond rounding noise.
pub(crate) fn is_degenerate(row: &[f64], std: f64) -> bool {
    let first = row[0];
    if row.iter().all(|&x| x == first) {
        return true;
    }
    let scale = row.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    std <= 64.0 * f64::EPSILON * scale
}

/// Standardizes each row to `(R - <R>) / sigma` with the population sigma.
pub fn normalize_returns(raw: &LogReturns) -> Result<ReturnMatrix> {
    let n = raw.values.rows();
    let t_len = raw.values.cols();
    let mut values = RowMatrix::zeros(n, t_len);
    let mut raw_means = Vec::with_capacity(n);
    let mut raw_stds = Vec::with_capacity(n);
    for i in 0..n {
        let row = raw.values.row(i);
        let (mean, std) = mean_and_pop_std(row);
        if t_len == 0 || is_degenerate(row, std) {
            return Err(Error::ZeroVariance(raw.stock_ids[i].clone()));
        }
        for (dst, &x) in values.row_mut(i).iter_mut().zip(row) {
            *dst = (x - mean) / std;
        }
        raw_means.push(mean);
        raw_stds.push(std);
    }
    Ok(ReturnMatrix { stock_ids: raw.stock_ids.clone(), values, raw_means, raw_stds })
}

/// Convenience: `normalize_returns(log_returns(panel))`.
pub fn returns_from_panel(panel: &PricePanel) -> Result<ReturnMatrix> {
    normalize_returns(&log_returns(panel))
}
