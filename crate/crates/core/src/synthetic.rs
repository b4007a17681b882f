//! Seeded synthetic markets with a market factor, sector factors and
//! volatility regimes.
//!
//! Raw returns are `R_i(t) = v(t) (beta m(t) + gamma s_g(i)(t) + sigma e_i(t))`
//! with independent standard normal `m`, `s_g`, `e_i` and a piecewise-constant
//! volatility multiplier `v(t)`. Prices start at 1 and compound the returns.
//!
//! Every factor has its own ChaCha stream (market, then sectors, then
//! stocks), drawn in day order, so the output depends only on the spec.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{PricePanel, SectorMap};
use crate::matrix::RowMatrix;

/// Default sector loading, large enough for sectors to show in the degree
/// spectrum.
pub const DEFAULT_SECTOR_GAMMA: f64 = 1.5;

/// Closed 1-based day window over returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayWindow {
    pub t_start: usize,
    pub t_end: usize,
}

impl DayWindow {
    pub fn new(t_start: usize, t_end: usize) -> Self {
        Self { t_start, t_end }
    }

    pub fn len(&self) -> usize {
        self.t_end + 1 - self.t_start
    }

    pub fn is_empty(&self) -> bool {
        self.t_end < self.t_start
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.t_start..=self.t_end).contains(&t)
    }

    pub fn overlaps(&self, other: &DayWindow) -> bool {
        self.t_start <= other.t_end && other.t_start <= self.t_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub window: DayWindow,
    pub vol_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub n_stocks: usize,
    /// Number of returns `T`; the panel has `T + 1` price days.
    pub n_days: usize,
    pub market_beta: f64,
    pub n_sectors: usize,
    pub sector_gamma: f64,
    pub noise_sigma: f64,
    pub regimes: Vec<Regime>,
    pub seed: u64,
}

impl Default for MarketSpec {
    fn default() -> Self {
        Self {
            n_stocks: 50,
            n_days: 2000,
            market_beta: 1.0,
            n_sectors: 1,
            sector_gamma: 0.0,
            noise_sigma: 1.0,
            regimes: Vec::new(),
            seed: 0,
        }
    }
}

impl MarketSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_stocks < 3 {
            return bad(format!("n_stocks must be at least 3, got {}", self.n_stocks));
        }
        if self.n_days < 2 {
            return bad(format!("n_days must be at least 2, got {}", self.n_days));
        }
        if self.n_sectors == 0 || self.n_sectors > 26 || self.n_sectors > self.n_stocks {
            return bad(format!("n_sectors must be in 1..=min(26, n_stocks), got {}", self.n_sectors));
        }
        for (name, v) in [("market_beta", self.market_beta), ("sector_gamma", self.sector_gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return bad(format!("noise_sigma must be positive, got {}", self.noise_sigma));
        }
        for (k, r) in self.regimes.iter().enumerate() {
            let w = r.window;
            if w.t_start == 0 || w.t_start > w.t_end || w.t_end > self.n_days {
                return bad(format!("regime {}:{} not within 1..={}", w.t_start, w.t_end, self.n_days));
            }
            if !(r.vol_multiplier.is_finite() && r.vol_multiplier > 0.0) {
                return bad(format!("regime vol_multiplier must be positive, got {}", r.vol_multiplier));
            }
            if self.regimes[..k].iter().any(|o| o.window.overlaps(&w)) {
                return bad(format!("regime {}:{} overlaps another regime", w.t_start, w.t_end));
            }
        }
        Ok(())
    }

    /// Sector index of stock `i`: contiguous blocks of near-equal size.
    pub fn sector_of(&self, i: usize) -> usize {
        i * self.n_sectors / self.n_stocks
    }

    pub fn volatility(&self, t: usize) -> f64 {
        self.regimes.iter().find(|r| r.window.contains(t)).map_or(1.0, |r| r.vol_multiplier)
    }

    pub fn stock_id(&self, i: usize) -> String {
        let width = self.n_stocks.to_string().len().max(3);
        format!("S{:0width$}", i + 1)
    }

    pub fn sector_code(g: usize) -> String {
        char::from(b'A' + g as u8).to_string()
    }

    pub fn sector_map(&self) -> SectorMap {
        (0..self.n_stocks).map(|i| (self.stock_id(i), Self::sector_code(self.sector_of(i)))).collect()
    }
}

fn gaussian_stream(seed: u64, stream: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Raw returns `R_i(t)`, `N x T`.
pub fn generate_returns(spec: &MarketSpec) -> Result<RowMatrix> {
    spec.validate()?;
    let t_len = spec.n_days;
    let market = gaussian_stream(spec.seed, 0, t_len);
    let sectors: Vec<Vec<f64>> = (0..spec.n_sectors).map(|g| gaussian_stream(spec.seed, 1 + g as u64, t_len)).collect();
    let vol: Vec<f64> = (1..=t_len).map(|t| spec.volatility(t)).collect();
    let mut out = RowMatrix::zeros(spec.n_stocks, t_len);
    for i in 0..spec.n_stocks {
        let noise = gaussian_stream(spec.seed, 1 + (spec.n_sectors + i) as u64, t_len);
        let sector = &sectors[spec.sector_of(i)];
        for t in 0..t_len {
            let r = spec.market_beta * market[t] + spec.sector_gamma * sector[t] + spec.noise_sigma * noise[t];
            out.set(i, t, vol[t] * r);
        }
    }
    Ok(out)
}

/// Price panel with `P_i(0) = 1` and `P_i(t) = exp(sum_{u <= t} R_i(u))`,
/// sector labels attached.
pub fn generate_panel(spec: &MarketSpec) -> Result<PricePanel> {
    let returns = generate_returns(spec)?;
    let days = spec.n_days + 1;
    let mut prices = RowMatrix::zeros(spec.n_stocks, days);
    for i in 0..spec.n_stocks {
        let mut log_price = 0.0;
        prices.set(i, 0, 1.0);
        for (t, &r) in returns.row(i).iter().enumerate() {
            log_price += r;
            let p = log_price.exp();
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "price of stock {} leaves the f64 range on day {}; use fewer days or smaller loadings",
                    i + 1,
                    t + 1
                )));
            }
            prices.set(i, t + 1, p);
        }
    }
    let ids = (0..spec.n_stocks).map(|i| spec.stock_id(i)).collect();
    let dates = (0..days).map(|d| d.to_string()).collect();
    PricePanel::new(ids, dates, prices)?.with_sectors(spec.sector_map())
}

/// A panel with one high-volatility window and a matching calm window.
#[derive(Debug, Clone)]
pub struct RegimeScenario {
    pub panel: PricePanel,
    pub volatile: DayWindow,
    pub calm: DayWindow,
    pub spec: MarketSpec,
}

/// Adds one volatility regime to `base` (which must have none) and picks a
/// calm window of the same length. Without an explicit `calm`, the window is
/// centred in the longest stretch outside the regime.
pub fn regime_calm_vs_volatile(
    base: &MarketSpec,
    volatile: DayWindow,
    vol_multiplier: f64,
    calm: Option<DayWindow>,
) -> Result<RegimeScenario> {
    if !base.regimes.is_empty() {
        return Err(Error::InvalidSpec("base spec already has regimes".into()));
    }
    let mut spec = base.clone();
    spec.regimes = vec![Regime { window: volatile, vol_multiplier }];
    spec.validate()?;
    let calm = match calm {
        Some(c) => c,
        None => {
            let before = volatile.t_start - 1;
            let after = spec.n_days - volatile.t_end;
            let (lo, hi) = if before >= after { (1, before) } else { (volatile.t_end + 1, spec.n_days) };
            let len = volatile.len();
            if hi + 1 - lo < len {
                return Err(Error::InvalidSpec("no room for a calm window of the same length".into()));
            }
            let start = lo + (hi + 1 - lo - len) / 2;
            DayWindow::new(start, start + len - 1)
        }
    };
    if calm.t_start == 0 || calm.t_start > calm.t_end || calm.t_end > spec.n_days || calm.overlaps(&volatile) {
        return Err(Error::InvalidSpec(format!("calm window {}:{} is invalid", calm.t_start, calm.t_end)));
    }
    let panel = generate_panel(&spec)?;
    Ok(RegimeScenario { panel, volatile, calm, spec })
}
