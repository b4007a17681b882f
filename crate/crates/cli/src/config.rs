//! Key-value run configuration file. Every key is optional; command-line
//! flags override whatever the file sets.

use std::path::{Path, PathBuf};

use corrnet::{DayWindow, Error, Result, SeriesName, ThresholdSelection};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub prices: Option<PathBuf>,
    pub sectors: Option<PathBuf>,
    pub threshold: Option<ThresholdSelection>,
    pub multipliers: Option<Vec<f64>>,
    pub dfa_series: Option<Vec<SeriesName>>,
    /// Entries like `"500:600"`.
    pub windows: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
    /// `"lo:hi"`.
    pub fit_range: Option<String>,
    pub crossover: Option<bool>,
    pub top_m: Option<usize>,
    pub overwrite: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Parses `a:b` into a pair of integers.
pub fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("expected a:b with integers, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub fn parse_window(s: &str) -> Result<DayWindow> {
    let (a, b) = parse_pair(s)?;
    Ok(DayWindow::new(a, b))
}

/// Parses `a:b:mult` for a volatility regime.
pub fn parse_regime(s: &str) -> Result<corrnet::Regime> {
    let bad = || Error::Config(format!("expected start:end:multiplier, got {s:?}"));
    let (window, mult) = s.rsplit_once(':').ok_or_else(bad)?;
    Ok(corrnet::Regime {
        window: parse_window(window).map_err(|_| bad())?,
        vol_multiplier: mult.trim().parse().map_err(|_| bad())?,
    })
}

pub fn parse_multipliers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|m| m.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad multiplier {m:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_and_regimes() {
        assert_eq!(parse_pair("5:40").unwrap(), (5, 40));
        assert!(parse_pair("5-40").is_err());
        let r = parse_regime("1500:1600:3").unwrap();
        assert_eq!(r.window, DayWindow::new(1500, 1600));
        assert_eq!(r.vol_multiplier, 3.0);
        assert!(parse_regime("1500:1600").is_err());
        assert_eq!(parse_multipliers("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn file_keys() {
        let c: FileConfig = toml::from_str(
            "prices = \"p.csv\"\nthreshold = \"dynamic\"\nmultipliers = [1.0, 2.0]\ndfa_series = [\"degree\"]\nwindows = [\"1:10\"]\n",
        )
        .unwrap();
        assert_eq!(c.threshold, Some(ThresholdSelection::Dynamic));
        assert_eq!(c.dfa_series, Some(vec![SeriesName::Degree]));
        assert!(toml::from_str::<FileConfig>("nonsense = 1\n").is_err());
    }
}
