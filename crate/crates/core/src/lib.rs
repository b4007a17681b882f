//! Financial correlation networks built from instantaneous cross-correlations
//! of normalized stock returns.
//!
//! The pipeline: price panel -> normalized log returns -> per-day products
//! `G_ij(t) = r_i(t) r_j(t)` -> threshold graph under a static (`Q_s`) or
//! dynamic (`Q_d(t)`) baseline -> clustering, degree and assortativity time
//! series -> detrended fluctuation analysis of those series, the pooled
//! degree distribution, and the eigen-structure of the degree correlation
//! matrix. [`synthetic`] generates factor-model markets for testing all of it.

pub mod correlation;
pub mod dfa;
pub mod error;
pub mod market_data;
pub mod matrix;
pub mod network;
pub mod pipeline;
pub mod spectral;
pub mod synthetic;

pub use correlation::{CorrelationFrame, ThresholdKind, ThresholdPolicy};
pub use dfa::{Crossover, DfaOptions, DfaResult};
pub use error::{Error, ErrorClass, Result};
pub use market_data::{LogReturns, PricePanel, ReturnMatrix, SectorMap};
pub use matrix::RowMatrix;
pub use network::{DegreeEnsemble, SnapshotGraph, TopologySeries};
pub use pipeline::{Manifest, RunConfig, SeriesName, ThresholdSelection};
pub use spectral::{DegreeCorrelationMatrix, EigenReport};
pub use synthetic::{DayWindow, MarketSpec, Regime};
