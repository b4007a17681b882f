#![allow(dead_code)]

pub mod reference;

use corrnet::market_data::PricePanel;
use corrnet::RowMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random positive price panel, `n` stocks by `days` prices, with a shared
/// component so that some pairs correlate.
pub fn random_prices(seed: u64, n: usize, days: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common: Vec<f64> = (0..days).map(|_| rng.random_range(-0.05..0.05)).collect();
    (0..n)
        .map(|_| {
            let load: f64 = rng.random_range(0.0..1.5);
            let mut p = rng.random_range(5.0..100.0);
            (0..days)
                .map(|d| {
                    if d > 0 {
                        p *= (load * common[d] + rng.random_range(-0.04..0.04)).exp();
                    }
                    p
                })
                .collect()
        })
        .collect()
}

pub fn panel(prices: &[Vec<f64>]) -> PricePanel {
    let days = prices[0].len();
    PricePanel::new(
        (0..prices.len()).map(|i| format!("S{i:02}")).collect(),
        (0..days).map(|d| d.to_string()).collect(),
        RowMatrix::from_rows(prices),
    )
    .unwrap()
}
