#![allow(clippy::needless_range_loop)]

mod common;

use common::reference;
use corrnet::correlation::{CorrelationFrame, ThresholdKind, ThresholdPolicy};
use corrnet::market_data::returns_from_panel;
use corrnet::network::{
    average_clustering, average_degree, build_snapshot, degree_assortativity, degree_ensemble, node_clustering,
    topology_series, SnapshotGraph,
};
use corrnet::RowMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frame(day: &[f64]) -> CorrelationFrame {
    let n = day.len();
    let mut values = RowMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            values.set(i, j, day[i] * day[j]);
        }
    }
    CorrelationFrame { t: 1, values }
}

fn gnp(seed: u64, n: usize, p: f64) -> (SnapshotGraph, Vec<Vec<bool>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                adj[i][j] = true;
                adj[j][i] = true;
                edges.push((i, j));
            }
        }
    }
    (SnapshotGraph::from_edges(1, n, &edges), adj)
}

#[test]
fn random_graph_metrics_match_enumeration() {
    for seed in 0..40 {
        let (g, adj) = gnp(seed, 8 + (seed as usize % 5), 0.3 + 0.02 * (seed % 10) as f64);
        let n = g.n();
        let mut sum = 0.0;
        for i in 0..n {
            let c = node_clustering(&g, i);
            let nb: Vec<usize> = (0..n).filter(|&j| adj[i][j]).collect();
            let k = nb.len();
            let expected = if k < 2 {
                0.0
            } else {
                let links = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).filter(|&(a, b)| adj[nb[a]][nb[b]]).count();
                links as f64 / (k * (k - 1) / 2) as f64
            };
            assert_eq!(c, expected, "seed {seed} node {i}");
            sum += c;
        }
        assert!((average_clustering(&g) - sum / n as f64).abs() <= 1e-15);
        assert_eq!(average_clustering(&g), reference::clustering(&adj));
        assert_eq!(average_degree(&g), 2.0 * g.edge_count() as f64 / n as f64);
        match (degree_assortativity(&g), reference::assortativity(&adj)) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12, "seed {seed}: {a} vs {b}"),
            (a, b) => assert_eq!(a, b, "seed {seed}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn raising_zeta_never_adds_edges(
        day in prop::collection::vec(-3.0f64..3.0, 3..20),
        mut zetas in prop::collection::vec(-2.0f64..4.0, 2..8),
    ) {
        zetas.sort_by(f64::total_cmp);
        let f = frame(&day);
        let mut prev: Option<SnapshotGraph> = None;
        for &z in &zetas {
            let g = build_snapshot(&f, z);
            let total: u32 = g.degrees().iter().sum();
            prop_assert_eq!(total as usize, 2 * g.edge_count());
            for i in 0..g.n() {
                prop_assert!(!g.has_edge(i, i));
                prop_assert!((g.degree(i) as usize) < g.n());
                let c = node_clustering(&g, i);
                prop_assert!((0.0..=1.0).contains(&c));
            }
            if let Some(r) = degree_assortativity(&g) {
                prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&r));
            }
            if let Some(p) = &prev {
                for (a, b) in g.edges() {
                    prop_assert!(p.has_edge(a, b));
                }
                prop_assert!(g.edge_count() <= p.edge_count());
                prop_assert!(average_degree(&g) <= average_degree(p));
            }
            prev = Some(g);
        }
    }
}

#[test]
fn clique_members_have_unit_clustering() {
    // Clique on {0,1,2,3} plus a pendant 4 attached to 5.
    let mut edges: Vec<(usize, usize)> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
    edges.push((4, 5));
    let g = SnapshotGraph::from_edges(1, 6, &edges);
    for i in 0..4 {
        assert_eq!(node_clustering(&g, i), 1.0);
    }
    assert_eq!(node_clustering(&g, 4), 0.0);
}

#[test]
fn identical_stocks_under_own_dynamic_threshold_have_no_edges() {
    // Power-of-two multiples of one path give bit-identical normalized rows,
    // so G_ij(t) = Q_d(t) exactly.
    let base = common::random_prices(1, 1, 30).remove(0);
    let prices: Vec<Vec<f64>> = [1.0, 2.0, 4.0, 0.5].iter().map(|c| base.iter().map(|p| p * c).collect()).collect();
    let r = returns_from_panel(&common::panel(&prices)).unwrap();
    let policy = ThresholdPolicy::from_returns(ThresholdKind::Dynamic, 1.0, &r).unwrap();
    let s = topology_series(&r, &policy).unwrap();
    assert!(s.clustering.iter().all(|&c| c == 0.0));
    assert!(s.degree.iter().all(|&k| k == 0.0));
    assert!(s.assortativity.iter().all(Option::is_none));
    assert_eq!(s.mean_assortativity, None);
}

#[test]
fn series_matches_per_day_recomputation() {
    let spec = corrnet::MarketSpec { n_stocks: 15, n_days: 60, seed: 4, ..Default::default() };
    let panel = corrnet::synthetic::generate_panel(&spec).unwrap();
    let r = returns_from_panel(&panel).unwrap();
    let policy = ThresholdPolicy::from_returns(ThresholdKind::Static, 1.0, &r).unwrap();
    let s = topology_series(&r, &policy).unwrap();
    for t in [1, 7, 23, 42, 60] {
        let f = corrnet::correlation::cross_correlation_frame(&r, t).unwrap();
        let g = build_snapshot(&f, policy.threshold_at(t).unwrap());
        assert_eq!(s.clustering[t - 1], average_clustering(&g));
        assert_eq!(s.degree[t - 1], average_degree(&g));
        assert_eq!(s.assortativity[t - 1], degree_assortativity(&g));
    }
    assert!((s.mean_degree - s.degree.iter().sum::<f64>() / 60.0).abs() < 1e-15);
}

#[test]
fn ensemble_extremes_and_conservation() {
    let prices = common::random_prices(9, 7, 25);
    let r = returns_from_panel(&common::panel(&prices)).unwrap();
    let none = ThresholdPolicy::fixed(1.0, 1e9).unwrap();
    let e = degree_ensemble(&r, &none).unwrap();
    assert_eq!(e.counts[0], 7 * 24);
    assert_eq!(e.total, 7 * 24);
    let all = ThresholdPolicy::fixed(1.0, -1e9).unwrap();
    let e = degree_ensemble(&r, &all).unwrap();
    assert_eq!(e.counts[6], 7 * 24);
    let dynamic = ThresholdPolicy::from_returns(ThresholdKind::Dynamic, 1.0, &r).unwrap();
    let e = degree_ensemble(&r, &dynamic).unwrap();
    assert_eq!(e.counts.iter().sum::<u64>(), e.total);
    assert!((e.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn full_series_matches_naive_reference() {
    for seed in 0..25 {
        let n = 3 + seed as usize % 10;
        let days = 4 + seed as usize % 17;
        let prices = common::random_prices(100 + seed, n, days);
        let r = returns_from_panel(&common::panel(&prices)).unwrap();
        let naive = reference::normalized_returns(&prices);
        for kind in [ThresholdKind::Static, ThresholdKind::Dynamic] {
            for mult in [0.5, 1.0, 2.0] {
                let policy = ThresholdPolicy::from_returns(kind, mult, &r).unwrap();
                let s = topology_series(&r, &policy).unwrap();
                let qs = reference::q_static(&naive);
                let qd = reference::q_dynamic(&naive);
                let zeta = |t: usize| match kind {
                    ThresholdKind::Static => mult * qs,
                    ThresholdKind::Dynamic => mult * qd[t],
                };
                let days_ref = reference::topology(&naive, &zeta);
                for (t, d) in days_ref.iter().enumerate() {
                    assert!((s.clustering[t] - d.clustering).abs() <= 1e-12);
                    assert!((s.degree[t] - d.degree).abs() <= 1e-12);
                    match (s.assortativity[t], d.assortativity) {
                        (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12),
                        (a, b) => assert_eq!(a, b),
                    }
                }
            }
        }
    }
}
