//! Benchmarks for the corrnet pipeline live in `benches/`.
