//! Criterion benchmarks for `ebgev` live under `benches/`.
