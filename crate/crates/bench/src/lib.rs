//! Criterion benchmarks for `corrlsd` live under `benches/`.
