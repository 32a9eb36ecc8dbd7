//! Criterion benchmarks for the robust-defer solvers live under `benches/`.
