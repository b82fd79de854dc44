//! Criterion benchmarks for the simulation and spectral pipeline; see `benches/`.
