//! Benchmarks for the geocoil kernels live in `benches/`.
