//! Benchmarks for the `cutpoints` crate live in `benches/`.
