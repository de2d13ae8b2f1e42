//! Criterion benchmarks for bcross; see `benches/crossing.rs`.
