//! Criterion benchmarks for the corrlab engines; see `benches/engines.rs`.
