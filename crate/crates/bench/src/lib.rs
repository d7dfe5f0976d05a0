//! Benchmark-only crate; see `benches/loop_benchmarks.rs`.
