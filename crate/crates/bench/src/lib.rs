//! Benchmark-only crate; see `benches/hbvm.rs`.
