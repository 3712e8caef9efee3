//! Benchmarks for conet-core live under `benches/`.
