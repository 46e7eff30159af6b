//! Criterion benchmarks for `groupvault-core`; see `benches/`.
