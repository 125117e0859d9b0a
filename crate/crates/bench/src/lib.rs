//! Benchmarks for the solver kernels. See `benches/kernels.rs`.
