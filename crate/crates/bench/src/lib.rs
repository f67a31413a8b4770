//! Benchmarks for the fbpnn training loop; see `benches/training.rs`.
