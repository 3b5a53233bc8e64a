//! Benchmarks for the spinctrl kernels live in `benches/`.
