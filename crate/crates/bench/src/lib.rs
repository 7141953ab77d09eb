//! Criterion benchmarks of the lattice kernels; see `benches/kernels.rs`.
