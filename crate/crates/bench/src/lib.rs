//! Criterion benchmarks for the ergopt kernels; see `benches/`.
