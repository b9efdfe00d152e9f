//! Criterion benchmarks for the solver and spline kernels live in `benches/`.
