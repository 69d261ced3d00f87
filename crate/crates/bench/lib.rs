//! Criterion benchmarks for the rendering, annotation and evaluation hot paths.
//! Run with `cargo bench -p synthperson-bench`.
