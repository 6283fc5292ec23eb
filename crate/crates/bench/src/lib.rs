//! Criterion benchmarks for `ldrkit`. Run with `cargo bench -p ldrkit-bench`.
