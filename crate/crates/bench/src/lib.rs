//! Criterion benchmarks for `wmedian`; run them with `cargo bench -p wmedian-bench`.
