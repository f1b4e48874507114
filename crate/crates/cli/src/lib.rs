//! Benchmark harness and report generation behind the `sheetsynth` binary.

pub mod bench;
pub mod report;
