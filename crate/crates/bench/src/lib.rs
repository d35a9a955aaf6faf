//! Benchmark harness for the simplex-qp solvers: instance generation,
//! single solves with CSV reports, and the grid tables the binary
//! renders as CSV or markdown.

pub mod format;
pub mod tables;
