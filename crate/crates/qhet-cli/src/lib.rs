//! Library backing the `qhet` command-line tool: dataset analysis,
//! simulation-grid execution, and report/figure generation.

// `!(x > 0.0)` rejects NaN along with the domain violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod input;
pub mod report;
pub mod simulate;
pub mod svg;
