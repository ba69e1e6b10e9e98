//! Report types and the cross-validation runner behind the `sgsolve` binary.

pub mod check;
pub mod report;
