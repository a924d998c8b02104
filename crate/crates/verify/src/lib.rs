//! Brute-force oracles for the drag mechanism and a check suite that
//! compares them against `dragkit-core`.

pub mod checks;
pub mod oracle;

pub use checks::{run_suite, Check};
