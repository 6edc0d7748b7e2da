//! File formats, metrics, reports and the command-line front end.

pub mod checks;
pub mod cli;
pub mod fit;
pub mod formats;
pub mod metrics;
