//! File formats, reports and the command line front end for
//! `contract-forge-core`.

pub mod bench;
pub mod cli;
pub mod formats;
pub mod report;
