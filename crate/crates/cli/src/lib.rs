//! File formats, configuration, and stage orchestration behind the
//! `tagparse` binary. Everything numeric lives in `tagparse-core`; this crate
//! owns IO: images in PNG/PPM, label and region maps in PGM, tables in TSV,
//! the binary graph cache, and the structured run report.

pub mod cache;
pub mod config;
pub mod error;
pub mod formats;
pub mod pngio;
pub mod pnm;
pub mod report;
pub mod stages;
