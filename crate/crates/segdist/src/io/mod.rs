//! File formats: the columnar point table, evaluation configs, tile
//! merging, and report emission.

pub mod config;
pub mod report;
pub mod table;
pub mod tiles;
