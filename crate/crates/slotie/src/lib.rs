//! File formats, checkpoints, run configuration and the command-line
//! pipeline around `slotie-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod io;
pub mod speed;
