//! Configuration, file output and the command drivers behind the CLI.

pub mod commands;
pub mod config;
pub mod csv;
pub mod vtk;

pub use commands::{cmd_convergence, cmd_probe, cmd_solve, ProbeReport, ProbeRow};
pub use config::{parse_config, RunConfig};
pub use vtk::{read_vtk, write_vtk};
