//! Block ingestion, snapshots, simulation and the command-line front end for
//! `fdastream-core`.

pub mod cli;
pub mod config;
pub mod csv;
pub mod error;
pub mod io;
pub mod sim;
pub mod snapshot;
