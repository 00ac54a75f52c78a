//! IO, file formats and the command-line front end for `tempconv-core`:
//! `LWT1` tensor files, `LWCK` checkpoints, TOML model/training documents with
//! dotted overrides, expected-value fixtures and report rendering.

#![forbid(unsafe_code)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod fixture;
pub mod lwt;
pub mod report;
