//! Simulation, file formats, batch experiments and diagnostics around
//! [`lif_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnose;
pub mod error;
pub mod experiment;
pub mod io;
pub mod simulate;

pub use error::{Error, Result};
