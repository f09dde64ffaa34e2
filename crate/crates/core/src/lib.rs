//! Model assembly for co-planning building energy systems and low-voltage grid
//! reinforcement as mixed-integer linear programs.
//!
//! The crate is `no_std` (it needs `alloc`). It builds solver-agnostic
//! [`ModelSpec`](model::ModelSpec)s for the coordinated planning problem, the
//! per-building sizing problem and the grid reinforcement problem over fixed
//! injections, reduces hourly series to weighted typical periods, and runs the
//! four planning paradigms against any [`Solver`](model::Solver)
//! implementation. Backends, file formats and the command line live in the
//! `hoods` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod assembly;
pub mod building;
pub mod cost;
pub mod domain;
pub mod error;
pub mod grid;
pub mod model;
pub mod paradigms;
pub mod timeseries;

mod util;

pub use error::{Error, Result};
