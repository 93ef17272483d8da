//! Simulation and analysis of driven Rydberg exciton arrays.
//!
//! The usual flow: build a [`model::LevelSet`], a [`model::DriveSchedule`]
//! and a [`model::Geometry`], evolve with [`propagator::evolve`], then read the
//! final state through [`observables`] or hand it to [`mis::solve_from_state`].

pub mod analysis;
pub mod basis;
pub mod cli;
pub mod config;
pub mod error;
pub mod mis;
pub mod model;
pub mod observables;
pub mod optimize;
pub mod propagator;
pub mod rng;

pub use error::{Error, Result};
