//! Multiuser redirected-walking simulation and recurrent short-term
//! trajectory prediction.
//!
//! The pipeline runs: [`motion`] generates virtual trajectories, [`rdw`]
//! maps them into a bounded room, [`dataset`] cuts the resulting traces into
//! windows, and [`trainer`] fits [`rnn`] predictors with the [`optim`]
//! update rules. [`experiment`] wires these into the `rdw` command-line tool.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod motion;
pub mod optim;
pub mod rdw;
pub mod rnn;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
pub use geometry::{Pose2, Room, Vec2};
