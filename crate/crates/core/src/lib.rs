//! Evolutionary games on networks and the interventions that drive a
//! population from the all-`-1` status quo to all-`+1` consensus.

pub mod analysis;
pub mod coevolution;
pub mod dynamics;
pub mod error;
pub mod games;
pub mod graph;
pub mod montecarlo;
pub mod tempnet;

pub use error::{Error, Result};
pub use games::{Action, PopulationState};
pub use graph::Graph;
