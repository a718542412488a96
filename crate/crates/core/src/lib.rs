//! Siting of the upper reservoir of a pumped-hydro storage plant on a gridded
//! terrain model, posed as a binary integer program.

pub mod batch;
pub mod connectivity;
pub mod costing;
pub mod error;
pub mod model;
pub mod num;
pub mod sizing;
pub mod solve;
pub mod strategy;
pub mod synthetic;
pub mod terrain;

pub use error::{Error, Result};
pub use num::Scalar;

pub type Grid = terrain::TerrainGrid<f64>;
pub type GridF32 = terrain::TerrainGrid<f32>;
pub type Sizing = sizing::SitingSpec<f64>;
pub type Costs = costing::CostParams<f64>;
pub type Instance = model::SitingInstance<f64>;
