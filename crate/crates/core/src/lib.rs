pub mod center;
pub mod error;
pub mod linear;
pub mod optim;
pub mod params;
pub mod relu;
pub mod rng;
pub mod sweep;
pub mod train;

pub use error::{Error, Result};
pub use params::{FlatParams, PiecewisePath, ShapeTag};
pub use rng::RngSeed;
