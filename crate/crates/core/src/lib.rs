//! Outer bounds, achievable rate regions and symmetric exchange rates for the
//! Gaussian multi-way relay channel: `L` clusters of `K` users that exchange
//! messages inside their cluster through a single full-duplex relay.

pub mod bounds;
pub mod cli;
pub mod dm_cf;
pub mod error;
pub mod mc_oracle;
pub mod model;
pub mod optimizer;
pub mod schemes;

pub use error::{Error, Result};
