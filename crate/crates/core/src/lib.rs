//! Deterministic simulator of the feedback loop between a mass real estate
//! estimator (MREE) and home owners.
//!
//! The crate is split along the lines of the model:
//!
//! - [`repp`]: the replay model itself. Domain types, the pricing and
//!   update equations, and the polynomial replay solver.
//! - [`city`]: procedural grid city generation (key-point location grid,
//!   bilinear location values, construction values with estimator error).
//! - [`engine`]: the daily listing / contract / closing pipeline.
//! - [`metrics`]: market indices, inflation series and regression helpers.
//! - [`rng`]: seeded, named random substreams.

pub mod city;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod repp;
pub mod rng;
pub mod scenario;

pub use city::{generate_city, City, CityConfig, KeyGrid};
pub use engine::{run, SimConfig};
pub use error::{ConfigError, FormatError, ReppError};
pub use metrics::{market_indices, InflationSeries, SeriesRow};
pub use repp::{
    apply_closing, solve_repp, ClosingPolicy, Geometry, HouseId, HouseNode, KernelShape,
    KernelSpec, MarketState, Money, PiVariant, ReppProblem, Transaction, TransactionRecord,
    UpdateCoefficients,
};

/// Identifies the build in output metadata.
pub const BUILD_ID: &str = concat!("mree-core ", env!("CARGO_PKG_VERSION"));
