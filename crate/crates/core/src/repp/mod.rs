//! The replay model: houses, market state, and the equations that turn a
//! sequence of closings into location (λ) and owner adjustment (ρ) updates.

pub mod format;
mod kernel;
mod pricing;
mod solver;
mod types;
mod update;

pub use kernel::kernel_weight;
pub use pricing::{market_price, market_quote, price_opted_in, price_opted_out};
pub use solver::{solve_repp, ReppProblem, ReppSolution};
pub use types::{
    ClosingPolicy, Geometry, HouseId, HouseNode, KernelShape, KernelSpec, MarketState, Money,
    PiVariant, Quote, Transaction, TransactionRecord, UpdateCoefficients,
};
pub use update::{
    apply_closing, inferred_location, lambda_increment, rho_increment, support_indices, Market,
};
