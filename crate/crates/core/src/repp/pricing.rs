use super::types::{HouseNode, Money, Quote};

/// Sale price of a house published by the MREE: never below the estimator's
/// own figure `λ + v`, and at least the owner's `λ + u + ρ`.
#[inline]
pub fn price_opted_in(lambda: Money, v: Money, u: Money, rho: Money) -> Money {
    lambda + v.max(u + rho)
}

/// Sale price of a house that did not opt in: the MREE construction estimate
/// plays no part.
#[inline]
pub fn price_opted_out(lambda: Money, u: Money, rho: Money) -> Money {
    lambda + (u + rho)
}

/// Price of `house` given its current λ and ρ, using the formula that
/// matches its opt-in status.
#[inline]
pub fn market_price(house: &HouseNode, lambda: Money, rho: Money) -> Money {
    if house.opt_in {
        price_opted_in(lambda, house.v, house.u, rho)
    } else {
        price_opted_out(lambda, house.u, rho)
    }
}

/// Same price as [`market_price`], kept as location plus premium.
#[inline]
pub fn market_quote(house: &HouseNode, lambda: Money, rho: Money) -> Quote {
    let premium = if house.opt_in {
        house.v.max(house.u + rho)
    } else {
        house.u + rho
    };
    Quote { lambda, premium }
}
