use super::kernel::weight_from_offsets;
use super::types::{
    ClosingPolicy, Geometry, HouseNode, KernelSpec, MarketState, Money, PiVariant,
    TransactionRecord, UpdateCoefficients,
};

/// The static side of a market: houses, their geometry, and the update rule
/// parameters. Everything an update needs except the mutable [`MarketState`].
#[derive(Debug, Clone, Copy)]
pub struct Market<'a> {
    pub houses: &'a [HouseNode],
    pub geometry: &'a Geometry,
    pub kernel: KernelSpec,
    pub coefficients: UpdateCoefficients,
}

impl Market<'_> {
    /// Kernel weight of a closing at `i` on house `n`.
    pub fn weight(&self, n: usize, i: usize) -> f64 {
        match self.geometry {
            Geometry::Table(table) => {
                let d = table[n * self.houses.len() + i];
                weight_from_offsets(&self.kernel, d, d, d)
            }
            Geometry::Grid { .. } | Geometry::Points => {
                let (nx, ny) = self.houses[n].position;
                let (ix, iy) = self.houses[i].position;
                let (dx, dy) = (nx - ix, ny - iy);
                weight_from_offsets(&self.kernel, dx, dy, dx.hypot(dy))
            }
        }
    }

    /// Calls `f(n, w)` for every house with positive weight, in ascending id.
    pub fn for_each_in_support(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match self.geometry {
            Geometry::Grid { side } => {
                let side = *side;
                let (row, col) = (i / side, i % side);
                let (hx, hy) = self.kernel.support_half_widths();
                let (hx, hy) = (hx.floor() as usize, hy.floor() as usize);
                let rows = row.saturating_sub(hy)..=(row + hy).min(side - 1);
                let cols = col.saturating_sub(hx)..=(col + hx).min(side - 1);
                for r in rows {
                    let dy = r as f64 - row as f64;
                    for c in cols.clone() {
                        let dx = c as f64 - col as f64;
                        let w = weight_from_offsets(&self.kernel, dx, dy, dx.hypot(dy));
                        if w > 0.0 {
                            f(r * side + c, w);
                        }
                    }
                }
            }
            Geometry::Points | Geometry::Table(_) => {
                for n in 0..self.houses.len() {
                    let w = self.weight(n, i);
                    if w > 0.0 {
                        f(n, w);
                    }
                }
            }
        }
    }
}

/// Ids of all houses a closing at `i` can touch, ascending.
pub fn support_indices(market: &Market<'_>, i: usize) -> Vec<usize> {
    let mut out = Vec::new();
    market.for_each_in_support(i, |n, _| out.push(n));
    out
}

/// Location value the MREE reads off a sale: `(p − b·v) / (1 + a·v)`.
#[inline]
pub fn inferred_location(price: Money, v: Money, coefficients: &UpdateCoefficients) -> Money {
    (price - coefficients.b * v) / (1.0 + coefficients.a * v)
}

/// `p − λ_i` split into the premium over the λ locked at contract and the
/// drift of `λ_i` since then.
#[inline]
fn excess_parts(closing: &TransactionRecord, lambda_i: Money) -> (Money, Money) {
    match closing.quote {
        Some(q) => (q.premium, q.lambda - lambda_i),
        None => (closing.price - lambda_i, 0.0),
    }
}

/// `inferred_location(p, v) − λ_i`, rearranged so that with `a = 0` it is
/// built from differences that vanish exactly on an exact estimate.
#[inline]
fn location_gap(
    closing: &TransactionRecord,
    v: Money,
    lambda_i: Money,
    c: &UpdateCoefficients,
) -> Money {
    let (premium, drift) = excess_parts(closing, lambda_i);
    ((premium - c.b * v) + drift - c.a * v * lambda_i) / (1.0 + c.a * v)
}

/// Unweighted ρ gain of a closing (before the kernel factor).
#[inline]
fn rho_gain(
    closing: &TransactionRecord,
    lambda_i: Money,
    rho_i: Money,
    house: &HouseNode,
    c: &UpdateCoefficients,
) -> Money {
    let (premium, drift) = excess_parts(closing, lambda_i);
    let raw = match c.pi_variant {
        // (p − (λ_i + v)) / (a·λ_i + b) − u
        PiVariant::ScaledGap => ((premium - house.v) + drift) / (c.a * lambda_i + c.b) - house.u,
        // p − λ_i − u
        PiVariant::CaseStudy => (premium - house.u) + drift,
        // p − λ_i − u − ρ_i
        PiVariant::NetOfRho => ((premium - house.u) - rho_i) + drift,
    };
    raw.max(0.0)
}

/// Signed change a closing makes to λ at house `n`, read from the
/// pre-closing state.
pub fn lambda_increment(
    n: usize,
    closing: &TransactionRecord,
    state: &MarketState,
    market: &Market<'_>,
) -> Money {
    let i = closing.house.index();
    let gap = location_gap(
        closing,
        market.houses[i].v,
        state.lambda[i],
        &market.coefficients,
    );
    gap * market.weight(n, i)
}

/// Non-negative change a closing makes to ρ at house `n`.
pub fn rho_increment(
    n: usize,
    closing: &TransactionRecord,
    state: &MarketState,
    market: &Market<'_>,
) -> Money {
    let i = closing.house.index();
    let gain = rho_gain(
        closing,
        state.lambda[i],
        state.rho[i],
        &market.houses[i],
        &market.coefficients,
    );
    gain * market.weight(n, i)
}

/// Applies one closing to the state.
///
/// Every increment depends on the pre-closing state only through λ and ρ of
/// the transacted house, which are read once before any write. λ is clamped
/// at zero; clamps are counted in `state.lambda_clamps`.
pub fn apply_closing(
    state: &mut MarketState,
    closing: &TransactionRecord,
    market: &Market<'_>,
    policy: ClosingPolicy,
) {
    state.closings_applied += 1;
    if policy == ClosingPolicy::Unobserved {
        return;
    }
    let i = closing.house.index();
    let house = &market.houses[i];
    let lambda_i = state.lambda[i];
    let gap = location_gap(closing, house.v, lambda_i, &market.coefficients);
    let gain = match policy {
        ClosingPolicy::UpdateRho => {
            rho_gain(closing, lambda_i, state.rho[i], house, &market.coefficients)
        }
        _ => 0.0,
    };

    let MarketState {
        lambda,
        rho,
        lambda_clamps,
        ..
    } = state;
    market.for_each_in_support(i, |n, w| {
        let updated = lambda[n] + gap * w;
        lambda[n] = if updated < 0.0 {
            *lambda_clamps += 1;
            0.0
        } else {
            updated
        };
        if gain > 0.0 {
            rho[n] += gain * w;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::super::types::{HouseId, KernelShape};
    use super::*;
    use proptest::prelude::*;

    fn coeffs(pi_variant: PiVariant) -> UpdateCoefficients {
        UpdateCoefficients {
            pi_variant,
            ..Default::default()
        }
    }

    fn grid_houses(side: usize, f: impl Fn(usize) -> (f64, f64)) -> Vec<HouseNode> {
        (0..side * side)
            .map(|id| {
                let (v, u) = f(id);
                HouseNode {
                    v,
                    u,
                    opt_in: true,
                    position: ((id % side) as f64, (id / side) as f64),
                }
            })
            .collect()
    }

    fn record(house: usize, price: f64) -> TransactionRecord {
        TransactionRecord::new(0, 0, HouseId(house as u32), price)
    }

    #[test]
    fn inferred_location_defaults() {
        let c = UpdateCoefficients::default();
        assert_eq!(inferred_location(400_000.0, 300_000.0, &c), 100_000.0);
        assert_eq!(inferred_location(300_000.0, 300_000.0, &c), 0.0);
        assert_eq!(inferred_location(430_000.0, 300_000.0, &c), 130_000.0);
    }

    #[test]
    fn inferred_location_general_coefficients() {
        let c = UpdateCoefficients {
            a: 0.5,
            b: 2.0,
            pi_variant: PiVariant::CaseStudy,
        };
        // (10 - 2·2) / (1 + 0.5·2) = 3
        assert_eq!(inferred_location(10.0, 2.0, &c), 3.0);
    }

    #[test]
    fn rho_case_study_increment() {
        let houses = grid_houses(1, |_| (300_000.0, 290_000.0));
        let geometry = Geometry::Grid { side: 1 };
        let market = Market {
            houses: &houses,
            geometry: &geometry,
            kernel: KernelSpec::radial(10.0),
            coefficients: coeffs(PiVariant::CaseStudy),
        };
        let state = MarketState::with_zero_rho(vec![100_000.0]);
        let inc = rho_increment(0, &record(0, 400_000.0), &state, &market);
        assert_eq!(inc, 10_000.0);
    }

    #[test]
    fn case_study_compounds_net_of_rho_does_not() {
        // owner of the sold house already carries ρ = 10000 and sells at
        // λ + u + ρ: the case-study rule passes that ρ on again, the net
        // rule sees no surprise
        let houses = grid_houses(1, |_| (290_000.0, 290_000.0));
        let geometry = Geometry::Grid { side: 1 };
        let state = MarketState::new(vec![100_000.0], vec![10_000.0]);
        let closing = record(0, 400_000.0);
        let mut market = Market {
            houses: &houses,
            geometry: &geometry,
            kernel: KernelSpec::radial(10.0),
            coefficients: coeffs(PiVariant::CaseStudy),
        };
        assert_eq!(rho_increment(0, &closing, &state, &market), 10_000.0);
        market.coefficients = coeffs(PiVariant::NetOfRho);
        assert_eq!(rho_increment(0, &closing, &state, &market), 0.0);
        // an MREE overestimate beyond ρ still registers
        let houses = grid_houses(1, |_| (315_000.0, 290_000.0));
        market.houses = &houses;
        let closing = record(0, 415_000.0);
        assert_eq!(rho_increment(0, &closing, &state, &market), 15_000.0);
    }

    #[test]
    fn rho_scaled_gap_zero_at_mree_price() {
        let houses = grid_houses(1, |_| (300_000.0, 1.0));
        let geometry = Geometry::Grid { side: 1 };
        let market = Market {
            houses: &houses,
            geometry: &geometry,
            kernel: KernelSpec::radial(10.0),
            coefficients: coeffs(PiVariant::ScaledGap),
        };
        let state = MarketState::with_zero_rho(vec![100_000.0]);
        assert_eq!(
            rho_increment(0, &record(0, 400_000.0), &state, &market),
            0.0
        );
    }

    #[test]
    fn paper_literal_vanishes_below_threshold() {
        // zero whenever p ≤ λ + v + u with a = 0, b = 1
        let houses = grid_houses(1, |_| (300_000.0, 290_000.0));
        let geometry = Geometry::Grid { side: 1 };
        let market = Market {
            houses: &houses,
            geometry: &geometry,
            kernel: KernelSpec::radial(10.0),
            coefficients: coeffs(PiVariant::ScaledGap),
        };
        let state = MarketState::with_zero_rho(vec![100_000.0]);
        for p in [400_000.0, 410_000.0, 690_000.0] {
            assert_eq!(rho_increment(0, &record(0, p), &state, &market), 0.0);
        }
        assert_eq!(
            rho_increment(0, &record(0, 690_001.0), &state, &market),
            1.0
        );
    }

    #[test]
    fn increments_vanish_outside_support() {
        let side = 30;
        let houses = grid_houses(side, |_| (250_000.0, 280_000.0));
        let geometry = Geometry::Grid { side };
        for kernel in [KernelSpec::radial(5.0), KernelSpec::grid(5.0, 5.0)] {
            let market = Market {
                houses: &houses,
                geometry: &geometry,
                kernel,
                coefficients: coeffs(PiVariant::CaseStudy),
            };
            let state = MarketState::with_zero_rho(vec![50_000.0; side * side]);
            let closing = record(HouseId::from_grid(10, 10, side).index(), 400_000.0);
            let far = HouseId::from_grid(10, 15, side).index();
            assert_eq!(lambda_increment(far, &closing, &state, &market), 0.0);
            assert_eq!(rho_increment(far, &closing, &state, &market), 0.0);
            let near = HouseId::from_grid(10, 12, side).index();
            assert!(lambda_increment(near, &closing, &state, &market) > 0.0);
        }
    }

    #[test]
    fn negative_lambda_is_clamped() {
        let houses = grid_houses(1, |_| (300_000.0, 200_000.0));
        let geometry = Geometry::Grid { side: 1 };
        let market = Market {
            houses: &houses,
            geometry: &geometry,
            kernel: KernelSpec::radial(3.0),
            coefficients: coeffs(PiVariant::CaseStudy),
        };
        let mut state = MarketState::with_zero_rho(vec![50_000.0]);
        // opted-out style sale well under λ + v
        apply_closing(
            &mut state,
            &record(0, 250_000.0),
            &market,
            ClosingPolicy::SkipRho,
        );
        assert_eq!(state.lambda[0], 0.0);
        assert_eq!(state.lambda_clamps, 1);
    }

    #[test]
    fn skip_rho_leaves_rho_untouched() {
        let side = 9;
        let houses = grid_houses(side, |id| (200_000.0 + id as f64, 230_000.0));
        let geometry = Geometry::Grid { side };
        let market = Market {
            houses: &houses,
            geometry: &geometry,
            kernel: KernelSpec::grid(4.0, 4.0),
            coefficients: coeffs(PiVariant::CaseStudy),
        };
        let mut state = MarketState::new(vec![60_000.0; 81], (0..81).map(|n| n as f64).collect());
        let before = state.rho.clone();
        apply_closing(
            &mut state,
            &record(40, 400_000.0),
            &market,
            ClosingPolicy::SkipRho,
        );
        assert_eq!(state.rho, before);
        assert_eq!(state.closings_applied, 1);
    }

    #[test]
    fn unobserved_only_counts() {
        let houses = grid_houses(2, |_| (200_000.0, 230_000.0));
        let geometry = Geometry::Grid { side: 2 };
        let market = Market {
            houses: &houses,
            geometry: &geometry,
            kernel: KernelSpec::radial(4.0),
            coefficients: coeffs(PiVariant::CaseStudy),
        };
        let mut state = MarketState::with_zero_rho(vec![60_000.0; 4]);
        let before = state.clone();
        apply_closing(
            &mut state,
            &record(1, 900_000.0),
            &market,
            ClosingPolicy::Unobserved,
        );
        assert_eq!(state.lambda, before.lambda);
        assert_eq!(state.rho, before.rho);
        assert_eq!(state.closings_applied, 1);
    }

    #[test]
    fn grid_support_matches_full_scan() {
        let side = 17;
        let houses = grid_houses(side, |_| (1.0, 1.0));
        let grid = Geometry::Grid { side };
        let points = Geometry::Points;
        for kernel in [
            KernelSpec::radial(4.5),
            KernelSpec::grid(3.0, 6.0),
            KernelSpec {
                shape: KernelShape::Radial,
                r: 1.0,
                r_x: 1.0,
                r_y: 1.0,
            },
        ] {
            let mk = |geometry| Market {
                houses: &houses,
                geometry,
                kernel,
                coefficients: UpdateCoefficients::default(),
            };
            for i in [0, 8, 144, side * side - 1] {
                assert_eq!(
                    support_indices(&mk(&grid), i),
                    support_indices(&mk(&points), i)
                );
            }
        }
    }

    // Test-only oracle: compute every increment from an untouched snapshot,
    // then write them all.
    fn two_pass(
        state: &MarketState,
        closing: &TransactionRecord,
        market: &Market<'_>,
        policy: ClosingPolicy,
    ) -> MarketState {
        let n_houses = state.len();
        let d_lambda: Vec<f64> = (0..n_houses)
            .map(|n| lambda_increment(n, closing, state, market))
            .collect();
        let d_rho: Vec<f64> = (0..n_houses)
            .map(|n| rho_increment(n, closing, state, market))
            .collect();
        let mut out = state.clone();
        out.closings_applied += 1;
        let i = closing.house.index();
        for n in 0..n_houses {
            if market.weight(n, i) == 0.0 {
                continue;
            }
            let l = state.lambda[n] + d_lambda[n];
            out.lambda[n] = if l < 0.0 {
                out.lambda_clamps += 1;
                0.0
            } else {
                l
            };
            if policy == ClosingPolicy::UpdateRho && d_rho[n] > 0.0 {
                out.rho[n] = state.rho[n] + d_rho[n];
            }
        }
        out
    }

    proptest! {
        #[test]
        fn single_pass_equals_two_pass(
            side in 3usize..12,
            r in 1.0f64..6.0,
            separable in any::<bool>(),
            variant in 0usize..3,
            update_rho in any::<bool>(),
            seed_vals in proptest::collection::vec((50_000f64..300_000.0, -20_000f64..20_000.0, 0f64..5_000.0, 0f64..200_000.0), 144),
            house in 0usize..144,
            premium in -30_000f64..60_000.0,
        ) {
            let n_houses = side * side;
            let houses = grid_houses(side, |id| (seed_vals[id].0, seed_vals[id].0 + seed_vals[id].1));
            let geometry = Geometry::Grid { side };
            let kernel = if separable { KernelSpec::grid(r, r + 1.0) } else { KernelSpec::radial(r) };
            let pi_variant = [PiVariant::ScaledGap, PiVariant::CaseStudy, PiVariant::NetOfRho][variant];
            let market = Market { houses: &houses, geometry: &geometry, kernel, coefficients: coeffs(pi_variant) };
            let state = MarketState::new(
                (0..n_houses).map(|n| seed_vals[n].3).collect(),
                (0..n_houses).map(|n| seed_vals[n].2).collect(),
            );
            let i = house % n_houses;
            let price = state.lambda[i] + houses[i].v + premium;
            let closing = record(i, price);
            let policy = if update_rho { ClosingPolicy::UpdateRho } else { ClosingPolicy::SkipRho };
            let expected = two_pass(&state, &closing, &market, policy);
            let mut actual = state.clone();
            apply_closing(&mut actual, &closing, &market, policy);
            prop_assert_eq!(actual, expected);
        }
    }
}
