//! Engine runs checked against the replay solver and the model's fixed
//! points.

use mree_core::city::{generate_city, CityConfig};
use mree_core::engine::{run, SimConfig};
use mree_core::repp::{
    apply_closing, solve_repp, support_indices, ClosingPolicy, HouseId, KernelSpec, PiVariant,
    ReppProblem, TransactionRecord, UpdateCoefficients,
};
use proptest::prelude::*;

fn city(side: usize, r: usize, e: f64, opt_out: f64, seed: u64) -> mree_core::City {
    generate_city(&CityConfig {
        side,
        neighborhood_size: r,
        error_range: e,
        opt_out_fraction: opt_out,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn sim(r: f64, days: u32, seed: u64, pi_variant: PiVariant) -> SimConfig {
    SimConfig {
        horizon_days: days,
        kernel: KernelSpec::grid(r, r),
        coefficients: UpdateCoefficients {
            pi_variant,
            ..Default::default()
        },
        daily_listing_fraction: 0.002,
        seed,
        ..Default::default()
    }
}

fn replay(
    city: &mree_core::City,
    cfg: &SimConfig,
    log: &[TransactionRecord],
) -> mree_core::repp::ReppSolution {
    let problem = ReppProblem {
        houses: city.houses.clone(),
        geometry: city.geometry(),
        initial_state: city.initial_state.clone(),
        transactions: log.iter().map(|r| r.unpriced()).collect(),
        kernel: cfg.kernel,
        coefficients: cfg.coefficients,
        optout_updates_lambda: cfg.optout_updates_lambda,
    };
    solve_repp(&problem).unwrap()
}

#[test]
fn engine_matches_solver_across_variants() {
    for (seed, variant, opt_out) in [
        (1, PiVariant::CaseStudy, 0.0),
        (2, PiVariant::CaseStudy, 0.5),
        (3, PiVariant::ScaledGap, 0.2),
        (4, PiVariant::NetOfRho, 0.7),
    ] {
        let c = city(31, 5, 30_000.0, opt_out, seed);
        let cfg = sim(6.0, 300, seed, variant);
        let out = run(&c, &cfg, &mut ()).unwrap();
        assert!(!out.log.is_empty());
        let solved = replay(&c, &cfg, &out.log);
        assert_eq!(solved.state, out.final_state);
        assert_eq!(solved.records, out.log);
    }
}

#[test]
fn optout_without_lambda_updates_matches_solver() {
    let c = city(25, 5, 30_000.0, 0.6, 8);
    let cfg = SimConfig {
        optout_updates_lambda: false,
        ..sim(5.0, 200, 8, PiVariant::CaseStudy)
    };
    let out = run(&c, &cfg, &mut ()).unwrap();
    assert_eq!(replay(&c, &cfg, &out.log).state, out.final_state);
}

#[test]
fn zero_error_is_a_fixed_point() {
    for seed in 1..=3 {
        let c = city(41, 10, 0.0, 0.3, seed);
        let cfg = sim(10.0, 400, seed, PiVariant::CaseStudy);
        let out = run(&c, &cfg, &mut ()).unwrap();
        assert_eq!(out.final_state.lambda, c.initial_state.lambda);
        assert_eq!(out.final_state.rho, c.initial_state.rho);
        for r in &out.log {
            let i = r.house.index();
            assert_eq!(r.price, c.initial_state.lambda[i] + c.houses[i].v);
        }
        assert!(out
            .series
            .rows
            .iter()
            .all(|r| r.mree_inflation == 0.0 && r.owner_inflation == 0.0));
    }
}

#[test]
fn full_opt_out_never_moves_rho() {
    let c = city(31, 5, 40_000.0, 1.0, 6);
    let cfg = sim(5.0, 300, 6, PiVariant::CaseStudy);
    let out = run(&c, &cfg, &mut ()).unwrap();
    assert!(!out.log.is_empty());
    assert_eq!(out.final_state.rho, c.initial_state.rho);
    assert_ne!(out.final_state.lambda, c.initial_state.lambda);
}

#[test]
fn rho_and_owner_index_never_decrease_when_all_opted_in() {
    let c = city(31, 5, 40_000.0, 0.0, 7);
    let cfg = sim(5.0, 300, 7, PiVariant::CaseStudy);
    let out = run(&c, &cfg, &mut ()).unwrap();
    for (after, before) in out.final_state.rho.iter().zip(&c.initial_state.rho) {
        assert!(after >= before);
    }
    let day0 = out.series.rows[0].owner_index;
    assert!(out.series.rows.iter().all(|r| r.owner_index >= day0));
}

#[test]
fn mean_resale_interval_matches_listing_rate() {
    // 0.002 per day → one sale per house every 500 days on average
    let c = city(41, 10, 10_000.0, 0.0, 12);
    let cfg = sim(10.0, 5000, 12, PiVariant::NetOfRho);
    let out = run(&c, &cfg, &mut ()).unwrap();
    let mut last = vec![None; c.len()];
    let mut gaps = Vec::new();
    for r in &out.log {
        if let Some(prev) = last[r.house.index()] {
            gaps.push((r.closing_day - prev) as f64);
        }
        last[r.house.index()] = Some(r.closing_day);
    }
    // completed gaps are biased short by the finite horizon; use the rate
    let sold_days = (cfg.horizon_days - 35) as f64;
    let mean = c.len() as f64 * sold_days / out.log.len() as f64;
    assert!((mean - 500.0).abs() < 50.0, "mean interval {mean}");
    assert!(!gaps.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closing_touches_only_support_box(
        seed in 0u64..1000,
        house in 0u32..961,
        r in 1usize..8,
        premium in -40_000f64..80_000.0,
        separable in any::<bool>(),
    ) {
        let c = city(31, 5, 30_000.0, 0.0, seed);
        let side = 31;
        let kernel = if separable { KernelSpec::grid(r as f64, r as f64) } else { KernelSpec::radial(r as f64) };
        let geometry = c.geometry();
        let market = mree_core::repp::Market {
            houses: &c.houses,
            geometry: &geometry,
            kernel,
            coefficients: UpdateCoefficients::default(),
        };
        let i = house as usize;
        let price = c.initial_state.lambda[i] + c.houses[i].v + premium;
        let record = TransactionRecord::new(1, 31, HouseId(house), price);
        let mut state = c.initial_state.clone();
        state.rho.iter_mut().enumerate().for_each(|(n, x)| *x = (n % 7) as f64 * 100.0);
        let before = state.clone();
        apply_closing(&mut state, &record, &market, ClosingPolicy::UpdateRho);
        let support = support_indices(&market, i);
        let (ri, ci) = (i / side, i % side);
        for n in 0..c.len() {
            let (rn, cn) = (n / side, n % side);
            let in_box = rn.abs_diff(ri) < r && cn.abs_diff(ci) < r;
            if !in_box {
                prop_assert_eq!(state.lambda[n].to_bits(), before.lambda[n].to_bits());
                prop_assert_eq!(state.rho[n].to_bits(), before.rho[n].to_bits());
                prop_assert!(!support.contains(&n));
            }
        }
    }
}
