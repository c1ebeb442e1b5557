//! Daily market pipeline.
//!
//! Each day runs, in this order:
//!
//! 1. lock prices for sales whose contract day is today,
//! 2. apply today's closings in listing order, releasing the houses,
//! 3. draw new listings from houses that are not pending.
//!
//! Locking before closing means a closing never informs a contract signed on
//! the same day.

use std::collections::VecDeque;

use rand::Rng;

use crate::city::City;
use crate::error::ConfigError;
use crate::metrics::{market_indices, InflationSeries, Recorder, SeriesRow};
use crate::repp::{
    apply_closing, market_quote, ClosingPolicy, Geometry, HouseId, KernelSpec, Market, MarketState,
    Money, Quote, TransactionRecord, UpdateCoefficients,
};
use crate::rng::{substream, SimRng, Substream};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Fraction of all houses listed per day.
    pub daily_listing_fraction: f64,
    pub offer_delay_days: u32,
    pub closing_delay_days: u32,
    pub horizon_days: u32,
    pub kernel: KernelSpec,
    pub coefficients: UpdateCoefficients,
    /// Whether opted-out closings still update λ.
    pub optout_updates_lambda: bool,
    /// Seed of the listing-selection substream.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            daily_listing_fraction: 0.0005,
            offer_delay_days: 5,
            closing_delay_days: 30,
            horizon_days: 2000,
            kernel: KernelSpec::grid(10.0, 10.0),
            coefficients: UpdateCoefficients::default(),
            optout_updates_lambda: true,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.daily_listing_fraction >= 0.0 && self.daily_listing_fraction < 1.0) {
            return Err(ConfigError::new(
                "daily_listing_fraction",
                format!("must be in [0, 1), got {}", self.daily_listing_fraction),
            ));
        }
        if self.offer_delay_days < 1 {
            return Err(ConfigError::new(
                "offer_delay_days",
                "must be ≥ 1 so a listing's contract falls on a later day",
            ));
        }
        self.kernel.validate()
    }
}

/// A listed house moving through contract and closing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingSale {
    pub house: HouseId,
    pub listing_day: u32,
    pub contract_day: u32,
    pub closing_day: u32,
    /// Set on the contract day.
    pub quote: Option<Quote>,
}

impl PendingSale {
    pub fn locked_price(&self) -> Option<Money> {
        self.quote.map(|q| q.price())
    }
}

/// Chooses new listings each day.
///
/// The daily count is the integer part of a running accumulator that gains
/// `N · fraction` per day, so the long-run rate is exact. Houses are drawn
/// uniformly without replacement from the eligible pool, which is kept as a
/// swap-remove vector with a position index.
#[derive(Debug, Clone)]
pub struct ListingSelector {
    per_day: f64,
    accumulator: f64,
    rng: SimRng,
    pool: Vec<HouseId>,
    slot: Vec<u32>,
    /// Days on which fewer houses were eligible than the count called for.
    pub shortfalls: u64,
}

const NOT_IN_POOL: u32 = u32::MAX;

impl ListingSelector {
    pub fn new(houses: usize, fraction: f64, seed: u64) -> Self {
        Self {
            per_day: houses as f64 * fraction,
            accumulator: 0.0,
            rng: substream(seed, Substream::Listings),
            pool: (0..houses as u32).map(HouseId).collect(),
            slot: (0..houses as u32).collect(),
            shortfalls: 0,
        }
    }

    /// Number of listings for the next day; advances the accumulator.
    pub fn next_count(&mut self) -> usize {
        self.accumulator += self.per_day;
        let count = self.accumulator.floor();
        self.accumulator -= count;
        count as usize
    }

    /// Draws today's listings and removes them from the pool.
    pub fn select(&mut self) -> Vec<HouseId> {
        let mut count = self.next_count();
        if count > self.pool.len() {
            self.shortfalls += 1;
            count = self.pool.len();
        }
        (0..count)
            .map(|_| {
                let k = self.rng.random_range(0..self.pool.len() as u64) as usize;
                self.take(k)
            })
            .collect()
    }

    fn take(&mut self, k: usize) -> HouseId {
        let house = self.pool.swap_remove(k);
        self.slot[house.index()] = NOT_IN_POOL;
        if let Some(&moved) = self.pool.get(k) {
            self.slot[moved.index()] = k as u32;
        }
        house
    }

    /// Returns a house to the eligible pool.
    pub fn release(&mut self, house: HouseId) {
        debug_assert_eq!(self.slot[house.index()], NOT_IN_POOL);
        self.slot[house.index()] = self.pool.len() as u32;
        self.pool.push(house);
    }

    pub fn is_eligible(&self, house: HouseId) -> bool {
        self.slot[house.index()] != NOT_IN_POOL
    }

    pub fn eligible(&self) -> usize {
        self.pool.len()
    }
}

/// Prices a sale from the current state with the formula for the house's
/// opt-in status.
pub fn lock_price(sale: &PendingSale, state: &MarketState, market: &Market<'_>) -> Money {
    lock_quote(sale, state, market).price()
}

/// [`lock_price`] with the price kept as location plus premium.
pub fn lock_quote(sale: &PendingSale, state: &MarketState, market: &Market<'_>) -> Quote {
    let i = sale.house.index();
    market_quote(&market.houses[i], state.lambda[i], state.rho[i])
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DayReport {
    pub closings: u32,
    pub price_sum: Money,
}

/// Mutable simulation state for one run.
#[derive(Debug, Clone)]
pub struct World<'a> {
    pub market: Market<'a>,
    pub state: MarketState,
    pub config: SimConfig,
    awaiting_contract: VecDeque<PendingSale>,
    under_contract: VecDeque<PendingSale>,
    pub selector: ListingSelector,
    pub log: Vec<TransactionRecord>,
}

impl<'a> World<'a> {
    pub fn new(city: &'a City, geometry: &'a Geometry, config: &SimConfig) -> Self {
        let market = Market {
            houses: &city.houses,
            geometry,
            kernel: config.kernel,
            coefficients: config.coefficients,
        };
        Self {
            market,
            state: city.initial_state.clone(),
            config: config.clone(),
            awaiting_contract: VecDeque::new(),
            under_contract: VecDeque::new(),
            selector: ListingSelector::new(city.len(), config.daily_listing_fraction, config.seed),
            log: Vec::new(),
        }
    }

    /// Sales listed but not yet closed, in listing order.
    pub fn pending(&self) -> impl Iterator<Item = &PendingSale> {
        self.under_contract.iter().chain(&self.awaiting_contract)
    }

    /// Registers a listing directly, bypassing the selector's draw. The house
    /// must be eligible.
    pub fn list_house(&mut self, house: HouseId, day: u32) {
        assert!(
            self.selector.is_eligible(house),
            "house {house} is already pending"
        );
        let k = self.selector.slot[house.index()] as usize;
        self.selector.take(k);
        self.push_listing(house, day);
    }

    fn push_listing(&mut self, house: HouseId, day: u32) {
        let contract_day = day + self.config.offer_delay_days;
        self.awaiting_contract.push_back(PendingSale {
            house,
            listing_day: day,
            contract_day,
            closing_day: contract_day + self.config.closing_delay_days,
            quote: None,
        });
    }

    /// Locks prices and applies closings due on `day`, without drawing new
    /// listings.
    pub fn process_due(&mut self, day: u32) -> DayReport {
        while self
            .awaiting_contract
            .front()
            .is_some_and(|s| s.contract_day == day)
        {
            let mut sale = self.awaiting_contract.pop_front().unwrap();
            sale.quote = Some(lock_quote(&sale, &self.state, &self.market));
            self.under_contract.push_back(sale);
        }

        let mut report = DayReport::default();
        while self
            .under_contract
            .front()
            .is_some_and(|s| s.closing_day == day)
        {
            let sale = self.under_contract.pop_front().unwrap();
            let record = TransactionRecord::quoted(
                sale.contract_day,
                sale.closing_day,
                sale.house,
                sale.quote.expect("price locked on contract day"),
            );
            let policy = ClosingPolicy::for_house(
                self.market.houses[sale.house.index()].opt_in,
                self.config.optout_updates_lambda,
            );
            apply_closing(&mut self.state, &record, &self.market, policy);
            self.selector.release(sale.house);
            self.log.push(record);
            report.closings += 1;
            report.price_sum += record.price;
        }
        report
    }

    /// One full day: price locks, closings, new listings.
    pub fn step_day(&mut self, day: u32) -> DayReport {
        let report = self.process_due(day);
        for house in self.selector.select() {
            self.push_listing(house, day);
        }
        report
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: InflationSeries,
    pub log: Vec<TransactionRecord>,
    pub final_state: MarketState,
    pub listing_shortfalls: u64,
}

/// Runs the market for `config.horizon_days` days. Day 0 is the initial
/// state; simulated days are `1..=horizon`. Every row is also passed to
/// `recorder` as it is produced.
pub fn run(
    city: &City,
    config: &SimConfig,
    recorder: &mut dyn Recorder,
) -> Result<RunOutput, ConfigError> {
    config.validate()?;
    config.coefficients.validate(&city.houses)?;
    let geometry = city.geometry();
    let mut world = World::new(city, &geometry, config);

    let baseline = market_indices(&world.state, &city.houses);
    let mut series = InflationSeries::new(baseline);
    let row = series.push(0, baseline, DayReport::default());
    recorder.record(&row);

    for day in 1..=config.horizon_days {
        let report = world.step_day(day);
        let indices = market_indices(&world.state, &city.houses);
        let row: SeriesRow = series.push(day, indices, report);
        recorder.record(&row);
    }

    Ok(RunOutput {
        series,
        listing_shortfalls: world.selector.shortfalls,
        log: world.log,
        final_state: world.state,
    })
}
