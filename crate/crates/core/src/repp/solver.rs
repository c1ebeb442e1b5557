use super::pricing::market_quote;
use super::types::{
    ClosingPolicy, Geometry, HouseNode, KernelSpec, MarketState, Transaction, TransactionRecord,
    UpdateCoefficients,
};
use super::update::{apply_closing, Market};
use crate::error::ReppError;

/// A full replay instance: the city, its initial estimates, and a
/// transaction vector ordered by closing day.
#[derive(Debug, Clone, PartialEq)]
pub struct ReppProblem {
    pub houses: Vec<HouseNode>,
    pub geometry: Geometry,
    pub initial_state: MarketState,
    pub transactions: Vec<Transaction>,
    pub kernel: KernelSpec,
    pub coefficients: UpdateCoefficients,
    /// Whether closings of opted-out houses still move λ.
    pub optout_updates_lambda: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReppSolution {
    pub state: MarketState,
    pub records: Vec<TransactionRecord>,
}

impl ReppProblem {
    pub fn market(&self) -> Market<'_> {
        Market {
            houses: &self.houses,
            geometry: &self.geometry,
            kernel: self.kernel,
            coefficients: self.coefficients,
        }
    }

    pub fn validate(&self) -> Result<(), ReppError> {
        let n = self.houses.len();
        if self.initial_state.lambda.len() != n || self.initial_state.rho.len() != n {
            return Err(ReppError::StateLength {
                expected: n,
                got: self
                    .initial_state
                    .lambda
                    .len()
                    .min(self.initial_state.rho.len()),
            });
        }
        self.kernel.validate()?;
        self.coefficients.validate(&self.houses)?;
        self.geometry.validate(&self.houses, &self.kernel)?;
        let mut previous = 0;
        for (index, t) in self.transactions.iter().enumerate() {
            if t.house.index() >= n {
                return Err(ReppError::UnknownHouse {
                    index,
                    house: t.house.0,
                    houses: n,
                });
            }
            if t.closing_day < t.contract_day {
                return Err(ReppError::ClosingBeforeContract {
                    index,
                    contract_day: t.contract_day,
                    closing_day: t.closing_day,
                });
            }
            if t.closing_day < previous {
                return Err(ReppError::Unsorted {
                    index,
                    closing_day: t.closing_day,
                    previous,
                });
            }
            previous = t.closing_day;
        }
        Ok(())
    }
}

/// Replays every transaction once and returns the estimates after the last
/// closing, together with the priced transaction vector.
///
/// A missing price is computed from the state after every closing whose day
/// is strictly before the transaction's contract day. Runs in
/// `O(|T| · support)` on grid geometry, `O(|T| · N)` otherwise.
pub fn solve_repp(problem: &ReppProblem) -> Result<ReppSolution, ReppError> {
    problem.validate()?;
    let market = problem.market();
    let transactions = &problem.transactions;

    // pricing order: contract day, then input order
    let mut by_contract: Vec<usize> = (0..transactions.len()).collect();
    by_contract.sort_by_key(|&k| (transactions[k].contract_day, k));

    let mut state = problem.initial_state.clone();
    let mut priced: Vec<Option<TransactionRecord>> = vec![None; transactions.len()];
    let mut next_to_price = 0;
    for (k, closing) in transactions.iter().enumerate() {
        // every contract signed on or before this closing day is priced
        // before the day's closings touch the state
        while next_to_price < by_contract.len()
            && transactions[by_contract[next_to_price]].contract_day <= closing.closing_day
        {
            let j = by_contract[next_to_price];
            let t = &transactions[j];
            let i = t.house.index();
            priced[j] = Some(match t.price {
                Some(price) => {
                    TransactionRecord::new(t.contract_day, t.closing_day, t.house, price)
                }
                None => TransactionRecord::quoted(
                    t.contract_day,
                    t.closing_day,
                    t.house,
                    market_quote(&problem.houses[i], state.lambda[i], state.rho[i]),
                ),
            });
            next_to_price += 1;
        }
        let record = priced[k].expect("contract day never after closing day");
        let policy = ClosingPolicy::for_house(
            problem.houses[closing.house.index()].opt_in,
            problem.optout_updates_lambda,
        );
        apply_closing(&mut state, &record, &market, policy);
    }

    let records = priced.into_iter().map(|r| r.expect("all priced")).collect();
    Ok(ReppSolution { state, records })
}
