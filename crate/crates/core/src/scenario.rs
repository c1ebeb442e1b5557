//! Scripted two-house scenarios: house A is mis-estimated by the MREE,
//! house B is estimated exactly, and the two are sold in turn.

use crate::repp::{
    apply_closing, market_quote, ClosingPolicy, Geometry, HouseId, HouseNode, KernelSpec, Market,
    MarketState, Money, TransactionRecord, UpdateCoefficients,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    /// The MREE overestimates A's construction value (`v_A > u_A`).
    Over,
    /// The MREE underestimates A's construction value (`v_A < u_A`).
    Under,
}

impl CaseKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "over" => Some(CaseKind::Over),
            "under" => Some(CaseKind::Under),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseParams {
    pub lambda_a: Money,
    pub v_a: Money,
    pub u_a: Money,
    pub lambda_b: Money,
    /// B is estimated exactly: `u_B = v_B`.
    pub v_b: Money,
    /// Distance between A and B.
    pub distance: f64,
    pub kernel: KernelSpec,
    pub coefficients: UpdateCoefficients,
}

impl CaseParams {
    pub fn defaults(kind: CaseKind) -> Self {
        let (v_a, u_a) = match kind {
            CaseKind::Over => (300_000.0, 290_000.0),
            CaseKind::Under => (280_000.0, 300_000.0),
        };
        Self {
            lambda_a: 100_000.0,
            v_a,
            u_a,
            lambda_b: 100_000.0,
            v_b: 300_000.0,
            distance: 0.0,
            kernel: KernelSpec::radial(10.0),
            coefficients: UpdateCoefficients::default(),
        }
    }
}

/// State of both houses after one sale.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseStep {
    pub house: char,
    pub price: Money,
    /// `λ + v` of the sold house when the price was set.
    pub mree_estimate: Money,
    pub lambda: [Money; 2],
    pub rho: [Money; 2],
    pub d_lambda: [Money; 2],
    pub d_rho: [Money; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub kind: CaseKind,
    /// Kernel weight between A and B.
    pub weight: f64,
    pub steps: Vec<CaseStep>,
}

impl CaseReport {
    /// `(what, observed, expected)` for the increments with a closed form.
    pub fn checks(&self, params: &CaseParams) -> Vec<(&'static str, Money, Money)> {
        let w = self.weight;
        let s = &self.steps;
        match self.kind {
            CaseKind::Over => {
                let gap = params.v_a - params.u_a;
                vec![
                    (
                        "A sells at the MREE estimate",
                        s[0].price,
                        s[0].mree_estimate,
                    ),
                    ("λ_A unchanged by A's sale", s[0].d_lambda[0], 0.0),
                    ("λ_B unchanged by A's sale", s[0].d_lambda[1], 0.0),
                    ("ρ_B gain after A's sale", s[0].d_rho[1], gap * w),
                    (
                        "B sells above its MREE estimate by ρ_B",
                        s[1].price - s[1].mree_estimate,
                        gap * w,
                    ),
                    ("λ_B gain after B's sale", s[1].d_lambda[1], gap * w),
                    ("λ_A gain after B's sale", s[1].d_lambda[0], gap * w * w),
                ]
            }
            CaseKind::Under => {
                let gap = params.u_a - params.v_a;
                vec![
                    (
                        "A sells at owner value",
                        s[0].price,
                        params.lambda_a + params.u_a,
                    ),
                    ("λ_A gain after A's sale", s[0].d_lambda[0], gap),
                    ("λ_B gain after A's sale", s[0].d_lambda[1], gap * w),
                    ("ρ_B unchanged by A's sale", s[0].d_rho[1], 0.0),
                    (
                        "B sells at the raised MREE estimate",
                        s[1].price,
                        s[1].mree_estimate,
                    ),
                    ("A resale raises λ_A again", s[2].d_lambda[0], gap),
                    ("A resale raises λ_B again", s[2].d_lambda[1], gap * w),
                ]
            }
        }
    }
}

/// Sells A, then B, then A again, each sale priced and closed before the
/// next is signed.
pub fn run_case_study(kind: CaseKind, params: &CaseParams) -> CaseReport {
    let houses = [
        HouseNode {
            v: params.v_a,
            u: params.u_a,
            opt_in: true,
            position: (0.0, 0.0),
        },
        HouseNode {
            v: params.v_b,
            u: params.v_b,
            opt_in: true,
            position: (params.distance, 0.0),
        },
    ];
    let geometry = Geometry::Points;
    let market = Market {
        houses: &houses,
        geometry: &geometry,
        kernel: params.kernel,
        coefficients: params.coefficients,
    };
    let mut state = MarketState::with_zero_rho(vec![params.lambda_a, params.lambda_b]);
    let mut steps = Vec::new();
    for (k, idx) in [0usize, 1, 0].into_iter().enumerate() {
        let before = state.clone();
        let h = &houses[idx];
        let quote = market_quote(h, state.lambda[idx], state.rho[idx]);
        let price = quote.price();
        let record = TransactionRecord::quoted(
            40 * k as u32 + 5,
            40 * k as u32 + 35,
            HouseId(idx as u32),
            quote,
        );
        apply_closing(&mut state, &record, &market, ClosingPolicy::UpdateRho);
        steps.push(CaseStep {
            house: if idx == 0 { 'A' } else { 'B' },
            price,
            mree_estimate: before.lambda[idx] + h.v,
            lambda: [state.lambda[0], state.lambda[1]],
            rho: [state.rho[0], state.rho[1]],
            d_lambda: [
                state.lambda[0] - before.lambda[0],
                state.lambda[1] - before.lambda[1],
            ],
            d_rho: [state.rho[0] - before.rho[0], state.rho[1] - before.rho[1]],
        });
    }
    CaseReport {
        kind,
        weight: market.weight(0, 1),
        steps,
    }
}
