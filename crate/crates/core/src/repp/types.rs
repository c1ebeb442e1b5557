use crate::error::{ConfigError, ReppError};

/// US dollars.
pub type Money = f64;

/// Index of a house, `0..N`. On a grid city of side `s`, house `id` sits at
/// column `id % s`, row `id / s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HouseId(pub u32);

impl HouseId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_grid(row: usize, col: usize, side: usize) -> Self {
        HouseId((row * side + col) as u32)
    }

    pub fn grid_coords(self, side: usize) -> (usize, usize) {
        (self.index() / side, self.index() % side)
    }
}

impl std::fmt::Display for HouseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Static per-house data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HouseNode {
    /// Construction features value as estimated by the MREE.
    pub v: Money,
    /// Construction features value as known by owners and expert bidders.
    pub u: Money,
    /// Whether the house is published by the MREE.
    pub opt_in: bool,
    /// `(x, y)` in house-grid units.
    pub position: (f64, f64),
}

/// The mutable estimates: location value λ and owner market adjustment ρ
/// per house, after `closings_applied` closings.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    pub lambda: Vec<Money>,
    pub rho: Vec<Money>,
    pub closings_applied: u64,
    /// Number of times a negative λ increment was clamped at zero.
    pub lambda_clamps: u64,
}

impl MarketState {
    pub fn new(lambda: Vec<Money>, rho: Vec<Money>) -> Self {
        assert_eq!(lambda.len(), rho.len(), "λ and ρ must have equal length");
        Self {
            lambda,
            rho,
            closings_applied: 0,
            lambda_clamps: 0,
        }
    }

    /// ρ = 0 everywhere.
    pub fn with_zero_rho(lambda: Vec<Money>) -> Self {
        let rho = vec![0.0; lambda.len()];
        Self::new(lambda, rho)
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

/// A transaction as input to the replay solver; the price may be absent, in
/// which case the solver computes it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transaction {
    pub contract_day: u32,
    pub closing_day: u32,
    pub house: HouseId,
    pub price: Option<Money>,
}

/// A price as locked on the contract day: the house's λ at that moment plus
/// the construction part on top of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub lambda: Money,
    pub premium: Money,
}

impl Quote {
    pub fn price(&self) -> Money {
        self.lambda + self.premium
    }
}

/// A priced transaction.
///
/// `quote` is kept when the price was computed in-process. Updates then work
/// from its parts, so a sale at exactly the MREE estimate yields exactly zero
/// increments instead of a rounding residue. Prices read back from text have
/// no quote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransactionRecord {
    pub contract_day: u32,
    pub closing_day: u32,
    pub house: HouseId,
    pub price: Money,
    pub quote: Option<Quote>,
}

impl From<TransactionRecord> for Transaction {
    fn from(r: TransactionRecord) -> Self {
        Transaction {
            contract_day: r.contract_day,
            closing_day: r.closing_day,
            house: r.house,
            price: Some(r.price),
        }
    }
}

impl TransactionRecord {
    pub fn new(contract_day: u32, closing_day: u32, house: HouseId, price: Money) -> Self {
        Self {
            contract_day,
            closing_day,
            house,
            price,
            quote: None,
        }
    }

    pub fn quoted(contract_day: u32, closing_day: u32, house: HouseId, quote: Quote) -> Self {
        Self {
            contract_day,
            closing_day,
            house,
            price: quote.price(),
            quote: Some(quote),
        }
    }

    /// The same transaction with its price dropped.
    pub fn unpriced(&self) -> Transaction {
        Transaction {
            price: None,
            ..Transaction::from(*self)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelShape {
    /// `ReLU((R - d) / R)` on the Euclidean distance.
    Radial,
    /// Product of per-axis factors `ReLU((R_x - d_x) / R_x)`.
    GridSeparable,
}

impl KernelShape {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelShape::Radial => "radial",
            KernelShape::GridSeparable => "grid-separable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "radial" => Some(KernelShape::Radial),
            "grid-separable" | "grid" => Some(KernelShape::GridSeparable),
            _ => None,
        }
    }
}

/// Influence kernel. Radial reads only `r`; grid-separable reads only
/// `r_x` and `r_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub r: f64,
    pub r_x: f64,
    pub r_y: f64,
}

impl KernelSpec {
    pub fn radial(r: f64) -> Self {
        Self {
            shape: KernelShape::Radial,
            r,
            r_x: r,
            r_y: r,
        }
    }

    pub fn grid(r_x: f64, r_y: f64) -> Self {
        Self {
            shape: KernelShape::GridSeparable,
            r: r_x.max(r_y),
            r_x,
            r_y,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |key, val: f64| {
            if val.is_finite() && val > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(
                    key,
                    format!("must be a positive finite radius, got {val}"),
                ))
            }
        };
        match self.shape {
            KernelShape::Radial => check("R", self.r),
            KernelShape::GridSeparable => {
                check("R_x", self.r_x)?;
                check("R_y", self.r_y)
            }
        }
    }

    /// Half-widths of the axis-aligned box outside which the weight is zero.
    pub(crate) fn support_half_widths(&self) -> (f64, f64) {
        match self.shape {
            KernelShape::Radial => (self.r, self.r),
            KernelShape::GridSeparable => (self.r_x, self.r_y),
        }
    }
}

/// Which form of the ρ update to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiVariant {
    /// `ReLU((p − (λ_i + v_i)) / (a·λ_i + b) − u_i) · w`: the price gap over the
    /// estimate, scaled, then less the owner value.
    ScaledGap,
    /// `ReLU(p − λ_i − u_i) · w`: neighbours see the sale exceed location
    /// plus true construction value. A seller's own ρ is passed on to every
    /// neighbour at each sale, so ρ compounds.
    CaseStudy,
    /// `ReLU(p − λ_i − u_i − ρ_i) · w`: only the part of the price not
    /// already explained by the seller's ρ is passed on. Growth stays
    /// bounded by the error range.
    NetOfRho,
}

impl PiVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PiVariant::ScaledGap => "paper-literal",
            PiVariant::CaseStudy => "case-study",
            PiVariant::NetOfRho => "net-of-rho",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper-literal" => Some(PiVariant::ScaledGap),
            "case-study" => Some(PiVariant::CaseStudy),
            "net-of-rho" => Some(PiVariant::NetOfRho),
            _ => None,
        }
    }
}

/// Coefficients `a`, `b` shared by the λ and ρ updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateCoefficients {
    pub a: f64,
    pub b: f64,
    pub pi_variant: PiVariant,
}

impl Default for UpdateCoefficients {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            pi_variant: PiVariant::CaseStudy,
        }
    }
}

impl UpdateCoefficients {
    /// Rejects coefficients that make `1 + a·v` vanish for some house, or
    /// that make the ρ denominator non-positive at λ = 0.
    pub fn validate(&self, houses: &[HouseNode]) -> Result<(), ConfigError> {
        if !self.a.is_finite() || !self.b.is_finite() {
            return Err(ConfigError::new("a", "coefficients must be finite"));
        }
        if let Some(h) = houses.iter().find(|h| 1.0 + self.a * h.v == 0.0) {
            return Err(ConfigError::new(
                "a",
                format!("1 + a·v vanishes for a house with v = {}", h.v),
            ));
        }
        if self.pi_variant == PiVariant::ScaledGap && (self.b <= 0.0 || self.a < 0.0) {
            return Err(ConfigError::new(
                "b",
                "paper-literal ρ update needs a ≥ 0 and b > 0 so a·λ + b stays positive",
            ));
        }
        Ok(())
    }
}

/// What a closing is allowed to update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosingPolicy {
    /// λ and ρ (opted-in house).
    UpdateRho,
    /// λ only (opted-out house).
    SkipRho,
    /// Neither; the sale is invisible to the estimator. Only the counter moves.
    Unobserved,
}

/// How distances between houses are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Houses are the grid `side × side`; position of id is `(id % side, id / side)`.
    /// Kernel support is enumerated as a box around the transacted house.
    Grid { side: usize },
    /// Arbitrary positions; Euclidean distance, full scan per closing.
    Points,
    /// Explicit symmetric `N × N` distance table (row-major). Radial kernel only.
    Table(Vec<f64>),
}

impl Geometry {
    pub fn validate(&self, houses: &[HouseNode], kernel: &KernelSpec) -> Result<(), ReppError> {
        match self {
            Geometry::Grid { side } => {
                if side * side != houses.len() {
                    return Err(ConfigError::new(
                        "side",
                        format!("grid of side {side} does not hold {} houses", houses.len()),
                    )
                    .into());
                }
                let misplaced = houses
                    .iter()
                    .enumerate()
                    .any(|(id, h)| h.position != ((id % side) as f64, (id / side) as f64));
                if misplaced {
                    return Err(ConfigError::new(
                        "side",
                        "house positions do not match the grid layout",
                    )
                    .into());
                }
                Ok(())
            }
            Geometry::Points => Ok(()),
            Geometry::Table(table) => {
                let expected = houses.len() * houses.len();
                if table.len() != expected {
                    return Err(ReppError::DistanceTable {
                        expected,
                        got: table.len(),
                    });
                }
                if kernel.shape != KernelShape::Radial {
                    return Err(ConfigError::new(
                        "kernel",
                        "a distance table only supports the radial kernel",
                    )
                    .into());
                }
                Ok(())
            }
        }
    }
}

impl ClosingPolicy {
    /// Policy for a closing of a house with the given opt-in status.
    pub fn for_house(opt_in: bool, optout_updates_lambda: bool) -> Self {
        match (opt_in, optout_updates_lambda) {
            (true, _) => ClosingPolicy::UpdateRho,
            (false, true) => ClosingPolicy::SkipRho,
            (false, false) => ClosingPolicy::Unobserved,
        }
    }
}
