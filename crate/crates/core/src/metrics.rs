//! Market indices, inflation series, and the small amount of statistics the
//! experiments need.

use std::io::{self, Write};

use crate::city::City;
use crate::engine::DayReport;
use crate::repp::{HouseNode, MarketState, Money};

/// Column order of the per-day series CSV.
pub const SERIES_COLUMNS: &str =
    "day,mree_index,owner_index,mree_inflation,owner_inflation,closings,mean_closing_price";

/// Column order of the sweep summary CSV.
pub const SUMMARY_COLUMNS: &str =
    "error_range,neighborhood,opt_out,seed,days,final_mree_inflation,final_owner_inflation";

/// Written in place of the mean price on days without closings.
pub const ABSENT: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketIndices {
    /// Mean of `λ + v`: what the estimator publishes.
    pub mree: Money,
    /// Mean of `λ + u + ρ`: what owners believe.
    pub owner: Money,
}

/// Both indices, accumulated in ascending house id.
pub fn market_indices(state: &MarketState, houses: &[HouseNode]) -> MarketIndices {
    let mut mree = 0.0;
    let mut owner = 0.0;
    for (n, h) in houses.iter().enumerate() {
        mree += state.lambda[n] + h.v;
        owner += state.lambda[n] + h.u + state.rho[n];
    }
    let count = houses.len() as f64;
    MarketIndices {
        mree: mree / count,
        owner: owner / count,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub day: u32,
    pub mree_index: Money,
    pub owner_index: Money,
    pub mree_inflation: f64,
    pub owner_inflation: f64,
    pub closings: u32,
    pub mean_closing_price: Option<Money>,
}

impl SeriesRow {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(
            out,
            "{},{},{},{},{},{},",
            self.day,
            self.mree_index,
            self.owner_index,
            self.mree_inflation,
            self.owner_inflation,
            self.closings
        )?;
        match self.mean_closing_price {
            Some(p) => writeln!(out, "{p}"),
            None => writeln!(out, "{ABSENT}"),
        }
    }
}

/// Receives series rows as a run produces them.
pub trait Recorder {
    fn record(&mut self, row: &SeriesRow);
}

impl Recorder for () {
    fn record(&mut self, _row: &SeriesRow) {}
}

impl Recorder for Vec<SeriesRow> {
    fn record(&mut self, row: &SeriesRow) {
        self.push(*row);
    }
}

/// Per-day rows measured against the day-0 indices.
#[derive(Debug, Clone, PartialEq)]
pub struct InflationSeries {
    pub baseline: MarketIndices,
    pub rows: Vec<SeriesRow>,
}

impl InflationSeries {
    pub fn new(baseline: MarketIndices) -> Self {
        Self {
            baseline,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, day: u32, indices: MarketIndices, report: DayReport) -> SeriesRow {
        debug_assert!(self.rows.last().is_none_or(|r| r.day < day));
        let row = SeriesRow {
            day,
            mree_index: indices.mree,
            owner_index: indices.owner,
            mree_inflation: indices.mree / self.baseline.mree - 1.0,
            owner_inflation: indices.owner / self.baseline.owner - 1.0,
            closings: report.closings,
            mean_closing_price: (report.closings > 0)
                .then(|| report.price_sum / report.closings as f64),
        };
        self.rows.push(row);
        row
    }

    pub fn last(&self) -> Option<&SeriesRow> {
        self.rows.last()
    }

    /// Rows re-expressed against the indices at `day` instead of day 0.
    pub fn rebased(&self, day: u32) -> Option<InflationSeries> {
        let base = self.rows.iter().find(|r| r.day == day)?;
        let baseline = MarketIndices {
            mree: base.mree_index,
            owner: base.owner_index,
        };
        let mut out = InflationSeries::new(baseline);
        for r in self.rows.iter().filter(|r| r.day >= day) {
            out.rows.push(SeriesRow {
                mree_inflation: r.mree_index / baseline.mree - 1.0,
                owner_inflation: r.owner_index / baseline.owner - 1.0,
                ..*r
            });
        }
        Some(out)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{SERIES_COLUMNS}")?;
        for r in &self.rows {
            r.write_csv(out)?;
        }
        Ok(())
    }
}

/// Ordinary least squares result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all x values are equal")]
    DegenerateX,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::DegenerateX);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    // a constant y is fitted exactly by the zero-slope line
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// One cell of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub error_range: Money,
    pub neighborhood: usize,
    pub opt_out: f64,
    pub seed: u64,
    pub days: u32,
    pub final_mree_inflation: f64,
    pub final_owner_inflation: f64,
}

impl SweepRecord {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            self.error_range,
            self.neighborhood,
            self.opt_out,
            self.seed,
            self.days,
            self.final_mree_inflation,
            self.final_owner_inflation
        )
    }
}

/// λ growth aggregated over one key-grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrowth {
    pub cell_row: usize,
    pub cell_col: usize,
    pub houses: usize,
    pub mean_v: Money,
    pub mean_lambda0: Money,
    pub mean_lambda: Money,
}

impl CellGrowth {
    pub fn growth(&self) -> f64 {
        self.mean_lambda / self.mean_lambda0 - 1.0
    }
}

pub const CELL_COLUMNS: &str = "cell_row,cell_col,houses,mean_v,mean_lambda0,mean_lambda,growth";

/// Per key-cell breakdown of location growth, for checking whether cells
/// with expensive construction inflate faster.
pub fn cell_growth(city: &City, state: &MarketState) -> Vec<CellGrowth> {
    let spacing = city.key_grid.spacing;
    let cells = city.key_grid.points - 1;
    let side = city.side();
    let mut acc = vec![(0usize, 0.0, 0.0, 0.0); cells * cells];
    for (n, h) in city.houses.iter().enumerate() {
        let (row, col) = (n / side, n % side);
        let (cr, cc) = (
            (row / spacing).min(cells - 1),
            (col / spacing).min(cells - 1),
        );
        let a = &mut acc[cr * cells + cc];
        a.0 += 1;
        a.1 += h.v;
        a.2 += city.initial_state.lambda[n];
        a.3 += state.lambda[n];
    }
    acc.iter()
        .enumerate()
        .filter(|(_, a)| a.0 > 0)
        .map(|(k, a)| {
            let c = a.0 as f64;
            CellGrowth {
                cell_row: k / cells,
                cell_col: k % cells,
                houses: a.0,
                mean_v: a.1 / c,
                mean_lambda0: a.2 / c,
                mean_lambda: a.3 / c,
            }
        })
        .collect()
}

pub fn write_cells_csv<W: Write>(out: &mut W, cells: &[CellGrowth]) -> io::Result<()> {
    writeln!(out, "{CELL_COLUMNS}")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.cell_row,
            c.cell_col,
            c.houses,
            c.mean_v,
            c.mean_lambda0,
            c.mean_lambda,
            c.growth()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repp::{
        apply_closing, ClosingPolicy, Geometry, HouseId, KernelSpec, Market, TransactionRecord,
        UpdateCoefficients,
    };

    fn house(v: f64, u: f64, x: f64) -> HouseNode {
        HouseNode {
            v,
            u,
            opt_in: true,
            position: (x, 0.0),
        }
    }

    #[test]
    fn zero_error_indices_agree() {
        let houses = vec![
            house(200_000.0, 200_000.0, 0.0),
            house(310_000.0, 310_000.0, 1.0),
        ];
        let state = MarketState::with_zero_rho(vec![40_000.0, 90_000.0]);
        let idx = market_indices(&state, &houses);
        assert_eq!(idx.mree, idx.owner);
    }

    #[test]
    fn uniform_city_index() {
        let houses = vec![house(250_000.0, 240_000.0, 0.0); 7];
        let state = MarketState::with_zero_rho(vec![60_000.0; 7]);
        assert_eq!(market_indices(&state, &houses).mree, 310_000.0);
    }

    #[test]
    fn underestimation_ratchet_raises_both_indices() {
        // A underestimated by 20000, B exact; both within the kernel
        let houses = vec![
            house(280_000.0, 300_000.0, 0.0),
            house(250_000.0, 250_000.0, 1.0),
        ];
        let geometry = Geometry::Points;
        let market = Market {
            houses: &houses,
            geometry: &geometry,
            kernel: KernelSpec::radial(4.0),
            coefficients: UpdateCoefficients::default(),
        };
        let mut state = MarketState::with_zero_rho(vec![100_000.0, 100_000.0]);
        let before = market_indices(&state, &houses);
        let record = TransactionRecord::new(5, 35, HouseId(0), 400_000.0);
        apply_closing(&mut state, &record, &market, ClosingPolicy::UpdateRho);
        let after = market_indices(&state, &houses);
        assert!(after.mree > before.mree);
        assert!(after.owner > before.owner);
        // λ_A += 20000, λ_B += 15000
        assert_eq!(after.mree - before.mree, 17_500.0);
    }

    #[test]
    fn exact_line_fit() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 2.0 * k as f64)).collect();
        let fit = linear_fit(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_fit() {
        let fit = linear_fit(&[(1.0, 3.0), (2.0, 3.0), (4.0, 3.0)]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.intercept, 3.0);
    }

    #[test]
    fn noisy_fit_r_squared_below_one() {
        let fit = linear_fit(&[(0.0, 0.0), (1.0, 2.0), (2.0, 1.0), (3.0, 3.0)]).unwrap();
        assert!(fit.r_squared > 0.0 && fit.r_squared < 1.0);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            linear_fit(&[(1.0, 1.0), (2.0, 2.0)]),
            Err(FitError::TooFewPoints(2))
        );
        assert_eq!(
            linear_fit(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]),
            Err(FitError::DegenerateX)
        );
    }

    #[test]
    fn series_rows_and_csv() {
        let base = MarketIndices {
            mree: 100.0,
            owner: 200.0,
        };
        let mut s = InflationSeries::new(base);
        s.push(0, base, DayReport::default());
        let row = s.push(
            1,
            MarketIndices {
                mree: 110.0,
                owner: 200.0,
            },
            DayReport {
                closings: 2,
                price_sum: 7.0,
            },
        );
        assert!((row.mree_inflation - 0.1).abs() < 1e-15);
        assert_eq!(row.owner_inflation, 0.0);
        assert_eq!(row.mean_closing_price, Some(3.5));
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SERIES_COLUMNS);
        assert_eq!(lines[1], "0,100,200,0,0,0,NA");
        assert!(lines[2].ends_with(",2,3.5"));
    }

    #[test]
    fn rebase_moves_baseline() {
        let base = MarketIndices {
            mree: 100.0,
            owner: 100.0,
        };
        let mut s = InflationSeries::new(base);
        for (d, m) in [(0, 100.0), (1, 120.0), (2, 150.0)] {
            s.push(d, MarketIndices { mree: m, owner: m }, DayReport::default());
        }
        let r = s.rebased(1).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].mree_inflation, 0.0);
        assert_eq!(r.rows[1].mree_inflation, 0.25);
    }
}
