//! Python bindings: city generation, simulation, the replay solver and the
//! pricing / kernel primitives.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mree_core::engine::{run, SimConfig};
use mree_core::metrics;
use mree_core::repp::format::parse_document;
use mree_core::repp::{self, HouseId};
use mree_core::scenario::{run_case_study, CaseKind, CaseParams};
use mree_core::{
    generate_city, solve_repp, City, CityConfig, KernelShape, KernelSpec, PiVariant, ReppProblem,
    Transaction, UpdateCoefficients,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kernel_spec(shape: &str, r_x: f64, r_y: Option<f64>) -> PyResult<KernelSpec> {
    let spec = match KernelShape::parse(shape) {
        Some(KernelShape::Radial) => KernelSpec::radial(r_x),
        Some(KernelShape::GridSeparable) => KernelSpec::grid(r_x, r_y.unwrap_or(r_x)),
        None => return Err(value_error(format!("unknown kernel `{shape}`"))),
    };
    spec.validate().map_err(value_error)?;
    Ok(spec)
}

fn coefficients(pi_variant: &str, a: f64, b: f64) -> PyResult<UpdateCoefficients> {
    let pi_variant = PiVariant::parse(pi_variant)
        .ok_or_else(|| value_error(format!("unknown pi_variant `{pi_variant}`")))?;
    Ok(UpdateCoefficients { a, b, pi_variant })
}

/// A generated grid city.
#[pyclass(name = "City", frozen)]
pub struct PyCity {
    inner: City,
}

#[pymethods]
impl PyCity {
    #[new]
    #[pyo3(signature = (size, neighborhood = 10, error_range = 10000.0, opt_out = 0.0, seed = 0))]
    fn new(
        size: usize,
        neighborhood: usize,
        error_range: f64,
        opt_out: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let config = CityConfig {
            side: size,
            neighborhood_size: neighborhood,
            error_range,
            opt_out_fraction: opt_out,
            seed,
            ..CityConfig::default()
        };
        Ok(Self {
            inner: generate_city(&config).map_err(value_error)?,
        })
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.side()
    }

    #[getter]
    fn neighborhood(&self) -> usize {
        self.inner.config.neighborhood_size
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn lambda0(&self) -> Vec<f64> {
        self.inner.initial_state.lambda.clone()
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.houses.iter().map(|h| h.v).collect()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.houses.iter().map(|h| h.u).collect()
    }

    #[getter]
    fn opt_in(&self) -> Vec<bool> {
        self.inner.houses.iter().map(|h| h.opt_in).collect()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner.config;
        format!(
            "City(size={}, neighborhood={}, error_range={}, opt_out={}, seed={})",
            c.side, c.neighborhood_size, c.error_range, c.opt_out_fraction, c.seed
        )
    }
}

/// Result of one simulation: per-day series, final estimates and the
/// transaction log as `(contract_day, closing_day, house, price)`.
#[pyclass(name = "Simulation", frozen, get_all)]
pub struct PySimulation {
    pub days: Vec<u32>,
    pub mree_index: Vec<f64>,
    pub owner_index: Vec<f64>,
    pub mree_inflation: Vec<f64>,
    pub owner_inflation: Vec<f64>,
    pub closings: Vec<u32>,
    pub final_lambda: Vec<f64>,
    pub final_rho: Vec<f64>,
    pub transactions: Vec<(u32, u32, u32, f64)>,
    pub listing_shortfalls: u64,
}

/// Runs the market on `city`. The kernel radius defaults to the city's
/// neighborhood size and the seed to the city's seed.
#[pyfunction]
#[pyo3(signature = (
    city, days = 2000, radius = None, kernel = "grid-separable", pi_variant = "case-study",
    optout_updates_lambda = true, listing_fraction = 0.0005, seed = None
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    city: &PyCity,
    days: u32,
    radius: Option<f64>,
    kernel: &str,
    pi_variant: &str,
    optout_updates_lambda: bool,
    listing_fraction: f64,
    seed: Option<u64>,
) -> PyResult<PySimulation> {
    let city = &city.inner;
    let r = radius.unwrap_or(city.config.neighborhood_size as f64);
    let config = SimConfig {
        daily_listing_fraction: listing_fraction,
        horizon_days: days,
        kernel: kernel_spec(kernel, r, None)?,
        coefficients: coefficients(pi_variant, 0.0, 1.0)?,
        optout_updates_lambda,
        seed: seed.unwrap_or(city.config.seed),
        ..SimConfig::default()
    };
    let out = run(city, &config, &mut ()).map_err(value_error)?;
    let rows = &out.series.rows;
    Ok(PySimulation {
        days: rows.iter().map(|r| r.day).collect(),
        mree_index: rows.iter().map(|r| r.mree_index).collect(),
        owner_index: rows.iter().map(|r| r.owner_index).collect(),
        mree_inflation: rows.iter().map(|r| r.mree_inflation).collect(),
        owner_inflation: rows.iter().map(|r| r.owner_inflation).collect(),
        closings: rows.iter().map(|r| r.closings).collect(),
        transactions: out
            .log
            .iter()
            .map(|t| (t.contract_day, t.closing_day, t.house.0, t.price))
            .collect(),
        final_lambda: out.final_state.lambda,
        final_rho: out.final_state.rho,
        listing_shortfalls: out.listing_shortfalls,
    })
}

/// Replays `(contract_day, closing_day, house)` triples over `city` with the
/// solver and returns `(lambda, rho, prices)`.
#[pyfunction]
#[pyo3(signature = (
    city, transactions, radius = None, kernel = "grid-separable", pi_variant = "case-study",
    optout_updates_lambda = true
))]
fn replay(
    city: &PyCity,
    transactions: Vec<(u32, u32, u32)>,
    radius: Option<f64>,
    kernel: &str,
    pi_variant: &str,
    optout_updates_lambda: bool,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let city = &city.inner;
    let r = radius.unwrap_or(city.config.neighborhood_size as f64);
    let problem = ReppProblem {
        houses: city.houses.clone(),
        geometry: city.geometry(),
        initial_state: city.initial_state.clone(),
        transactions: transactions
            .into_iter()
            .map(|(contract_day, closing_day, house)| Transaction {
                contract_day,
                closing_day,
                house: HouseId(house),
                price: None,
            })
            .collect(),
        kernel: kernel_spec(kernel, r, None)?,
        coefficients: coefficients(pi_variant, 0.0, 1.0)?,
        optout_updates_lambda,
    };
    let solution = solve_repp(&problem).map_err(value_error)?;
    let prices = solution.records.iter().map(|r| r.price).collect();
    Ok((solution.state.lambda, solution.state.rho, prices))
}

/// Solves a problem given in the text format (`city.txt` contents, plus an
/// optional transaction log). Returns `(lambda, rho, prices)`.
#[pyfunction]
#[pyo3(signature = (problem, log = None))]
fn solve_text(problem: &str, log: Option<&str>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut doc = parse_document(problem).map_err(value_error)?;
    if let Some(log) = log {
        doc = doc.merge(parse_document(log).map_err(value_error)?);
    }
    let problem = doc.into_problem().map_err(value_error)?;
    let solution = solve_repp(&problem).map_err(value_error)?;
    let prices = solution.records.iter().map(|r| r.price).collect();
    Ok((solution.state.lambda, solution.state.rho, prices))
}

#[pyfunction]
#[pyo3(signature = (a, b, r_x, r_y = None, kernel = "radial"))]
fn kernel_weight(
    a: (f64, f64),
    b: (f64, f64),
    r_x: f64,
    r_y: Option<f64>,
    kernel: &str,
) -> PyResult<f64> {
    Ok(repp::kernel_weight(&kernel_spec(kernel, r_x, r_y)?, a, b))
}

#[pyfunction]
fn price_opted_in(lambda: f64, v: f64, u: f64, rho: f64) -> f64 {
    repp::price_opted_in(lambda, v, u, rho)
}

#[pyfunction]
fn price_opted_out(lambda: f64, u: f64, rho: f64) -> f64 {
    repp::price_opted_out(lambda, u, rho)
}

/// Ordinary least squares; returns `(slope, intercept, r_squared)`.
#[pyfunction]
fn linear_fit(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(value_error("xs and ys differ in length"));
    }
    let pts: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
    let fit = metrics::linear_fit(&pts).map_err(|e| value_error(format!("{e:?}")))?;
    Ok((fit.slope, fit.intercept, fit.r_squared))
}

/// Runs the two-house scenario (`"over"` or `"under"`) and returns
/// `(steps, failed_checks)`; each step is a dict.
#[pyfunction]
#[pyo3(signature = (kind, distance = 0.0))]
fn case_study(py: Python<'_>, kind: &str, distance: f64) -> PyResult<(Vec<Py<PyAny>>, usize)> {
    let kind =
        CaseKind::parse(kind).ok_or_else(|| value_error(format!("unknown case `{kind}`")))?;
    let params = CaseParams {
        distance,
        ..CaseParams::defaults(kind)
    };
    let report = run_case_study(kind, &params);
    let failed = report
        .checks(&params)
        .iter()
        .filter(|(_, observed, expected)| (observed - expected).abs() > 1e-9)
        .count();
    let steps = report
        .steps
        .iter()
        .map(|s| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("house", s.house.to_string())?;
            d.set_item("price", s.price)?;
            d.set_item("mree_estimate", s.mree_estimate)?;
            d.set_item("lambda", s.lambda.to_vec())?;
            d.set_item("rho", s.rho.to_vec())?;
            d.set_item("d_lambda", s.d_lambda.to_vec())?;
            d.set_item("d_rho", s.d_rho.to_vec())?;
            Ok(d.into_any().unbind())
        })
        .collect::<PyResult<_>>()?;
    Ok((steps, failed))
}

#[pymodule]
fn mree_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCity>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(solve_text, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_weight, m)?)?;
    m.add_function(wrap_pyfunction!(price_opted_in, m)?)?;
    m.add_function(wrap_pyfunction!(price_opted_out, m)?)?;
    m.add_function(wrap_pyfunction!(linear_fit, m)?)?;
    m.add_function(wrap_pyfunction!(case_study, m)?)?;
    m.add("BUILD_ID", mree_core::BUILD_ID)?;
    Ok(())
}
