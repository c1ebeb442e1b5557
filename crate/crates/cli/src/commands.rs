use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mree_core::city::City;
use mree_core::engine::{run, RunOutput};
use mree_core::metrics::{
    cell_growth, market_indices, write_cells_csv, MarketIndices, SweepRecord, SUMMARY_COLUMNS,
};
use mree_core::repp::format::{
    parse_document, problem_header, write_header, write_houses, write_transactions, Document,
};
use mree_core::scenario::{run_case_study, CaseKind, CaseParams, CaseReport};
use mree_core::{generate_city, solve_repp, ConfigError, FormatError, InflationSeries, ReppError};
use rayon::prelude::*;

use crate::error::CliError;
use crate::manifest::{flag_key, Cell, RunManifest};

pub const SERIES_FILE: &str = "series.csv";
pub const LOG_FILE: &str = "transactions.log";
pub const CITY_FILE: &str = "city.txt";
pub const CELLS_FILE: &str = "cells.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILURES_FILE: &str = "failed_cells.txt";

/// Absolute slack when comparing replayed prices with the two-decimal log.
pub const PRICE_TOLERANCE: f64 = 0.005;

/// One simulated cell with its reported (possibly rebased) series.
pub struct Simulation {
    pub cell: Cell,
    pub city: City,
    pub output: RunOutput,
    pub series: InflationSeries,
}

pub fn simulate(manifest: &RunManifest, cell: Cell) -> Result<Simulation, ConfigError> {
    let (city_cfg, sim_cfg) = manifest.configs(&cell);
    let city = generate_city(&city_cfg).map_err(flag_key)?;
    let output = run(&city, &sim_cfg, &mut ()).map_err(flag_key)?;
    let series = if manifest.burn_in == 0 {
        output.series.clone()
    } else {
        output
            .series
            .rebased(manifest.burn_in)
            .ok_or_else(|| ConfigError::new("burn_in", "day not in series"))?
    };
    Ok(Simulation {
        cell,
        city,
        output,
        series,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(CliError::io(path))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    body(&mut w)
        .and_then(|()| w.flush())
        .map_err(CliError::io(path))
}

fn out_dir(manifest: &RunManifest) -> Result<&Path, CliError> {
    let dir = manifest
        .out
        .as_deref()
        .ok_or_else(|| ConfigError::new("out", "is required"))?;
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    Ok(dir)
}

pub fn write_series(
    path: &Path,
    header: &[(String, String)],
    series: &InflationSeries,
) -> Result<(), CliError> {
    write_file(path, |w| {
        write_header(w, header)?;
        series.write_csv(w)
    })
}

pub fn write_log(
    path: &Path,
    header: &[(String, String)],
    sim: &Simulation,
) -> Result<(), CliError> {
    write_file(path, |w| {
        write_header(w, header)?;
        write_transactions(w, &sim.output.log)
    })
}

/// City dump in the replay format: model header, run header, house lines.
pub fn write_city(path: &Path, manifest: &RunManifest, sim: &Simulation) -> Result<(), CliError> {
    let (_, sim_cfg) = manifest.configs(&sim.cell);
    let model = problem_header(
        sim.city.len(),
        &sim.city.geometry(),
        &sim_cfg.kernel,
        &sim_cfg.coefficients,
        sim_cfg.optout_updates_lambda,
    );
    write_file(path, |w| {
        write_header(w, &model)?;
        write_header(w, &manifest.cell_header(&sim.cell))?;
        write_houses(w, &sim.city.houses, &sim.city.initial_state)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out: PathBuf,
    pub days: u32,
    pub final_mree_inflation: f64,
    pub final_owner_inflation: f64,
    pub transactions: usize,
    pub listing_shortfalls: u64,
}

/// Writes series, transaction log, city dump and per-cell growth.
pub fn cmd_run(manifest: &RunManifest) -> Result<RunSummary, CliError> {
    let cell = manifest.single_cell()?;
    let dir = out_dir(manifest)?;
    let sim = simulate(manifest, cell)?;
    let header = manifest.cell_header(&cell);

    write_series(&dir.join(SERIES_FILE), &header, &sim.series)?;
    write_log(&dir.join(LOG_FILE), &header, &sim)?;
    write_city(&dir.join(CITY_FILE), manifest, &sim)?;
    let cells = cell_growth(&sim.city, &sim.output.final_state);
    write_file(&dir.join(CELLS_FILE), |w| {
        write_header(w, &header)?;
        write_cells_csv(w, &cells)
    })?;

    let last = sim.series.last().expect("series has a day-0 row");
    Ok(RunSummary {
        out: dir.to_path_buf(),
        days: last.day,
        final_mree_inflation: last.mree_inflation,
        final_owner_inflation: last.owner_inflation,
        transactions: sim.output.log.len(),
        listing_shortfalls: sim.output.listing_shortfalls,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    /// Successful cells, in grid order.
    pub records: Vec<SweepRecord>,
    pub failures: Vec<(Cell, String)>,
}

fn sweep_cell(
    manifest: &RunManifest,
    dir: &Path,
    cell: Cell,
    write_logs: bool,
) -> Result<SweepRecord, CliError> {
    let sim = simulate(manifest, cell)?;
    let header = manifest.cell_header(&cell);
    let stem = cell.file_stem();
    write_series(&dir.join(format!("{stem}.csv")), &header, &sim.series)?;
    if write_logs {
        write_log(&dir.join(format!("{stem}.log")), &header, &sim)?;
    }
    let last = sim.series.last().expect("series has a day-0 row");
    Ok(SweepRecord {
        error_range: cell.error_range,
        neighborhood: cell.neighborhood,
        opt_out: cell.opt_out,
        seed: cell.seed,
        days: last.day,
        final_mree_inflation: last.mree_inflation,
        final_owner_inflation: last.owner_inflation,
    })
}

/// Runs every cell of the grid on `manifest.workers` threads. Files depend
/// only on the cell, and the summary is assembled in grid order.
pub fn cmd_sweep(manifest: &RunManifest, write_logs: bool) -> Result<SweepSummary, CliError> {
    let dir = out_dir(manifest)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.workers)
        .build()
        .map_err(|e| ConfigError::new("workers", e.to_string()))?;
    let cells = manifest.cells();
    let results: Vec<(Cell, Result<SweepRecord, CliError>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| (cell, sweep_cell(manifest, dir, cell, write_logs)))
            .collect()
    });

    let mut summary = SweepSummary {
        records: Vec::new(),
        failures: Vec::new(),
    };
    for (cell, r) in results {
        match r {
            Ok(rec) => summary.records.push(rec),
            Err(e) => summary.failures.push((cell, e.to_string())),
        }
    }

    let path = dir.join(SUMMARY_FILE);
    write_file(&path, |w| {
        write_header(w, &manifest.grid_header())?;
        writeln!(w, "{SUMMARY_COLUMNS}")?;
        summary.records.iter().try_for_each(|r| r.write_csv(w))
    })?;
    let failures = dir.join(FAILURES_FILE);
    if summary.failures.is_empty() {
        if failures.exists() {
            fs::remove_file(&failures).map_err(CliError::io(&failures))?;
        }
    } else {
        write_file(&failures, |w| {
            summary
                .failures
                .iter()
                .try_for_each(|(cell, msg)| writeln!(w, "{}: {msg}", cell.file_stem()))
        })?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub initial: MarketIndices,
    pub fin: MarketIndices,
    pub transactions: usize,
    /// Largest |replayed - logged| over transactions that carry a price.
    pub max_deviation: f64,
    pub mismatched: usize,
}

impl ReplayReport {
    pub fn mree_inflation(&self) -> f64 {
        self.fin.mree / self.initial.mree - 1.0
    }

    pub fn owner_inflation(&self) -> f64 {
        self.fin.owner / self.initial.owner - 1.0
    }
}

fn read_document(path: &Path) -> Result<Document, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_document(&text).map_err(|source| CliError::Format {
        path: path.to_path_buf(),
        source,
    })
}

/// Replays a transaction log over a city dump. Prices are recomputed
/// unless `use_logged_prices` is set; recomputed prices are checked against
/// the logged ones.
pub fn cmd_replay(
    city_path: &Path,
    log_path: &Path,
    use_logged_prices: bool,
) -> Result<ReplayReport, CliError> {
    let city = read_document(city_path)?;
    let log = read_document(log_path)?;
    let format_err = |path: &Path, line: usize, message: String| CliError::Format {
        path: path.to_path_buf(),
        source: FormatError::new(line, message),
    };
    if !city.transactions.is_empty() {
        return Err(format_err(
            city_path,
            city.transaction_lines[0],
            "city dump must not contain transactions".into(),
        ));
    }

    let logged: Vec<Option<f64>> = log.transactions.iter().map(|t| t.price).collect();
    let lines = log.transaction_lines.clone();
    let mut doc = city.merge(log);
    if !use_logged_prices {
        doc.transactions.iter_mut().for_each(|t| t.price = None);
    }
    let problem = doc.into_problem().map_err(|source| CliError::Format {
        path: log_path.to_path_buf(),
        source,
    })?;
    let solution = solve_repp(&problem).map_err(|e| match e {
        ReppError::Unsorted { index, .. }
        | ReppError::UnknownHouse { index, .. }
        | ReppError::ClosingBeforeContract { index, .. } => {
            format_err(log_path, lines[index], e.to_string())
        }
        ReppError::Config(c) => CliError::Config(c),
        other => format_err(city_path, 0, other.to_string()),
    })?;

    let mut max_deviation: f64 = 0.0;
    let mut mismatched = 0;
    for (rec, logged) in solution.records.iter().zip(&logged) {
        if let Some(p) = logged {
            let d = (rec.price - p).abs();
            max_deviation = max_deviation.max(d);
            if d > PRICE_TOLERANCE + 1e-12 * p.abs() {
                mismatched += 1;
            }
        }
    }
    Ok(ReplayReport {
        initial: market_indices(&problem.initial_state, &problem.houses),
        fin: market_indices(&solution.state, &problem.houses),
        transactions: solution.records.len(),
        max_deviation,
        mismatched,
    })
}

/// Tolerance of the case-study checks.
pub const CASE_TOLERANCE: f64 = 1e-9;

fn money(x: f64) -> String {
    format!("{x:.2}")
}

/// Human-readable walk through the scenario, one block per sale, followed
/// by the checks. Returns the text and the number of failed checks.
pub fn render_case_study(kind: CaseKind, params: &CaseParams) -> (String, CaseReport, usize) {
    let report = run_case_study(kind, params);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "case {}: A v={} u={} lambda={}; B v=u={} lambda={}; kernel weight A<->B = {}",
        match kind {
            CaseKind::Over => "over",
            CaseKind::Under => "under",
        },
        money(params.v_a),
        money(params.u_a),
        money(params.lambda_a),
        money(params.v_b),
        money(params.lambda_b),
        report.weight
    );
    match kind {
        CaseKind::Over => {
            let _ = writeln!(
                s,
                "  the estimator values A above what its owner would ask;"
            );
            let _ = writeln!(s, "  buyers pay the published figure and neighbours read the sale as a rise in their own value");
        }
        CaseKind::Under => {
            let _ = writeln!(
                s,
                "  the estimator values A below its owner's reservation price;"
            );
            let _ = writeln!(s, "  A only sells at the owner's price, and the estimator attributes the gap to location");
        }
    }
    for (k, step) in report.steps.iter().enumerate() {
        let _ = writeln!(
            s,
            "step {}: house {} sells for {} (estimator said {})",
            k + 1,
            step.house,
            money(step.price),
            money(step.mree_estimate)
        );
        for (h, name) in ['A', 'B'].iter().enumerate() {
            let _ = writeln!(
                s,
                "    {name}: lambda {} ({:+.2})  rho {} ({:+.2})",
                money(step.lambda[h]),
                step.d_lambda[h],
                money(step.rho[h]),
                step.d_rho[h]
            );
        }
    }
    let mut failed = 0;
    for (what, observed, expected) in report.checks(params) {
        let ok = (observed - expected).abs() <= CASE_TOLERANCE;
        failed += usize::from(!ok);
        let _ = writeln!(
            s,
            "[{}] {what}: observed {observed}, expected {expected}",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    (s, report, failed)
}
