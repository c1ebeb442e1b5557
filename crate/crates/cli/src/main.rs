use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mree_cli::commands::{cmd_replay, cmd_run, cmd_sweep, render_case_study};
use mree_cli::{CliError, RunManifest, Settings};
use mree_core::scenario::{CaseKind, CaseParams};
use mree_core::{ConfigError, KernelSpec, PiVariant};

#[derive(Parser)]
#[command(
    name = "mree-sim",
    version,
    about = "Simulate estimator-driven house price inflation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One simulation: writes series.csv, transactions.log, city.txt and cells.csv.
    Run(ManifestArgs),
    /// Cartesian grid of runs over a worker pool: one series per cell plus summary.csv.
    Sweep {
        #[command(flatten)]
        manifest: ManifestArgs,
        /// Also write each cell's transaction log.
        #[arg(long)]
        write_logs: bool,
    },
    /// Replay a transaction log over a city dump and print the final indices.
    Replay {
        #[arg(long)]
        city: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Replay the rounded logged prices instead of re-pricing.
        #[arg(long)]
        use_logged_prices: bool,
    },
    /// Scripted two-house scenario with checked increments.
    CaseStudy(CaseArgs),
}

/// Every value is kept as text; parsing and validation happen after the
/// config file and environment layers are merged.
#[derive(Args, Default)]
struct ManifestArgs {
    /// Settings file (`key = value` lines, or any output file of this tool).
    #[arg(long)]
    config: Option<PathBuf>,
    /// City side length in houses.
    #[arg(long)]
    size: Option<String>,
    /// Absolute construction error range: value, list, or start:end:step.
    #[arg(long, allow_hyphen_values = true)]
    error_range: Option<String>,
    /// Key-point spacing and kernel radius: value or list.
    #[arg(long)]
    neighborhood: Option<String>,
    /// Fraction of houses opted out: value or list.
    #[arg(long)]
    opt_out: Option<String>,
    #[arg(long)]
    days: Option<String>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    /// case-study | paper-literal | net-of-rho
    #[arg(long)]
    pi_variant: Option<String>,
    /// on | off
    #[arg(long)]
    optout_updates_lambda: Option<String>,
    /// grid-separable | radial
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    listing_fraction: Option<String>,
    #[arg(long)]
    offer_delay: Option<String>,
    #[arg(long)]
    closing_delay: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Report inflation relative to this day instead of day 0.
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (also MREE_SIM_WORKERS).
    #[arg(long)]
    workers: Option<String>,
}

impl ManifestArgs {
    fn flags(&self) -> Settings {
        let mut s = Settings::default();
        let pairs: [(&'static str, &Option<String>); 18] = [
            ("size", &self.size),
            ("error_range", &self.error_range),
            ("neighborhood", &self.neighborhood),
            ("opt_out", &self.opt_out),
            ("days", &self.days),
            ("seed", &self.seed),
            ("seeds", &self.seeds),
            ("pi_variant", &self.pi_variant),
            ("optout_updates_lambda", &self.optout_updates_lambda),
            ("kernel", &self.kernel),
            ("listing_fraction", &self.listing_fraction),
            ("offer_delay", &self.offer_delay),
            ("closing_delay", &self.closing_delay),
            ("a", &self.a),
            ("b", &self.b),
            ("burn_in", &self.burn_in),
            ("workers", &self.workers),
            ("out", &self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                s.set(k, v.clone());
            }
        }
        // A seed list on the command line replaces a single seed from lower layers and vice versa.
        if self.seed.is_some() || self.seeds.is_some() {
            s.set("seed", self.seed.clone().unwrap_or_default());
            s.set("seeds", self.seeds.clone().unwrap_or_default());
        }
        s
    }

    fn manifest(&self) -> Result<RunManifest, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
                Settings::parse_config(&text)?
            }
            None => Settings::default(),
        };
        let merged = file.layer(&Settings::from_env()).layer(&self.flags());
        Ok(RunManifest::from_settings(&merged)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Over,
    Under,
}

#[derive(Args)]
struct CaseArgs {
    #[arg(value_enum)]
    variant: CaseArg,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long)]
    v_a: Option<f64>,
    #[arg(long)]
    u_a: Option<f64>,
    #[arg(long)]
    lambda_b: Option<f64>,
    /// B's construction value; B is estimated exactly.
    #[arg(long)]
    v_b: Option<f64>,
    #[arg(long)]
    distance: Option<f64>,
    /// Radial kernel radius.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    pi_variant: Option<String>,
}

fn case_study(args: &CaseArgs) -> Result<(), CliError> {
    let kind = match args.variant {
        CaseArg::Over => CaseKind::Over,
        CaseArg::Under => CaseKind::Under,
    };
    let mut p = CaseParams::defaults(kind);
    p.lambda_a = args.lambda_a.unwrap_or(p.lambda_a);
    p.v_a = args.v_a.unwrap_or(p.v_a);
    p.u_a = args.u_a.unwrap_or(p.u_a);
    p.lambda_b = args.lambda_b.unwrap_or(p.lambda_b);
    p.v_b = args.v_b.unwrap_or(p.v_b);
    p.distance = args.distance.unwrap_or(p.distance);
    if let Some(r) = args.radius {
        p.kernel = KernelSpec::radial(r);
    }
    if let Some(v) = &args.pi_variant {
        p.coefficients.pi_variant = PiVariant::parse(v)
            .ok_or_else(|| ConfigError::new("pi_variant", format!("unknown variant `{v}`")))?;
    }
    p.kernel.validate()?;
    if p.distance.is_nan() || p.distance < 0.0 {
        return Err(ConfigError::new("distance", "must be non-negative").into());
    }
    let (text, _, failed) = render_case_study(kind, &p);
    print!("{text}");
    if failed > 0 {
        return Err(CliError::CaseStudy(failed));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let s = cmd_run(&args.manifest()?)?;
            println!(
                "day {}: mree_inflation={} owner_inflation={} transactions={} listing_shortfalls={} -> {}",
                s.days,
                s.final_mree_inflation,
                s.final_owner_inflation,
                s.transactions,
                s.listing_shortfalls,
                s.out.display()
            );
        }
        Command::Sweep {
            manifest,
            write_logs,
        } => {
            let m = manifest.manifest()?;
            let s = cmd_sweep(&m, write_logs)?;
            println!(
                "{} cells ok, {} failed -> {}",
                s.records.len(),
                s.failures.len(),
                m.out
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default()
            );
            for (cell, msg) in &s.failures {
                eprintln!("{}: {msg}", cell.file_stem());
            }
            if !s.failures.is_empty() {
                return Err(CliError::Cells {
                    failed: s.failures.len(),
                    total: s.failures.len() + s.records.len(),
                });
            }
        }
        Command::Replay {
            city,
            log,
            use_logged_prices,
        } => {
            let r = cmd_replay(&city, &log, use_logged_prices)?;
            println!(
                "transactions={} mree_index={} owner_index={} mree_inflation={} owner_inflation={} max_price_deviation={}",
                r.transactions,
                r.fin.mree,
                r.fin.owner,
                r.mree_inflation(),
                r.owner_inflation(),
                r.max_deviation
            );
            if r.mismatched > 0 {
                return Err(CliError::PriceMismatch {
                    mismatched: r.mismatched,
                    max_deviation: r.max_deviation,
                });
            }
        }
        Command::CaseStudy(args) => case_study(&args)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
