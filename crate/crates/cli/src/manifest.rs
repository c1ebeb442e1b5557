//! Run manifests: layered settings (config file < environment < flags),
//! validation, and the `#key=value` metadata header written into every
//! output file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use mree_core::engine::SimConfig;
use mree_core::rng::RNG_ALGORITHM;
use mree_core::{
    CityConfig, ConfigError, KernelShape, KernelSpec, PiVariant, UpdateCoefficients, BUILD_ID,
};

pub const WORKERS_ENV: &str = "MREE_SIM_WORKERS";

/// Every key a settings layer may carry.
pub const KEYS: &[&str] = &[
    "size",
    "error_range",
    "neighborhood",
    "opt_out",
    "seed",
    "seeds",
    "days",
    "kernel",
    "pi_variant",
    "optout_updates_lambda",
    "a",
    "b",
    "listing_fraction",
    "offer_delay",
    "closing_delay",
    "lambda_min",
    "lambda_max",
    "x_min",
    "x_max",
    "burn_in",
    "out",
    "workers",
];

/// Keys written by this tool into output headers that carry no setting.
const INFORMATIONAL: &[&str] = &["N", "side", "R", "R_x", "R_y", "rng", "build"];

/// One layer of raw `key -> value` settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<&'static str, String>);

fn canonical_key(raw: &str) -> Option<&'static str> {
    let k = raw.trim().replace('-', "_");
    KEYS.iter().copied().find(|known| *known == k)
}

impl Settings {
    pub fn set(&mut self, key: &'static str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key));
        self.0.insert(key, value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Values from `over` replace values in `self`.
    pub fn layer(mut self, over: &Settings) -> Settings {
        for (k, v) in &over.0 {
            self.0.insert(k, v.clone());
        }
        self
    }

    /// Parses a config file. Accepts `key = value` lines and the `#key=value`
    /// headers of this tool's own outputs, so any output file can be fed
    /// back as `--config`. Other lines are skipped.
    pub fn parse_config(text: &str) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        for raw in text.lines() {
            let line = raw.trim();
            let body = line.strip_prefix('#').unwrap_or(line);
            let Some((key, value)) = body.split_once('=') else {
                continue;
            };
            let key = key.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                continue;
            }
            match canonical_key(key) {
                Some(k) => s.set(k, value.trim()),
                None if INFORMATIONAL.contains(&key) => {}
                None if line.starts_with('#') => {}
                None => return Err(ConfigError::new("config", format!("unknown key `{key}`"))),
            }
        }
        Ok(s)
    }

    pub fn from_env() -> Settings {
        let mut s = Settings::default();
        if let Ok(w) = std::env::var(WORKERS_ENV) {
            s.set("workers", w);
        }
        s
    }
}

fn parse_num<T: std::str::FromStr>(key: &'static str, s: &str) -> Result<T, ConfigError> {
    s.trim()
        .parse()
        .map_err(|_| ConfigError::new(key, format!("cannot parse `{s}`")))
}

/// Parses `v`, `v1,v2,...` or an inclusive `start:end:step` range (ranges
/// may be mixed with plain values).
pub fn parse_list(key: &'static str, s: &str) -> Result<Vec<f64>, ConfigError> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_num::<f64>(key, v)?),
            [start, end, step] => {
                let (start, end, step): (f64, f64, f64) = (
                    parse_num(key, start)?,
                    parse_num(key, end)?,
                    parse_num(key, step)?,
                );
                if step.is_nan() || step <= 0.0 || end < start {
                    return Err(ConfigError::new(key, format!("bad range `{item}`")));
                }
                let n = ((end - start) / step + 1e-9).floor() as usize;
                out.extend((0..=n).map(|k| start + k as f64 * step));
            }
            _ => return Err(ConfigError::new(key, format!("cannot parse `{item}`"))),
        }
    }
    if out.is_empty() {
        return Err(ConfigError::new(key, "empty list"));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::new(key, "values must be finite"));
    }
    Ok(out)
}

fn parse_int_list<T: TryFrom<u64>>(key: &'static str, s: &str) -> Result<Vec<T>, ConfigError> {
    parse_list(key, s)?
        .into_iter()
        .map(|v| {
            if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
                return Err(ConfigError::new(
                    key,
                    format!("`{v}` is not a non-negative integer"),
                ));
            }
            T::try_from(v as u64).map_err(|_| ConfigError::new(key, format!("`{v}` out of range")))
        })
        .collect()
}

fn parse_switch(key: &'static str, s: &str) -> Result<bool, ConfigError> {
    match s.trim() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(ConfigError::new(
            key,
            format!("expected on/off, got `{other}`"),
        )),
    }
}

/// Renames library config keys to the setting that controls them.
pub fn flag_key(e: ConfigError) -> ConfigError {
    let key = match e.key {
        "side" => "size",
        "neighborhood_size" => "neighborhood",
        "opt_out_fraction" => "opt_out",
        "daily_listing_fraction" => "listing_fraction",
        "offer_delay_days" => "offer_delay",
        other => other,
    };
    ConfigError { key, ..e }
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Merged and validated settings for a run or a sweep. The list-valued
/// fields span the sweep grid; a single run has one value in each.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub size: usize,
    pub error_ranges: Vec<f64>,
    pub neighborhoods: Vec<usize>,
    pub opt_outs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub days: u32,
    pub kernel: KernelShape,
    pub coefficients: UpdateCoefficients,
    pub optout_updates_lambda: bool,
    pub listing_fraction: f64,
    pub offer_delay: u32,
    pub closing_delay: u32,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Series and summaries are reported against the indices on this day.
    pub burn_in: u32,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub error_range: f64,
    pub neighborhood: usize,
    pub opt_out: f64,
    pub seed: u64,
}

impl Cell {
    pub fn file_stem(&self) -> String {
        format!(
            "series_e{}_r{}_o{}_s{}",
            self.error_range, self.neighborhood, self.opt_out, self.seed
        )
    }
}

impl RunManifest {
    pub fn from_settings(s: &Settings) -> Result<Self, ConfigError> {
        let city = CityConfig::default();
        let sim = SimConfig::default();
        let get = |k: &str| s.get(k).filter(|v| !v.trim().is_empty());

        let size = match get("size") {
            Some(v) => parse_num("size", v)?,
            None => {
                return Err(ConfigError::new(
                    "size",
                    "is required (no implicit default)",
                ))
            }
        };
        let seeds = match (get("seeds"), get("seed")) {
            (Some(list), _) => parse_int_list("seeds", list)?,
            (None, Some(one)) => vec![parse_num("seed", one)?],
            (None, None) => vec![city.seed],
        };
        let pi_variant = match get("pi_variant") {
            Some(v) => PiVariant::parse(v.trim())
                .ok_or_else(|| ConfigError::new("pi_variant", format!("unknown variant `{v}`")))?,
            None => sim.coefficients.pi_variant,
        };
        let kernel = match get("kernel") {
            Some(v) => KernelShape::parse(v.trim())
                .ok_or_else(|| ConfigError::new("kernel", format!("unknown kernel `{v}`")))?,
            None => KernelShape::GridSeparable,
        };
        let workers = match get("workers") {
            Some(v) => parse_num("workers", v)?,
            None => std::thread::available_parallelism().map_or(1, usize::from),
        };

        let m = RunManifest {
            size,
            error_ranges: match get("error_range") {
                Some(v) => parse_list("error_range", v)?,
                None => vec![city.error_range],
            },
            neighborhoods: match get("neighborhood") {
                Some(v) => parse_int_list("neighborhood", v)?,
                None => vec![city.neighborhood_size],
            },
            opt_outs: match get("opt_out") {
                Some(v) => parse_list("opt_out", v)?,
                None => vec![city.opt_out_fraction],
            },
            seeds,
            days: get("days").map_or(Ok(sim.horizon_days), |v| parse_num("days", v))?,
            kernel,
            coefficients: UpdateCoefficients {
                a: get("a").map_or(Ok(sim.coefficients.a), |v| parse_num("a", v))?,
                b: get("b").map_or(Ok(sim.coefficients.b), |v| parse_num("b", v))?,
                pi_variant,
            },
            optout_updates_lambda: get("optout_updates_lambda")
                .map_or(Ok(sim.optout_updates_lambda), |v| {
                    parse_switch("optout_updates_lambda", v)
                })?,
            listing_fraction: get("listing_fraction")
                .map_or(Ok(sim.daily_listing_fraction), |v| {
                    parse_num("listing_fraction", v)
                })?,
            offer_delay: get("offer_delay")
                .map_or(Ok(sim.offer_delay_days), |v| parse_num("offer_delay", v))?,
            closing_delay: get("closing_delay").map_or(Ok(sim.closing_delay_days), |v| {
                parse_num("closing_delay", v)
            })?,
            lambda_min: get("lambda_min")
                .map_or(Ok(city.lambda_min), |v| parse_num("lambda_min", v))?,
            lambda_max: get("lambda_max")
                .map_or(Ok(city.lambda_max), |v| parse_num("lambda_max", v))?,
            x_min: get("x_min").map_or(Ok(city.x_min), |v| parse_num("x_min", v))?,
            x_max: get("x_max").map_or(Ok(city.x_max), |v| parse_num("x_max", v))?,
            burn_in: get("burn_in").map_or(Ok(0), |v| parse_num("burn_in", v))?,
            out: get("out").map(PathBuf::from),
            workers,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks every cell's city and simulation config before any work starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::new("workers", "must be at least 1"));
        }
        if self.burn_in > self.days {
            return Err(ConfigError::new("burn_in", "must not exceed days"));
        }
        for cell in self.cells() {
            let (city, sim) = self.configs(&cell);
            city.validate().map_err(flag_key)?;
            sim.validate().map_err(flag_key)?;
            sim.kernel.validate().map_err(|e| ConfigError {
                key: "neighborhood",
                ..e
            })?;
        }
        Ok(())
    }

    /// Cartesian grid in error range, neighborhood, opt-out, seed order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &error_range in &self.error_ranges {
            for &neighborhood in &self.neighborhoods {
                for &opt_out in &self.opt_outs {
                    for &seed in &self.seeds {
                        out.push(Cell {
                            error_range,
                            neighborhood,
                            opt_out,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn single_cell(&self) -> Result<Cell, ConfigError> {
        let one = |key: &'static str, n: usize| {
            if n == 1 {
                Ok(())
            } else {
                Err(ConfigError::new(
                    key,
                    format!("takes a single value for `run`, got {n}"),
                ))
            }
        };
        one("error_range", self.error_ranges.len())?;
        one("neighborhood", self.neighborhoods.len())?;
        one("opt_out", self.opt_outs.len())?;
        one("seeds", self.seeds.len())?;
        Ok(self.cells()[0])
    }

    /// The neighborhood size sets both the key-point spacing and the kernel
    /// radius.
    pub fn configs(&self, cell: &Cell) -> (CityConfig, SimConfig) {
        let city = CityConfig {
            side: self.size,
            neighborhood_size: cell.neighborhood,
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            x_min: self.x_min,
            x_max: self.x_max,
            error_range: cell.error_range,
            opt_out_fraction: cell.opt_out,
            seed: cell.seed,
        };
        let r = cell.neighborhood as f64;
        let sim = SimConfig {
            daily_listing_fraction: self.listing_fraction,
            offer_delay_days: self.offer_delay,
            closing_delay_days: self.closing_delay,
            horizon_days: self.days,
            kernel: match self.kernel {
                KernelShape::Radial => KernelSpec::radial(r),
                KernelShape::GridSeparable => KernelSpec::grid(r, r),
            },
            coefficients: self.coefficients,
            optout_updates_lambda: self.optout_updates_lambda,
            seed: cell.seed,
        };
        (city, sim)
    }

    fn shared_header(&self) -> Vec<(String, String)> {
        let c = &self.coefficients;
        [
            ("days", self.days.to_string()),
            ("kernel", self.kernel.as_str().to_string()),
            ("pi_variant", c.pi_variant.as_str().to_string()),
            (
                "optout_updates_lambda",
                if self.optout_updates_lambda {
                    "on"
                } else {
                    "off"
                }
                .to_string(),
            ),
            ("a", c.a.to_string()),
            ("b", c.b.to_string()),
            ("listing_fraction", self.listing_fraction.to_string()),
            ("offer_delay", self.offer_delay.to_string()),
            ("closing_delay", self.closing_delay.to_string()),
            ("lambda_min", self.lambda_min.to_string()),
            ("lambda_max", self.lambda_max.to_string()),
            ("x_min", self.x_min.to_string()),
            ("x_max", self.x_max.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("rng", RNG_ALGORITHM.to_string()),
            ("build", BUILD_ID.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Header for one cell's outputs. Output directory and worker count are
    /// left out so that content does not depend on them.
    pub fn cell_header(&self, cell: &Cell) -> Vec<(String, String)> {
        let mut h: Vec<(String, String)> = [
            ("size", self.size.to_string()),
            ("error_range", cell.error_range.to_string()),
            ("neighborhood", cell.neighborhood.to_string()),
            ("opt_out", cell.opt_out.to_string()),
            ("seed", cell.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        h.extend(self.shared_header());
        h
    }

    /// Header for sweep-level outputs: the full grid.
    pub fn grid_header(&self) -> Vec<(String, String)> {
        let mut h: Vec<(String, String)> = [
            ("size", self.size.to_string()),
            ("error_range", join(&self.error_ranges)),
            ("neighborhood", join(&self.neighborhoods)),
            ("opt_out", join(&self.opt_outs)),
            ("seeds", join(&self.seeds)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        h.extend(self.shared_header());
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(pairs: &[(&'static str, &str)]) -> Settings {
        let mut s = Settings::default();
        for (k, v) in pairs {
            s.set(k, *v);
        }
        s
    }

    #[test]
    fn list_forms() {
        assert_eq!(parse_list("error_range", "10000").unwrap(), vec![10000.0]);
        assert_eq!(
            parse_list("opt_out", "0, 0.25,0.5").unwrap(),
            vec![0.0, 0.25, 0.5]
        );
        let r = parse_list("error_range", "5000:50000:5000").unwrap();
        assert_eq!(r.len(), 10);
        assert_eq!(r[9], 50000.0);
        assert!(parse_list("error_range", "").is_err());
        assert!(parse_list("error_range", "5:1:1").is_err());
        assert!(parse_int_list::<usize>("neighborhood", "2.5").is_err());
    }

    #[test]
    fn size_is_required() {
        let err = RunManifest::from_settings(&Settings::default()).unwrap_err();
        assert_eq!(err.key, "size");
    }

    #[test]
    fn validation_names_the_key() {
        let err = RunManifest::from_settings(&settings(&[("size", "101"), ("opt_out", "0,1.5")]))
            .unwrap_err();
        assert_eq!(err.key, "opt_out");
        let err = RunManifest::from_settings(&settings(&[("size", "101"), ("pi_variant", "nope")]))
            .unwrap_err();
        assert_eq!(err.key, "pi_variant");
        let err = RunManifest::from_settings(&settings(&[("size", "101"), ("workers", "0")]))
            .unwrap_err();
        assert_eq!(err.key, "workers");
    }

    #[test]
    fn later_layers_win() {
        let file = Settings::parse_config("size = 51\nworkers=2\n# comment\n").unwrap();
        let env = settings(&[("workers", "3")]);
        let flags = settings(&[("size", "31")]);
        let merged = file.layer(&env).layer(&flags);
        let m = RunManifest::from_settings(&merged).unwrap();
        assert_eq!((m.size, m.workers), (31, 3));
    }

    #[test]
    fn header_feeds_back_as_config() {
        let m = RunManifest::from_settings(&settings(&[
            ("size", "41"),
            ("error_range", "7500"),
            ("neighborhood", "5"),
            ("opt_out", "0.25"),
            ("seed", "9"),
            ("days", "60"),
            ("pi_variant", "net-of-rho"),
            ("optout_updates_lambda", "off"),
            ("burn_in", "3"),
        ]))
        .unwrap();
        let cell = m.single_cell().unwrap();
        let text: String = m
            .cell_header(&cell)
            .iter()
            .map(|(k, v)| format!("#{k}={v}\n"))
            .chain(std::iter::once("day,mree_index\n0,1\n".to_string()))
            .collect();
        let again = RunManifest::from_settings(&Settings::parse_config(&text).unwrap()).unwrap();
        assert_eq!(
            again.cell_header(&again.single_cell().unwrap()),
            m.cell_header(&cell)
        );
    }

    #[test]
    fn unknown_plain_key_is_rejected() {
        let err = Settings::parse_config("sizee = 3").unwrap_err();
        assert_eq!(err.key, "config");
        assert!(Settings::parse_config("#N=10\n#rng=x\n#whatever=1").is_ok());
    }

    #[test]
    fn grid_order_is_error_range_major() {
        let m = RunManifest::from_settings(&settings(&[
            ("size", "21"),
            ("error_range", "1,2"),
            ("neighborhood", "5"),
            ("seeds", "1,2,3"),
        ]))
        .unwrap();
        let cells = m.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!((cells[0].error_range, cells[0].seed), (1.0, 1));
        assert_eq!((cells[3].error_range, cells[3].seed), (2.0, 1));
        assert!(m.single_cell().is_err());
    }
}
