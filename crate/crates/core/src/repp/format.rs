//! Line-oriented text format for replay problems, city dumps and
//! transaction logs.
//!
//! ```text
//! #N=4
//! #kernel=grid-separable
//! #R=10
//! ...
//! 0 250000 251250.5 1 0 0 61000 0
//! 1 ...
//! 5 35 2 412345.67
//! ```
//!
//! Header lines are `#key=value`. A line with 8 fields is a house
//! (`id v u opt_in x y lambda0 rho0`); a line with 3 or 4 fields is a
//! transaction (`t c i [price]`). House values are written in shortest
//! round-trip form; prices with two decimals.

use std::io::{self, Write};

use super::solver::ReppProblem;
use super::types::{
    Geometry, HouseId, HouseNode, KernelShape, KernelSpec, MarketState, Money, PiVariant,
    Transaction, TransactionRecord, UpdateCoefficients,
};
use crate::error::FormatError;

/// Header of a problem: model parameters, in write order.
pub fn problem_header(
    houses: usize,
    geometry: &Geometry,
    kernel: &KernelSpec,
    coefficients: &UpdateCoefficients,
    optout_updates_lambda: bool,
) -> Vec<(String, String)> {
    let mut h = vec![("N".to_string(), houses.to_string())];
    if let Geometry::Grid { side } = geometry {
        h.push(("side".into(), side.to_string()));
    }
    h.push(("kernel".into(), kernel.shape.as_str().into()));
    h.push(("R".into(), kernel.r.to_string()));
    h.push(("R_x".into(), kernel.r_x.to_string()));
    h.push(("R_y".into(), kernel.r_y.to_string()));
    h.push(("a".into(), coefficients.a.to_string()));
    h.push(("b".into(), coefficients.b.to_string()));
    h.push(("pi_variant".into(), coefficients.pi_variant.as_str().into()));
    h.push((
        "optout_updates_lambda".into(),
        if optout_updates_lambda { "on" } else { "off" }.into(),
    ));
    h
}

pub fn write_header<W: Write>(out: &mut W, header: &[(String, String)]) -> io::Result<()> {
    for (k, v) in header {
        writeln!(out, "#{k}={v}")?;
    }
    Ok(())
}

pub fn write_houses<W: Write>(
    out: &mut W,
    houses: &[HouseNode],
    state: &MarketState,
) -> io::Result<()> {
    for (id, h) in houses.iter().enumerate() {
        writeln!(
            out,
            "{id} {} {} {} {} {} {} {}",
            h.v,
            h.u,
            u8::from(h.opt_in),
            h.position.0,
            h.position.1,
            state.lambda[id],
            state.rho[id]
        )?;
    }
    Ok(())
}

pub fn write_transactions<W: Write>(out: &mut W, records: &[TransactionRecord]) -> io::Result<()> {
    for r in records {
        writeln!(
            out,
            "{} {} {} {:.2}",
            r.contract_day, r.closing_day, r.house, r.price
        )?;
    }
    Ok(())
}

/// Writes a full problem (header, houses, transactions). Transactions
/// without a price are written with three fields.
pub fn write_problem<W: Write>(
    out: &mut W,
    problem: &ReppProblem,
    extra_header: &[(String, String)],
) -> io::Result<()> {
    write_header(
        out,
        &problem_header(
            problem.houses.len(),
            &problem.geometry,
            &problem.kernel,
            &problem.coefficients,
            problem.optout_updates_lambda,
        ),
    )?;
    write_header(out, extra_header)?;
    write_houses(out, &problem.houses, &problem.initial_state)?;
    for t in &problem.transactions {
        match t.price {
            Some(p) => writeln!(
                out,
                "{} {} {} {:.2}",
                t.contract_day, t.closing_day, t.house, p
            )?,
            None => writeln!(out, "{} {} {}", t.contract_day, t.closing_day, t.house)?,
        }
    }
    Ok(())
}

/// Parsed contents of one file; any of the three sections may be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub header: Vec<(String, String)>,
    pub houses: Vec<HouseNode>,
    pub lambda0: Vec<Money>,
    pub rho0: Vec<Money>,
    pub transactions: Vec<Transaction>,
    /// 1-based source line of each entry in `transactions`.
    pub transaction_lines: Vec<usize>,
}

fn field<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T, FormatError> {
    s.parse()
        .map_err(|_| FormatError::new(line, format!("cannot parse {name} from `{s}`")))
}

fn money(line: usize, name: &str, s: &str) -> Result<Money, FormatError> {
    let v: f64 = field(line, name, s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FormatError::new(
            line,
            format!("{name} must be finite, got `{s}`"),
        ))
    }
}

pub fn parse_document(text: &str) -> Result<Document, FormatError> {
    let mut doc = Document::default();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            match rest.split_once('=') {
                Some((key, value)) => doc
                    .header
                    .push((key.trim().to_string(), value.trim().to_string())),
                None => return Err(FormatError::new(line, "header line must be `#key=value`")),
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match fields.len() {
            8 => {
                let id: usize = field(line, "house id", fields[0])?;
                if id != doc.houses.len() {
                    return Err(FormatError::new(
                        line,
                        format!("house id {id} out of order, expected {}", doc.houses.len()),
                    ));
                }
                let opt_in = match fields[3] {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(FormatError::new(
                            line,
                            format!("opt_in must be 0 or 1, got `{other}`"),
                        ))
                    }
                };
                doc.houses.push(HouseNode {
                    v: money(line, "v", fields[1])?,
                    u: money(line, "u", fields[2])?,
                    opt_in,
                    position: (money(line, "x", fields[4])?, money(line, "y", fields[5])?),
                });
                doc.lambda0.push(money(line, "lambda0", fields[6])?);
                doc.rho0.push(money(line, "rho0", fields[7])?);
            }
            3 | 4 => {
                let price = match fields.get(3) {
                    Some(p) => Some(money(line, "price", p)?),
                    None => None,
                };
                doc.transactions.push(Transaction {
                    contract_day: field(line, "contract day", fields[0])?,
                    closing_day: field(line, "closing day", fields[1])?,
                    house: HouseId(field(line, "house", fields[2])?),
                    price,
                });
                doc.transaction_lines.push(line);
            }
            n => {
                return Err(FormatError::new(
                    line,
                    format!("expected 8 fields (house) or 3-4 fields (transaction), got {n}"),
                ))
            }
        }
    }
    Ok(doc)
}

impl Document {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Combines a city dump with a transaction log: houses from `self`,
    /// transactions from `log`, header keys from both (log wins).
    pub fn merge(mut self, log: Document) -> Document {
        self.header.extend(log.header);
        self.transactions.extend(log.transactions);
        self.transaction_lines.extend(log.transaction_lines);
        self
    }

    /// Builds a replay problem. Header errors report line 0; use
    /// `transaction_lines` to map solver errors back to the source.
    pub fn into_problem(self) -> Result<ReppProblem, FormatError> {
        let header_err = |m: String| FormatError::new(0, m);
        let num = |key: &str, default: Option<f64>| -> Result<f64, FormatError> {
            match self.get(key) {
                Some(s) => s
                    .parse()
                    .map_err(|_| header_err(format!("header `{key}` is not a number: `{s}`"))),
                None => default.ok_or_else(|| header_err(format!("missing header `{key}`"))),
            }
        };
        if let Some(n) = self.get("N") {
            let n: usize = n
                .parse()
                .map_err(|_| header_err(format!("header `N` is not an integer: `{n}`")))?;
            if n != self.houses.len() {
                return Err(header_err(format!(
                    "header says N={n} but {} house lines were read",
                    self.houses.len()
                )));
            }
        }
        let shape = match self.get("kernel") {
            Some(s) => {
                KernelShape::parse(s).ok_or_else(|| header_err(format!("unknown kernel `{s}`")))?
            }
            None => return Err(header_err("missing header `kernel`".into())),
        };
        let kernel = match shape {
            KernelShape::Radial => KernelSpec::radial(num("R", None)?),
            KernelShape::GridSeparable => {
                let r = self.get("R").and_then(|s| s.parse().ok());
                KernelSpec::grid(num("R_x", r)?, num("R_y", r)?)
            }
        };
        let pi_variant = match self.get("pi_variant") {
            Some(s) => PiVariant::parse(s)
                .ok_or_else(|| header_err(format!("unknown pi_variant `{s}`")))?,
            None => PiVariant::CaseStudy,
        };
        let coefficients = UpdateCoefficients {
            a: num("a", Some(0.0))?,
            b: num("b", Some(1.0))?,
            pi_variant,
        };
        let optout_updates_lambda = match self.get("optout_updates_lambda") {
            None | Some("on") => true,
            Some("off") => false,
            Some(s) => {
                return Err(header_err(format!(
                    "optout_updates_lambda must be on/off, got `{s}`"
                )))
            }
        };
        let geometry = match self.get("side") {
            Some(s) => Geometry::Grid {
                side: s
                    .parse()
                    .map_err(|_| header_err(format!("header `side` is not an integer: `{s}`")))?,
            },
            None => Geometry::Points,
        };
        Ok(ReppProblem {
            initial_state: MarketState::new(self.lambda0, self.rho0),
            houses: self.houses,
            geometry,
            transactions: self.transactions,
            kernel,
            coefficients,
            optout_updates_lambda,
        })
    }
}
