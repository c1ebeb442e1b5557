use thiserror::Error;

/// A configuration value outside its allowed range.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration: `{key}` {reason}")]
pub struct ConfigError {
    pub key: &'static str,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: &'static str, reason: impl Into<String>) -> Self {
        Self {
            key,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReppError {
    #[error("transaction {index} closes on day {closing_day}, before the previous closing day {previous}")]
    Unsorted {
        index: usize,
        closing_day: u32,
        previous: u32,
    },
    #[error("transaction {index} references unknown house {house} (city has {houses} houses)")]
    UnknownHouse {
        index: usize,
        house: u32,
        houses: usize,
    },
    #[error(
        "transaction {index} closes (day {closing_day}) before its contract (day {contract_day})"
    )]
    ClosingBeforeContract {
        index: usize,
        contract_day: u32,
        closing_day: u32,
    },
    #[error("initial state has {got} entries, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("distance table has {got} entries, expected {expected}")]
    DistanceTable { expected: usize, got: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Malformed text in the line-oriented problem / log format.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}
