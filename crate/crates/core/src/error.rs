use thiserror::Error;

/// Errors raised by the ergodic-optimization routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("enumeration budget exceeded: {requested} items requested, limit is {limit}")]
    Budget { requested: u128, limit: u128 },

    #[error("invalid rotation number {p}/{q}: {reason}")]
    InvalidRotation { p: u64, q: u64, reason: &'static str },

    #[error("base point carries {available} symbols, {needed} are required")]
    Context { needed: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is singular or not finite")]
    NotInvertible,

    #[error("matrix is not positive definite")]
    Indefinite,

    #[error("vector is not weakly decreasing: {0:?}")]
    OutOfChamber(Vec<f64>),

    #[error("word {word:?} is not admissible for the system")]
    Inadmissible { word: Vec<u8> },

    #[error("subaction iteration diverges at rate {rate:e}: the estimate is below the maximal average")]
    Diverging { rate: f64 },

    #[error("extended precision exhausted: {0}")]
    Precision(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
