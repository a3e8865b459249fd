use thiserror::Error;

use crate::polynomial::Variable;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("product of carry variables in monomial {0}")]
    CarryProduct(String),

    #[error("variable {0} has no value in the assignment")]
    Unassigned(Variable),

    #[error("variable {0} has no known range")]
    Unbounded(Variable),

    #[error("value {value} is outside the range of {var}")]
    OutOfBounds { var: Variable, value: i64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("bit split ({p_bits}, {q_bits}) is infeasible: {reason}")]
    InfeasibleSplit { p_bits: u32, q_bits: u32, reason: String },

    #[error("residual system has no free variables; nothing to encode")]
    NothingToEncode,

    #[error("{needed} variables/qubits exceed the cap of {cap}")]
    CapExceeded { needed: usize, cap: usize },

    #[error("basis state {index} does not satisfy the residual equations")]
    NotASolution { index: usize },

    #[error("{0} is prime or could not be split into two factors")]
    PrimeOrNotBiprime(u64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("zero-norm probability vector")]
    ZeroNorm,

    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
