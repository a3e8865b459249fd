//! Hybrid classical/adiabatic factoring of biprimes.
//!
//! The classical stage writes `n = p * q` as one equation per binary column
//! ([`equations`]), bounds and propagates the cumulative carries
//! ([`simplify`]) and hands the small residual system to a simulated
//! adiabatic processor ([`hamiltonian`], [`adiabatic`]). [`pipeline`] ties
//! the stages together and decodes the measured state into factors.

pub mod adiabatic;
pub mod error;
pub mod equations;
pub mod hamiltonian;
pub mod pipeline;
pub mod polynomial;
pub mod simplify;
mod sparse;

pub use error::{Error, Result};
pub use equations::{build_equations, enumerate_splits, matrix_view, BitSplit, EquationSystem, SplitCase};
pub use polynomial::{Assignment, Bound, Domains, Polynomial, Variable};
pub use simplify::{init_bounds, propagate, refine_bounds, solve_residual_exhaustively, ResidualSystem};
