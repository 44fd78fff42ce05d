//! Cholesky factorisation of matrices whose entries are polynomials in the
//! forward shift `q` and backward shift `q*` on one-sided sequences, and its
//! use to compute sparse optimal control laws for tree networks.

pub mod cholesky;
pub mod error;
pub mod generator;
pub mod graphs;
pub mod json;
pub mod lqr;
pub mod op_matrix;
pub mod par;
pub mod random;
pub mod seq_engine;
pub mod shift_algebra;
pub mod solver;

pub use cholesky::{cholesky_tree, Factorisation};
pub use error::{Error, Result};
pub use lqr::{solve_lqr, Network, StateSpace};
pub use op_matrix::{OpMatrix, Permutation, SparsityPattern};
pub use seq_engine::Triple;
pub use shift_algebra::{Monomial, PartialSums, ShiftOp, Tolerances};
pub use solver::ControlLaw;
