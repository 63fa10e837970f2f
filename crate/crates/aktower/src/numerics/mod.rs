//! Scalars, exact rationals, jets, and the chain-rule combinatorics.

pub mod bruno;
pub mod jet;
pub mod real;

pub use bruno::{bruno_coefficient, bruno_coefficient_sum, enumerate_bruno_tuples, BrunoTuple};
pub use jet::{jet_compose, jet_invert, Jet};
pub use real::{BigInt, BigRational, Real, DEFAULT_PRECISION, MIN_PRECISION};
