//! Circle-diffeomorphism conjugacy towers with prescribed invariant-measure
//! dimension, plus the estimators that probe them at finite stages.
//!
//! The construction composes period-`s` staircase maps `A = Id + a` into
//! conjugacies `h`, producing `f = h^-1 ∘ R_tau ∘ h` for rational rotation
//! stages `tau`. The library exposes:
//!
//! - [`numerics`]: precision-carrying reals, exact rationals, jets and the
//!   higher-order chain rule;
//! - [`bump`]: the smooth step used inside every staircase;
//! - [`staircase`]: the staircase diffeomorphism, its inverse, jets and norms;
//! - [`tower`]: stage selection, conditions, and evaluation of `h`/`f`;
//! - [`rotation`]: lifts, rotation-number estimation, convergent streams and
//!   Liouville/Diophantine certificates;
//! - [`measure`]: distribution functions, exceptional sets, pointwise and
//!   box dimension scans, Hölder fits.

pub mod bump;
pub mod error;
pub mod measure;
pub mod numerics;
pub mod rotation;
pub mod staircase;
pub mod tower;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::{BigInt, BigRational, Real, DEFAULT_PRECISION};
