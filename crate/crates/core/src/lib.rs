//! Exact truncated pseudo-differential operator calculus for the KP, KdV and
//! BKP hierarchies, their additional (Orlov-Shulman) symmetries and the
//! quantum torus flows built from them.
//!
//! Everything is exact: coefficients are rationals, the quantum parameter
//! enters as the nilpotent `ε = log q`, and truncated operators carry a
//! validity window so that every equality that is asserted is sound.

pub mod catalog;
pub mod derivation;
pub mod diffpoly;
pub mod dressing;
pub mod eps;
pub mod flows;
pub mod kp;
pub mod psido;
pub mod error;
pub mod rational;
pub mod reductions;
pub mod report;
pub mod ring;
pub mod torus;

pub use derivation::Derivation;
pub use diffpoly::{DiffPoly, Family, Generator, Monomial};
pub use eps::EpsScalar;
pub use psido::PsiDO;
pub use error::{Error, Result};
pub use rational::Rational;
pub use report::{Report, Status};
