//! Reductions of the KP hierarchy: KdV (`L = ∂² + u`) and BKP (`L* = −∂L∂^{-1}`).

pub mod bkp;
pub mod kdv;

pub use bkp::{solve_b_constraints, BkpContext, Substitution};
pub use kdv::{KdvContext, KdvRing};
