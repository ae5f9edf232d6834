//! Shared fixtures for the criterion benchmarks in `benches/`.

use qtorus_core::dressing::generic_dressing;
use qtorus_core::kp::KpContext;
use qtorus_core::{Family, PsiDO};

/// The generic dressing operator `1 + Σ_{k≤order} ω_k ∂^{-k}`.
pub fn dressing(order: u32) -> PsiDO {
    generic_dressing(Family::Omega, order)
}

/// A KP context at the default horizon and ε-cap.
pub fn kp(order: u32) -> KpContext {
    KpContext::new(3, order, 2).expect("valid parameters")
}
