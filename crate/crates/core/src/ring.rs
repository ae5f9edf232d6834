//! The coefficient ring seen by operator arithmetic.
//!
//! Operator composition needs the total x-derivative of coefficients. For the
//! free jet ring that is [`DiffPoly::total_x_derivative`]; reduced rings (KdV)
//! replace some derivative jets by differential polynomials and must reduce
//! after every derivative.

use crate::diffpoly::DiffPoly;

pub trait DiffRing: Send + Sync {
    /// Total x-derivative, returned in the ring's normal form.
    fn dx(&self, p: &DiffPoly) -> DiffPoly;

    /// Bring an arbitrary polynomial to the ring's normal form.
    fn reduce(&self, p: &DiffPoly) -> DiffPoly;
}

/// Free differential polynomial ring in the jets and explicit times.
#[derive(Clone, Copy, Debug, Default)]
pub struct FreeRing;

impl DiffRing for FreeRing {
    fn dx(&self, p: &DiffPoly) -> DiffPoly {
        p.total_x_derivative()
    }

    fn reduce(&self, p: &DiffPoly) -> DiffPoly {
        p.clone()
    }
}
