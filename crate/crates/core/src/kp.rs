//! The KP hierarchy: dressing, Lax and Orlov-Shulman operators, and the Sato,
//! additional and quantum torus flows.

use std::sync::Arc;

use crate::derivation::Derivation;
use crate::diffpoly::{DiffPoly, Family};
use crate::dressing::{generic_dressing, Dressing, PowerCache};
use crate::error::{Error, Result};
use crate::flows::{self, FlowCache, Hierarchy};
use crate::psido::PsiDO;
use crate::rational::Rational;
use crate::report::{residual_details, Report, Status};
use crate::ring::FreeRing;

pub struct KpContext {
    t: u32,
    dressing: Dressing,
    l: PsiDO,
    gamma: PsiDO,
    m: PsiDO,
    powers: PowerCache,
    cache: FlowCache,
}

impl KpContext {
    /// `S = 1 + Σ_{k≤O} ω_k ∂^{-k}`, `L = S∂S^{-1}`, `Γ = Σ_{i≤T} i t_i ∂^{i-1}`, `M = SΓS^{-1}`.
    pub fn new(t: u32, o: u32, d: u32) -> Result<Self> {
        Self::build(t, o, d, true)
    }

    /// Same construction with the `t_1` term left out of `Γ`, so that `[L, M] = 0` instead of `1`.
    pub fn without_t1_term(t: u32, o: u32, d: u32) -> Result<Self> {
        Self::build(t, o, d, false)
    }

    fn build(t: u32, o: u32, d: u32, with_t1: bool) -> Result<Self> {
        if t < 1 || o < 2 {
            return Err(Error::InvalidParams(format!("KP needs T >= 1 and O >= 2 (got T = {t}, O = {o})")));
        }
        let ring = Arc::new(FreeRing);
        let dressing = Dressing::new(ring.clone(), Family::Omega, generic_dressing(Family::Omega, o), (1..=o).collect(), t, d)?;
        let l = dressing.conjugate(&PsiDO::d());
        let first = if with_t1 { 1 } else { 2 };
        let mut gamma = PsiDO::zero();
        for i in first..=t {
            gamma = gamma.add(&PsiDO::monomial(i as i32 - 1, DiffPoly::time(i).scale_rational(&Rational::from_int(i as i64))));
        }
        // t_i, i ≥ 2, are constants for ∂, so S t_i ∂^{i-1} S^{-1} = t_i L^{i-1}
        let powers = PowerCache::new(ring.clone(), PsiDO::zero(), l.clone(), -(o as i32) - 2);
        let mut m = if with_t1 { dressing.conjugate(&PsiDO::mult(DiffPoly::time(1))) } else { PsiDO::zero() };
        for i in 2..=t {
            let ti = PsiDO::mult(DiffPoly::time(i).scale_rational(&Rational::from_int(i as i64)));
            m = m.add(&dressing.compose(&ti, &powers.lax_power(i - 1)));
        }
        let powers = PowerCache::new(ring, m.clone(), l.clone(), -(o as i32) - 2);
        Ok(KpContext { t, dressing, l, gamma, m, powers, cache: FlowCache::default() })
    }

    pub fn horizon(&self) -> u32 {
        self.t
    }

    pub fn order(&self) -> u32 {
        self.dressing.order()
    }

    pub fn cap(&self) -> u32 {
        self.dressing.cap()
    }

    pub fn s(&self) -> &PsiDO {
        self.dressing.s()
    }

    pub fn s_inv(&self) -> &PsiDO {
        self.dressing.s_inv()
    }

    pub fn l(&self) -> &PsiDO {
        &self.l
    }

    pub fn gamma(&self) -> &PsiDO {
        &self.gamma
    }

    pub fn m(&self) -> &PsiDO {
        &self.m
    }

    pub fn l_power(&self, n: u32) -> Arc<PsiDO> {
        self.powers.lax_power(n)
    }

    /// `M^p L^s`.
    pub fn ml_power(&self, p: u32, s: u32) -> Arc<PsiDO> {
        self.powers.get(p, s)
    }

    /// `B_n = (L^n)_+`.
    pub fn bn(&self, n: u32) -> Result<PsiDO> {
        if n < 1 || n > self.order() {
            return Err(Error::InvalidParams(format!("B_n needs 1 <= n <= O (got n = {n})")));
        }
        Ok(self.l_power(n).plus())
    }

    /// `∂S/∂t_n = −(L^n)_− S`.
    pub fn sato_flow(&self, n: u32) -> Result<Derivation> {
        flows::sato_flow(self, n)
    }

    /// `∂S/∂t_{m,n} = −(M^m L^n)_− S`.
    pub fn additional_flow(&self, m: u32, n: u32) -> Result<Derivation> {
        flows::additional_flow(self, m, n)
    }

    /// `∂_{t*_{m,n}} = Σ_{p≤P, s≤D} m^p (nε)^s / (p! s!) ∂_{t_{p,s}}`.
    pub fn quantum_flow(&self, m: i64, n: i64, big_p: u32) -> Result<Derivation> {
        flows::quantum_flow(self, m, n, big_p)
    }

    /// `[L, M] = 1` on the guaranteed window.
    pub fn check_canonical(&self) -> Report {
        canonical_report("kp.canonical", &self.dressing, &self.l, &self.m)
    }
}

/// `[Λ, M] − 1` must vanish on the window of the commutator.
pub(crate) fn canonical_report(check: &str, dressing: &Dressing, lax: &PsiDO, m: &PsiDO) -> Report {
    let c = dressing.commutator(lax, m);
    let residual = c.residual(&PsiDO::identity());
    let mut r = Report::new(check, if residual.is_empty() { Status::Pass } else { Status::Fail })
        .with_param("T", dressing.horizon())
        .with_param("O", dressing.order())
        .with_param("D", dressing.cap())
        .with_detail(format!("window [{}, {}]", c.window(), c.top().max(0)));
    r.details.extend(residual_details("[L,M]-1", &residual));
    r
}

impl Hierarchy for KpContext {
    fn tag(&self) -> &'static str {
        "kp"
    }

    fn dressing(&self) -> &Dressing {
        &self.dressing
    }

    fn lax(&self) -> &PsiDO {
        &self.l
    }

    fn generator(&self, p: u32, s: u32) -> Result<Arc<PsiDO>> {
        Ok(self.powers.get(p, s))
    }

    fn sato_generator(&self, n: u32) -> Result<Arc<PsiDO>> {
        if n < 1 {
            return Err(Error::InvalidParams("flow index must be >= 1".into()));
        }
        if n > self.t {
            return Err(Error::HorizonExceeded { index: n, horizon: self.t });
        }
        Ok(self.l_power(n))
    }

    fn flow_cache(&self) -> &FlowCache {
        &self.cache
    }
}

/// Smallest truncation order for which a bracket of flows with generators of top
/// degrees `n1`, `n2` is determined on the first `depth` dressing coefficients.
///
/// A generator `X` of top `N` is exact down to `N − 1 − O`, so its flow is known on
/// `ω_k` for `k ≤ O + 1 − N`, and the flow of `X` applied to `ω_k` involves `ω_j` for `j ≤ k + N`.
pub fn order_for_bracket(n1: u32, n2: u32, depth: u32) -> u32 {
    n1 + n2 + depth - 1
}

/// Top degree of `M^p L^s` for the horizon `t`.
pub fn generator_top(t: u32, p: u32, s: u32) -> u32 {
    p * (t - 1) + s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffpoly::Generator;
    use crate::dressing::apply_to_operator;
    use crate::psido::{commutator, compose};

    fn w(k: u32, j: u32) -> DiffPoly {
        DiffPoly::jet(Family::Omega, k, j)
    }

    #[test]
    fn lax_operator_low_coefficients() {
        let ctx = KpContext::new(3, 6, 1).unwrap();
        assert_eq!(ctx.l().coeff(1).unwrap(), DiffPoly::one());
        assert_eq!(ctx.l().coeff(0).unwrap(), DiffPoly::zero());
        assert_eq!(ctx.l().coeff(-1).unwrap(), w(1, 1).neg());
        assert_eq!(ctx.l().window(), -6);
        // independent oracle: plain products S ∘ ∂ ∘ S^{-1}
        let slow = compose(&compose(ctx.s(), &PsiDO::d()), ctx.s_inv());
        assert!(ctx.l().residual(&slow).is_empty());
    }

    #[test]
    fn gamma_and_canonical_pair() {
        let ctx = KpContext::new(3, 6, 1).unwrap();
        assert!(commutator(&PsiDO::d(), ctx.gamma()).residual(&PsiDO::identity()).is_empty());
        let r = ctx.check_canonical();
        assert_eq!(r.status, Status::Pass, "{:?}", r.details);
        let bad = KpContext::without_t1_term(3, 6, 1).unwrap().check_canonical();
        assert_eq!(bad.status, Status::Fail);
        assert!(bad.details.iter().any(|d| d.contains("D^0")));
    }

    #[test]
    fn bn_examples() {
        let ctx = KpContext::new(3, 6, 1).unwrap();
        assert_eq!(ctx.bn(1).unwrap(), PsiDO::d());
        let b2 = ctx.bn(2).unwrap();
        let u1 = ctx.l().coeff(-1).unwrap();
        let expect = PsiDO::d_pow(2).add(&PsiDO::mult(u1.scale_rational(&Rational::from_int(2))));
        assert!(b2.residual(&expect).is_empty());
        let l3 = ctx.l_power(3);
        assert!(l3.minus().add(&ctx.bn(3).unwrap()).residual(&l3).is_empty());
        assert!(ctx.bn(0).is_err());
    }


    #[test]
    fn x_flow_is_the_derivative() {
        let ctx = KpContext::new(3, 6, 1).unwrap();
        let f = ctx.sato_flow(1).unwrap();
        for k in 1..=6 {
            assert_eq!(f.jet_action(Generator::jet(Family::Omega, k, 0)).unwrap(), &w(k, 1));
        }
        assert_eq!(f.time_action(1), crate::eps::EpsScalar::one());
        assert!(matches!(ctx.sato_flow(4), Err(Error::HorizonExceeded { .. })));
    }

    #[test]
    fn sato_flows_give_lax_equations() {
        let ctx = KpContext::new(3, 6, 0).unwrap();
        for n in 1..=3 {
            let f = ctx.sato_flow(n).unwrap();
            let lhs = apply_to_operator(&f, ctx.l()).unwrap();
            let rhs = commutator(&ctx.bn(n).unwrap(), ctx.l());
            assert!(lhs.window() < -1);
            assert!(lhs.residual(&rhs).is_empty(), "n = {n}");
        }
        let f2 = ctx.sato_flow(2).unwrap();
        // ∂_{t_2} ω_1 = −2 ω_1 ω_1' + ω_1'' + 2 ω_2'... read off directly from −(L²)_− S
        let l2 = ctx.l_power(2);
        let direct = compose(&l2.minus().neg(), ctx.s()).coeff(-1).unwrap();
        assert_eq!(f2.jet_action(Generator::jet(Family::Omega, 1, 0)).unwrap(), &direct);
    }

    #[test]
    fn additional_flows_basic() {
        let ctx = KpContext::new(3, 7, 1).unwrap();
        let zero = ctx.additional_flow(0, 0).unwrap();
        assert!(zero.is_zero_on_domain());
        for k in 1..=3 {
            let a = ctx.additional_flow(0, k).unwrap();
            let b = ctx.sato_flow(k).unwrap();
            for g in a.domain() {
                assert_eq!(a.jet_action(g), b.jet_action(g));
            }
            assert!(a.time_actions().is_empty());
        }
        let f = ctx.additional_flow(1, 1).unwrap();
        let lhs = apply_to_operator(&f, ctx.l()).unwrap();
        let rhs = commutator(&ctx.ml_power(1, 1).minus(), ctx.l()).neg();
        assert!(lhs.window() <= -1);
        assert!(lhs.residual(&rhs).is_empty());
    }

    #[test]
    fn order_estimate_is_enough() {
        for (p, s, j) in [(1u32, 1u32, 2u32), (2, 1, 3)] {
            let n1 = generator_top(3, p, s);
            let o = order_for_bracket(n1, j, 1);
            let ctx = KpContext::new(3, o, 0).unwrap();
            let b = ctx.additional_flow(p, s).unwrap().bracket(&ctx.sato_flow(j).unwrap());
            assert!(b.domain().next().is_some(), "({p},{s}) with t_{j} at O = {o}");
        }
    }
}
