//! The KdV reduction.
//!
//! `S∂²S^{-1} = ∂² + u` forces `u = −2ω_1'` and, degree by degree,
//! `ω_{k+1}' = −ω_k''/2 + ω_1' ω_k`. The reduced ring keeps every jet of `ω_1`
//! and the underived `ω_k`, `k ≥ 2`, as free generators and rewrites all other jets.

use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;

use crate::derivation::Derivation;
use crate::diffpoly::{DiffPoly, Family, Generator};
use crate::dressing::{apply_to_operator, generic_dressing, Dressing, PowerCache};
use crate::error::{Error, Result};
use crate::flows::{self, FlowCache, Hierarchy};
use crate::kp::canonical_report;
use crate::psido::{compose_in, PsiDO};
use crate::rational::Rational;
use crate::report::{residual_details, Report, Status};
use crate::ring::{DiffRing, FreeRing};

#[derive(Default)]
pub struct KdvRing {
    rules: Mutex<FxHashMap<(u32, u32), DiffPoly>>,
}

fn w(k: u32, j: u32) -> DiffPoly {
    DiffPoly::jet(Family::Omega, k, j)
}

impl KdvRing {
    pub fn new() -> Self {
        Self::default()
    }

    /// Normal form of `ω_k^{(j)}`, `k ≥ 2`, `j ≥ 1`.
    fn rule(&self, k: u32, j: u32) -> DiffPoly {
        if let Some(p) = self.rules.lock().unwrap().get(&(k, j)) {
            return p.clone();
        }
        let p = if j == 1 {
            let lower = self.reduce(&w(k - 1, 2));
            lower.scale_rational(&Rational::new(-1, 2)).add(&w(1, 1).mul(&w(k - 1, 0)))
        } else {
            self.dx(&self.rule(k, j - 1))
        };
        self.rules.lock().unwrap().insert((k, j), p.clone());
        p
    }

    fn is_reducible(g: Generator) -> bool {
        g.family() == Some(Family::Omega) && g.index() >= 2 && g.order() >= 1
    }
}

impl DiffRing for KdvRing {
    fn dx(&self, p: &DiffPoly) -> DiffPoly {
        self.reduce(&p.total_x_derivative())
    }

    fn reduce(&self, p: &DiffPoly) -> DiffPoly {
        if !p.generators().into_iter().any(Self::is_reducible) {
            return p.clone();
        }
        p.substitute(|g| Self::is_reducible(g).then(|| self.rule(g.index(), g.order())))
    }
}

pub struct KdvContext {
    t: u32,
    reduced: bool,
    dressing: Dressing,
    lax: PsiDO,
    lax2: PsiDO,
    gamma: PsiDO,
    m: PsiDO,
    powers: PowerCache,
    half_powers: Mutex<FxHashMap<u32, Arc<PsiDO>>>,
    cache: FlowCache,
}

impl KdvContext {
    /// `ℒ = S∂²S^{-1} = ∂² + u`, `Γ = ½ Σ_{i odd ≤ T} i t_i ∂^{i−2}`, `M = SΓS^{-1}`.
    pub fn new(t: u32, o: u32, d: u32) -> Result<Self> {
        Self::build(t, o, d, true)
    }

    /// The same operators over the free jet ring, before the reduction is imposed.
    ///
    /// Flows that leave the reduced form are not derivations of the reduced ring,
    /// so their brackets are taken here and reduced afterwards.
    pub fn ambient(t: u32, o: u32, d: u32) -> Result<Self> {
        Self::build(t, o, d, false)
    }

    fn build(t: u32, o: u32, d: u32, reduced: bool) -> Result<Self> {
        if t.is_multiple_of(2) || o < 2 {
            return Err(Error::InvalidParams(format!("KdV needs an odd T and O >= 2 (got T = {t}, O = {o})")));
        }
        let ring: Arc<dyn DiffRing> = if reduced { Arc::new(KdvRing::new()) } else { Arc::new(FreeRing) };
        let s = generic_dressing(Family::Omega, o);
        let dressing = Dressing::new(ring.clone(), Family::Omega, s, (1..=o).collect(), t, d)?;
        let lax2 = if reduced {
            let u = w(1, 1).scale_rational(&Rational::from_int(-2));
            PsiDO::d_pow(2).add(&PsiDO::mult(u))
        } else {
            dressing.conjugate(&PsiDO::d_pow(2))
        };
        let lax = dressing.conjugate(&PsiDO::d());
        let mut gamma = PsiDO::zero();
        let mut m = PsiDO::zero();
        for i in (1..=t).step_by(2) {
            let c = Rational::new(i as i64, 2);
            let term = PsiDO::monomial(i as i32 - 2, DiffPoly::time(i).scale_rational(&c));
            gamma = gamma.add(&term);
            m = m.add(&dressing.conjugate(&term));
        }
        let powers = PowerCache::new(ring, m.clone(), lax2.clone(), -(o as i32) - 2);
        Ok(KdvContext {
            t,
            reduced,
            dressing,
            lax,
            lax2,
            gamma,
            m,
            powers,
            half_powers: Mutex::new(FxHashMap::default()),
            cache: FlowCache::default(),
        })
    }

    pub fn horizon(&self) -> u32 {
        self.t
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn order(&self) -> u32 {
        self.dressing.order()
    }

    pub fn ring(&self) -> &Arc<dyn DiffRing> {
        self.dressing.ring()
    }

    pub fn s(&self) -> &PsiDO {
        self.dressing.s()
    }

    /// `ℒ = ∂² + u`.
    pub fn l2(&self) -> &PsiDO {
        &self.lax2
    }

    /// The square root `L = S∂S^{-1}`.
    pub fn sqrt_lax(&self) -> &PsiDO {
        &self.lax
    }

    pub fn gamma(&self) -> &PsiDO {
        &self.gamma
    }

    pub fn m(&self) -> &PsiDO {
        &self.m
    }

    /// `L^n = S∂^nS^{-1}`.
    pub fn lax_half_power(&self, n: u32) -> Arc<PsiDO> {
        if let Some(p) = self.half_powers.lock().unwrap().get(&n) {
            return p.clone();
        }
        let p = Arc::new(self.dressing.conjugate(&PsiDO::d_pow(n as i32)));
        self.half_powers.lock().unwrap().insert(n, p.clone());
        p
    }

    pub fn sato_flow(&self, n: u32) -> Result<Derivation> {
        flows::sato_flow(self, n)
    }

    /// `∂S = −(M^m ℒ^n)_− S`.
    pub fn additional_flow(&self, m: u32, n: u32) -> Result<Derivation> {
        flows::additional_flow(self, m, n)
    }

    pub fn quantum_flow(&self, m: i64, n: i64, big_p: u32) -> Result<Derivation> {
        flows::quantum_flow(self, m, n, big_p)
    }

    pub fn check_canonical(&self) -> Report {
        let mut r = canonical_report("kdv.canonical", &self.dressing, &self.lax2, &self.m);
        let conj = self.dressing.conjugate(&PsiDO::d_pow(2));
        let residual = conj.residual(&self.lax2);
        if !residual.is_empty() {
            r.status = Status::Fail;
            r.details.extend(residual_details("S D^2 S^-1 - (D^2 + u)", &residual));
        }
        r
    }

    /// Whether `d` keeps `ℒ` of the form `∂² + u`: the Lax-side derivative
    /// `−[X_−, ℒ]` may only have a `∂^0` term.
    pub fn check_form_preservation(&self, name: &str, x: &PsiDO) -> Report {
        if !self.reduced {
            return Report::error("kdv.form", Error::InvalidParams("form preservation needs the reduced ring".into()));
        }
        let ring = self.dressing.ring().as_ref();
        let xm = x.minus();
        let floor = Some(-(self.order() as i32) - 2);
        let rate = compose_in(ring, &xm, &self.lax2, floor).sub(&compose_in(ring, &self.lax2, &xm, floor)).neg();
        if rate.window() > -1 {
            return Report::error(
                "kdv.form",
                Error::TruncationBudget(format!("{name}: no negative degree of d(L) is determined at O = {}", self.order())),
            );
        }
        let offending: Vec<(i32, DiffPoly)> =
            rate.terms().filter(|(deg, _)| *deg != 0).map(|(d, p)| (d, p.clone())).collect();
        let mut r = Report::new("kdv.form", Status::Recorded)
            .with_param("flow", name)
            .with_param("T", self.t)
            .with_param("O", self.order())
            .with_param("D", self.dressing.cap())
            .with_detail(format!("compared on degrees [{}, {}]", rate.window(), rate.top()));
        if offending.is_empty() {
            r.push_detail("form preserved: the flow only moves u");
        } else {
            let degs: Vec<String> = offending.iter().map(|(d, _)| d.to_string()).collect();
            r.push_detail(format!("form not preserved: offending degrees {}", degs.join(", ")));
            r.details.extend(residual_details("d(L)", &offending[..offending.len().min(3)]));
        }
        r
    }

    /// The generator of `quantum_flow(m, n, P)`.
    pub fn quantum_generator(&self, m: i64, n: i64, big_p: u32) -> Result<PsiDO> {
        let mut x = PsiDO::zero();
        for ((p, s), c) in flows::quantum_coefficients(m, n, big_p, self.dressing.cap()) {
            x = x.add(&self.generator(p, s)?.scale(&c));
        }
        Ok(x)
    }

    /// `d(u)` read off from `d(S)`: `u = −2ω_1'`.
    pub fn flow_on_u(&self, d: &Derivation) -> Result<DiffPoly> {
        apply_to_operator(d, &self.lax2)?.coeff(0).ok_or(Error::TruncationBudget("u".into()))
    }
}

impl Hierarchy for KdvContext {
    fn tag(&self) -> &'static str {
        "kdv"
    }

    fn dressing(&self) -> &Dressing {
        &self.dressing
    }

    #[allow(clippy::misnamed_getters)]
    fn lax(&self) -> &PsiDO {
        &self.lax2
    }

    fn generator(&self, p: u32, s: u32) -> Result<Arc<PsiDO>> {
        Ok(self.powers.get(p, s))
    }

    /// `L^n` for odd `n`; even flows are generated by the differential operator `ℒ^{n/2}` and vanish.
    fn sato_generator(&self, n: u32) -> Result<Arc<PsiDO>> {
        if n < 1 {
            return Err(Error::InvalidParams("flow index must be >= 1".into()));
        }
        if n > self.t {
            return Err(Error::HorizonExceeded { index: n, horizon: self.t });
        }
        if n.is_multiple_of(2) {
            return Ok(self.powers.lax_power(n / 2));
        }
        Ok(self.lax_half_power(n))
    }

    fn flow_cache(&self) -> &FlowCache {
        &self.cache
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psido::compose;

    #[test]
    fn ring_rules() {
        let r = KdvRing::new();
        assert_eq!(r.reduce(&w(2, 1)), w(1, 2).scale_rational(&Rational::new(-1, 2)).add(&w(1, 1).mul(&w(1, 0))));
        assert_eq!(r.reduce(&w(1, 4)), w(1, 4));
        assert_eq!(r.reduce(&w(3, 0)), w(3, 0));
        // dx commutes with reduction
        for (k, j) in [(2, 1), (3, 1), (3, 2), (4, 1)] {
            let a = r.dx(&r.reduce(&w(k, j)));
            let b = r.reduce(&w(k, j + 1));
            assert_eq!(a, b, "w{k}^({j})");
        }
    }

    #[test]
    fn lax_is_differential() {
        let ctx = KdvContext::new(3, 6, 1).unwrap();
        let l2 = compose_in(ctx.ring().as_ref(), ctx.sqrt_lax(), ctx.sqrt_lax(), None);
        assert!(l2.residual(ctx.l2()).is_empty());
        assert!(l2.window() <= -4);
        let r = ctx.check_canonical();
        assert_eq!(r.status, Status::Pass, "{:?}", r.details);
    }

    #[test]
    fn gamma_bracket() {
        let ctx = KdvContext::new(5, 4, 0).unwrap();
        let c = compose(&PsiDO::d_pow(2), ctx.gamma()).sub(&compose(ctx.gamma(), &PsiDO::d_pow(2)));
        assert!(c.residual(&PsiDO::identity()).is_empty());
        assert_eq!(ctx.gamma().coeff_ref(-1).unwrap(), &DiffPoly::time(1).scale_rational(&Rational::new(1, 2)));
    }

    #[test]
    fn odd_flows() {
        let ctx = KdvContext::new(3, 6, 0).unwrap();
        let x = ctx.sato_flow(1).unwrap();
        for k in 1..=6 {
            assert_eq!(x.jet_action(Generator::jet(Family::Omega, k, 0)).unwrap(), &ctx.ring().reduce(&w(k, 1)));
        }
        // u_t = (u''' + 6uu')/4 up to the normalization of t_3
        let f3 = ctx.sato_flow(3).unwrap();
        let ut = ctx.flow_on_u(&f3).unwrap();
        let u = w(1, 1).scale_rational(&Rational::from_int(-2));
        let expect = u.total_x_derivative_n(3).add(&u.mul(&u.total_x_derivative()).scale_rational(&Rational::from_int(6))).scale_rational(&Rational::new(1, 4));
        assert_eq!(ut, expect);
        let f2 = ctx.sato_flow(2).unwrap();
        assert!(f2.domain().all(|g| f2.jet_action(g).unwrap().is_zero()));
    }

    #[test]
    fn additional_zero_and_sato_match() {
        let ctx = KdvContext::new(3, 6, 0).unwrap();
        assert!(ctx.additional_flow(0, 0).unwrap().is_zero_on_domain());
        assert!(ctx.additional_flow(0, 1).unwrap().is_zero_on_domain());
        let f = ctx.additional_flow(1, 0).unwrap();
        assert!(!f.is_zero_on_domain());
    }

    #[test]
    fn ambient_context() {
        let amb = KdvContext::ambient(3, 6, 0).unwrap();
        let red = KdvContext::new(3, 6, 0).unwrap();
        assert!(!amb.is_reduced());
        let c = canonical_report("kdv.canonical", amb.dressing(), amb.l2(), amb.m());
        assert_eq!(c.status, Status::Pass, "{:?}", c.details);
        // reducing the ambient Lax operator gives ∂² + u
        let reduced = amb.l2().map_coeffs(|p| KdvRing::new().reduce(p));
        assert!(reduced.residual(red.l2()).is_empty());
    }

    #[test]
    fn form_probe() {
        let ctx = KdvContext::new(3, 8, 1).unwrap();
        let r3 = ctx.check_form_preservation("t_3", &ctx.lax_half_power(3));
        assert_eq!(r3.status, Status::Recorded);
        assert!(r3.details.iter().any(|d| d.contains("form preserved")), "{:?}", r3.details);
        let r1 = ctx.check_form_preservation("t_1,1", &ctx.generator(1, 1).unwrap());
        assert!(r1.details.iter().any(|d| d.contains("form preserved")), "{:?}", r1.details);
        let r2 = ctx.check_form_preservation("t_2,0", &ctx.generator(2, 0).unwrap());
        assert!(r2.details.iter().any(|d| d.contains("not preserved")), "{:?}", r2.details);
    }
}
