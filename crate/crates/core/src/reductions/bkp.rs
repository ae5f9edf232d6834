//! The BKP reduction.
//!
//! The dressing operator `Φ = 1 + Σ ω̄_k ∂^{-k}` is constrained by
//! `Φ* ∂ Φ = ∂`. At degree `1 − j` the jet `ω̄_j` enters only through
//! `(1 + (−1)^j) ω̄_j`, so the even coefficients are solved for in terms of the
//! odd ones while the odd degrees give consistency conditions.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;

use crate::derivation::Derivation;
use crate::diffpoly::{DiffPoly, Family, Generator};
use crate::dressing::{generic_dressing, Dressing, PowerCache};
use crate::error::{Error, Result};
use crate::flows::{self, FlowCache, Hierarchy};
use crate::kp::canonical_report;
use crate::psido::{adjoint, compose_in, PsiDO};
use crate::rational::Rational;
use crate::report::{residual_details, Report, Status};
use crate::ring::FreeRing;

fn wb(k: u32, j: u32) -> DiffPoly {
    DiffPoly::jet(Family::OmegaBar, k, j)
}

/// Substitution table `ω̄_j ↦ polynomial in the odd jets` for even `j ≤ order`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Substitution {
    table: BTreeMap<u32, DiffPoly>,
}

impl Substitution {
    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, k: u32) -> Option<&DiffPoly> {
        self.table.get(&k)
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, &DiffPoly)> {
        self.table.iter().map(|(k, p)| (*k, p))
    }

    /// Replace every jet `ω̄_j^{(r)}` with `j` in the table by `∂^r` of its image.
    pub fn apply(&self, p: &DiffPoly) -> DiffPoly {
        let mut derived: FxHashMap<Generator, DiffPoly> = FxHashMap::default();
        p.substitute(|g| {
            if g.family() != Some(Family::OmegaBar) {
                return None;
            }
            let image = self.table.get(&g.index())?;
            Some(derived.entry(g).or_insert_with(|| image.total_x_derivative_n(g.order())).clone())
        })
    }
}

/// Solve `Φ* ∂ Φ = ∂` through degree `1 − order`.
pub fn solve_b_constraints(order: u32) -> Result<Substitution> {
    let mut sub = Substitution::default();
    if order == 0 {
        return Ok(sub);
    }
    let phi = generic_dressing(Family::OmegaBar, order);
    let lhs = compose_in(&FreeRing, &compose_in(&FreeRing, &adjoint(&phi), &PsiDO::d(), None), &phi, None);
    for j in 1..=order {
        let deg = 1 - j as i32;
        let c = lhs.coeff(deg).ok_or_else(|| Error::Inconsistent(format!("degree {deg} outside the window")))?;
        let c = sub.apply(&c);
        if j % 2 == 0 {
            let lead = wb(j, 0);
            let rest = c.sub(&lead.scale_rational(&Rational::from_int(2)));
            if !rest.partial(Generator::jet(Family::OmegaBar, j, 0)).is_zero() {
                return Err(Error::Inconsistent(format!("w{j} enters nonlinearly at degree {deg}")));
            }
            sub.table.insert(j, rest.scale_rational(&Rational::new(-1, 2)));
        } else if !c.is_zero() {
            return Err(Error::Inconsistent(format!("degree {deg}: {c} != 0")));
        }
    }
    Ok(sub)
}

pub struct BkpContext {
    t: u32,
    constrained: bool,
    substitution: Substitution,
    dressing: Dressing,
    l: PsiDO,
    l_inv: PsiDO,
    gamma: PsiDO,
    m: PsiDO,
    powers: PowerCache,
    b_ops: Mutex<FxHashMap<(u32, u32), Arc<PsiDO>>>,
    cache: FlowCache,
}

impl BkpContext {
    /// `Φ` with the B-type constraint solved, `L = Φ∂Φ^{-1}`,
    /// `Γ = Σ_{i odd ≤ T} i t_i ∂^{i−1}`, `M = ΦΓΦ^{-1}`.
    pub fn new(t: u32, o: u32, d: u32) -> Result<Self> {
        Self::build(t, o, d, true)
    }

    /// Negative control: the generic dressing operator with every `ω̄_k` free.
    pub fn unconstrained(t: u32, o: u32, d: u32) -> Result<Self> {
        Self::build(t, o, d, false)
    }

    fn build(t: u32, o: u32, d: u32, constrained: bool) -> Result<Self> {
        if t.is_multiple_of(2) || o < 2 {
            return Err(Error::InvalidParams(format!("BKP needs an odd T and O >= 2 (got T = {t}, O = {o})")));
        }
        let ring = Arc::new(FreeRing);
        let generic = generic_dressing(Family::OmegaBar, o);
        let (phi, substitution, free) = if constrained {
            let sub = solve_b_constraints(o)?;
            (generic.map_coeffs(|p| sub.apply(p)), sub, (1..=o).step_by(2).collect())
        } else {
            (generic, Substitution::default(), (1..=o).collect())
        };
        let dressing = Dressing::new(ring.clone(), Family::OmegaBar, phi, free, t, d)?;
        let l = dressing.conjugate(&PsiDO::d());
        let l_inv = dressing.conjugate(&PsiDO::d_pow(-1));
        let mut gamma = PsiDO::zero();
        let mut m = PsiDO::zero();
        for i in (1..=t).step_by(2) {
            let term = PsiDO::monomial(i as i32 - 1, DiffPoly::time(i).scale_rational(&Rational::from_int(i as i64)));
            gamma = gamma.add(&term);
            m = m.add(&dressing.conjugate(&term));
        }
        let powers = PowerCache::new(ring, m.clone(), l.clone(), -(o as i32) - 2);
        Ok(BkpContext {
            t,
            constrained,
            substitution,
            dressing,
            l,
            l_inv,
            gamma,
            m,
            powers,
            b_ops: Mutex::new(FxHashMap::default()),
            cache: FlowCache::default(),
        })
    }

    pub fn horizon(&self) -> u32 {
        self.t
    }

    pub fn order(&self) -> u32 {
        self.dressing.order()
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn substitution(&self) -> &Substitution {
        &self.substitution
    }

    pub fn phi(&self) -> &PsiDO {
        self.dressing.s()
    }

    pub fn phi_inv(&self) -> &PsiDO {
        self.dressing.s_inv()
    }

    pub fn l(&self) -> &PsiDO {
        &self.l
    }

    pub fn l_inv(&self) -> &PsiDO {
        &self.l_inv
    }

    pub fn gamma(&self) -> &PsiDO {
        &self.gamma
    }

    pub fn m(&self) -> &PsiDO {
        &self.m
    }

    fn lax_power_signed(&self, n: i32) -> Arc<PsiDO> {
        if n < 0 {
            Arc::new(self.l_inv.clone())
        } else {
            self.powers.lax_power(n as u32)
        }
    }

    /// `B_{mn} = M^m L^n − (−1)^n L^{n−1} M^m L`.
    pub fn b_op(&self, m: u32, n: u32) -> Arc<PsiDO> {
        if let Some(b) = self.b_ops.lock().unwrap().get(&(m, n)) {
            return b.clone();
        }
        let first = self.powers.get(m, n);
        let second = self.dressing.compose(&self.lax_power_signed(n as i32 - 1), &self.powers.get(m, 1));
        let b = if n.is_multiple_of(2) { first.sub(&second) } else { first.add(&second) };
        let b = Arc::new(b);
        self.b_ops.lock().unwrap().insert((m, n), b.clone());
        b
    }

    /// `D_{mn} = Σ_{p≤P, s≤D} m^p (nε)^s/(p! s!) B_{ps}`.
    pub fn d_op(&self, m: i64, n: i64, big_p: u32) -> PsiDO {
        let mut out = PsiDO::zero();
        for ((p, s), c) in flows::quantum_coefficients(m, n, big_p, self.dressing.cap()) {
            out = out.add(&self.b_op(p, s).scale(&c));
        }
        out
    }

    pub fn sato_flow(&self, n: u32) -> Result<Derivation> {
        flows::sato_flow(self, n)
    }

    pub fn additional_flow(&self, m: u32, n: u32) -> Result<Derivation> {
        flows::additional_flow(self, m, n)
    }

    pub fn quantum_flow(&self, m: i64, n: i64, big_p: u32) -> Result<Derivation> {
        flows::quantum_flow(self, m, n, big_p)
    }

    /// `[L, M] = 1` together with the B-type condition `L* = −∂L∂^{-1}` of `L` itself.
    pub fn check_canonical(&self) -> Report {
        let mut r = canonical_report("bkp.canonical", &self.dressing, &self.l, &self.m);
        let cond = check_btype_with(&self.dressing, "L", &self.l);
        if cond.status != Status::Pass {
            r.status = Status::Fail;
        }
        r.details.extend(cond.details);
        r
    }

    /// `M* = ∂ L^{-1} M L ∂^{-1}`.
    pub fn check_mb_lemma(&self) -> Report {
        let lhs = adjoint(&self.m);
        let mid = self.dressing.compose(&self.l_inv, &self.powers.get(1, 1));
        let rhs = self.dressing.compose(&self.dressing.compose(&PsiDO::d(), &mid), &PsiDO::d_pow(-1));
        let residual = lhs.residual(&rhs);
        let (lo, hi) = lhs.common_range(&rhs);
        let mut r = Report::new("bkp.lemma61", if residual.is_empty() { Status::Pass } else { Status::Fail })
            .with_param("T", self.t)
            .with_param("O", self.order())
            .with_param("D", self.dressing.cap())
            .with_param("constrained", self.constrained)
            .with_detail(format!("compared on degrees [{lo}, {hi}]"));
        r.details.extend(residual_details("M* - D L^-1 M L D^-1", &residual[..residual.len().min(4)]));
        r
    }

    /// `X* + ∂X∂^{-1} = 0` on the window of `X`.
    pub fn check_btype(&self, label: &str, x: &PsiDO) -> Report {
        let mut r = check_btype_with(&self.dressing, label, x);
        r.params.insert("constrained".into(), self.constrained.into());
        r
    }
}

fn check_btype_with(dressing: &Dressing, label: &str, x: &PsiDO) -> Report {
    let lhs = adjoint(x);
    let conj = dressing.compose(&dressing.compose(&PsiDO::d(), x), &PsiDO::d_pow(-1));
    let residual = lhs.add(&conj).residual(&PsiDO::new(x.top(), x.window(), []));
    let name = format!("{label}* + D {label} D^-1");
    let mut r = Report::new("bkp.btype", if residual.is_empty() { Status::Pass } else { Status::Fail })
        .with_param("operator", label)
        .with_param("O", dressing.order())
        .with_detail(format!("{name} on degrees [{}, {}]", lhs.window().max(conj.window()), x.top()));
    r.details.extend(residual_details(&name, &residual[..residual.len().min(4)]));
    r
}

impl Hierarchy for BkpContext {
    fn tag(&self) -> &'static str {
        "bkp"
    }

    fn dressing(&self) -> &Dressing {
        &self.dressing
    }

    fn lax(&self) -> &PsiDO {
        &self.l
    }

    fn generator(&self, p: u32, s: u32) -> Result<Arc<PsiDO>> {
        Ok(self.b_op(p, s))
    }

    fn sato_generator(&self, n: u32) -> Result<Arc<PsiDO>> {
        if n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("BKP has odd times only (got t_{n})")));
        }
        if n > self.t {
            return Err(Error::HorizonExceeded { index: n, horizon: self.t });
        }
        Ok(self.powers.lax_power(n))
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
    fn constraint_table() {
        assert!(solve_b_constraints(0).unwrap().is_empty());
        let s1 = solve_b_constraints(1).unwrap();
        assert!(s1.is_empty());
        let s2 = solve_b_constraints(2).unwrap();
        // degree -1: 2ω̄_2 + 2ω̄_1' − ω̄_1² = 0
        let expect = wb(1, 0).pow(2).scale_rational(&Rational::new(1, 2)).sub(&wb(1, 1));
        assert_eq!(s2.get(2).unwrap(), &expect);
        let s6 = solve_b_constraints(6).unwrap();
        for (k, p) in s6.entries() {
            assert_eq!(s6.apply(p), *p, "table entry {k} is not in normal form");
            assert!(p.generators().iter().all(|g| g.is_time() || g.index() % 2 == 1));
        }
        let poly = wb(2, 2).mul(&wb(4, 0)).add(&wb(3, 1));
        let once = s6.apply(&poly);
        assert_eq!(s6.apply(&once), once);
    }

    #[test]
    fn dressing_condition_holds() {
        let ctx = BkpContext::new(3, 6, 0).unwrap();
        let lhs = compose(&compose(&adjoint(ctx.phi()), &PsiDO::d()), ctx.phi());
        assert!(lhs.residual(&PsiDO::d()).is_empty());
        assert!(lhs.window() <= -4);
        let c = ctx.check_canonical();
        assert_eq!(c.status, Status::Pass, "{:?}", c.details);
        let bad = BkpContext::unconstrained(3, 6, 0).unwrap().check_canonical();
        assert_eq!(bad.status, Status::Fail);
    }

    #[test]
    fn b_operator_examples() {
        let ctx = BkpContext::new(3, 6, 0).unwrap();
        assert!(ctx.b_op(0, 2).residual(&PsiDO::zero()).is_empty());
        let two_l = ctx.l().scale_rational(&Rational::from_int(2));
        assert!(ctx.b_op(0, 1).residual(&two_l).is_empty());
        assert!(ctx.b_op(0, 0).residual(&PsiDO::zero()).is_empty());
        for (m, n) in [(1, 1), (1, 0), (2, 1), (0, 3)] {
            let r = ctx.check_btype(&format!("B{m}{n}"), &ctx.b_op(m, n));
            assert_eq!(r.status, Status::Pass, "B{m}{n}: {:?}", r.details);
        }
        let r = ctx.check_btype("M", ctx.m());
        assert_eq!(r.status, Status::Fail);
        assert_eq!(ctx.check_btype("0", &PsiDO::zero()).status, Status::Pass);
    }

    #[test]
    fn lemma_and_control() {
        let ctx = BkpContext::new(3, 6, 0).unwrap();
        let r = ctx.check_mb_lemma();
        assert_eq!(r.status, Status::Pass, "{:?}", r.details);
        let bad = BkpContext::unconstrained(3, 6, 0).unwrap().check_mb_lemma();
        assert_eq!(bad.status, Status::Fail);
    }

    #[test]
    fn x_flow_and_odd_times() {
        let ctx = BkpContext::new(3, 6, 0).unwrap();
        let f = ctx.sato_flow(1).unwrap();
        assert_eq!(f.domain().count(), 3);
        for g in f.domain() {
            assert_eq!(f.jet_action(g).unwrap(), &wb(g.index(), 1));
        }
        assert!(ctx.sato_flow(2).is_err());
        assert!(matches!(ctx.sato_flow(5), Err(Error::HorizonExceeded { .. })));
    }
}
