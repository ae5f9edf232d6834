//! Flow families shared by the KP hierarchy and its reductions, and the checks
//! that compare them: commutation with the hierarchy flows, the W-type
//! structure of the additional flows and the quantum torus relation of their
//! resummations.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;

use crate::derivation::Derivation;
use crate::dressing::{apply_to_operator, resummation_coefficient, Dressing};
use crate::eps::EpsScalar;
use crate::error::{Error, Result};
use crate::psido::PsiDO;
use crate::rational::Rational;
use crate::report::{residual_details, Report, Status};
use crate::torus::weyl_commutator;

/// A dressed hierarchy with a two-index family of additional flows `∂S = −(X_{p,s})_− S`.
pub trait Hierarchy: Send + Sync {
    /// Short tag used in report names ("kp", "kdv", "bkp").
    fn tag(&self) -> &'static str;

    fn dressing(&self) -> &Dressing;

    /// The operator flows are compared on (the Lax operator).
    fn lax(&self) -> &PsiDO;

    /// Generator `X_{p,s}` of the additional flow `∂_{t_{p,s}}`.
    fn generator(&self, p: u32, s: u32) -> Result<Arc<PsiDO>>;

    /// Generator of the hierarchy flow `∂_{t_n}`; rejects indices the hierarchy does not have.
    fn sato_generator(&self, n: u32) -> Result<Arc<PsiDO>>;

    fn flow_cache(&self) -> &FlowCache;
}

type LaxCache<K> = Mutex<FxHashMap<K, Arc<PsiDO>>>;

#[derive(Default)]
pub struct FlowCache {
    additional: Mutex<FxHashMap<(u32, u32), Derivation>>,
    sato: Mutex<FxHashMap<u32, Derivation>>,
    on_lax: LaxCache<(u32, u32)>,
    brackets_on_lax: LaxCache<(u32, u32, u32, u32)>,
}

pub fn additional_flow(h: &dyn Hierarchy, p: u32, s: u32) -> Result<Derivation> {
    if let Some(d) = h.flow_cache().additional.lock().unwrap().get(&(p, s)) {
        return Ok(d.clone());
    }
    let x = h.generator(p, s)?;
    let d = h.dressing().flow(format!("t_{p},{s}"), &x, BTreeMap::new())?;
    h.flow_cache().additional.lock().unwrap().insert((p, s), d.clone());
    Ok(d)
}

pub fn sato_flow(h: &dyn Hierarchy, n: u32) -> Result<Derivation> {
    if let Some(d) = h.flow_cache().sato.lock().unwrap().get(&n) {
        return Ok(d.clone());
    }
    let x = h.sato_generator(n)?;
    let mut times = BTreeMap::new();
    times.insert(n, EpsScalar::one());
    let d = h.dressing().flow(format!("t_{n}"), &x, times)?;
    h.flow_cache().sato.lock().unwrap().insert(n, d.clone());
    Ok(d)
}

/// Nonzero coefficients `m^p (nε)^s / (p! s!)`, `p ≤ big_p`, `s ≤ cap`.
pub fn quantum_coefficients(m: i64, n: i64, big_p: u32, cap: u32) -> BTreeMap<(u32, u32), EpsScalar> {
    let mut out = BTreeMap::new();
    for p in 0..=big_p {
        for s in 0..=cap {
            let c = resummation_coefficient(m, n, p, s, cap);
            if !c.is_zero() {
                out.insert((p, s), c);
            }
        }
    }
    out
}

/// `∂_{t*_{m,n}} = Σ_{p≤P, s≤D} m^p (nε)^s/(p! s!) ∂_{t_{p,s}}`.
pub fn quantum_flow(h: &dyn Hierarchy, m: i64, n: i64, big_p: u32) -> Result<Derivation> {
    let dr = h.dressing();
    let mut terms = Vec::new();
    for ((p, s), c) in quantum_coefficients(m, n, big_p, dr.cap()) {
        terms.push((c, additional_flow(h, p, s)?));
    }
    Ok(Derivation::linear_combination(format!("t*_{m},{n}"), &terms, dr.horizon(), dr.ring().clone()))
}

/// `∂_{t_{p,s}} Λ`, coefficient-wise.
pub fn flow_on_lax(h: &dyn Hierarchy, p: u32, s: u32) -> Result<Arc<PsiDO>> {
    if let Some(v) = h.flow_cache().on_lax.lock().unwrap().get(&(p, s)) {
        return Ok(v.clone());
    }
    let f = additional_flow(h, p, s)?;
    let v = Arc::new(apply_to_operator(&f, h.lax())?);
    h.flow_cache().on_lax.lock().unwrap().insert((p, s), v.clone());
    Ok(v)
}

/// `[∂_{t_{p,s}}, ∂_{t_{a,b}}] Λ`.
pub fn bracket_on_lax(h: &dyn Hierarchy, ps: (u32, u32), ab: (u32, u32)) -> Result<Arc<PsiDO>> {
    if ps == ab {
        return Ok(Arc::new(PsiDO::new(h.lax().top(), h.lax().window(), [])));
    }
    let key = (ps.0, ps.1, ab.0, ab.1);
    if let Some(v) = h.flow_cache().brackets_on_lax.lock().unwrap().get(&key) {
        return Ok(v.clone());
    }
    let rev = (ab.0, ab.1, ps.0, ps.1);
    if let Some(v) = h.flow_cache().brackets_on_lax.lock().unwrap().get(&rev) {
        return Ok(Arc::new(v.neg()));
    }
    let f = additional_flow(h, ps.0, ps.1)?;
    let g = additional_flow(h, ab.0, ab.1)?;
    let v = Arc::new(apply_to_operator(&f.bracket(&g), h.lax())?);
    h.flow_cache().brackets_on_lax.lock().unwrap().insert(key, v.clone());
    Ok(v)
}

fn jet_range(d: &Derivation) -> String {
    let idx: Vec<u32> = d.domain().map(|g| g.index()).collect();
    match (idx.first(), idx.last()) {
        (Some(a), Some(b)) => format!("dressing coefficients {a}..={b}"),
        _ => "no dressing coefficient".to_string(),
    }
}

/// `[d1, d2] = 0` on every dressing coefficient where both nested actions are determined.
pub fn check_flow_commutation(check: &str, d1: &Derivation, d2: &Derivation) -> Report {
    check_flow_commutation_reduced(check, d1, d2, &crate::ring::FreeRing)
}

/// As [`check_flow_commutation`], with the bracket brought to the normal form of `ring` before comparing.
pub fn check_flow_commutation_reduced(check: &str, d1: &Derivation, d2: &Derivation, ring: &dyn crate::ring::DiffRing) -> Report {
    let b = d1.bracket(d2);
    if b.domain().next().is_none() {
        return Report::error(
            check,
            Error::TruncationBudget(format!("[{}, {}] is undetermined on every dressing coefficient", d1.name(), d2.name())),
        );
    }
    let mut report = Report::new(check, Status::Pass).with_detail(format!(
        "[{}, {}] checked on {}",
        d1.name(),
        d2.name(),
        jet_range(&b)
    ));
    for g in b.domain() {
        let v = ring.reduce(b.jet_action(g).unwrap());
        if !v.is_zero() {
            report.status = Status::Fail;
            report.push_detail(format!("nonzero on {g}: {v}"));
        }
    }
    report
}

fn compare_on_lax(check: &str, label: &str, lhs: &PsiDO, rhs: &PsiDO) -> Report {
    let (lo, hi) = lhs.common_range(rhs);
    if lo > -1 {
        return Report::error(
            check,
            Error::TruncationBudget(format!("{label}: no negative degree of the Lax operator is determined")),
        );
    }
    let residual = lhs.residual(rhs);
    let mut r = Report::new(check, if residual.is_empty() { Status::Pass } else { Status::Fail })
        .with_detail(format!("{label}: compared on degrees [{lo}, {hi}]"));
    r.details.extend(residual_details(label, &residual));
    r
}

/// `[∂_{t_{p,s}}, ∂_{t_{a,b}}] Λ = Σ C^{(ps)(ab)}_{αβ} ∂_{t_{α,β}} Λ` with `C` from
/// `[z^s ∂^p, z^b ∂^a] = Σ C z^β ∂^α`.
pub fn check_w_structure(h: &dyn Hierarchy, p: u32, s: u32, a: u32, b: u32) -> Report {
    let check = format!("{}.w_structure", h.tag());
    let run = || -> Result<Report> {
        let lhs = bracket_on_lax(h, (p, s), (a, b))?;
        let table = weyl_commutator(s, p, b, a);
        let mut rhs = PsiDO::new(h.lax().top(), h.lax().window(), []);
        for (&(beta, alpha), c) in &table {
            rhs = rhs.add(&flow_on_lax(h, alpha, beta)?.scale_rational(c));
        }
        let mut r = compare_on_lax(&check, &format!("({p},{s})x({a},{b})"), &lhs, &rhs);
        let terms = table.iter().map(|((be, al), c)| format!("{c}*z^{be}D^{al}")).collect::<Vec<_>>();
        r.push_detail(format!("Weyl table: [{}]", terms.join(", ")));
        Ok(r)
    };
    run().unwrap_or_else(|e| Report::error(check, e))
}

/// Power of a rational integer, with `0^0 = 1`.
fn ipow(x: i64, e: u32) -> Rational {
    Rational::from_int(x).pow(e)
}

/// The two sides of the quantum torus relation on `Λ`, graded by the degree `g` in the
/// first index of each pair (so `n, l` have degree one and `m, k` degree zero).
pub struct QtSides {
    pub grade: u32,
    pub lhs: PsiDO,
    pub rhs: PsiDO,
}

/// Left and right side of `[∂*_{n,m}, ∂*_{l,k}] Λ = (q^{ml} − q^{nk}) ∂*_{n+l,m+k} Λ`, grade by grade up to `big_p`.
pub fn qt_sides(h: &dyn Hierarchy, n: i64, m: i64, l: i64, k: i64, big_p: u32) -> Result<Vec<QtSides>> {
    let cap = h.dressing().cap();
    let empty = || PsiDO::new(h.lax().top(), h.lax().window(), []);
    let mut out = Vec::new();
    for g in 0..=big_p {
        let mut lhs = empty();
        for p in 0..=g {
            let a = g - p;
            for s in 0..=cap {
                for b in 0..=(cap - s) {
                    let c = ipow(n, p) * ipow(m, s) * ipow(l, a) * ipow(k, b)
                        / (Rational::factorial(p) * Rational::factorial(s) * Rational::factorial(a) * Rational::factorial(b));
                    if c.is_zero() {
                        continue;
                    }
                    let term = bracket_on_lax(h, (p, s), (a, b))?;
                    lhs = lhs.add(&term.scale(&EpsScalar::monomial(c, s + b, cap)));
                }
            }
        }
        let mut rhs = empty();
        for r in 0..=g.min(cap) {
            let alpha = g - r;
            let pref = (ipow(m * l, r) - ipow(n * k, r)) / Rational::factorial(r);
            if pref.is_zero() {
                continue;
            }
            for beta in 0..=(cap - r) {
                let c = &(&pref * &ipow(n + l, alpha)) * &ipow(m + k, beta)
                    / (Rational::factorial(alpha) * Rational::factorial(beta));
                if c.is_zero() {
                    continue;
                }
                let term = flow_on_lax(h, alpha, beta)?;
                rhs = rhs.add(&term.scale(&EpsScalar::monomial(c, r + beta, cap)));
            }
        }
        out.push(QtSides { grade: g, lhs, rhs });
    }
    Ok(out)
}

/// Quantum torus relation of the resummed flows, certified for M-degree `≤ P − D` and ε-degree `≤ D`.
///
/// Every grade `g ≤ P` of the identity is compared exactly. When the relation fails
/// but holds with the opposite sign, that is stated in the details.
pub fn check_qt_relation(h: &dyn Hierarchy, n: i64, m: i64, l: i64, k: i64, big_p: u32) -> Report {
    let check = format!("{}.qt_relation", h.tag());
    let cap = h.dressing().cap();
    if big_p < cap {
        return Report::error(check, Error::InvalidParams(format!("P = {big_p} is below the eps cap D = {cap}")));
    }
    if [n, m, l, k].iter().any(|v| *v < 0) {
        return Report::error(check, Error::InvalidParams("indices must be non-negative".into()));
    }
    let sides = match qt_sides(h, n, m, l, k, big_p) {
        Ok(s) => s,
        Err(e) => return Report::error(check, e),
    };
    let mut report = Report::new(check.clone(), Status::CertifiedRange).with_range([
        ("m_degree", (big_p - cap) as i64),
        ("eps_degree", cap as i64),
        ("grade", big_p as i64),
    ]);
    let mut window = i32::MIN;
    let mut opposite_holds = true;
    for side in &sides {
        let (lo, _) = side.lhs.common_range(&side.rhs);
        window = window.max(lo);
        if lo > -1 {
            return Report::error(check, Error::TruncationBudget(format!("grade {}: Lax window exhausted", side.grade)));
        }
        let residual = side.lhs.residual(&side.rhs);
        if !residual.is_empty() {
            report.status = Status::Fail;
            let (d, p) = &residual[0];
            report.push_detail(format!("grade {}: LHS - RHS at D^{d} = {p}", side.grade));
        }
        if !side.lhs.add(&side.rhs).residual(&PsiDO::zero()).is_empty() {
            opposite_holds = false;
        }
    }
    report.push_detail(format!("compared on Lax degrees >= {window}"));
    if report.status == Status::Fail && opposite_holds {
        report.push_detail("LHS = -RHS holds at every grade: the relation holds with (q^{nk} - q^{ml})");
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantum_coefficient_table() {
        let t = quantum_coefficients(1, 1, 2, 2);
        assert_eq!(t.len(), 9);
        for ((p, s), c) in &t {
            let expect = Rational::ONE / (Rational::factorial(*p) * Rational::factorial(*s));
            assert_eq!(c, &EpsScalar::monomial(expect, *s, 2));
        }
        let zero = quantum_coefficients(0, 0, 3, 2);
        assert_eq!(zero.keys().copied().collect::<Vec<_>>(), vec![(0, 0)]);
        let collapsed = quantum_coefficients(2, 5, 3, 0);
        assert!(collapsed.keys().all(|(_, s)| *s == 0));
        assert_eq!(collapsed[&(3, 0)], EpsScalar::from_rational(Rational::new(8, 6)).truncate(0));
    }
}
