//! Dressing operators and the flows they generate.
//!
//! A hierarchy is encoded by a dressing operator `S = 1 + Σ_{k≤O} s_k ∂^{-k}`
//! whose coefficients are either free jets or, after a reduction, differential
//! polynomials in the free ones. Every flow has the form `∂S = −X_− S` for some
//! operator `X`; its action on a free jet `ω_k` is read off as the coefficient of
//! `∂^{-k}` in `−X_− ∘ S`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;

use crate::derivation::Derivation;
use crate::diffpoly::{DiffPoly, Family, Generator};
use crate::eps::EpsScalar;
use crate::error::{Error, Result};
use crate::psido::{compose_in, invert_unit_in, PsiDO};
use crate::rational::Rational;
use crate::ring::DiffRing;

/// Generic dressing operator `1 + Σ_{k=1}^{order} ω_k ∂^{-k}` with window `−order`.
pub fn generic_dressing(family: Family, order: u32) -> PsiDO {
    let o = order as i32;
    let coeffs = (1..=order).map(|k| (-(k as i32), DiffPoly::jet(family, k, 0)));
    PsiDO::new(0, -o, std::iter::once((0, DiffPoly::one())).chain(coeffs))
}

/// `Γ = Σ_{i ∈ indices} c_i t_i ∂^{i-shift}` as an exact operator.
pub fn gamma_operator(terms: &[(u32, Rational, i32)]) -> PsiDO {
    let mut out = PsiDO::zero();
    for (i, c, deg) in terms {
        out = out.add(&PsiDO::monomial(*deg, DiffPoly::time(*i).scale_rational(c)));
    }
    out
}

pub struct Dressing {
    ring: Arc<dyn DiffRing>,
    family: Family,
    order: u32,
    horizon: u32,
    cap: u32,
    /// Indices `k` of the free jets `ω_k` on which flows are recorded.
    free: Vec<u32>,
    s: PsiDO,
    s_inv: PsiDO,
}

impl Dressing {
    pub fn new(
        ring: Arc<dyn DiffRing>,
        family: Family,
        s: PsiDO,
        free: Vec<u32>,
        horizon: u32,
        cap: u32,
    ) -> Result<Self> {
        let order = (-s.window()).max(0) as u32;
        let s_inv = invert_unit_in(ring.as_ref(), &s, order)?;
        Ok(Dressing { ring, family, order, horizon, cap, free, s, s_inv })
    }

    pub fn ring(&self) -> &Arc<dyn DiffRing> {
        &self.ring
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn free_indices(&self) -> &[u32] {
        &self.free
    }

    pub fn s(&self) -> &PsiDO {
        &self.s
    }

    pub fn s_inv(&self) -> &PsiDO {
        &self.s_inv
    }

    pub fn compose(&self, a: &PsiDO, b: &PsiDO) -> PsiDO {
        compose_in(self.ring.as_ref(), a, b, Some(-(self.order as i32) - 2))
    }

    pub fn commutator(&self, a: &PsiDO, b: &PsiDO) -> PsiDO {
        self.compose(a, b).sub(&self.compose(b, a))
    }

    /// `S X S^{-1}` for an exact operator `X`, computed as `X + [S, X] S^{-1}`.
    ///
    /// The leading parts of `s_k ∂^{-k} X` and `X s_k ∂^{-k}` cancel, so the
    /// unknown coefficients `s_k`, `k > O`, first reach degree `N_X − O − 2` and the
    /// result is exact down to `N_X − O − 1`.
    pub fn conjugate(&self, x: &PsiDO) -> PsiDO {
        assert!(x.is_exact(), "conjugate expects an exact operator");
        let window = self.s.window() + x.top() - 1;
        let ring = self.ring.as_ref();
        let mut bracket = PsiDO::new(x.top() - 1, window, []);
        for (deg, coeff) in self.s.terms() {
            if deg == 0 {
                continue;
            }
            let sk = PsiDO::monomial(deg, coeff.clone());
            let c = compose_in(ring, &sk, x, Some(window)).sub(&compose_in(ring, x, &sk, Some(window)));
            bracket = bracket.add(&c);
        }
        let bracket = PsiDO::new(x.top() - 1, window, bracket.terms().map(|(d, p)| (d, p.clone())));
        x.add(&compose_in(ring, &bracket, &self.s_inv, Some(window)))
    }

    /// The flow `∂S = −X_− S`, recorded on every free jet the window of `X` reaches.
    pub fn flow(&self, name: impl Into<String>, x: &PsiDO, times: BTreeMap<u32, EpsScalar>) -> Result<Derivation> {
        let name = name.into();
        let reach = (-x.window()).min(self.order as i32);
        if reach < 1 {
            return Err(Error::TruncationBudget(format!(
                "{name}: generator window {} leaves no dressing coefficient determined (O = {})",
                x.window(),
                self.order
            )));
        }
        let minus = x.minus().neg();
        let product = compose_in(self.ring.as_ref(), &minus, &self.s, Some(-reach));
        let mut jets = BTreeMap::new();
        for &k in &self.free {
            if k as i32 > reach {
                break;
            }
            let c = product.coeff(-(k as i32)).expect("inside window");
            jets.insert(Generator::jet(self.family, k, 0), c);
        }
        Ok(Derivation::new(name, jets, times, self.horizon, self.ring.clone()))
    }

    /// Apply a derivation to every coefficient of `op`, top down. The result's window
    /// stops above the first coefficient that involves a jet outside the derivation's domain.
    pub fn apply_to_operator(&self, d: &Derivation, op: &PsiDO) -> Result<PsiDO> {
        apply_to_operator(d, op)
    }
}

/// See [`Dressing::apply_to_operator`].
pub fn apply_to_operator(d: &Derivation, op: &PsiDO) -> Result<PsiDO> {
    let mut out = Vec::new();
    let mut window = op.window();
    for (deg, p) in op.terms() {
        match d.apply(p) {
            Ok(v) => out.push((deg, v)),
            Err(Error::OutOfDomain(_)) => {
                window = deg + 1;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PsiDO::new(op.top(), window, out))
}

/// Memoized products `M^p Λ^s` for a pair of operators `(M, Λ)`.
pub struct PowerCache {
    m: PsiDO,
    lax: PsiDO,
    floor: i32,
    ring: Arc<dyn DiffRing>,
    lax_powers: Mutex<Vec<Arc<PsiDO>>>,
    mixed: Mutex<FxHashMap<(u32, u32), Arc<PsiDO>>>,
}

impl PowerCache {
    pub fn new(ring: Arc<dyn DiffRing>, m: PsiDO, lax: PsiDO, floor: i32) -> Self {
        PowerCache {
            m,
            lax,
            floor,
            ring,
            lax_powers: Mutex::new(vec![Arc::new(PsiDO::identity())]),
            mixed: Mutex::new(FxHashMap::default()),
        }
    }

    pub fn m(&self) -> &PsiDO {
        &self.m
    }

    pub fn lax(&self) -> &PsiDO {
        &self.lax
    }

    pub fn lax_power(&self, s: u32) -> Arc<PsiDO> {
        let mut powers = self.lax_powers.lock().unwrap();
        while powers.len() <= s as usize {
            let next = compose_in(self.ring.as_ref(), &self.lax, powers.last().unwrap(), Some(self.floor));
            powers.push(Arc::new(next));
        }
        powers[s as usize].clone()
    }

    /// `M^p Λ^s`.
    pub fn get(&self, p: u32, s: u32) -> Arc<PsiDO> {
        if p == 0 {
            return self.lax_power(s);
        }
        if let Some(v) = self.mixed.lock().unwrap().get(&(p, s)) {
            return v.clone();
        }
        let lower = self.get(p - 1, s);
        let v = Arc::new(compose_in(self.ring.as_ref(), &self.m, &lower, Some(self.floor)));
        self.mixed.lock().unwrap().insert((p, s), v.clone());
        v
    }
}

/// Coefficient `m^p (nε)^s / (p! s!)` of the expansion of `e^{mM} q^{nΛ}`.
pub fn resummation_coefficient(m: i64, n: i64, p: u32, s: u32, cap: u32) -> EpsScalar {
    let c = Rational::from_int(m).pow(p) * Rational::from_int(n).pow(s)
        / (Rational::factorial(p) * Rational::factorial(s));
    EpsScalar::monomial(c, s, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psido::compose;
    use crate::ring::FreeRing;

    #[test]
    fn conjugation_matches_plain_products() {
        let d = Dressing::new(Arc::new(FreeRing), Family::Omega, generic_dressing(Family::Omega, 5), (1..=5).collect(), 3, 2).unwrap();
        for x in [PsiDO::d(), PsiDO::d_pow(2), PsiDO::d_pow(-1), PsiDO::mult(DiffPoly::time(1))] {
            let fast = d.conjugate(&x);
            let slow = compose(&compose(d.s(), &x), d.s_inv());
            assert_eq!(fast.window(), d.s().window() + x.top() - 1);
            assert!(slow.window() >= fast.window());
            assert!(fast.residual(&slow).is_empty(), "{x}");
        }
    }

    #[test]
    fn first_coefficient_of_l() {
        let d = Dressing::new(Arc::new(FreeRing), Family::Omega, generic_dressing(Family::Omega, 4), (1..=4).collect(), 3, 2).unwrap();
        let l = d.conjugate(&PsiDO::d());
        assert_eq!(l.coeff(0).unwrap(), DiffPoly::zero());
        assert_eq!(l.coeff(-1).unwrap(), DiffPoly::jet(Family::Omega, 1, 1).neg());
    }

    #[test]
    fn resummation_coefficients() {
        let c = resummation_coefficient(1, 1, 2, 2, 2);
        assert_eq!(c, EpsScalar::monomial(Rational::new(1, 4), 2, 2));
        assert!(resummation_coefficient(0, 3, 1, 0, 2).is_zero());
        assert_eq!(resummation_coefficient(0, 0, 0, 0, 2), EpsScalar::one().truncate(2));
    }
}
