//! Sparse polynomials over [`EpsScalar`] in jet variables and explicit times.
//!
//! Generators are packed into a `u32` so that the natural integer order is the
//! lexicographic order on (kind, family, base index, derivative order). A
//! monomial is a sorted list of (generator, exponent) pairs and a polynomial is
//! a sorted list of (monomial, coefficient) pairs with no zero coefficients, so
//! structural equality is polynomial equality.

use std::fmt;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::eps::EpsScalar;
use crate::rational::Rational;

/// Which dressing operator a jet variable belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// `ω_k`: KP and KdV dressing coefficients.
    Omega,
    /// `ω̄_k`: BKP dressing coefficients.
    OmegaBar,
}

impl Family {
    fn tag(self) -> u32 {
        match self {
            Family::Omega => 0,
            Family::OmegaBar => 1,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Family::Omega => "w",
            Family::OmegaBar => "b",
        }
    }
}

const KIND_SHIFT: u32 = 30;
const FAMILY_SHIFT: u32 = 28;
const INDEX_SHIFT: u32 = 16;
const INDEX_MASK: u32 = 0xfff;
const ORDER_MASK: u32 = 0xffff;

/// A ring generator: a jet `ω_k^{(j)}` or an explicit time `t_i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator(u32);

impl Generator {
    pub fn time(i: u32) -> Self {
        assert!((1..=INDEX_MASK).contains(&i), "time index out of range");
        Generator(i << INDEX_SHIFT)
    }

    pub fn jet(family: Family, k: u32, order: u32) -> Self {
        assert!((1..=INDEX_MASK).contains(&k), "jet index out of range");
        assert!(order <= ORDER_MASK, "jet order out of range");
        Generator((1 << KIND_SHIFT) | (family.tag() << FAMILY_SHIFT) | (k << INDEX_SHIFT) | order)
    }

    pub fn is_time(self) -> bool {
        self.0 >> KIND_SHIFT == 0
    }

    pub fn is_jet(self) -> bool {
        !self.is_time()
    }

    /// Base index `k` of a jet, or `i` of a time.
    pub fn index(self) -> u32 {
        (self.0 >> INDEX_SHIFT) & INDEX_MASK
    }

    /// Derivative order of a jet (0 for times).
    pub fn order(self) -> u32 {
        if self.is_time() {
            0
        } else {
            self.0 & ORDER_MASK
        }
    }

    pub fn family(self) -> Option<Family> {
        if self.is_time() {
            return None;
        }
        Some(match (self.0 >> FAMILY_SHIFT) & 0b11 {
            0 => Family::Omega,
            _ => Family::OmegaBar,
        })
    }

    /// The jet with derivative order raised by one.
    pub fn shifted(self) -> Self {
        debug_assert!(self.is_jet());
        Generator(self.0 + 1)
    }

    /// The underived jet `ω_k` of this jet.
    pub fn base(self) -> Self {
        debug_assert!(self.is_jet());
        Generator(self.0 & !ORDER_MASK)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_time() {
            return write!(f, "t{}", self.index());
        }
        write!(f, "{}{}", self.family().unwrap().symbol(), self.index())?;
        match self.order() {
            0 => Ok(()),
            j @ 1..=3 => write!(f, "{}", "'".repeat(j as usize)),
            j => write!(f, "^({j})"),
        }
    }
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Product of generator powers, sorted by generator, exponents ≥ 1.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(SmallVec<[(Generator, u32); 4]>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn from_generator(g: Generator) -> Self {
        let mut v = SmallVec::new();
        v.push((g, 1));
        Monomial(v)
    }

    pub fn from_powers(mut powers: Vec<(Generator, u32)>) -> Self {
        powers.sort_by_key(|p| p.0);
        let mut out: SmallVec<[(Generator, u32); 4]> = SmallVec::new();
        for (g, e) in powers {
            if e == 0 {
                continue;
            }
            match out.last_mut() {
                Some((h, f)) if *h == g => *f += e,
                _ => out.push((g, e)),
            }
        }
        Monomial(out)
    }

    pub fn powers(&self) -> &[(Generator, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|p| p.1).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out: SmallVec<[(Generator, u32); 4]> = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Drop one power of the generator at position `pos`.
    fn without_one(&self, pos: usize) -> Monomial {
        let mut v = self.0.clone();
        if v[pos].1 == 1 {
            v.remove(pos);
        } else {
            v[pos].1 -= 1;
        }
        Monomial(v)
    }

    /// Multiply by a single generator.
    fn times_generator(&self, g: Generator) -> Monomial {
        let mut v = self.0.clone();
        match v.binary_search_by_key(&g, |p| p.0) {
            Ok(i) => v[i].1 += 1,
            Err(i) => v.insert(i, (g, 1)),
        }
        Monomial(v)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, (g, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{g}")?;
            } else {
                write!(f, "{g}^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A differential polynomial in normal form.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct DiffPoly {
    terms: Vec<(Monomial, EpsScalar)>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        DiffPoly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(EpsScalar::one())
    }

    pub fn constant(c: EpsScalar) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        DiffPoly { terms: vec![(Monomial::one(), c)] }
    }

    pub fn from_rational(r: Rational) -> Self {
        Self::constant(EpsScalar::from_rational(r))
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(Rational::from_int(n))
    }

    pub fn generator(g: Generator) -> Self {
        DiffPoly { terms: vec![(Monomial::from_generator(g), EpsScalar::one())] }
    }

    pub fn jet(family: Family, k: u32, order: u32) -> Self {
        Self::generator(Generator::jet(family, k, order))
    }

    pub fn time(i: u32) -> Self {
        Self::generator(Generator::time(i))
    }

    /// Build from arbitrary (possibly repeated, possibly zero) terms.
    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, EpsScalar)>) -> Self {
        let mut acc: FxHashMap<Monomial, EpsScalar> = FxHashMap::default();
        for (m, c) in terms {
            accumulate(&mut acc, m, &c);
        }
        Self::from_map(acc)
    }

    fn from_map(acc: FxHashMap<Monomial, EpsScalar>) -> Self {
        let mut terms: Vec<_> = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        DiffPoly { terms }
    }

    /// Canonical form: sorted, merged, zero coefficients removed. Values built
    /// through this module are always normal already; this re-derives it.
    pub fn normalize(&self) -> Self {
        Self::from_terms(self.terms.iter().cloned())
    }

    pub fn terms(&self) -> &[(Monomial, EpsScalar)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value when the polynomial has no variables.
    pub fn as_constant(&self) -> Option<EpsScalar> {
        match self.terms.as_slice() {
            [] => Some(EpsScalar::zero()),
            [(m, c)] if m.is_one() => Some(c.clone()),
            _ => None,
        }
    }

    /// Every generator occurring in the polynomial.
    pub fn generators(&self) -> Vec<Generator> {
        let mut gs: Vec<Generator> =
            self.terms.iter().flat_map(|(m, _)| m.powers().iter().map(|p| p.0)).collect();
        gs.sort_unstable();
        gs.dedup();
        gs
    }

    pub fn add(&self, other: &DiffPoly) -> DiffPoly {
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = a[i].1.add_ref(&b[j].1);
                    if !c.is_zero() {
                        out.push((a[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        DiffPoly { terms: out }
    }

    pub fn neg(&self) -> DiffPoly {
        DiffPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg_ref())).collect() }
    }

    pub fn sub(&self, other: &DiffPoly) -> DiffPoly {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &EpsScalar) -> DiffPoly {
        if c.is_one() {
            return self.clone();
        }
        DiffPoly {
            terms: self
                .terms
                .iter()
                .filter_map(|(m, d)| {
                    let p = d.mul_ref(c);
                    (!p.is_zero()).then(|| (m.clone(), p))
                })
                .collect(),
        }
    }

    pub fn scale_rational(&self, r: &Rational) -> DiffPoly {
        self.scale(&EpsScalar::from_rational(r.clone()))
    }

    pub fn mul(&self, other: &DiffPoly) -> DiffPoly {
        if self.is_zero() || other.is_zero() {
            return DiffPoly::zero();
        }
        let mut acc = PolyAccumulator::with_capacity(self.len() * other.len());
        acc.add_product(self, other, &EpsScalar::one());
        acc.finish()
    }

    pub fn pow(&self, e: u32) -> DiffPoly {
        let mut acc = DiffPoly::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Total x-derivative with `t_1 = x`: jets shift order, `t_1 → 1`, other times are constants.
    pub fn total_x_derivative(&self) -> DiffPoly {
        let mut acc: FxHashMap<Monomial, EpsScalar> = FxHashMap::default();
        for (m, c) in &self.terms {
            for (pos, &(g, e)) in m.powers().iter().enumerate() {
                let rest = m.without_one(pos);
                let coeff = if e == 1 { c.clone() } else { c.scale(&Rational::from_int(e as i64)) };
                if g.is_time() {
                    if g.index() == 1 {
                        accumulate(&mut acc, rest, &coeff);
                    }
                } else {
                    accumulate(&mut acc, rest.times_generator(g.shifted()), &coeff);
                }
            }
        }
        Self::from_map(acc)
    }

    /// `k`-fold total x-derivative.
    pub fn total_x_derivative_n(&self, k: u32) -> DiffPoly {
        let mut p = self.clone();
        for _ in 0..k {
            if p.is_zero() {
                break;
            }
            p = p.total_x_derivative();
        }
        p
    }

    /// Partial derivative with respect to one generator (jets and times are independent).
    pub fn partial(&self, g: Generator) -> DiffPoly {
        let mut acc: FxHashMap<Monomial, EpsScalar> = FxHashMap::default();
        for (m, c) in &self.terms {
            if let Ok(pos) = m.powers().binary_search_by_key(&g, |p| p.0) {
                let e = m.powers()[pos].1;
                accumulate(&mut acc, m.without_one(pos), &c.scale(&Rational::from_int(e as i64)));
            }
        }
        Self::from_map(acc)
    }

    /// Replace generators by polynomials. `rule` returns `None` for generators kept as-is.
    pub fn substitute(&self, mut rule: impl FnMut(Generator) -> Option<DiffPoly>) -> DiffPoly {
        let mut cache: FxHashMap<Generator, Option<DiffPoly>> = FxHashMap::default();
        let mut acc = PolyAccumulator::with_capacity(self.len());
        for (m, c) in &self.terms {
            let mut kept: Vec<(Generator, u32)> = Vec::new();
            let mut factor = DiffPoly::one();
            for &(g, e) in m.powers() {
                let image = cache.entry(g).or_insert_with(|| rule(g));
                match image {
                    Some(p) => factor = factor.mul(&p.pow(e)),
                    None => kept.push((g, e)),
                }
            }
            let kept = DiffPoly { terms: vec![(Monomial(kept.into_iter().collect()), c.clone())] };
            acc.add_product(&kept, &factor, &EpsScalar::one());
        }
        acc.finish()
    }

    /// Apply a map to every coefficient.
    pub fn map_coeffs(&self, mut f: impl FnMut(&EpsScalar) -> EpsScalar) -> DiffPoly {
        DiffPoly {
            terms: self
                .terms
                .iter()
                .filter_map(|(m, c)| {
                    let d = f(c);
                    (!d.is_zero()).then(|| (m.clone(), d))
                })
                .collect(),
        }
    }

    /// Coefficient of `ε^k` as an ε-free polynomial.
    pub fn eps_component(&self, k: u32) -> DiffPoly {
        self.map_coeffs(|c| EpsScalar::from_rational(c.coeff(k)))
    }

    /// Smallest ε-cap among the coefficients.
    pub fn cap(&self) -> u32 {
        self.terms.iter().map(|t| t.1.cap()).min().unwrap_or(crate::eps::EXACT)
    }
}

fn accumulate(acc: &mut FxHashMap<Monomial, EpsScalar>, m: Monomial, c: &EpsScalar) {
    use std::collections::hash_map::Entry;
    match acc.entry(m) {
        Entry::Occupied(mut e) => e.get_mut().add_assign_ref(c),
        Entry::Vacant(e) => {
            e.insert(c.clone());
        }
    }
}

/// Hash-based sum of products, for building one polynomial out of many terms.
pub struct PolyAccumulator {
    acc: FxHashMap<Monomial, EpsScalar>,
}

impl PolyAccumulator {
    pub fn new() -> Self {
        PolyAccumulator { acc: FxHashMap::default() }
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut acc = FxHashMap::default();
        acc.reserve(n.min(1 << 16));
        PolyAccumulator { acc }
    }

    pub fn add(&mut self, p: &DiffPoly, scale: &EpsScalar) {
        for (m, c) in &p.terms {
            accumulate(&mut self.acc, m.clone(), &c.mul_ref(scale));
        }
    }

    /// `self += scale · a · b`.
    pub fn add_product(&mut self, a: &DiffPoly, b: &DiffPoly, scale: &EpsScalar) {
        if scale.is_zero() {
            return;
        }
        let unit = scale.is_one();
        for (ma, ca) in &a.terms {
            let ca = if unit { ca.clone() } else { ca.mul_ref(scale) };
            for (mb, cb) in &b.terms {
                accumulate(&mut self.acc, ma.mul(mb), &ca.mul_ref(cb));
            }
        }
    }

    pub fn finish(self) -> DiffPoly {
        DiffPoly::from_map(self.acc)
    }
}

impl Default for PolyAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let simple = c.as_rational().cloned();
            match simple {
                Some(r) => {
                    let neg = r.is_negative();
                    let abs = if neg { -&r } else { r };
                    if i == 0 {
                        if neg {
                            write!(f, "-")?;
                        }
                    } else {
                        write!(f, " {} ", if neg { '-' } else { '+' })?;
                    }
                    match (abs.is_one(), m.is_one()) {
                        (true, false) => write!(f, "{m}")?,
                        (_, true) => write!(f, "{abs}")?,
                        (false, false) => write!(f, "{abs}*{m}")?,
                    }
                }
                None => {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    if m.is_one() {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "({c})*{m}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub fn w(k: u32, j: u32) -> DiffPoly {
        DiffPoly::jet(Family::Omega, k, j)
    }

    /// Random small polynomial in ω_1..ω_3 jets (order ≤ 2) and t_1, t_2.
    pub fn arb_poly() -> impl Strategy<Value = DiffPoly> {
        let gen = prop_oneof![
            (1u32..=3, 0u32..=2).prop_map(|(k, j)| Generator::jet(Family::Omega, k, j)),
            (1u32..=2).prop_map(Generator::time),
        ];
        let mono = prop::collection::vec((gen, 1u32..=2), 0..=3).prop_map(Monomial::from_powers);
        prop::collection::vec((mono, -5i64..=5), 0..=4).prop_map(|ts| {
            DiffPoly::from_terms(
                ts.into_iter().map(|(m, c)| (m, EpsScalar::from_int(c))),
            )
        })
    }

    #[test]
    fn generator_order_is_kind_family_index_order() {
        let t = Generator::time(5);
        let a = Generator::jet(Family::Omega, 1, 7);
        let b = Generator::jet(Family::Omega, 2, 0);
        let c = Generator::jet(Family::OmegaBar, 1, 0);
        assert!(t < a && a < b && b < c);
        assert_eq!(a.shifted().order(), 8);
        assert_eq!(a.base(), Generator::jet(Family::Omega, 1, 0));
        assert_eq!(a.to_string(), "w1^(7)");
        assert_eq!(Generator::jet(Family::OmegaBar, 3, 2).to_string(), "b3''");
    }

    #[test]
    fn normalize_drops_zeros_and_is_idempotent() {
        let x = Monomial::from_generator(Generator::jet(Family::Omega, 1, 0));
        let z = Monomial::from_generator(Generator::jet(Family::Omega, 3, 0));
        let p = DiffPoly { terms: vec![(z, EpsScalar::zero()), (x.clone(), EpsScalar::one())] };
        let n = p.normalize();
        assert_eq!(n.terms().len(), 1);
        assert_eq!(n.normalize(), n);
        let q = w(1, 0).mul(&w(2, 0)).add(&w(1, 1));
        assert!(q.add(&q.neg()).is_zero());
    }

    #[test]
    fn total_derivative_examples() {
        assert_eq!(w(1, 0).total_x_derivative(), w(1, 1));
        assert_eq!(DiffPoly::time(1).total_x_derivative(), DiffPoly::one());
        assert!(DiffPoly::time(2).total_x_derivative().is_zero());
        let prod = w(1, 0).mul(&w(2, 0));
        assert_eq!(prod.total_x_derivative(), w(1, 1).mul(&w(2, 0)).add(&w(1, 0).mul(&w(2, 1))));
        let sq = w(1, 0).pow(3).total_x_derivative();
        assert_eq!(sq, w(1, 0).pow(2).mul(&w(1, 1)).scale_rational(&Rational::from_int(3)));
    }

    #[test]
    fn substitution_replaces_powers() {
        let p = w(2, 0).pow(2).mul(&w(1, 0));
        let s = p.substitute(|g| (g == Generator::jet(Family::Omega, 2, 0)).then(|| w(1, 1).add(&DiffPoly::one())));
        let expect = w(1, 1).add(&DiffPoly::one()).pow(2).mul(&w(1, 0));
        assert_eq!(s, expect);
    }

    proptest! {
        #[test]
        fn total_derivative_is_a_derivation(p in arb_poly(), q in arb_poly()) {
            let lhs = p.mul(&q).total_x_derivative();
            let rhs = p.total_x_derivative().mul(&q).add(&p.mul(&q.total_x_derivative()));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn ring_laws(p in arb_poly(), q in arb_poly(), r in arb_poly()) {
            prop_assert_eq!(p.mul(&q).mul(&r), p.mul(&q.mul(&r)));
            prop_assert_eq!(p.mul(&q.add(&r)), p.mul(&q).add(&p.mul(&r)));
            prop_assert_eq!(p.add(&q), q.add(&p));
        }
    }
}
