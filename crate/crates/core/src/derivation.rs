//! Derivations of the coefficient ring (flows).
//!
//! A flow is stored by its action on underived jets `ω_k` and on explicit
//! times. The action on `ω_k^{(j)}` is `∂_x^j` of the action on `ω_k`, which is
//! exactly the statement that the flow commutes with the total x-derivative.
//! Jets whose base index has no stored action are outside the known domain
//! (their action would need dressing coefficients beyond the truncation).

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;

use crate::diffpoly::{DiffPoly, Generator, Monomial, PolyAccumulator};
use crate::eps::EpsScalar;
use crate::error::{Error, Result};
use crate::ring::{DiffRing, FreeRing};

#[derive(Clone)]
pub struct Derivation {
    inner: Arc<Inner>,
}

struct Inner {
    name: String,
    jets: BTreeMap<Generator, DiffPoly>,
    times: BTreeMap<u32, EpsScalar>,
    horizon: u32,
    ring: Arc<dyn DiffRing>,
    prolonged: Mutex<FxHashMap<Generator, Arc<DiffPoly>>>,
}

impl std::fmt::Debug for Derivation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Derivation")
            .field("name", &self.inner.name)
            .field("jets", &self.inner.jets)
            .field("times", &self.inner.times)
            .field("horizon", &self.inner.horizon)
            .finish()
    }
}

impl Derivation {
    /// `jets` maps underived jets to their images; `times` maps time indices to constants.
    pub fn new(
        name: impl Into<String>,
        jets: BTreeMap<Generator, DiffPoly>,
        times: BTreeMap<u32, EpsScalar>,
        horizon: u32,
        ring: Arc<dyn DiffRing>,
    ) -> Self {
        debug_assert!(jets.keys().all(|g| g.is_jet() && g.order() == 0));
        let times = times.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Derivation {
            inner: Arc::new(Inner {
                name: name.into(),
                jets,
                times,
                horizon,
                ring,
                prolonged: Mutex::new(FxHashMap::default()),
            }),
        }
    }

    /// The derivation `∂/∂t_i` acting only on the explicit time `t_i`.
    pub fn coordinate(i: u32, horizon: u32) -> Result<Self> {
        if i > horizon {
            return Err(Error::HorizonExceeded { index: i, horizon });
        }
        let mut times = BTreeMap::new();
        times.insert(i, EpsScalar::one());
        Ok(Self::new(format!("d/dt{i} (explicit)"), BTreeMap::new(), times, horizon, Arc::new(FreeRing)))
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn horizon(&self) -> u32 {
        self.inner.horizon
    }

    pub fn ring(&self) -> &Arc<dyn DiffRing> {
        &self.inner.ring
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self::new(
            name,
            self.inner.jets.clone(),
            self.inner.times.clone(),
            self.inner.horizon,
            self.inner.ring.clone(),
        )
    }

    /// Underived jets with a known action.
    pub fn domain(&self) -> impl Iterator<Item = Generator> + '_ {
        self.inner.jets.keys().copied()
    }

    pub fn contains(&self, g: Generator) -> bool {
        if g.is_time() {
            return g.index() <= self.inner.horizon;
        }
        self.inner.jets.contains_key(&g.base())
    }

    /// Stored action on an underived jet.
    pub fn jet_action(&self, base: Generator) -> Option<&DiffPoly> {
        self.inner.jets.get(&base)
    }

    pub fn time_action(&self, i: u32) -> EpsScalar {
        self.inner.times.get(&i).cloned().unwrap_or_default()
    }

    pub fn time_actions(&self) -> &BTreeMap<u32, EpsScalar> {
        &self.inner.times
    }

    /// Action on a single generator.
    pub fn on_generator(&self, g: Generator) -> Result<Arc<DiffPoly>> {
        if g.is_time() {
            if g.index() > self.inner.horizon {
                return Err(Error::HorizonExceeded { index: g.index(), horizon: self.inner.horizon });
            }
            return Ok(Arc::new(DiffPoly::constant(self.time_action(g.index()))));
        }
        let base = self.inner.jets.get(&g.base()).ok_or(Error::OutOfDomain(g))?;
        if g.order() == 0 {
            return Ok(Arc::new(base.clone()));
        }
        if let Some(p) = self.inner.prolonged.lock().unwrap().get(&g) {
            return Ok(p.clone());
        }
        let lower = self.on_generator(Generator::jet(g.family().unwrap(), g.index(), g.order() - 1))?;
        let p = Arc::new(self.inner.ring.dx(&lower));
        self.inner.prolonged.lock().unwrap().insert(g, p.clone());
        Ok(p)
    }

    /// Extend the action to an arbitrary polynomial by linearity and the Leibniz rule.
    pub fn apply(&self, p: &DiffPoly) -> Result<DiffPoly> {
        let mut acc = PolyAccumulator::with_capacity(p.len());
        for (m, c) in p.terms() {
            for (pos, &(g, e)) in m.powers().iter().enumerate() {
                let image = self.on_generator(g)?;
                if image.is_zero() {
                    continue;
                }
                let mut rest: Vec<(Generator, u32)> = m.powers().to_vec();
                if e == 1 {
                    rest.remove(pos);
                } else {
                    rest[pos].1 -= 1;
                }
                let coeff = c.scale(&crate::rational::Rational::from_int(e as i64));
                let rest = DiffPoly::from_terms([(Monomial::from_powers(rest), coeff)]);
                acc.add_product(&rest, &image, &EpsScalar::one());
            }
        }
        Ok(self.inner.ring.reduce(&acc.finish()))
    }

    /// `Σ c_i d_i`, defined on the common domain.
    pub fn linear_combination(
        name: impl Into<String>,
        terms: &[(EpsScalar, Derivation)],
        horizon: u32,
        ring: Arc<dyn DiffRing>,
    ) -> Self {
        let live: Vec<&(EpsScalar, Derivation)> = terms.iter().filter(|t| !t.0.is_zero()).collect();
        let mut jets = BTreeMap::new();
        if let Some(first) = terms.first() {
            'outer: for g in first.1.domain() {
                let mut acc = PolyAccumulator::new();
                for (c, d) in &live {
                    match d.jet_action(g) {
                        Some(p) => acc.add(p, c),
                        None => break 'outer,
                    }
                }
                if terms.iter().any(|(_, d)| !d.contains(g)) {
                    break;
                }
                jets.insert(g, acc.finish());
            }
        }
        let mut times: BTreeMap<u32, EpsScalar> = BTreeMap::new();
        for (c, d) in &live {
            for (i, a) in d.time_actions() {
                let e = times.entry(*i).or_default();
                *e = e.add_ref(&a.mul_ref(c));
            }
        }
        Self::new(name, jets, times, horizon, ring)
    }

    /// `[self, other]`: on each jet `ω_k`, `self(other(ω_k)) − other(self(ω_k))`.
    ///
    /// Time actions of both are constants, so the bracket acts trivially on times.
    /// The domain is the initial run of jets on which both nested actions are known.
    pub fn bracket(&self, other: &Derivation) -> Self {
        let mut jets = BTreeMap::new();
        for g in self.domain() {
            if !other.contains(g) {
                break;
            }
            let a = other.on_generator(g).and_then(|p| self.apply(&p));
            let b = self.on_generator(g).and_then(|p| other.apply(&p));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    jets.insert(g, a.sub(&b));
                }
                _ => break,
            }
        }
        Self::new(
            format!("[{}, {}]", self.name(), other.name()),
            jets,
            BTreeMap::new(),
            self.horizon().min(other.horizon()),
            self.inner.ring.clone(),
        )
    }

    /// True when every stored jet and time action vanishes.
    pub fn is_zero_on_domain(&self) -> bool {
        self.inner.jets.values().all(DiffPoly::is_zero) && self.inner.times.is_empty()
    }

    /// Keep only jets with base index ≤ `max_index`.
    pub fn restricted(&self, max_index: u32) -> Self {
        let jets = self.inner.jets.iter().filter(|(g, _)| g.index() <= max_index).map(|(g, p)| (*g, p.clone())).collect();
        Self::new(self.name(), jets, self.inner.times.clone(), self.inner.horizon, self.inner.ring.clone())
    }
}
