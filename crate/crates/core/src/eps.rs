//! Truncated polynomials in the nilpotent parameter `ε = log q`.
//!
//! An [`EpsScalar`] is known modulo `ε^{cap+1}`. Plain rationals produced by
//! ring arithmetic (binomials, factorials) carry no truncation at all and are
//! tagged [`EXACT`]; combining two scalars keeps the smaller cap, so a result
//! is never claimed to more ε-orders than its inputs support.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use smallvec::SmallVec;

use crate::rational::Rational;

/// Cap value for scalars that are exact polynomials in ε (no truncation).
pub const EXACT: u32 = u32::MAX;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct EpsScalar {
    // coefficient of ε^i at index i; trailing zeros trimmed, never longer than cap+1
    coeffs: SmallVec<[Rational; 1]>,
    cap: u32,
}

impl EpsScalar {
    pub fn zero() -> Self {
        EpsScalar { coeffs: SmallVec::new(), cap: EXACT }
    }

    pub fn one() -> Self {
        Self::from_rational(Rational::ONE)
    }

    pub fn from_rational(r: Rational) -> Self {
        let mut coeffs = SmallVec::new();
        if !r.is_zero() {
            coeffs.push(r);
        }
        EpsScalar { coeffs, cap: EXACT }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(Rational::from_int(n))
    }

    /// Build from explicit coefficients (index = ε-degree), truncated at `cap`.
    pub fn from_coeffs(coeffs: impl IntoIterator<Item = Rational>, cap: u32) -> Self {
        let mut out = EpsScalar { coeffs: coeffs.into_iter().collect(), cap };
        out.normalize();
        out
    }

    /// `c · ε^k`.
    pub fn monomial(c: Rational, k: u32, cap: u32) -> Self {
        if k > cap || c.is_zero() {
            return EpsScalar { coeffs: SmallVec::new(), cap };
        }
        let mut coeffs: SmallVec<[Rational; 1]> = SmallVec::from_elem(Rational::ZERO, k as usize);
        coeffs.push(c);
        EpsScalar { coeffs, cap }
    }

    fn normalize(&mut self) {
        if self.cap != EXACT && self.coeffs.len() > self.cap as usize + 1 {
            self.coeffs.truncate(self.cap as usize + 1);
        }
        while self.coeffs.last().is_some_and(Rational::is_zero) {
            self.coeffs.pop();
        }
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn is_exact(&self) -> bool {
        self.cap == EXACT
    }

    /// Lower the cap (drop higher ε-orders).
    pub fn truncate(&self, cap: u32) -> Self {
        let mut out = self.clone();
        out.cap = out.cap.min(cap);
        out.normalize();
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    /// The ε^0 part when the scalar has no higher orders.
    pub fn as_rational(&self) -> Option<&Rational> {
        match self.coeffs.len() {
            0 => Some(&Rational::ZERO),
            1 => Some(&self.coeffs[0]),
            _ => None,
        }
    }

    pub fn coeff(&self, k: u32) -> Rational {
        self.coeffs.get(k as usize).cloned().unwrap_or(Rational::ZERO)
    }

    /// Highest stored ε-degree, `None` for zero.
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.len().checked_sub(1).map(|d| d as u32)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// `q^a = e^{aε} = Σ_{s≤cap} (aε)^s / s!`.
    pub fn q_power(a: &Rational, cap: u32) -> Self {
        assert!(cap != EXACT, "q-power needs a finite ε-cap");
        let mut coeffs = Vec::with_capacity(cap as usize + 1);
        let mut term = Rational::ONE;
        for s in 0..=cap {
            if s > 0 {
                term = &(&term * a) / &Rational::from_int(s as i64);
            }
            coeffs.push(term.clone());
        }
        Self::from_coeffs(coeffs, cap)
    }

    pub fn scale(&self, r: &Rational) -> Self {
        if r.is_zero() {
            return EpsScalar { coeffs: SmallVec::new(), cap: self.cap };
        }
        EpsScalar { coeffs: self.coeffs.iter().map(|c| c * r).collect(), cap: self.cap }
    }

    pub fn add_ref(&self, rhs: &Self) -> Self {
        let cap = self.cap.min(rhs.cap);
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut coeffs: SmallVec<[Rational; 1]> = SmallVec::with_capacity(n);
        for i in 0..n {
            coeffs.push(match (self.coeffs.get(i), rhs.coeffs.get(i)) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            });
        }
        let mut out = EpsScalar { coeffs, cap };
        out.normalize();
        out
    }

    /// In-place `self += rhs`.
    pub fn add_assign_ref(&mut self, rhs: &Self) {
        if rhs.coeffs.len() <= 1 && self.coeffs.len() <= 1 {
            self.cap = self.cap.min(rhs.cap);
            match (self.coeffs.first_mut(), rhs.coeffs.first()) {
                (_, None) => {}
                (Some(a), Some(b)) => *a = &*a + b,
                (None, Some(b)) => self.coeffs.push(b.clone()),
            }
            self.normalize();
            return;
        }
        *self = self.add_ref(rhs);
    }

    pub fn mul_ref(&self, rhs: &Self) -> Self {
        let cap = self.cap.min(rhs.cap);
        if self.coeffs.len() == 1 && rhs.coeffs.len() == 1 {
            let mut coeffs = SmallVec::new();
            coeffs.push(&self.coeffs[0] * &rhs.coeffs[0]);
            return EpsScalar { coeffs, cap };
        }
        if self.is_zero() || rhs.is_zero() {
            return EpsScalar { coeffs: SmallVec::new(), cap };
        }
        let mut n = self.coeffs.len() + rhs.coeffs.len() - 1;
        if cap != EXACT {
            n = n.min(cap as usize + 1);
        }
        let mut coeffs: SmallVec<[Rational; 1]> = SmallVec::from_elem(Rational::ZERO, n);
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if i + j < n {
                    coeffs[i + j] = &coeffs[i + j] + &(a * b);
                }
            }
        }
        let mut out = EpsScalar { coeffs, cap };
        out.normalize();
        out
    }

    pub fn neg_ref(&self) -> Self {
        EpsScalar { coeffs: self.coeffs.iter().map(|c| -c).collect(), cap: self.cap }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc.mul_ref(self);
        }
        acc
    }
}

impl Default for EpsScalar {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<Rational> for EpsScalar {
    fn from(r: Rational) -> Self {
        Self::from_rational(r)
    }
}

impl Add for EpsScalar {
    type Output = EpsScalar;
    fn add(self, rhs: EpsScalar) -> EpsScalar {
        self.add_ref(&rhs)
    }
}

impl Add<&EpsScalar> for &EpsScalar {
    type Output = EpsScalar;
    fn add(self, rhs: &EpsScalar) -> EpsScalar {
        self.add_ref(rhs)
    }
}

impl Sub for EpsScalar {
    type Output = EpsScalar;
    fn sub(self, rhs: EpsScalar) -> EpsScalar {
        self.add_ref(&rhs.neg_ref())
    }
}

impl Sub<&EpsScalar> for &EpsScalar {
    type Output = EpsScalar;
    fn sub(self, rhs: &EpsScalar) -> EpsScalar {
        self.add_ref(&rhs.neg_ref())
    }
}

impl Mul for EpsScalar {
    type Output = EpsScalar;
    fn mul(self, rhs: EpsScalar) -> EpsScalar {
        self.mul_ref(&rhs)
    }
}

impl Mul<&EpsScalar> for &EpsScalar {
    type Output = EpsScalar;
    fn mul(self, rhs: &EpsScalar) -> EpsScalar {
        self.mul_ref(rhs)
    }
}

impl Neg for EpsScalar {
    type Output = EpsScalar;
    fn neg(self) -> EpsScalar {
        self.neg_ref()
    }
}

impl Neg for &EpsScalar {
    type Output = EpsScalar;
    fn neg(self) -> EpsScalar {
        self.neg_ref()
    }
}

impl fmt::Display for EpsScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let abs = if neg { -c } else { c.clone() };
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            match k {
                0 => write!(f, "{abs}")?,
                _ => {
                    if !abs.is_one() {
                        write!(f, "{abs}*")?;
                    }
                    if k == 1 {
                        write!(f, "eps")?;
                    } else {
                        write!(f, "eps^{k}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for EpsScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)?;
        if self.cap != EXACT {
            write!(f, " (mod eps^{})", self.cap + 1)?;
        }
        Ok(())
    }
}
