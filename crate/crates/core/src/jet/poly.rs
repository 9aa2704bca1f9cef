//! Canonical form for jet expressions.
//!
//! An expression is normalized to a quotient of two Laurent polynomials over
//! jet variables with exact rational coefficients. Monomial exponents are
//! rationals, so `k1^(1/2)` is representable; powers of multi-term
//! expressions must have integer exponents. Denominators carry no monomial
//! content (it is moved into the numerator as negative exponents) and are
//! monic in their first term, which makes the representation unique up to
//! common polynomial factors. Equality is decided by cross-multiplication.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::var::{Base, JetVar};

/// Exponent of a variable inside a monomial.
pub type Exponent = Rational64;

/// Errors raised while building canonical forms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgebraError {
    #[error("division by an expression that is identically zero")]
    DivisionByZero,
    #[error("non-integer power {exponent} of a multi-term expression is not supported")]
    UnsupportedPower { exponent: Exponent },
    #[error("coefficient {coefficient} has no exact rational power {exponent}")]
    IrrationalCoefficient { coefficient: BigRational, exponent: Exponent },
    #[error("variable {var} appears with non-integer exponent and cannot be substituted")]
    NonIntegerSubstitution { var: JetVar },
}

/// Product of jet variables raised to nonzero rational exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    factors: BTreeMap<JetVar, Exponent>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(var: JetVar) -> Self {
        Self::var_pow(var, Exponent::one())
    }

    pub fn var_pow(var: JetVar, exponent: Exponent) -> Self {
        let mut factors = BTreeMap::new();
        if !exponent.is_zero() {
            factors.insert(var, exponent);
        }
        Monomial { factors }
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> impl Iterator<Item = (&JetVar, &Exponent)> {
        self.factors.iter()
    }

    pub fn exponent(&self, var: &JetVar) -> Exponent {
        self.factors.get(var).copied().unwrap_or_else(Exponent::zero)
    }

    fn mul_var(&mut self, var: JetVar, exponent: Exponent) {
        let entry = self.factors.entry(var).or_insert_with(Exponent::zero);
        *entry += exponent;
        if entry.is_zero() {
            self.factors.remove(&var);
        }
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.clone();
        for (var, exp) in &other.factors {
            out.mul_var(*var, *exp);
        }
        out
    }

    pub fn pow(&self, exponent: Exponent) -> Monomial {
        let factors = self
            .factors
            .iter()
            .map(|(v, e)| (*v, *e * exponent))
            .filter(|(_, e)| !e.is_zero())
            .collect();
        Monomial { factors }
    }

    pub fn inverse(&self) -> Monomial {
        self.pow(-Exponent::one())
    }

    /// Split into the parts with positive and negative exponents (both as
    /// positive-exponent monomials).
    pub fn split_signs(&self) -> (Monomial, Monomial) {
        let mut pos = Monomial::one();
        let mut neg = Monomial::one();
        for (v, e) in &self.factors {
            if e.is_positive() {
                pos.factors.insert(*v, *e);
            } else {
                neg.factors.insert(*v, -*e);
            }
        }
        (pos, neg)
    }

    pub fn max_order(&self, base: Base) -> Option<u32> {
        self.factors
            .keys()
            .filter(|v| v.base == base)
            .map(|v| v.order)
            .max()
    }

    pub fn eval(&self, lookup: &mut impl FnMut(&JetVar) -> Option<f64>) -> Result<f64, JetVar> {
        let mut acc = 1.0;
        for (var, exp) in &self.factors {
            let x = lookup(var).ok_or(*var)?;
            acc *= if exp.is_integer() {
                x.powi(exp.to_integer() as i32)
            } else {
                x.powf(*exp.numer() as f64 / *exp.denom() as f64)
            };
        }
        Ok(acc)
    }
}

/// Finite sum of monomials with exact rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        Self::term(c, Monomial::one())
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn term(c: BigRational, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn var(var: JetVar) -> Self {
        Self::term(BigRational::one(), Monomial::var(var))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .next()
                .is_some_and(|(m, c)| m.is_one() && c.is_one())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    /// Constant value if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next()?;
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        self.scale(&-BigRational::one())
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * k))
                .collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(tm, c)| (tm.mul(m), c.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn pow_u(&self, mut n: u64) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// d/ds with every `JetVar(b, k)` mapped to `JetVar(b, k + 1)`.
    pub fn total_derivative(&self) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            for (var, exp) in m.factors() {
                let mut dm = m.clone();
                dm.mul_var(*var, -Exponent::one());
                dm.mul_var(var.differentiated(), Exponent::one());
                let k = BigRational::new(BigInt::from(*exp.numer()), BigInt::from(*exp.denom()));
                out.add_term(dm, c * k);
            }
        }
        out
    }

    pub fn partial(&self, var: &JetVar) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let exp = m.exponent(var);
            if exp.is_zero() {
                continue;
            }
            let mut dm = m.clone();
            dm.mul_var(*var, -Exponent::one());
            let k = BigRational::new(BigInt::from(*exp.numer()), BigInt::from(*exp.denom()));
            out.add_term(dm, c * k);
        }
        out
    }

    pub fn max_order(&self, base: Base) -> Option<u32> {
        self.terms.keys().filter_map(|m| m.max_order(base)).max()
    }

    pub fn vars(&self) -> std::collections::BTreeSet<JetVar> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().map(|(v, _)| *v))
            .collect()
    }

    /// Greatest monomial dividing every term (exponent minimum per variable,
    /// absent variables counting as exponent zero).
    fn monomial_content(&self) -> Monomial {
        let mut content: Option<BTreeMap<JetVar, Exponent>> = None;
        for m in self.terms.keys() {
            content = Some(match content {
                None => m.factors.clone(),
                Some(prev) => {
                    let mut vars: std::collections::BTreeSet<JetVar> = prev.keys().copied().collect();
                    vars.extend(m.factors.keys().copied());
                    vars.into_iter()
                        .map(|v| {
                            let a = prev.get(&v).copied().unwrap_or_else(Exponent::zero);
                            let b = m.exponent(&v);
                            (v, a.min(b))
                        })
                        .filter(|(_, e)| !e.is_zero())
                        .collect()
                }
            });
        }
        Monomial {
            factors: content.unwrap_or_default(),
        }
    }

    fn leading_coefficient(&self) -> Option<&BigRational> {
        self.terms.values().next()
    }

    pub fn substitute(&self, var: &JetVar, value: &RationalFn) -> Result<RationalFn, AlgebraError> {
        let mut out = RationalFn::zero();
        for (m, c) in &self.terms {
            let exp = m.exponent(var);
            let mut rest = m.clone();
            rest.factors.remove(var);
            let base = RationalFn::from_poly(Poly::term(c.clone(), rest));
            let term = if exp.is_zero() {
                base
            } else if exp.is_integer() {
                base.mul(&value.powi(exp.to_integer())?)
            } else {
                return Err(AlgebraError::NonIntegerSubstitution { var: *var });
            };
            out = out.add(&term);
        }
        Ok(out)
    }

    pub fn eval(&self, lookup: &mut impl FnMut(&JetVar) -> Option<f64>) -> Result<f64, JetVar> {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            acc += c.to_f64().unwrap_or(f64::NAN) * m.eval(lookup)?;
        }
        Ok(acc)
    }
}

/// Quotient of two polynomials in normalized form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalFn {
    num: Poly,
    den: Poly,
}

impl RationalFn {
    pub fn zero() -> Self {
        RationalFn {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_poly(Poly::constant(c))
    }

    pub fn integer(n: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn var(var: JetVar) -> Self {
        Self::from_poly(Poly::var(var))
    }

    pub fn from_poly(num: Poly) -> Self {
        RationalFn {
            num,
            den: Poly::one(),
        }
    }

    /// Build `num / den` and normalize.
    pub fn quotient(num: Poly, den: Poly) -> Result<Self, AlgebraError> {
        if den.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(Self::normalized(num, den))
    }

    fn normalized(mut num: Poly, mut den: Poly) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        let content = den.monomial_content();
        if !content.is_one() {
            let inv = content.inverse();
            den = den.mul_monomial(&inv);
            num = num.mul_monomial(&inv);
        }
        if den.len() == 1 {
            // content removal leaves a bare constant
            let c = den.leading_coefficient().cloned().unwrap_or_else(BigRational::one);
            return RationalFn {
                num: num.scale(&c.recip()),
                den: Poly::one(),
            };
        }
        let lead = den.leading_coefficient().cloned().unwrap_or_else(BigRational::one);
        if !lead.is_one() {
            let inv = lead.recip();
            den = den.scale(&inv);
            num = num.scale(&inv);
        }
        // num = q * den for a scalar q
        if num.len() == den.len() {
            if let (Some((nm, nc)), Some((dm, dc))) = (num.terms.iter().next(), den.terms.iter().next()) {
                if nm == dm {
                    let q = nc / dc;
                    if den.scale(&q) == num {
                        return Self::constant(q);
                    }
                }
            }
        }
        RationalFn { num, den }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn add(&self, other: &RationalFn) -> RationalFn {
        if self.den == other.den {
            return Self::normalized(self.num.add(&other.num), self.den.clone());
        }
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        Self::normalized(num, self.den.mul(&other.den))
    }

    pub fn sub(&self, other: &RationalFn) -> RationalFn {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RationalFn {
        RationalFn {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn scale(&self, k: &BigRational) -> RationalFn {
        Self::normalized(self.num.scale(k), self.den.clone())
    }

    pub fn mul(&self, other: &RationalFn) -> RationalFn {
        Self::normalized(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn recip(&self) -> Result<RationalFn, AlgebraError> {
        Self::quotient(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, other: &RationalFn) -> Result<RationalFn, AlgebraError> {
        if other.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(Self::normalized(
            self.num.mul(&other.den),
            self.den.mul(&other.num),
        ))
    }

    pub fn powi(&self, n: i64) -> Result<RationalFn, AlgebraError> {
        if n >= 0 {
            Ok(Self::normalized(
                self.num.pow_u(n as u64),
                self.den.pow_u(n as u64),
            ))
        } else {
            self.recip()?.powi(-n)
        }
    }

    /// Power with a rational exponent. Non-integer exponents require a
    /// single-term numerator over a unit denominator.
    pub fn pow(&self, exponent: Exponent) -> Result<RationalFn, AlgebraError> {
        if exponent.is_integer() {
            return self.powi(exponent.to_integer());
        }
        if self.is_zero() {
            return if exponent.is_positive() {
                Ok(Self::zero())
            } else {
                Err(AlgebraError::DivisionByZero)
            };
        }
        if !self.den.is_one() || self.num.len() != 1 {
            return Err(AlgebraError::UnsupportedPower { exponent });
        }
        let (m, c) = self.num.terms.iter().next().expect("single term");
        let coef = rational_power(c, exponent).ok_or_else(|| AlgebraError::IrrationalCoefficient {
            coefficient: c.clone(),
            exponent,
        })?;
        Ok(Self::from_poly(Poly::term(coef, m.pow(exponent))))
    }

    pub fn total_derivative(&self) -> RationalFn {
        if self.den.is_one() {
            return Self::from_poly(self.num.total_derivative());
        }
        let num = self
            .num
            .total_derivative()
            .mul(&self.den)
            .sub(&self.num.mul(&self.den.total_derivative()));
        Self::normalized(num, self.den.mul(&self.den))
    }

    pub fn total_derivative_n(&self, n: u32) -> RationalFn {
        (0..n).fold(self.clone(), |acc, _| acc.total_derivative())
    }

    pub fn partial(&self, var: &JetVar) -> RationalFn {
        if self.den.is_one() {
            return Self::from_poly(self.num.partial(var));
        }
        let num = self
            .num
            .partial(var)
            .mul(&self.den)
            .sub(&self.num.mul(&self.den.partial(var)));
        Self::normalized(num, self.den.mul(&self.den))
    }

    pub fn substitute(&self, var: &JetVar, value: &RationalFn) -> Result<RationalFn, AlgebraError> {
        let num = self.num.substitute(var, value)?;
        let den = self.den.substitute(var, value)?;
        num.div(&den)
    }

    /// Mathematical equality, decided by cross-multiplication.
    pub fn equivalent(&self, other: &RationalFn) -> bool {
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }

    pub fn max_order(&self, base: Base) -> Option<u32> {
        self.num.max_order(base).max(self.den.max_order(base))
    }

    pub fn vars(&self) -> std::collections::BTreeSet<JetVar> {
        let mut vars = self.num.vars();
        vars.extend(self.den.vars());
        vars
    }

    pub fn eval(&self, mut lookup: impl FnMut(&JetVar) -> Option<f64>) -> Result<f64, JetVar> {
        let n = self.num.eval(&mut lookup)?;
        if self.den.is_one() {
            return Ok(n);
        }
        Ok(n / self.den.eval(&mut lookup)?)
    }
}

impl fmt::Display for RationalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", super::expr::JetExpression::from_canonical(self))
    }
}

fn exact_root(n: &BigInt, r: u32) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let root = n.nth_root(r);
    (num_traits::pow(root.clone(), r as usize) == *n).then_some(root)
}

fn rational_power(c: &BigRational, exponent: Exponent) -> Option<BigRational> {
    if c.is_one() {
        return Some(BigRational::one());
    }
    let r = *exponent.denom();
    let p = *exponent.numer();
    if r <= 0 || r > u32::MAX as i64 {
        return None;
    }
    let num = exact_root(c.numer(), r as u32)?;
    let den = exact_root(c.denom(), r as u32)?;
    let base = BigRational::new(num, den);
    let mag = num_traits::pow(base, p.unsigned_abs() as usize);
    Some(if p < 0 { mag.recip() } else { mag })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1() -> RationalFn {
        RationalFn::var(JetVar::k1(0))
    }
    fn k2() -> RationalFn {
        RationalFn::var(JetVar::k2(0))
    }
    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    #[test]
    fn monomial_denominators_become_negative_exponents() {
        let q = k2().div(&k1().powi(2).unwrap()).unwrap();
        assert!(q.is_polynomial());
        let m = q.numerator().terms().next().unwrap().0;
        assert_eq!(m.exponent(&JetVar::k1(0)), Exponent::from_integer(-2));
    }

    #[test]
    fn cancellation_to_zero() {
        let a = k1().add(&k2()).recip().unwrap();
        assert!(a.sub(&a).is_zero());
        let b = k2().add(&k1()).recip().unwrap();
        assert!(a.equivalent(&b));
        assert_eq!(a, b);
    }

    #[test]
    fn scalar_multiple_of_denominator_collapses() {
        let p = k1().add(&k2());
        let q = p.scale(&half()).div(&p).unwrap();
        assert_eq!(q.as_constant(), Some(half()));
    }

    #[test]
    fn derivative_of_quotient() {
        // d/ds (k2 / k1) = k2_s / k1 - k2 k1_s / k1^2
        let q = k2().div(&k1()).unwrap();
        let expected = RationalFn::var(JetVar::k2(1))
            .div(&k1())
            .unwrap()
            .sub(&k2().mul(&RationalFn::var(JetVar::k1(1))).div(&k1().powi(2).unwrap()).unwrap());
        assert!(q.total_derivative().equivalent(&expected));
    }

    #[test]
    fn rational_powers() {
        let r = k1().scale(&BigRational::from_integer(4.into())).pow(Exponent::new(1, 2)).unwrap();
        let expected = RationalFn::var(JetVar::k1(0)).pow(Exponent::new(1, 2)).unwrap().scale(&BigRational::from_integer(2.into()));
        assert_eq!(r, expected);
        assert!(matches!(
            k1().add(&k2()).pow(Exponent::new(1, 2)),
            Err(AlgebraError::UnsupportedPower { .. })
        ));
        assert!(matches!(
            k1().scale(&BigRational::from_integer(2.into())).pow(Exponent::new(1, 2)),
            Err(AlgebraError::IrrationalCoefficient { .. })
        ));
    }

    #[test]
    fn substitution() {
        // k1^2 * mu with mu := k1 + k2
        let e = k1().powi(2).unwrap().mul(&RationalFn::var(JetVar::mu(0)));
        let s = e.substitute(&JetVar::mu(0), &k1().add(&k2())).unwrap();
        let expected = k1().powi(3).unwrap().add(&k1().powi(2).unwrap().mul(&k2()));
        assert_eq!(s, expected);
    }
}
