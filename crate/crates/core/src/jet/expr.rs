use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::poly::{AlgebraError, Monomial, Poly, RationalFn};
use super::var::{Base, JetPoint, JetVar};

/// Symbolic expression over jet coordinates.
///
/// Trees are immutable values; every transformation returns a new tree.
/// Structural comparison (`==`) is syntactic; use [`JetExpression::equivalent`]
/// for mathematical equality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum JetExpression {
    Const {
        #[serde(with = "big_rational_str")]
        value: BigRational,
    },
    Var {
        var: JetVar,
    },
    Add {
        terms: Vec<JetExpression>,
    },
    Mul {
        factors: Vec<JetExpression>,
    },
    Pow {
        base: Box<JetExpression>,
        #[serde(with = "rational64_str")]
        exponent: Rational64,
    },
    Div {
        num: Box<JetExpression>,
        den: Box<JetExpression>,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no value supplied for {0}")]
    MissingVariable(JetVar),
    #[error("division by zero in `{subexpression}`")]
    DivisionByZero { subexpression: String },
}

impl JetExpression {
    pub fn constant(value: BigRational) -> Self {
        JetExpression::Const { value }
    }

    pub fn integer(n: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Self::constant(BigRational::new(numer.into(), denom.into()))
    }

    pub fn zero() -> Self {
        Self::integer(0)
    }

    pub fn var(var: JetVar) -> Self {
        JetExpression::Var { var }
    }

    pub fn k1(order: u32) -> Self {
        Self::var(JetVar::k1(order))
    }

    pub fn k2(order: u32) -> Self {
        Self::var(JetVar::k2(order))
    }

    pub fn pow(self, exponent: Rational64) -> Self {
        JetExpression::Pow {
            base: Box::new(self),
            exponent,
        }
    }

    pub fn powi(self, n: i64) -> Self {
        self.pow(Rational64::from_integer(n))
    }

    pub fn is_zero_const(&self) -> bool {
        matches!(self, JetExpression::Const { value } if value.is_zero())
    }

    /// Normalize to the canonical rational form.
    pub fn canonical(&self) -> Result<RationalFn, AlgebraError> {
        Ok(match self {
            JetExpression::Const { value } => RationalFn::constant(value.clone()),
            JetExpression::Var { var } => RationalFn::var(*var),
            JetExpression::Add { terms } => {
                let mut acc = RationalFn::zero();
                for t in terms {
                    acc = acc.add(&t.canonical()?);
                }
                acc
            }
            JetExpression::Mul { factors } => {
                let mut acc = RationalFn::one();
                for f in factors {
                    acc = acc.mul(&f.canonical()?);
                }
                acc
            }
            JetExpression::Pow { base, exponent } => base.canonical()?.pow(*exponent)?,
            JetExpression::Div { num, den } => num.canonical()?.div(&den.canonical()?)?,
        })
    }

    /// Expand and collect into canonical form, rendered back as a tree.
    /// Falls back to local constant folding when the expression has no
    /// canonical form (e.g. a square root of a sum).
    pub fn simplify(&self) -> JetExpression {
        match self.canonical() {
            Ok(c) => Self::from_canonical(&c),
            Err(_) => self.fold_constants(),
        }
    }

    /// Whether `self - other` simplifies to zero.
    pub fn equivalent(&self, other: &JetExpression) -> Result<bool, AlgebraError> {
        Ok(self.canonical()?.equivalent(&other.canonical()?))
    }

    pub fn from_canonical(r: &RationalFn) -> JetExpression {
        let num = poly_tree(r.numerator());
        if r.is_polynomial() {
            num
        } else {
            JetExpression::Div {
                num: Box::new(num),
                den: Box::new(poly_tree(r.denominator())),
            }
        }
    }

    pub(crate) fn fold_constants(&self) -> JetExpression {
        match self {
            JetExpression::Add { terms } => {
                let terms: Vec<_> = terms
                    .iter()
                    .map(|t| t.fold_constants())
                    .filter(|t| !t.is_zero_const())
                    .collect();
                match terms.len() {
                    0 => JetExpression::zero(),
                    1 => terms.into_iter().next().unwrap(),
                    _ => JetExpression::Add { terms },
                }
            }
            JetExpression::Mul { factors } => {
                let factors: Vec<_> = factors.iter().map(|f| f.fold_constants()).collect();
                if factors.iter().any(|f| f.is_zero_const()) {
                    return JetExpression::zero();
                }
                let factors: Vec<_> = factors
                    .into_iter()
                    .filter(|f| !matches!(f, JetExpression::Const { value } if value.is_one()))
                    .collect();
                match factors.len() {
                    0 => JetExpression::integer(1),
                    1 => factors.into_iter().next().unwrap(),
                    _ => JetExpression::Mul { factors },
                }
            }
            JetExpression::Pow { base, exponent } => {
                if exponent.is_zero() {
                    return JetExpression::integer(1);
                }
                if exponent.is_one() {
                    return base.fold_constants();
                }
                base.fold_constants().pow(*exponent)
            }
            JetExpression::Div { num, den } => {
                let num = num.fold_constants();
                if num.is_zero_const() {
                    return JetExpression::zero();
                }
                JetExpression::Div {
                    num: Box::new(num),
                    den: Box::new(den.fold_constants()),
                }
            }
            other => other.clone(),
        }
    }

    /// Rule-based total derivative on the tree itself; used where no
    /// canonical form exists.
    pub(crate) fn tree_derivative(&self) -> JetExpression {
        match self {
            JetExpression::Const { .. } => JetExpression::zero(),
            JetExpression::Var { var } => JetExpression::var(var.differentiated()),
            JetExpression::Add { terms } => JetExpression::Add {
                terms: terms.iter().map(|t| t.tree_derivative()).collect(),
            },
            JetExpression::Mul { factors } => {
                let terms = (0..factors.len())
                    .map(|i| {
                        let factors = factors
                            .iter()
                            .enumerate()
                            .map(|(j, f)| if i == j { f.tree_derivative() } else { f.clone() })
                            .collect();
                        JetExpression::Mul { factors }
                    })
                    .collect();
                JetExpression::Add { terms }
            }
            JetExpression::Pow { base, exponent } => {
                let coef = JetExpression::constant(BigRational::new(
                    BigInt::from(*exponent.numer()),
                    BigInt::from(*exponent.denom()),
                ));
                JetExpression::Mul {
                    factors: vec![
                        coef,
                        (**base).clone().pow(*exponent - Rational64::one()),
                        base.tree_derivative(),
                    ],
                }
            }
            JetExpression::Div { num, den } => {
                let top = JetExpression::Add {
                    terms: vec![
                        JetExpression::Mul {
                            factors: vec![num.tree_derivative(), (**den).clone()],
                        },
                        JetExpression::Mul {
                            factors: vec![
                                JetExpression::integer(-1),
                                (**num).clone(),
                                den.tree_derivative(),
                            ],
                        },
                    ],
                };
                JetExpression::Div {
                    num: Box::new(top),
                    den: Box::new((**den).clone().powi(2)),
                }
            }
        }
    }

    /// Rule-based partial derivative with respect to one jet coordinate.
    pub(crate) fn tree_partial(&self, wrt: &JetVar) -> JetExpression {
        match self {
            JetExpression::Const { .. } => JetExpression::zero(),
            JetExpression::Var { var } => JetExpression::integer(i64::from(var == wrt)),
            JetExpression::Add { terms } => JetExpression::Add {
                terms: terms.iter().map(|t| t.tree_partial(wrt)).collect(),
            },
            JetExpression::Mul { factors } => {
                let terms = (0..factors.len())
                    .map(|i| {
                        let factors = factors
                            .iter()
                            .enumerate()
                            .map(|(j, f)| if i == j { f.tree_partial(wrt) } else { f.clone() })
                            .collect();
                        JetExpression::Mul { factors }
                    })
                    .collect();
                JetExpression::Add { terms }
            }
            JetExpression::Pow { base, exponent } => {
                let coef = JetExpression::constant(BigRational::new(
                    BigInt::from(*exponent.numer()),
                    BigInt::from(*exponent.denom()),
                ));
                JetExpression::Mul {
                    factors: vec![
                        coef,
                        (**base).clone().pow(*exponent - Rational64::one()),
                        base.tree_partial(wrt),
                    ],
                }
            }
            JetExpression::Div { num, den } => {
                let top = JetExpression::Add {
                    terms: vec![
                        JetExpression::Mul {
                            factors: vec![num.tree_partial(wrt), (**den).clone()],
                        },
                        JetExpression::Mul {
                            factors: vec![
                                JetExpression::integer(-1),
                                (**num).clone(),
                                den.tree_partial(wrt),
                            ],
                        },
                    ],
                };
                JetExpression::Div {
                    num: Box::new(top),
                    den: Box::new((**den).clone().powi(2)),
                }
            }
        }
    }

    pub fn max_order(&self, base: Base) -> Option<u32> {
        match self {
            JetExpression::Const { .. } => None,
            JetExpression::Var { var } => (var.base == base).then_some(var.order),
            JetExpression::Add { terms } => terms.iter().filter_map(|t| t.max_order(base)).max(),
            JetExpression::Mul { factors } => factors.iter().filter_map(|t| t.max_order(base)).max(),
            JetExpression::Pow { base: b, .. } => b.max_order(base),
            JetExpression::Div { num, den } => num.max_order(base).max(den.max_order(base)),
        }
    }

    pub fn vars(&self) -> std::collections::BTreeSet<JetVar> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut std::collections::BTreeSet<JetVar>) {
        match self {
            JetExpression::Const { .. } => {}
            JetExpression::Var { var } => {
                out.insert(*var);
            }
            JetExpression::Add { terms: xs } | JetExpression::Mul { factors: xs } => {
                xs.iter().for_each(|x| x.collect_vars(out))
            }
            JetExpression::Pow { base, .. } => base.collect_vars(out),
            JetExpression::Div { num, den } => {
                num.collect_vars(out);
                den.collect_vars(out);
            }
        }
    }

    pub fn evaluate(&self, point: &JetPoint) -> Result<f64, EvalError> {
        Ok(match self {
            JetExpression::Const { value } => value.to_f64().unwrap_or(f64::NAN),
            JetExpression::Var { var } => point.get(var).ok_or(EvalError::MissingVariable(*var))?,
            JetExpression::Add { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.evaluate(point)?;
                }
                acc
            }
            JetExpression::Mul { factors } => {
                // a zero factor wins even if others are undefined
                let mut acc = 1.0;
                for f in factors {
                    let x = f.evaluate(point)?;
                    if x == 0.0 {
                        return Ok(0.0);
                    }
                    acc *= x;
                }
                acc
            }
            JetExpression::Pow { base, exponent } => {
                let b = base.evaluate(point)?;
                if b == 0.0 && exponent.is_negative() {
                    return Err(EvalError::DivisionByZero {
                        subexpression: self.to_string(),
                    });
                }
                if exponent.is_integer() {
                    b.powi(exponent.to_integer() as i32)
                } else {
                    b.powf(*exponent.numer() as f64 / *exponent.denom() as f64)
                }
            }
            JetExpression::Div { num, den } => {
                let d = den.evaluate(point)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero {
                        subexpression: den.to_string(),
                    });
                }
                num.evaluate(point)? / d
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            JetExpression::Add { terms } if terms.len() > 1 => 1,
            JetExpression::Const { value } if value.is_negative() || !value.is_integer() => 2,
            JetExpression::Mul { .. } | JetExpression::Div { .. } => 2,
            JetExpression::Pow { .. } => 3,
            _ => 4,
        }
    }

    /// True when the printed form starts with a minus sign that can be folded
    /// into a preceding `+`.
    fn negated(&self) -> Option<JetExpression> {
        match self {
            JetExpression::Const { value } if value.is_negative() => {
                Some(JetExpression::constant(-value.clone()))
            }
            JetExpression::Mul { factors } => match factors.first() {
                Some(JetExpression::Const { value }) if value.is_negative() => {
                    let mut rest = factors.clone();
                    let flipped = -value.clone();
                    if flipped.is_one() && rest.len() > 1 {
                        rest.remove(0);
                    } else {
                        rest[0] = JetExpression::constant(flipped);
                    }
                    Some(if rest.len() == 1 {
                        rest.pop().unwrap()
                    } else {
                        JetExpression::Mul { factors: rest }
                    })
                }
                _ => None,
            },
            JetExpression::Div { num, den } => num.negated().map(|n| JetExpression::Div {
                num: Box::new(n),
                den: den.clone(),
            }),
            _ => None,
        }
    }
}

fn poly_tree(p: &Poly) -> JetExpression {
    let terms: Vec<JetExpression> = p.terms().map(|(m, c)| term_tree(c, m)).collect();
    match terms.len() {
        0 => JetExpression::zero(),
        1 => terms.into_iter().next().unwrap(),
        _ => JetExpression::Add { terms },
    }
}

fn monomial_factors(m: &Monomial) -> Vec<JetExpression> {
    m.factors()
        .map(|(v, e)| {
            if e.is_one() {
                JetExpression::var(*v)
            } else {
                JetExpression::var(*v).pow(*e)
            }
        })
        .collect()
}

fn product(factors: Vec<JetExpression>) -> JetExpression {
    match factors.len() {
        0 => JetExpression::integer(1),
        1 => factors.into_iter().next().unwrap(),
        _ => JetExpression::Mul { factors },
    }
}

fn term_tree(c: &BigRational, m: &Monomial) -> JetExpression {
    let (pos, neg) = m.split_signs();
    let mut factors = Vec::new();
    let numer = BigRational::from_integer(c.numer().clone());
    let denom = c.denom().clone();
    let has_vars = !pos.is_one();
    if !(numer.is_one() && has_vars) {
        if numer == -BigRational::one() && has_vars {
            factors.push(JetExpression::integer(-1));
        } else {
            factors.push(JetExpression::constant(numer));
        }
    }
    factors.extend(monomial_factors(&pos));
    let top = product(factors);
    let mut bottom = monomial_factors(&neg);
    if !denom.is_one() {
        bottom.insert(0, JetExpression::constant(BigRational::from_integer(denom)));
    }
    if bottom.is_empty() {
        top
    } else {
        JetExpression::Div {
            num: Box::new(top),
            den: Box::new(product(bottom)),
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &JetExpression, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for JetExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetExpression::Const { value } => {
                if value.is_integer() {
                    write!(f, "{}", value.numer())
                } else {
                    write!(f, "{}/{}", value.numer(), value.denom())
                }
            }
            JetExpression::Var { var } => write!(f, "{var}"),
            JetExpression::Add { terms } => {
                if terms.is_empty() {
                    return f.write_str("0");
                }
                for (i, t) in terms.iter().enumerate() {
                    if i == 0 {
                        write_child(f, t, 1)?;
                    } else if let Some(n) = t.negated() {
                        f.write_str(" - ")?;
                        write_child(f, &n, 2)?;
                    } else {
                        f.write_str(" + ")?;
                        write_child(f, t, 2)?;
                    }
                }
                Ok(())
            }
            JetExpression::Mul { factors } => {
                if factors.is_empty() {
                    return f.write_str("1");
                }
                for (i, x) in factors.iter().enumerate() {
                    if i == 0 {
                        if matches!(x, JetExpression::Const { value } if value == &-BigRational::one())
                            && factors.len() > 1
                        {
                            f.write_str("-")?;
                            continue;
                        }
                        write_child(f, x, 2)?;
                    } else {
                        if !(i == 1
                            && matches!(&factors[0], JetExpression::Const { value } if value == &-BigRational::one()))
                        {
                            f.write_str("*")?;
                        }
                        // a/b*c is fine, but a*(b/c) keeps its parentheses
                        let min = if matches!(x, JetExpression::Div { .. })
                            || matches!(x, JetExpression::Const { value } if !value.is_integer() || value.is_negative())
                        {
                            3
                        } else {
                            2
                        };
                        write_child(f, x, min)?;
                    }
                }
                Ok(())
            }
            JetExpression::Pow { base, exponent } => {
                write_child(f, base, 4)?;
                if exponent.is_integer() && !exponent.is_negative() {
                    write!(f, "^{}", exponent.numer())
                } else if exponent.is_integer() {
                    write!(f, "^({})", exponent.numer())
                } else {
                    write!(f, "^({}/{})", exponent.numer(), exponent.denom())
                }
            }
            JetExpression::Div { num, den } => {
                write_child(f, num, 2)?;
                f.write_str("/")?;
                write_child(f, den, 3)
            }
        }
    }
}

impl ops::Add for JetExpression {
    type Output = JetExpression;
    fn add(self, rhs: JetExpression) -> JetExpression {
        JetExpression::Add {
            terms: vec![self, rhs],
        }
    }
}

impl ops::Sub for JetExpression {
    type Output = JetExpression;
    fn sub(self, rhs: JetExpression) -> JetExpression {
        JetExpression::Add {
            terms: vec![self, -rhs],
        }
    }
}

impl ops::Mul for JetExpression {
    type Output = JetExpression;
    fn mul(self, rhs: JetExpression) -> JetExpression {
        JetExpression::Mul {
            factors: vec![self, rhs],
        }
    }
}

impl ops::Div for JetExpression {
    type Output = JetExpression;
    fn div(self, rhs: JetExpression) -> JetExpression {
        JetExpression::Div {
            num: Box::new(self),
            den: Box::new(rhs),
        }
    }
}

impl ops::Neg for JetExpression {
    type Output = JetExpression;
    fn neg(self) -> JetExpression {
        JetExpression::Mul {
            factors: vec![JetExpression::integer(-1), self],
        }
    }
}

impl From<&RationalFn> for JetExpression {
    fn from(r: &RationalFn) -> Self {
        JetExpression::from_canonical(r)
    }
}

mod big_rational_str {
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(D::Error::custom)
    }
}

mod rational64_str {
    use num_rational::Rational64;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_readable() {
        let e = JetExpression::k1(0) * JetExpression::k2(1) - JetExpression::k1(1) * JetExpression::k2(0);
        assert_eq!(e.to_string(), "k1*k2_s - k1_s*k2");
        let q = (JetExpression::k2(0) / JetExpression::k1(0)).powi(2) * JetExpression::ratio(1, 2);
        assert_eq!(q.simplify().to_string(), "k2^2/(2*k1^2)");
    }

    #[test]
    fn json_tree_round_trip() {
        let e = JetExpression::ratio(1, 2) * (JetExpression::k2(0) / JetExpression::k1(0)).powi(2);
        let json = serde_json::to_string(&e).unwrap();
        let back: JetExpression = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        assert!(json.contains("\"op\":\"mul\""));
    }

    #[test]
    fn evaluation_reports_division_by_zero() {
        let e = JetExpression::k2(0) / JetExpression::k1(0);
        let p = JetPoint::new().with(JetVar::k1(0), 0.0).with(JetVar::k2(0), 1.0);
        match e.evaluate(&p) {
            Err(EvalError::DivisionByZero { subexpression }) => assert_eq!(subexpression, "k1"),
            other => panic!("unexpected {other:?}"),
        }
        let missing = JetExpression::k1(2).evaluate(&JetPoint::new());
        assert_eq!(missing, Err(EvalError::MissingVariable(JetVar::k1(2))));
    }

    #[test]
    fn tree_derivative_matches_canonical() {
        let e = JetExpression::k1(0).powi(3) / (JetExpression::k1(0) + JetExpression::k2(1));
        let a = e.tree_derivative().canonical().unwrap();
        let b = e.canonical().unwrap().total_derivative();
        assert!(a.equivalent(&b));
    }
}
