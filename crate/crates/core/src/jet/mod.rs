//! Symbolic calculus over jet coordinates κ₁, κ₂ (and the multipliers μ, λ).

pub mod compile;
pub mod expr;
pub mod parse;
pub mod poly;
pub mod var;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub use compile::Compiled;
pub use expr::{EvalError, JetExpression};
pub use parse::{parse_expression, parse_with, ParseError, ParseErrorKind, ParseOptions};
pub use poly::{AlgebraError, Monomial, Poly, RationalFn};
pub use var::{Base, JetPoint, JetVar};

/// Operations shared by the canonical and the tree representation, so the
/// variational formulas are written once.
pub(crate) trait Field: Clone {
    fn zero() -> Self;
    fn int(n: i64) -> Self;
    fn var(v: JetVar) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn d(&self) -> Self;
    fn partial(&self, v: &JetVar) -> Self;
    fn order(&self, b: Base) -> Option<u32>;

    fn minus(&self, o: &Self) -> Self {
        self.plus(&o.times(&Self::int(-1)))
    }

    fn dn(&self, n: u32) -> Self {
        (0..n).fold(self.clone(), |acc, _| acc.d())
    }
}

impl Field for RationalFn {
    fn zero() -> Self {
        RationalFn::zero()
    }
    fn int(n: i64) -> Self {
        RationalFn::integer(n)
    }
    fn var(v: JetVar) -> Self {
        RationalFn::var(v)
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn d(&self) -> Self {
        self.total_derivative()
    }
    fn partial(&self, v: &JetVar) -> Self {
        RationalFn::partial(self, v)
    }
    fn order(&self, b: Base) -> Option<u32> {
        self.max_order(b)
    }
}

impl Field for JetExpression {
    fn zero() -> Self {
        JetExpression::zero()
    }
    fn int(n: i64) -> Self {
        JetExpression::integer(n)
    }
    fn var(v: JetVar) -> Self {
        JetExpression::var(v)
    }
    fn plus(&self, o: &Self) -> Self {
        self.clone() + o.clone()
    }
    fn times(&self, o: &Self) -> Self {
        self.clone() * o.clone()
    }
    fn d(&self) -> Self {
        self.tree_derivative().fold_constants()
    }
    fn partial(&self, v: &JetVar) -> Self {
        self.tree_partial(v).fold_constants()
    }
    fn order(&self, b: Base) -> Option<u32> {
        self.max_order(b)
    }
}

pub(crate) fn euler_generic<F: Field>(l: &F, base: Base) -> F {
    let top = match l.order(base) {
        Some(n) => n,
        None => return F::zero(),
    };
    let mut acc = F::zero();
    for n in 0..=top {
        let term = l.partial(&JetVar::new(base, n)).dn(n);
        acc = if n % 2 == 0 { acc.plus(&term) } else { acc.minus(&term) };
    }
    acc
}

pub(crate) fn lambda_generic<F: Field>(l: &F) -> F {
    let e1 = euler_generic(l, Base::Kappa1);
    let e2 = euler_generic(l, Base::Kappa2);
    let k1 = F::var(JetVar::k1(0));
    let k2 = F::var(JetVar::k2(0));
    let mut acc = l.minus(&k1.times(&e1)).minus(&k2.times(&e2));
    for base in [Base::Kappa1, Base::Kappa2] {
        let top = l.order(base).unwrap_or(0);
        for m in 1..=top {
            let p = l.partial(&JetVar::new(base, m));
            let mut dk = p;
            for k in 0..m {
                let term = dk.times(&F::var(JetVar::new(base, m - k)));
                acc = if k % 2 == 0 { acc.minus(&term) } else { acc.plus(&term) };
                dk = dk.d();
            }
        }
    }
    acc
}

pub(crate) fn mu_rhs_generic<F: Field>(l: &F) -> F {
    let e1 = euler_generic(l, Base::Kappa1);
    let e2 = euler_generic(l, Base::Kappa2);
    e1.times(&F::var(JetVar::k2(0)))
        .minus(&e2.times(&F::var(JetVar::k1(0))))
}

/// Parse a Lagrangian in `k1`, `k2` and their derivatives.
///
/// `D(e, n)` is expanded immediately, so the result never contains a
/// derivative operator.
pub fn parse_lagrangian(text: &str) -> Result<JetExpression, ParseError> {
    parse_with(text, &ParseOptions::default())
}

/// n-th total derivative in s.
pub fn total_derivative(e: &JetExpression, n: u32) -> JetExpression {
    match e.canonical() {
        Ok(c) => JetExpression::from_canonical(&c.total_derivative_n(n)),
        Err(_) => e.dn(n),
    }
}

/// Euler operator with respect to κ₁ or κ₂, canonically simplified.
pub fn euler_operator(l: &JetExpression, base: Base) -> JetExpression {
    match l.canonical() {
        Ok(c) => JetExpression::from_canonical(&euler_generic(&c, base)),
        Err(_) => euler_generic(l, base).simplify(),
    }
}

/// The multiplier λ in closed form, integration constant 0.
pub fn lambda_closed_form(l: &JetExpression) -> JetExpression {
    match l.canonical() {
        Ok(c) => JetExpression::from_canonical(&lambda_generic(&c)),
        Err(_) => lambda_generic(l).simplify(),
    }
}

/// Right-hand side of μₛ = E^{κ₁}κ₂ − E^{κ₂}κ₁.
pub fn mu_rhs(l: &JetExpression) -> JetExpression {
    match l.canonical() {
        Ok(c) => JetExpression::from_canonical(&mu_rhs_generic(&c)),
        Err(_) => mu_rhs_generic(l).simplify(),
    }
}

pub fn evaluate(e: &JetExpression, p: &JetPoint) -> Result<f64, EvalError> {
    e.evaluate(p)
}

/// Antiderivative in s of a (Laurent) polynomial that is an exact total
/// derivative, found by repeatedly integrating against the highest-order
/// coordinate. Returns `None` when the pattern does not close.
pub fn integrate_total(rhs: &RationalFn) -> Option<RationalFn> {
    if !rhs.is_polynomial() {
        return None;
    }
    let mut rest = rhs.numerator().clone();
    let mut anti = Poly::zero();
    for _ in 0..256 {
        if rest.is_zero() {
            return Some(RationalFn::from_poly(anti));
        }
        let top = rest.vars().into_iter().max_by_key(|v| (v.order, v.base))?;
        if top.order == 0 {
            return None;
        }
        let below = JetVar::new(top.base, top.order - 1);
        let mut g = Poly::zero();
        for (m, c) in rest.terms() {
            let e = m.exponent(&top);
            if e.is_zero() {
                continue;
            }
            if !e.is_one() {
                return None;
            }
            let coef_mono = m.mul(&Monomial::var_pow(top, -e));
            let w = coef_mono.exponent(&below);
            if w == -num_rational::Rational64::one() {
                return None;
            }
            let raised = coef_mono.mul(&Monomial::var(below));
            let scale = w + num_rational::Rational64::one();
            let k = c / BigRational::new(BigInt::from(*scale.numer()), BigInt::from(*scale.denom()));
            g = g.add(&Poly::term(k, raised));
        }
        rest = rest.sub(&g.total_derivative());
        anti = anti.add(&g);
    }
    None
}

impl JetExpression {
    fn dn(&self, n: u32) -> JetExpression {
        Field::dn(self, n)
    }
}
