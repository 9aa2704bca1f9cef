use std::collections::BTreeSet;

use num_traits::ToPrimitive;

use super::poly::{Poly, RationalFn};
use super::var::JetVar;

#[derive(Clone, Copy, Debug)]
enum Power {
    Int(i32),
    Real(f64),
}

#[derive(Clone, Debug)]
struct Term {
    coef: f64,
    factors: Vec<(usize, Power)>,
}

#[derive(Clone, Debug)]
struct CompiledPoly {
    terms: Vec<Term>,
}

impl CompiledPoly {
    fn new(p: &Poly, slot: &impl Fn(&JetVar) -> usize) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| Term {
                coef: c.to_f64().unwrap_or(f64::NAN),
                factors: m
                    .factors()
                    .map(|(v, e)| {
                        let pw = if e.is_integer() {
                            Power::Int(e.to_integer() as i32)
                        } else {
                            Power::Real(*e.numer() as f64 / *e.denom() as f64)
                        };
                        (slot(v), pw)
                    })
                    .collect(),
            })
            .collect();
        CompiledPoly { terms }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut v = t.coef;
            for &(i, p) in &t.factors {
                v *= match p {
                    Power::Int(1) => x[i],
                    Power::Int(n) => x[i].powi(n),
                    Power::Real(r) => x[i].powf(r),
                };
            }
            acc += v;
        }
        acc
    }
}

/// A rational function lowered to flat f64 evaluation over a slot layout.
#[derive(Clone, Debug)]
pub struct Compiled {
    num: CompiledPoly,
    den: Option<CompiledPoly>,
}

impl Compiled {
    /// `layout` maps every variable of `r` to an index into the value slice.
    pub fn new(r: &RationalFn, layout: &[JetVar]) -> Result<Self, JetVar> {
        for v in r.vars() {
            if !layout.contains(&v) {
                return Err(v);
            }
        }
        let slot = |v: &JetVar| layout.iter().position(|w| w == v).expect("checked above");
        let den = if r.is_polynomial() {
            None
        } else {
            Some(CompiledPoly::new(r.denominator(), &slot))
        };
        let num = CompiledPoly::new(r.numerator(), &slot);
        Ok(Compiled { num, den })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.den {
            None => self.num.eval(x),
            Some(d) => self.num.eval(x) / d.eval(x),
        }
    }

    /// Denominator value (1 for polynomials).
    pub fn denominator(&self, x: &[f64]) -> f64 {
        self.den.as_ref().map_or(1.0, |d| d.eval(x))
    }
}

/// Sorted union of the variables of several rational functions.
pub fn layout_of<'a>(exprs: impl IntoIterator<Item = &'a RationalFn>) -> Vec<JetVar> {
    let mut set = BTreeSet::new();
    for e in exprs {
        set.extend(e.vars());
    }
    set.into_iter().collect()
}
