//! Formal scalar differential operators Σₖ aₖ Dᵏ with jet coefficients, the
//! 4×4 syzygy operator ℋ, and grid discretizations of both.

use crate::frames::curve::{diff_scalar_acc, stencils};
use crate::jet::{Compiled, JetExpression, JetVar, RationalFn};

use super::VariationalError;

/// `coeffs[k]` multiplies `Dᵏ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinOp {
    coeffs: Vec<RationalFn>,
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

impl LinOp {
    pub fn zero() -> Self {
        LinOp { coeffs: Vec::new() }
    }

    /// Multiplication by `a`.
    pub fn scalar(a: RationalFn) -> Self {
        LinOp::from_coeffs(vec![a])
    }

    /// `a Dᵏ`.
    pub fn term(a: RationalFn, k: usize) -> Self {
        let mut coeffs = vec![RationalFn::zero(); k];
        coeffs.push(a);
        LinOp::from_coeffs(coeffs)
    }

    pub fn d(k: usize) -> Self {
        LinOp::term(RationalFn::one(), k)
    }

    pub fn from_coeffs(mut coeffs: Vec<RationalFn>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        LinOp { coeffs }
    }

    pub fn coeffs(&self) -> &[RationalFn] {
        &self.coeffs
    }

    pub fn coefficient(&self, k: usize) -> RationalFn {
        self.coeffs.get(k).cloned().unwrap_or_else(RationalFn::zero)
    }

    /// Highest power of D; `None` for the zero operator.
    pub fn order(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &LinOp) -> LinOp {
        let n = self.coeffs.len().max(other.coeffs.len());
        LinOp::from_coeffs((0..n).map(|k| self.coefficient(k).add(&other.coefficient(k))).collect())
    }

    pub fn neg(&self) -> LinOp {
        LinOp::from_coeffs(self.coeffs.iter().map(RationalFn::neg).collect())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &LinOp) -> LinOp {
        let mut out: Vec<RationalFn> = Vec::new();
        let mut bump = |idx: usize, v: RationalFn| {
            if out.len() <= idx {
                out.resize(idx + 1, RationalFn::zero());
            }
            out[idx] = out[idx].add(&v);
        };
        for (k, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                // a Dᵏ(b Dʲ) = a Σᵢ C(k,i) D^{k−i}(b) D^{i+j}
                for i in 0..=k {
                    let c = a.mul(&b.total_derivative_n((k - i) as u32)).mul(&RationalFn::integer(binomial(k, i)));
                    bump(i + j, c);
                }
            }
        }
        LinOp::from_coeffs(out)
    }

    /// Formal adjoint: (a Dᵏ)* = (−1)ᵏ Dᵏ ∘ a.
    pub fn adjoint(&self) -> LinOp {
        let mut acc = LinOp::zero();
        for (k, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let mut t = LinOp::d(k).compose(&LinOp::scalar(a.clone()));
            if k % 2 == 1 {
                t = t.neg();
            }
            acc = acc.add(&t);
        }
        acc
    }

    pub fn apply(&self, f: &RationalFn) -> RationalFn {
        let mut acc = RationalFn::zero();
        let mut dk = f.clone();
        for (k, a) in self.coeffs.iter().enumerate() {
            if k > 0 {
                dk = dk.total_derivative();
            }
            if !a.is_zero() {
                acc = acc.add(&a.mul(&dk));
            }
        }
        acc
    }

    pub fn equivalent(&self, other: &LinOp) -> bool {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).all(|k| self.coefficient(k).equivalent(&other.coefficient(k)))
    }

    /// Coefficients as expression trees.
    pub fn to_expressions(&self) -> Vec<JetExpression> {
        self.coeffs.iter().map(JetExpression::from_canonical).collect()
    }
}

impl std::fmt::Display for LinOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(k, a)| match k {
                0 => format!("({a})"),
                1 => format!("({a})*D"),
                _ => format!("({a})*D^{k}"),
            })
            .collect();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

/// 4×4 matrix of formal operators.
#[derive(Clone, Debug, PartialEq)]
pub struct LinOpMatrix {
    pub entries: [[LinOp; 4]; 4],
}

impl LinOpMatrix {
    pub fn zero() -> Self {
        LinOpMatrix {
            entries: std::array::from_fn(|_| std::array::from_fn(|_| LinOp::zero())),
        }
    }

    /// Transpose of the entrywise formal adjoints.
    pub fn adjoint(&self) -> LinOpMatrix {
        LinOpMatrix {
            entries: std::array::from_fn(|r| std::array::from_fn(|c| self.entries[c][r].adjoint())),
        }
    }

    pub fn apply(&self, f: &[RationalFn; 4]) -> [RationalFn; 4] {
        std::array::from_fn(|r| {
            (0..4).fold(RationalFn::zero(), |acc, c| acc.add(&self.entries[r][c].apply(&f[c])))
        })
    }

    pub fn equivalent(&self, other: &LinOpMatrix) -> bool {
        (0..4).all(|r| (0..4).all(|c| self.entries[r][c].equivalent(&other.entries[r][c])))
    }

    pub fn max_order(&self) -> usize {
        self.entries.iter().flatten().filter_map(LinOp::order).max().unwrap_or(0)
    }

    /// Flip the sign of one entry; used to check that verification notices.
    pub fn with_negated_entry(&self, r: usize, c: usize) -> LinOpMatrix {
        let mut m = self.clone();
        m.entries[r][c] = m.entries[r][c].neg();
        m
    }
}

impl std::fmt::Display for LinOpMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (r, row) in self.entries.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|e| e.to_string()).collect();
            writeln!(f, "row {}: [{}]", r + 1, cells.join(" | "))?;
        }
        Ok(())
    }
}

/// The syzygy operator ℋ mapping the invariantized evolution
/// (ι(X_t), ι(Y_t), ι(Z_t), ι(V₃,t)) to d/dt of (ι(X′), κ₁, κ₂, ι(V₃′)).
pub fn syzygy_symbolic() -> LinOpMatrix {
    let k1 = RationalFn::var(JetVar::k1(0));
    let k2 = RationalFn::var(JetVar::k2(0));
    let s = |a: &RationalFn| LinOp::scalar(a.clone());
    let z = LinOp::zero;
    LinOpMatrix {
        entries: [
            [LinOp::d(1), s(&k1.neg()), s(&k2.neg()), z()],
            [LinOp::d(1).compose(&s(&k1)), LinOp::d(2), z(), s(&k2)],
            [LinOp::d(1).compose(&s(&k2)), z(), LinOp::d(2), s(&k1.neg())],
            [z(), LinOp::term(k2.neg(), 1), LinOp::term(k1, 1), LinOp::d(1)],
        ],
    }
}

/// A [`LinOpMatrix`] with coefficients evaluated on a uniform grid.
#[derive(Clone, Debug)]
pub struct GridOperator {
    pub h: f64,
    pub accuracy: usize,
    n: usize,
    /// `coeffs[r][c][k][i]`: coefficient of Dᵏ in entry (r, c) at node i.
    coeffs: Vec<Vec<Vec<Vec<f64>>>>,
}

/// Smallest grid the stencils of `accuracy` can serve for derivatives up to `order`.
pub fn min_grid_len(order: usize, accuracy: usize) -> usize {
    let acc = accuracy.max(2) & !1;
    let centered = 2 * order.div_ceil(2) + acc - 1;
    centered.max(order + acc) + 1
}

impl GridOperator {
    /// Discretize `m` along κ₁, κ₂ samples; coefficient jets come from
    /// finite differences of the samples at the same accuracy.
    pub fn new(m: &LinOpMatrix, k1: &[f64], k2: &[f64], h: f64, accuracy: usize) -> Result<Self, VariationalError> {
        let n = k1.len();
        if k2.len() != n {
            return Err(VariationalError::GridMismatch {
                expected: n,
                found: k2.len(),
            });
        }
        let mut layout = Vec::new();
        let mut jet_order = 0u32;
        for e in m.entries.iter().flatten() {
            for a in e.coeffs() {
                for v in a.vars() {
                    if !v.base.is_kappa() {
                        return Err(VariationalError::UnsupportedVariable(v.to_string()));
                    }
                    jet_order = jet_order.max(v.order);
                }
            }
        }
        let needed = min_grid_len(m.max_order().max(jet_order as usize), accuracy);
        if n < needed {
            return Err(VariationalError::GridTooShort { nodes: n, needed });
        }
        let mut columns = Vec::new();
        for o in 0..=jet_order {
            layout.push(JetVar::k1(o));
            columns.push(diff_scalar_acc(k1, h, o as usize, accuracy));
            layout.push(JetVar::k2(o));
            columns.push(diff_scalar_acc(k2, h, o as usize, accuracy));
        }
        let mut x = vec![0.0; layout.len()];
        let mut coeffs = vec![vec![Vec::new(); 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                for a in m.entries[r][c].coeffs() {
                    let f = Compiled::new(a, &layout).map_err(|v| VariationalError::UnsupportedVariable(v.to_string()))?;
                    let vals = (0..n)
                        .map(|i| {
                            for (slot, col) in x.iter_mut().zip(&columns) {
                                *slot = col[i];
                            }
                            f.eval(&x)
                        })
                        .collect();
                    coeffs[r][c].push(vals);
                }
            }
        }
        Ok(GridOperator { h, accuracy, n, coeffs })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn apply(&self, f: &[Vec<f64>; 4]) -> Result<[Vec<f64>; 4], VariationalError> {
        for g in f {
            if g.len() != self.n {
                return Err(VariationalError::GridMismatch {
                    expected: self.n,
                    found: g.len(),
                });
            }
        }
        let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; self.n]);
        for c in 0..4 {
            let kmax = (0..4).map(|r| self.coeffs[r][c].len()).max().unwrap_or(0);
            for k in 0..kmax {
                let dk = if k == 0 {
                    f[c].clone()
                } else {
                    apply_stencils(&stencils(self.n, self.h, k, self.accuracy), &f[c])
                };
                for (r, o) in out.iter_mut().enumerate() {
                    if let Some(a) = self.coeffs[r][c].get(k) {
                        for i in 0..self.n {
                            o[i] += a[i] * dk[i];
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn apply_stencils(st: &[(usize, Vec<f64>)], f: &[f64]) -> Vec<f64> {
    st.iter()
        .map(|(start, w)| w.iter().zip(&f[*start..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// Discretized ℋ along κ samples.
pub fn syzygy_operator(k1: &[f64], k2: &[f64], h: f64, accuracy: usize) -> Result<GridOperator, VariationalError> {
    GridOperator::new(&syzygy_symbolic(), k1, k2, h, accuracy)
}

/// Formal adjoint; a pure symbolic operation.
pub fn syzygy_adjoint(h: &LinOpMatrix) -> LinOpMatrix {
    h.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::parse_expression;

    fn rf(s: &str) -> RationalFn {
        parse_expression(s).unwrap().canonical().unwrap()
    }

    #[test]
    fn adjoint_of_d_is_minus_d() {
        assert!(LinOp::d(1).adjoint().equivalent(&LinOp::d(1).neg()));
        assert!(LinOp::d(2).adjoint().equivalent(&LinOp::d(2)));
    }

    #[test]
    fn first_order_symmetric_adjoint() {
        let k1 = LinOp::scalar(rf("k1"));
        let op = k1.compose(&LinOp::d(1)).add(&LinOp::d(1).compose(&k1));
        assert!(op.adjoint().equivalent(&op.neg()));
    }

    #[test]
    fn adjoint_is_an_involution() {
        let h = syzygy_symbolic();
        assert!(h.adjoint().adjoint().equivalent(&h));
        let op = LinOp::from_coeffs(vec![rf("k1^2"), rf("k2*k1_s"), rf("1/k1")]);
        assert!(op.adjoint().adjoint().equivalent(&op));
    }

    #[test]
    fn composition_matches_application() {
        let a = LinOp::from_coeffs(vec![rf("k2"), rf("k1")]);
        let b = LinOp::from_coeffs(vec![rf("k1_s"), RationalFn::zero(), rf("k2^2")]);
        let f = rf("k1*k2_s + k2^3");
        assert!(a.compose(&b).apply(&f).equivalent(&a.apply(&b.apply(&f))));
    }

    #[test]
    fn flat_syzygy_is_diagonal() {
        let n = 40;
        let z = vec![0.0; n];
        let op = syzygy_operator(&z, &z, 0.1, 4).unwrap();
        let s: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let f: [Vec<f64>; 4] = std::array::from_fn(|c| s.iter().map(|x| x.powi(c as i32 + 1)).collect());
        let out = op.apply(&f).unwrap();
        for i in 0..n {
            assert!((out[0][i] - 1.0).abs() < 1e-9);
            assert!((out[1][i] - 2.0).abs() < 1e-9);
            assert!((out[2][i] - 6.0 * s[i]).abs() < 1e-8);
            assert!((out[3][i] - 4.0 * s[i].powi(3)).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_vector_with_constant_curvature() {
        let n = 30;
        let op = syzygy_operator(&vec![0.7; n], &vec![0.0; n], 0.05, 4).unwrap();
        let f = [vec![1.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let out = op.apply(&f).unwrap();
        for row in &out {
            assert!(row.iter().all(|x| x.abs() < 1e-10));
        }
    }

    #[test]
    fn short_grid_is_rejected() {
        let err = syzygy_operator(&[0.0; 4], &[0.0; 4], 0.1, 4).unwrap_err();
        assert!(matches!(err, VariationalError::GridTooShort { .. }));
    }
}
