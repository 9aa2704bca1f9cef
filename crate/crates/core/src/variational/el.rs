//! Invariant Euler–Lagrange systems: symbolic assembly through ℋ*, solving
//! for the top derivatives, and numeric integration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::frames::curve::{diff_scalar, diff_scalar_acc};
use crate::frames::{row, CurveSamples, FrameField, FrameKind, Mat3, Vec3};
use crate::jet::{euler_generic, integrate_total, lambda_generic, mu_rhs_generic, Base, Compiled, JetExpression, JetVar, RationalFn};
use crate::odesolve::{cumulative, grid_with_step, Method, OdeProblem, RhsFailure, Status, Tolerances};

use super::linop::{syzygy_symbolic, LinOpMatrix};
use super::noether::noether_components;
use super::VariationalError;

/// Symbolic EL system of an invariant Lagrangian L(κ₁, κ₂, ...).
#[derive(Clone, Debug)]
pub struct ElSystem {
    pub lagrangian: RationalFn,
    pub e1: RationalFn,
    pub e2: RationalFn,
    /// λ with its integration constant.
    pub lambda: RationalFn,
    pub lambda_constant: BigRational,
    /// μₛ = E^{κ₁}κ₂ − E^{κ₂}κ₁.
    pub mu_rhs: RationalFn,
    /// Antiderivative of `mu_rhs` when one was found (constant 0).
    pub mu_closed_form: Option<RationalFn>,
    /// ℋ*(λ, E^{κ₁}, E^{κ₂}, μ) = (E^X, E^Y, E^Z, E^{V₃}) with μ, μₛ symbolic.
    pub raw: [RationalFn; 4],
    /// E^Y and E^Z with μₛ replaced by `mu_rhs`.
    pub residuals: [RationalFn; 2],
    /// System order in κ₁ and κ₂.
    pub orders: [u32; 2],
    /// Coefficients of the top derivatives: residuals = A·tops + b.
    pub top_matrix: [[RationalFn; 2]; 2],
    pub top_rhs: [RationalFn; 2],
    /// First-order state: κ₁ … κ₁^{(N₁−1)}, κ₂ … κ₂^{(N₂−1)}, μ.
    pub state: Vec<JetVar>,
}

pub fn assemble_el_system(l: &JetExpression) -> Result<ElSystem, VariationalError> {
    assemble_el_system_with(l, &syzygy_symbolic(), BigRational::zero())
}

/// Assembly against an arbitrary operator in place of ℋ (the verification
/// suite feeds a mutated one) and a chosen λ integration constant.
pub fn assemble_el_system_with(l: &JetExpression, h: &LinOpMatrix, lambda_constant: BigRational) -> Result<ElSystem, VariationalError> {
    let lc = l.canonical().map_err(|e| VariationalError::Algebra(e.to_string()))?;
    if let Some(v) = lc.vars().into_iter().find(|v| !v.base.is_kappa()) {
        return Err(VariationalError::UnsupportedVariable(v.to_string()));
    }
    let e1 = euler_generic(&lc, Base::Kappa1);
    let e2 = euler_generic(&lc, Base::Kappa2);
    let lambda = lambda_generic(&lc).add(&RationalFn::constant(lambda_constant.clone()));
    let mu = RationalFn::var(JetVar::mu(0));
    let mu_rhs = mu_rhs_generic(&lc);
    let raw = h.adjoint().apply(&[lambda.clone(), e1.clone(), e2.clone(), mu]);
    let sub = |r: &RationalFn| {
        r.substitute(&JetVar::mu(1), &mu_rhs)
            .map_err(|e| VariationalError::Algebra(e.to_string()))
    };
    let residuals = [sub(&raw[1])?, sub(&raw[2])?];

    let order_of = |b: Base| residuals.iter().filter_map(|r| r.max_order(b)).max();
    let (n1, n2) = match (order_of(Base::Kappa1), order_of(Base::Kappa2)) {
        (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
        _ => {
            return Err(VariationalError::NonSolvableTopOrder {
                matrix: "residuals do not involve derivatives of both κ₁ and κ₂".into(),
            })
        }
    };
    let tops = [JetVar::k1(n1), JetVar::k2(n2)];
    let top_matrix: [[RationalFn; 2]; 2] = std::array::from_fn(|r| std::array::from_fn(|j| residuals[r].partial(&tops[j])));
    for (r, row) in top_matrix.iter().enumerate() {
        for a in row {
            if tops.iter().any(|t| !a.partial(t).is_zero()) {
                return Err(VariationalError::NonlinearTopOrder { residual: r });
            }
        }
    }
    let top_rhs: [RationalFn; 2] = std::array::from_fn(|r| {
        residuals[r]
            .sub(&top_matrix[r][0].mul(&RationalFn::var(tops[0])))
            .sub(&top_matrix[r][1].mul(&RationalFn::var(tops[1])))
    });
    let det = top_matrix[0][0]
        .mul(&top_matrix[1][1])
        .sub(&top_matrix[0][1].mul(&top_matrix[1][0]));
    if det.is_zero() {
        return Err(VariationalError::NonSolvableTopOrder {
            matrix: format!(
                "[[{}, {}], [{}, {}]] in ({}, {})",
                top_matrix[0][0], top_matrix[0][1], top_matrix[1][0], top_matrix[1][1], tops[0], tops[1]
            ),
        });
    }
    let mut state: Vec<JetVar> = (0..n1).map(JetVar::k1).collect();
    state.extend((0..n2).map(JetVar::k2));
    state.push(JetVar::mu(0));
    Ok(ElSystem {
        lagrangian: lc,
        mu_closed_form: integrate_total(&mu_rhs),
        e1,
        e2,
        lambda,
        lambda_constant,
        mu_rhs,
        raw,
        residuals,
        orders: [n1, n2],
        top_matrix,
        top_rhs,
        state,
    })
}

impl ElSystem {
    pub fn tops(&self) -> [JetVar; 2] {
        [JetVar::k1(self.orders[0]), JetVar::k2(self.orders[1])]
    }

    /// State followed by the two top derivatives.
    pub fn extended_layout(&self) -> Vec<JetVar> {
        let mut l = self.state.clone();
        l.extend(self.tops());
        l
    }

    /// True when E^X vanishes identically.
    pub fn ex_vanishes(&self) -> bool {
        self.raw[0].is_zero()
    }

    /// E^Y, E^Z with μ replaced by its closed form (and μₛ by its derivative).
    pub fn residuals_with_closed_mu(&self) -> Option<[RationalFn; 2]> {
        let m = self.mu_closed_form.as_ref()?;
        let dm = m.total_derivative();
        let sub = |r: &RationalFn| r.substitute(&JetVar::mu(1), &dm).and_then(|r| r.substitute(&JetVar::mu(0), m)).ok();
        Some([sub(&self.raw[1])?, sub(&self.raw[2])?])
    }

    pub fn to_text(&self) -> String {
        let e = JetExpression::from_canonical;
        let mut out = String::new();
        let _ = writeln!(out, "L = {}", e(&self.lagrangian));
        let _ = writeln!(out, "E^k1 = {}", e(&self.e1));
        let _ = writeln!(out, "E^k2 = {}", e(&self.e2));
        let _ = writeln!(out, "lambda = {}", e(&self.lambda));
        let _ = writeln!(out, "mu_s = {}", e(&self.mu_rhs));
        match &self.mu_closed_form {
            Some(m) => {
                let _ = writeln!(out, "mu = {}  (closed form, integration constant 0)", e(m));
            }
            None => {
                let _ = writeln!(out, "mu: no closed form found; integrated as a state");
            }
        }
        let names = ["E^X", "E^Y", "E^Z", "E^V3"];
        for (n, r) in names.iter().zip(&self.raw) {
            let _ = writeln!(out, "{n} = {} = 0", e(r));
        }
        if let Some([y, z]) = self.residuals_with_closed_mu() {
            let _ = writeln!(out, "with closed-form mu:");
            let _ = writeln!(out, "  E^Y = {} = 0", e(&y));
            let _ = writeln!(out, "  E^Z = {} = 0", e(&z));
        }
        let tops = self.tops();
        let _ = writeln!(out, "order: {} in k1, {} in k2", self.orders[0], self.orders[1]);
        for r in 0..2 {
            let _ = writeln!(
                out,
                "row {}: ({})*{} + ({})*{} + ({}) = 0",
                r + 1,
                e(&self.top_matrix[r][0]),
                tops[0],
                e(&self.top_matrix[r][1]),
                tops[1],
                e(&self.top_rhs[r])
            );
        }
        let names: Vec<String> = self.state.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "state: [{}]", names.join(", "));
        out
    }

    pub fn to_document(&self) -> ElSystemDoc {
        let e = JetExpression::from_canonical;
        ElSystemDoc {
            lagrangian: e(&self.lagrangian),
            euler: [e(&self.e1), e(&self.e2)],
            lambda: e(&self.lambda),
            mu_rhs: e(&self.mu_rhs),
            mu_closed_form: self.mu_closed_form.as_ref().map(e),
            residuals: std::array::from_fn(|i| e(&self.raw[i])),
            orders: self.orders,
            top_matrix: std::array::from_fn(|r| std::array::from_fn(|c| e(&self.top_matrix[r][c]))),
            top_rhs: std::array::from_fn(|r| e(&self.top_rhs[r])),
            state: self.state.iter().map(|v| v.to_string()).collect(),
        }
    }
}

/// Serializable form of an [`ElSystem`] with expression trees.
#[derive(Clone, Debug, Serialize)]
pub struct ElSystemDoc {
    pub lagrangian: JetExpression,
    pub euler: [JetExpression; 2],
    pub lambda: JetExpression,
    pub mu_rhs: JetExpression,
    pub mu_closed_form: Option<JetExpression>,
    /// E^X, E^Y, E^Z, E^V3.
    pub residuals: [JetExpression; 4],
    pub orders: [u32; 2],
    pub top_matrix: [[JetExpression; 2]; 2],
    pub top_rhs: [JetExpression; 2],
    pub state: Vec<String>,
}

/// Initial frame and position integrated alongside the invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameInit {
    pub sigma0: Mat3,
    pub p0: Vec3,
}

impl Default for FrameInit {
    fn default() -> Self {
        FrameInit {
            sigma0: Mat3::identity(),
            p0: Vec3::zeros(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Defaults to adaptive RK45 (rtol 1e−12, atol 1e−14) capped at one grid step.
    pub method: Option<Method>,
    pub frame: Option<FrameInit>,
    /// The top matrix counts as singular when |det| ≤ tol·max|aᵢⱼ|².
    pub singular_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: None,
            frame: Some(FrameInit::default()),
            singular_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Truncation {
    pub s: f64,
    pub reason: String,
}

/// Numeric EL solution on a uniform grid.
#[derive(Clone, Debug)]
pub struct InvariantTrajectory {
    pub s: Vec<f64>,
    /// Column names of `jets`.
    pub layout: Vec<JetVar>,
    pub jets: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub v: Vec<[f64; 6]>,
    pub sigma: Option<Vec<Mat3>>,
    pub position: Option<Vec<Vec3>>,
    pub truncated: Option<Truncation>,
}

impl InvariantTrajectory {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn ds(&self) -> f64 {
        if self.s.len() < 2 {
            0.0
        } else {
            (self.s[self.s.len() - 1] - self.s[0]) / (self.s.len() - 1) as f64
        }
    }

    pub fn column(&self, v: JetVar) -> Option<Vec<f64>> {
        let i = self.layout.iter().position(|w| *w == v)?;
        Some(self.jets.iter().map(|row| row[i]).collect())
    }

    /// Column `v`, falling back to finite differences of a lower derivative.
    pub fn column_or_fd(&self, v: JetVar) -> Option<Vec<f64>> {
        if let Some(c) = self.column(v) {
            return Some(c);
        }
        let base = (0..v.order).rev().find_map(|o| self.column(JetVar::new(v.base, o)).map(|c| (o, c)))?;
        if self.len() < 7 {
            return None;
        }
        Some(diff_scalar(&base.1, self.ds(), (v.order - base.0) as usize))
    }

    pub fn k1(&self) -> Vec<f64> {
        self.column(JetVar::k1(0)).unwrap_or_default()
    }

    pub fn k2(&self) -> Vec<f64> {
        self.column(JetVar::k2(0)).unwrap_or_default()
    }

    pub fn mu(&self) -> Option<Vec<f64>> {
        self.column(JetVar::mu(0))
    }

    /// The co-integrated RM frame, if any.
    pub fn frame_field(&self) -> Option<FrameField> {
        let rows = self.sigma.clone()?;
        let (k1, k2) = (self.k1(), self.k2());
        Some(FrameField {
            kind: FrameKind::RotationMinimizing,
            s: self.s.clone(),
            rows,
            curvature: k1.into_iter().zip(k2).map(|(a, b)| [a, b]).collect(),
        })
    }

    /// The co-integrated curve, derivatives from the frame equations.
    pub fn curve(&self) -> Option<CurveSamples> {
        let sig = self.sigma.as_ref()?;
        let pos = self.position.clone()?;
        curve_from_frame(&self.s, sig, pos, &self.k1(), &self.k2(), self.column_or_fd(JetVar::k1(1)), self.column_or_fd(JetVar::k2(1)))
    }
}

/// P′ = row 1, P″ = κ₁V + κ₂V₃, P‴ = −κ²P′ + κ₁,ₛV + κ₂,ₛV₃.
pub fn curve_from_frame(
    s: &[f64],
    sigma: &[Mat3],
    points: Vec<Vec3>,
    k1: &[f64],
    k2: &[f64],
    k1s: Option<Vec<f64>>,
    k2s: Option<Vec<f64>>,
) -> Option<CurveSamples> {
    let n = s.len();
    if sigma.len() != n || points.len() != n || k1.len() != n || k2.len() != n {
        return None;
    }
    let zeros = vec![0.0; n];
    let k1s = k1s.unwrap_or_else(|| zeros.clone());
    let k2s = k2s.unwrap_or(zeros);
    let mut d1 = Vec::with_capacity(n);
    let mut d2 = Vec::with_capacity(n);
    let mut d3 = Vec::with_capacity(n);
    for i in 0..n {
        let (t, v, b) = (row(&sigma[i], 0), row(&sigma[i], 1), row(&sigma[i], 2));
        d1.push(t);
        d2.push(k1[i] * v + k2[i] * b);
        d3.push(-(k1[i] * k1[i] + k2[i] * k2[i]) * t + k1s[i] * v + k2s[i] * b);
    }
    Some(CurveSamples {
        s: s.to_vec(),
        points,
        d1,
        d2,
        d3,
    })
}

/// The EL system lowered to numeric evaluation over the extended layout.
pub struct NumericEl {
    layout: Vec<JetVar>,
    n_state: usize,
    orders: [u32; 2],
    a: [[Compiled; 2]; 2],
    b: [Compiled; 2],
    mu_rhs: Compiled,
    lambda: Compiled,
    v: [Compiled; 6],
    da: [[Compiled; 2]; 2],
    db: [Compiled; 2],
    dv: [Compiled; 6],
    singular_tol: f64,
}

impl NumericEl {
    pub fn new(sys: &ElSystem, singular_tol: f64) -> Result<Self, VariationalError> {
        let layout = sys.extended_layout();
        let c = |r: &RationalFn| Compiled::new(r, &layout).map_err(|v| VariationalError::UnsupportedVariable(v.to_string()));
        let v = noether_components(sys);
        let tops = sys.tops();
        let mut layout2 = layout.clone();
        layout2.extend(tops.map(JetVar::differentiated));
        let c2 = |r: &RationalFn| {
            let d = r
                .total_derivative()
                .substitute(&JetVar::mu(1), &sys.mu_rhs)
                .map_err(|e| VariationalError::Algebra(e.to_string()))?;
            Compiled::new(&d, &layout2).map_err(|v| VariationalError::UnsupportedVariable(v.to_string()))
        };
        Ok(NumericEl {
            da: [
                [c2(&sys.top_matrix[0][0])?, c2(&sys.top_matrix[0][1])?],
                [c2(&sys.top_matrix[1][0])?, c2(&sys.top_matrix[1][1])?],
            ],
            db: [c2(&sys.top_rhs[0])?, c2(&sys.top_rhs[1])?],
            dv: [c2(&v[0])?, c2(&v[1])?, c2(&v[2])?, c2(&v[3])?, c2(&v[4])?, c2(&v[5])?],
            n_state: sys.state.len(),
            orders: sys.orders,
            a: [
                [c(&sys.top_matrix[0][0])?, c(&sys.top_matrix[0][1])?],
                [c(&sys.top_matrix[1][0])?, c(&sys.top_matrix[1][1])?],
            ],
            b: [c(&sys.top_rhs[0])?, c(&sys.top_rhs[1])?],
            mu_rhs: c(&sys.mu_rhs)?,
            lambda: c(&sys.lambda)?,
            v: [c(&v[0])?, c(&v[1])?, c(&v[2])?, c(&v[3])?, c(&v[4])?, c(&v[5])?],
            layout,
            singular_tol,
        })
    }

    pub fn layout(&self) -> &[JetVar] {
        &self.layout
    }

    /// Solve for the top derivatives in place (last two slots of `x`).
    pub fn fill_tops(&self, x: &mut [f64]) -> Result<(), RhsFailure> {
        let m = self.n_state;
        x[m] = 0.0;
        x[m + 1] = 0.0;
        let a = [[self.a[0][0].eval(x), self.a[0][1].eval(x)], [self.a[1][0].eval(x), self.a[1][1].eval(x)]];
        let b = [self.b[0].eval(x), self.b[1].eval(x)];
        let scale = a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if !det.is_finite() || !scale.is_finite() || !b[0].is_finite() || !b[1].is_finite() {
            return Err(RhsFailure("non-finite coefficient in the Euler-Lagrange system".into()));
        }
        if scale == 0.0 && b[0] == 0.0 && b[1] == 0.0 {
            // 0·tops = 0: take the minimum-norm solution.
            return Ok(());
        }
        if det.abs() <= self.singular_tol * scale * scale || scale == 0.0 {
            return Err(RhsFailure(format!(
                "top-derivative matrix is singular (det = {det:e}, max entry = {scale:e})"
            )));
        }
        x[m] = (-b[0] * a[1][1] + b[1] * a[0][1]) / det;
        x[m + 1] = (-a[0][0] * b[1] + a[1][0] * b[0]) / det;
        Ok(())
    }

    /// Derivative of the invariant part of the state.
    pub fn state_derivative(&self, x: &[f64], dy: &mut [f64]) {
        let [n1, n2] = [self.orders[0] as usize, self.orders[1] as usize];
        let m = self.n_state;
        for i in 0..n1 {
            dy[i] = if i + 1 < n1 { x[i + 1] } else { x[m] };
        }
        for i in 0..n2 {
            dy[n1 + i] = if i + 1 < n2 { x[n1 + i + 1] } else { x[m + 1] };
        }
        dy[m - 1] = self.mu_rhs.eval(x);
    }

    pub fn lambda(&self, x: &[f64]) -> f64 {
        self.lambda.eval(x)
    }

    pub fn v(&self, x: &[f64]) -> [f64; 6] {
        std::array::from_fn(|i| self.v[i].eval(x))
    }

    pub fn state_len(&self) -> usize {
        self.n_state
    }

    /// Exact d/ds v at a state. The next derivatives of the tops come from
    /// differentiating A·tops + b = 0: tops′ = −A⁻¹(A′·tops + b′).
    pub fn v_derivative(&self, y: &[f64]) -> Result<[f64; 6], RhsFailure> {
        let m = self.n_state;
        let mut x = vec![0.0; m + 4];
        x[..m].copy_from_slice(&y[..m]);
        self.fill_tops(&mut x[..m + 2])?;
        let a = [[self.a[0][0].eval(&x), self.a[0][1].eval(&x)], [self.a[1][0].eval(&x), self.a[1][1].eval(&x)]];
        let g: [f64; 2] = std::array::from_fn(|r| {
            self.da[r][0].eval(&x) * x[m] + self.da[r][1].eval(&x) * x[m + 1] + self.db[r].eval(&x)
        });
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det == 0.0 {
            // 0·tops = 0 branch of `fill_tops`
            x[m + 2] = 0.0;
            x[m + 3] = 0.0;
        } else {
            x[m + 2] = (-g[0] * a[1][1] + g[1] * a[0][1]) / det;
            x[m + 3] = (-a[0][0] * g[1] + a[1][0] * g[0]) / det;
        }
        Ok(std::array::from_fn(|i| self.dv[i].eval(&x)))
    }

    fn k1k2(&self, x: &[f64]) -> (f64, f64) {
        (x[0], x[self.orders[0] as usize])
    }
}

/// σ′ = Qσ with Q = [[0, κ₁, κ₂], [−κ₁, 0, 0], [−κ₂, 0, 0]].
pub fn rm_curvature_matrix(k1: f64, k2: f64) -> Mat3 {
    Mat3::new(0.0, k1, k2, -k1, 0.0, 0.0, -k2, 0.0, 0.0)
}

/// Resolve named initial conditions against the state layout. μ(0)
/// defaults to the closed form when one exists.
pub fn initial_state(sys: &ElSystem, ics: &BTreeMap<String, f64>) -> Result<Vec<f64>, VariationalError> {
    let mut known = BTreeMap::new();
    for (name, value) in ics {
        let v = JetVar::from_name(name).ok_or_else(|| VariationalError::UnknownInitialCondition(name.clone()))?;
        if !sys.state.contains(&v) {
            // extra entries such as psi or Z belong to other stages
            if v.base.is_kappa() || v.base == Base::Mu {
                return Err(VariationalError::UnknownInitialCondition(name.clone()));
            }
            continue;
        }
        known.insert(v, *value);
    }
    let mut y = Vec::with_capacity(sys.state.len());
    for v in &sys.state {
        match known.get(v) {
            Some(x) => y.push(*x),
            None if v.base == Base::Mu => {
                let closed = sys
                    .mu_closed_form
                    .as_ref()
                    .ok_or_else(|| VariationalError::MissingInitialCondition(v.to_string()))?;
                let val = closed
                    .eval(|w| known.get(w).copied())
                    .map_err(|w| VariationalError::MissingInitialCondition(w.to_string()))?;
                y.push(val);
            }
            None => return Err(VariationalError::MissingInitialCondition(v.to_string())),
        }
    }
    Ok(y)
}

pub fn default_method(ds: f64) -> Method {
    Method::Rk45Adaptive {
        tol: Tolerances { rtol: 1e-12, atol: 1e-14 },
        max_step: Some(ds),
    }
}

/// Integrate the EL system on [s0, s1] with output step `ds`.
pub fn solve_el(
    sys: &ElSystem,
    ics: &BTreeMap<String, f64>,
    span: (f64, f64),
    ds: f64,
    opts: &SolveOptions,
) -> Result<InvariantTrajectory, VariationalError> {
    if !(ds > 0.0) || !ds.is_finite() {
        return Err(VariationalError::InvalidStep(ds));
    }
    let num = NumericEl::new(sys, opts.singular_tol)?;
    let y0 = initial_state(sys, ics)?;
    let m = num.n_state;
    let grid = if span.1 > span.0 { grid_with_step(span.0, span.1, ds) } else { vec![span.0] };
    let mut full0 = y0.clone();
    if let Some(f) = &opts.frame {
        full0.extend(f.sigma0.transpose().iter().copied());
        full0.extend(f.p0.iter().copied());
    }
    let with_frame = opts.frame.is_some();
    let mut x = vec![0.0; m + 2];
    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), RhsFailure> {
        x[..m].copy_from_slice(&y[..m]);
        num.fill_tops(&mut x)?;
        num.state_derivative(&x, &mut dy[..m]);
        if with_frame {
            let (k1, k2) = num.k1k2(&x);
            let sig = Mat3::from_row_slice(&y[m..m + 9]);
            let d = rm_curvature_matrix(k1, k2) * sig;
            for r in 0..3 {
                for c in 0..3 {
                    dy[m + 3 * r + c] = d[(r, c)];
                }
            }
            dy[m + 9..m + 12].copy_from_slice(&y[m..m + 3]);
        }
        Ok(())
    };
    let mut problem = OdeProblem::new(rhs, full0, grid);
    let sol = problem.integrate(opts.method.unwrap_or_else(|| default_method(ds)));
    let truncated = match &sol.status {
        Status::Completed => None,
        Status::Stopped { s, reason } => Some(Truncation {
            s: *s,
            reason: reason.to_string(),
        }),
    };
    let mut jets = Vec::with_capacity(sol.y.len());
    let mut lambda = Vec::with_capacity(sol.y.len());
    let mut v = Vec::with_capacity(sol.y.len());
    let mut sigma = Vec::new();
    let mut position = Vec::new();
    let mut x = vec![0.0; m + 2];
    let mut keep = sol.y.len();
    for (i, y) in sol.y.iter().enumerate() {
        x[..m].copy_from_slice(&y[..m]);
        if num.fill_tops(&mut x).is_err() {
            keep = i;
            break;
        }
        jets.push(x.clone());
        lambda.push(num.lambda(&x));
        v.push(num.v(&x));
        if with_frame {
            let sig = Mat3::from_row_slice(&y[m..m + 9]);
            sigma.push(sig);
            position.push(Vec3::new(y[m + 9], y[m + 10], y[m + 11]));
        }
    }
    let truncated = if keep < sol.y.len() && truncated.is_none() {
        Some(Truncation {
            s: sol.s[keep],
            reason: "top-derivative matrix singular at an output node".into(),
        })
    } else {
        truncated
    };
    Ok(InvariantTrajectory {
        s: sol.s[..keep].to_vec(),
        layout: num.layout.clone(),
        jets,
        lambda,
        v,
        sigma: with_frame.then_some(sigma),
        position: with_frame.then_some(position),
        truncated,
    })
}

/// A trajectory from sampled invariants of a given curve rather than from
/// the EL flow: κ-derivatives (tops included) by 6th-order finite
/// differences, μ by quadrature of its equation from `mu0` (two passes, so
/// a μ-dependent right-hand side is also handled), then λ and v.
pub fn trajectory_from_invariants(sys: &ElSystem, s: &[f64], k1: &[f64], k2: &[f64], mu0: f64) -> Result<InvariantTrajectory, VariationalError> {
    let n = s.len();
    if k1.len() != n || k2.len() != n {
        return Err(VariationalError::GridMismatch { expected: n, found: k1.len().min(k2.len()) });
    }
    let num = NumericEl::new(sys, 0.0)?;
    let layout = num.layout().to_vec();
    let top = layout.iter().filter(|v| v.base.is_kappa()).map(|v| v.order).max().unwrap_or(0) as usize;
    let needed = top + 7;
    if n < needed {
        return Err(VariationalError::GridTooShort { nodes: n, needed });
    }
    let h = (s[n - 1] - s[0]) / (n - 1) as f64;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(layout.len());
    let mut mu_col = None;
    for (j, v) in layout.iter().enumerate() {
        let base = match v.base {
            Base::Kappa1 => k1,
            Base::Kappa2 => k2,
            Base::Mu => {
                mu_col = Some(j);
                cols.push(vec![mu0; n]);
                continue;
            }
            _ => return Err(VariationalError::UnsupportedVariable(v.to_string())),
        };
        cols.push(if v.order == 0 { base.to_vec() } else { diff_scalar_acc(base, h, v.order as usize, 6) });
    }
    let row = |cols: &[Vec<f64>], i: usize| -> Vec<f64> { cols.iter().map(|c| c[i]).collect() };
    if let Some(j) = mu_col {
        let m = num.state_len();
        let mut dy = vec![0.0; m];
        for _ in 0..2 {
            let rate: Vec<f64> = (0..n)
                .map(|i| {
                    num.state_derivative(&row(&cols, i), &mut dy);
                    dy[m - 1]
                })
                .collect();
            cols[j] = cumulative(&rate, h, mu0);
        }
    }
    let jets: Vec<Vec<f64>> = (0..n).map(|i| row(&cols, i)).collect();
    if let Some(i) = jets.iter().position(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(VariationalError::NonFinite(format!("invariants at s = {}", s[i])));
    }
    Ok(InvariantTrajectory {
        s: s.to_vec(),
        lambda: jets.iter().map(|x| num.lambda(x)).collect(),
        v: jets.iter().map(|x| num.v(x)).collect(),
        layout,
        jets,
        sigma: None,
        position: None,
        truncated: None,
    })
}

/// Residuals E^Y, E^Z evaluated along a trajectory; entries that need
/// derivatives beyond the stored jets use finite differences.
pub fn residuals_along(sys: &ElSystem, traj: &InvariantTrajectory) -> Result<Vec<[f64; 2]>, VariationalError> {
    let mut layout = Vec::new();
    for r in &sys.residuals {
        for v in r.vars() {
            if !layout.contains(&v) {
                layout.push(v);
            }
        }
    }
    let cols: Vec<Vec<f64>> = layout
        .iter()
        .map(|v| traj.column_or_fd(*v).ok_or_else(|| VariationalError::UnsupportedVariable(v.to_string())))
        .collect::<Result<_, _>>()?;
    let c = |r: &RationalFn| Compiled::new(r, &layout).map_err(|v| VariationalError::UnsupportedVariable(v.to_string()));
    let (ry, rz) = (c(&sys.residuals[0])?, c(&sys.residuals[1])?);
    let mut x = vec![0.0; layout.len()];
    Ok((0..traj.len())
        .map(|i| {
            for (slot, col) in x.iter_mut().zip(&cols) {
                *slot = col[i];
            }
            [ry.eval(&x), rz.eval(&x)]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{parse_expression, parse_lagrangian};

    fn rf(s: &str) -> RationalFn {
        parse_expression(s).unwrap().canonical().unwrap()
    }

    fn sys(l: &str) -> ElSystem {
        assemble_el_system(&parse_lagrangian(l).unwrap()).unwrap()
    }

    #[test]
    fn ex_vanishes_for_the_worked_lagrangians() {
        for l in [
            "0.5*(k2/k1)^2",
            "k1*D(k2,1) - D(k1,1)*k2",
            "D(k1,1)*D(k2,2) - D(k1,2)*D(k2,1)",
            "0.5*(k1^2 + k2^2)",
        ] {
            assert!(sys(l).ex_vanishes(), "{l}");
        }
    }

    #[test]
    fn ex_vanishes_for_mixed_order_lagrangian() {
        // this one has no solvable top order, so check ℋ* directly
        let lc = rf("k1^3*k2_s + k2_ss^2");
        let lam = lambda_generic(&lc);
        let e = [lam, euler_generic(&lc, Base::Kappa1), euler_generic(&lc, Base::Kappa2), RationalFn::var(JetVar::mu(0))];
        assert!(syzygy_symbolic().adjoint().apply(&e)[0].is_zero());
        assert!(matches!(
            assemble_el_system(&parse_lagrangian("k1^3*k2_s + k2_ss^2").unwrap()),
            Err(VariationalError::NonSolvableTopOrder { .. })
        ));
    }

    #[test]
    fn ex_identity_list() {
        for l in [
            "0.5*(k2/k1)^2",
            "k1*D(k2,1) - D(k1,1)*k2",
            "D(k1,1)*D(k2,2) - D(k1,2)*D(k2,1)",
            "0.5*(k1^2 + k2^2)",
            "k1^2*k2 + k2_s^2 + k1_s^2",
        ] {
            assert!(sys(l).ex_vanishes(), "{l}");
        }
    }

    #[test]
    fn rows_two_and_three_match_direct_formulas() {
        for l in ["0.5*(k2/k1)^2", "k1*D(k2,1) - D(k1,1)*k2", "D(k1,1)*D(k2,2) - D(k1,2)*D(k2,1)"] {
            let s = sys(l);
            let mu = RationalFn::var(JetVar::mu(0));
            let k1 = RationalFn::var(JetVar::k1(0));
            let k2 = RationalFn::var(JetVar::k2(0));
            let ey = s.e1.total_derivative_n(2).add(&k2.mul(&mu).total_derivative()).sub(&k1.mul(&s.lambda));
            let ez = s.e2.total_derivative_n(2).sub(&k1.mul(&mu).total_derivative()).sub(&k2.mul(&s.lambda));
            assert!(s.raw[1].equivalent(&ey), "{l}");
            assert!(s.raw[2].equivalent(&ez), "{l}");
            let ev3 = k2.mul(&s.e1).sub(&k1.mul(&s.e2)).sub(&RationalFn::var(JetVar::mu(1)));
            assert!(s.raw[3].equivalent(&ev3), "{l}");
        }
    }

    #[test]
    fn first_example_equations() {
        let s = sys("0.5*(k2/k1)^2");
        assert!(s.mu_rhs.equivalent(&rf("-k2^3/k1^3 - k2/k1")));
        assert!(s.lambda.equivalent(&rf("0.5*(k2/k1)^2")));
        let ez = rf("-k2^3/(2*k1^2) + (6*k1_s^2/k1^4 - 2*k1_ss/k1^3)*k2 + k2_ss/k1^2 - 4*k1_s*k2_s/k1^3 - mu_s*k1 - mu*k1_s");
        assert!(s.raw[2].equivalent(&ez));
        // the printed E^Y carries −μₛκ₂; the assembled one has +μₛκ₂
        let ey = rf("(-12*k1_s^2/k1^5 + 3*k1_ss/k1^4 - 1/(2*k1))*k2^2 + (12*k1_s*k2_s/k1^4 - 2*k2_ss/k1^3 + mu_s)*k2 - 2*k2_s^2/k1^3 + mu*k2_s");
        assert!(s.raw[1].equivalent(&ey));
        assert_eq!(s.orders, [2, 2]);
        assert!(s.mu_closed_form.is_none());
    }

    #[test]
    fn second_example_equations() {
        let s = sys("k1*D(k2,1) - D(k1,1)*k2");
        assert!(s.mu_closed_form.as_ref().unwrap().equivalent(&rf("k1^2 + k2^2")));
        let [y, z] = s.residuals_with_closed_mu().unwrap();
        assert!(y.equivalent(&rf("2*k2_sss + 3*k2_s*(k1^2 + k2^2)")));
        assert!(z.equivalent(&rf("-2*k1_sss - 3*k1_s*(k1^2 + k2^2)")));
        assert!(s.lambda.equivalent(&rf("2*(k1_s*k2 - k1*k2_s)")));
        assert_eq!(s.orders, [3, 3]);
    }

    #[test]
    fn third_example_equations() {
        let s = sys("D(k1,1)*D(k2,2) - D(k1,2)*D(k2,1)");
        assert!(s.lambda.equivalent(&rf("2*k2_sss*k1 - 2*k1_s*k2_ss + 2*k2_s*k1_ss - 2*k2*k1_sss")));
        assert!(s.mu_closed_form.as_ref().unwrap().equivalent(&rf("k1_s^2 + k2_s^2 - 2*(k1*k1_ss + k2*k2_ss)")));
        let mu = RationalFn::var(JetVar::mu(0));
        let lam = &s.lambda;
        let k1 = RationalFn::var(JetVar::k1(0));
        let k2 = RationalFn::var(JetVar::k2(0));
        let ey = rf("-2*k2_sssss").add(&k2.mul(&mu).total_derivative()).sub(&k1.mul(lam));
        let ez = rf("2*k1_sssss").sub(&k1.mul(&mu).total_derivative()).sub(&k2.mul(lam));
        assert!(s.raw[1].equivalent(&ey));
        assert!(s.raw[2].equivalent(&ez));
        assert_eq!(s.orders, [5, 5]);
    }

    #[test]
    fn singular_top_matrix_is_reported() {
        let err = assemble_el_system(&parse_lagrangian("0.5*k1^2").unwrap()).unwrap_err();
        assert!(matches!(err, VariationalError::NonSolvableTopOrder { .. }), "{err}");
    }

    #[test]
    fn elastic_solution_has_vanishing_residuals() {
        let s = sys("0.5*(k1^2 + k2^2)");
        assert!(s.lambda.equivalent(&rf("-0.5*(k1^2 + k2^2)")));
        let ics: BTreeMap<String, f64> = [("k1", 1.0), ("k2", 0.0), ("k1_s", 0.0), ("k2_s", 0.0), ("mu", 0.0)]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b))
            .collect();
        let t = solve_el(&s, &ics, (0.0, 2.0), 1e-3, &SolveOptions::default()).unwrap();
        assert!(t.truncated.is_none());
        let k1 = t.k1();
        assert!((k1[k1.len() - 1] - 1.0).abs() > 1e-3, "solution should move");
        for r in residuals_along(&s, &t).unwrap() {
            assert!(r[0].abs() < 1e-8 && r[1].abs() < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn zero_lagrangian_is_constant() {
        let s = sys("0");
        let ics: BTreeMap<String, f64> = [("k1", 0.3), ("k2", -0.2), ("mu", 0.0)]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b))
            .collect();
        let t = solve_el(&s, &ics, (0.0, 1.0), 0.01, &SolveOptions::default()).unwrap();
        assert!(t.truncated.is_none());
        assert!(t.k1().iter().all(|x| (x - 0.3).abs() < 1e-15));
        for r in residuals_along(&s, &t).unwrap() {
            assert_eq!(r, [0.0, 0.0]);
        }
    }

    #[test]
    fn missing_and_unknown_ics() {
        let s = sys("0.5*(k2/k1)^2");
        let mut ics: BTreeMap<String, f64> = BTreeMap::new();
        ics.insert("k1".into(), 1.0);
        assert!(matches!(initial_state(&s, &ics), Err(VariationalError::MissingInitialCondition(_))));
        ics.insert("k1_sssss".into(), 1.0);
        assert!(matches!(initial_state(&s, &ics), Err(VariationalError::UnknownInitialCondition(_))));
    }

    #[test]
    fn closed_form_mu_default() {
        let s = sys("k1*D(k2,1) - D(k1,1)*k2");
        let ics: BTreeMap<String, f64> = [("k1", 1.0), ("k2", 0.5), ("k1_s", 1.0), ("k2_s", 1.0), ("k1_ss", 1.0), ("k2_ss", 1.0)]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b))
            .collect();
        let y = initial_state(&s, &ics).unwrap();
        assert_eq!(*y.last().unwrap(), 1.25);
    }

    #[test]
    fn frame_is_carried_along() {
        let s = sys("0.5*(k1^2 + k2^2)");
        let ics: BTreeMap<String, f64> = [("k1", 1.0), ("k2", 0.0), ("k1_s", 0.0), ("k2_s", 0.0), ("mu", 0.0)]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b))
            .collect();
        let t = solve_el(&s, &ics, (0.0, 1.0), 1e-3, &SolveOptions::default()).unwrap();
        let f = t.frame_field().unwrap();
        assert!(f.orthonormality_error() < 1e-10);
        assert!(f.rm_constraint_residual() < 1e-8);
        let c = t.curve().unwrap();
        assert!(c.unit_speed_error() < 1e-10);
    }
}
