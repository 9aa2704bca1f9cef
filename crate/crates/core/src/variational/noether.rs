//! The Noether vector v(I), the conservation laws Ad(ρ)⁻¹v(I) = c, and the
//! structure equation d/ds v = M v.

use nalgebra::{Matrix3, SMatrix, SVector};
use serde::Serialize;

use crate::frames::curve::{diff_scalar, diff_scalar_acc};
use crate::frames::{CurveSamples, FrameField, Mat3, Vec3};
use crate::jet::{JetExpression, JetVar, RationalFn};

use super::el::{ElSystem, InvariantTrajectory, NumericEl};
use super::VariationalError;

pub type Mat6 = SMatrix<f64, 6, 6>;
pub type Vec6 = SVector<f64, 6>;

/// (λ, −DE^{κ₁} − μκ₂, −DE^{κ₂} + μκ₁, μ, E^{κ₂}, E^{κ₁}) with μ symbolic.
pub fn noether_components(sys: &ElSystem) -> [RationalFn; 6] {
    let mu = RationalFn::var(JetVar::mu(0));
    let k1 = RationalFn::var(JetVar::k1(0));
    let k2 = RationalFn::var(JetVar::k2(0));
    [
        sys.lambda.clone(),
        sys.e1.total_derivative().neg().sub(&mu.mul(&k2)),
        sys.e2.total_derivative().neg().add(&mu.mul(&k1)),
        mu,
        sys.e2.clone(),
        sys.e1.clone(),
    ]
}

/// Symbolic v(I).
#[derive(Clone, Debug)]
pub struct NoetherVector {
    pub v: [RationalFn; 6],
}

impl NoetherVector {
    pub fn new(sys: &ElSystem) -> Self {
        NoetherVector {
            v: noether_components(sys),
        }
    }

    /// v with μ replaced by `mu` (e.g. the closed form).
    pub fn with_mu(&self, mu: &RationalFn) -> Option<NoetherVector> {
        let mut v = self.v.clone();
        for c in v.iter_mut() {
            *c = c.substitute(&JetVar::mu(0), mu).ok()?;
        }
        Some(NoetherVector { v })
    }

    pub fn to_expressions(&self) -> [JetExpression; 6] {
        std::array::from_fn(|i| JetExpression::from_canonical(&self.v[i]))
    }

    pub fn is_zero(&self) -> bool {
        self.v.iter().all(RationalFn::is_zero)
    }

    /// d/ds v − M v, symbolically. Rows 5 and 6 vanish identically; rows
    /// 1–4 equal −(E^X, E^Y, E^Z, E^{V₃}).
    pub fn structure_residual(&self) -> [RationalFn; 6] {
        let k1 = RationalFn::var(JetVar::k1(0));
        let k2 = RationalFn::var(JetVar::k2(0));
        let v = &self.v;
        let mv = [
            k1.mul(&v[1]).add(&k2.mul(&v[2])),
            k1.mul(&v[0]).neg(),
            k2.mul(&v[0]).neg(),
            k1.mul(&v[4]).neg().add(&k2.mul(&v[5])),
            v[2].neg().add(&k1.mul(&v[3])),
            v[1].neg().sub(&k2.mul(&v[3])),
        ];
        std::array::from_fn(|i| v[i].total_derivative().sub(&mv[i]))
    }
}

pub fn noether_vector(sys: &ElSystem) -> NoetherVector {
    NoetherVector::new(sys)
}

/// M(κ₁, κ₂) with d/ds v = M v along extremals.
pub fn m_matrix(k1: f64, k2: f64) -> Mat6 {
    let mut m = Mat6::zeros();
    m[(0, 1)] = k1;
    m[(0, 2)] = k2;
    m[(1, 0)] = -k1;
    m[(2, 0)] = -k2;
    m[(3, 4)] = -k1;
    m[(3, 5)] = k2;
    m[(4, 2)] = -1.0;
    m[(4, 3)] = k1;
    m[(5, 1)] = -1.0;
    m[(5, 3)] = -k2;
    m
}

fn cross_matrix(p: &Vec3) -> Mat3 {
    Matrix3::new(0.0, -p.z, p.y, p.z, 0.0, -p.x, -p.y, p.x, 0.0)
}

const DSIGN: [f64; 3] = [1.0, -1.0, 1.0];

/// Ad(ρ)⁻¹ = [[σᵀ, 0], [D𝐗σᵀ, DσᵀD]] with D = diag(1, −1, 1) and 𝐗 the cross
/// matrix of the position.
pub fn ad_inverse(sigma: &Mat3, p: &Vec3) -> Mat6 {
    let d = Mat3::from_diagonal(&Vec3::from(DSIGN));
    let st = sigma.transpose();
    let mut a = Mat6::zeros();
    a.fixed_view_mut::<3, 3>(0, 0).copy_from(&st);
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(&(d * cross_matrix(p) * st));
    a.fixed_view_mut::<3, 3>(3, 3).copy_from(&(d * st * d));
    a
}

/// c = Ad(ρ)⁻¹v.
pub fn constants_at(v: &[f64; 6], sigma: &Mat3, p: &Vec3) -> [f64; 6] {
    let c = ad_inverse(sigma, p) * Vec6::from_row_slice(v);
    std::array::from_fn(|i| c[i])
}

/// Per-node constants, their median and drift.
#[derive(Clone, Debug, Serialize)]
pub struct NoetherState {
    pub c: [f64; 6],
    pub per_node: Vec<[f64; 6]>,
    /// max over nodes of |cᵢ(s) − cᵢ|.
    pub drift: [f64; 6],
    /// `drift` divided by ‖c‖∞.
    pub relative_drift: [f64; 6],
}

impl NoetherState {
    pub fn max_relative_drift(&self) -> f64 {
        self.relative_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn c1(&self) -> Vec3 {
        Vec3::new(self.c[0], self.c[1], self.c[2])
    }

    pub fn c2(&self) -> Vec3 {
        Vec3::new(self.c[3], self.c[4], self.c[5])
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn constants_from(v: &[[f64; 6]], sigma: &[Mat3], points: &[Vec3]) -> Result<NoetherState, VariationalError> {
    if sigma.len() != v.len() || points.len() != v.len() {
        return Err(VariationalError::GridMismatch {
            expected: v.len(),
            found: sigma.len().min(points.len()),
        });
    }
    let per_node: Vec<[f64; 6]> = v
        .iter()
        .zip(sigma.iter().zip(points))
        .map(|(v, (s, p))| constants_at(v, s, p))
        .collect();
    let c: [f64; 6] = std::array::from_fn(|i| median(per_node.iter().map(|x| x[i]).collect()));
    let drift: [f64; 6] = std::array::from_fn(|i| per_node.iter().map(|x| (x[i] - c[i]).abs()).fold(0.0, f64::max));
    let scale = c.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
    Ok(NoetherState {
        c,
        relative_drift: drift.map(|d| if d == 0.0 { 0.0 } else { d / scale }),
        drift,
        per_node,
    })
}

/// Constants of a trajectory against a frame and curve on the same grid.
pub fn conservation_constants(traj: &InvariantTrajectory, frame: &FrameField, curve: &CurveSamples) -> Result<NoetherState, VariationalError> {
    if frame.len() != traj.len() || curve.len() != traj.len() {
        return Err(VariationalError::GridMismatch {
            expected: traj.len(),
            found: frame.len().min(curve.len()),
        });
    }
    constants_from(&traj.v, &frame.rows, &curve.points)
}

/// Pointwise |w₁|² and w₁ᵀDw₂, which equal |c₁|² and c₁ᵀDc₂.
#[derive(Clone, Debug, Serialize)]
pub struct FirstIntegrals {
    pub w1_squared: Vec<f64>,
    pub w1_d_w2: Vec<f64>,
    /// Reference values: from `c` when given, otherwise the medians.
    pub reference: [f64; 2],
    pub residual: [Vec<f64>; 2],
    /// max residual over |c₁|² and over max |w₁||w₂| respectively.
    pub relative_drift: [f64; 2],
}

impl FirstIntegrals {
    pub fn max_relative_drift(&self) -> f64 {
        self.relative_drift[0].max(self.relative_drift[1])
    }
}

pub fn first_integrals(v: &[[f64; 6]], c: Option<&[f64; 6]>) -> FirstIntegrals {
    let f1: Vec<f64> = v.iter().map(|x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).collect();
    let bil = |a: &[f64], b: &[f64]| a[0] * b[0] - a[1] * b[1] + a[2] * b[2];
    let f2: Vec<f64> = v.iter().map(|x| bil(&x[..3], &x[3..])).collect();
    let reference = match c {
        Some(c) => [c[0] * c[0] + c[1] * c[1] + c[2] * c[2], bil(&c[..3], &c[3..])],
        None => [median(f1.clone()), median(f2.clone())],
    };
    let r1: Vec<f64> = f1.iter().map(|x| x - reference[0]).collect();
    let r2: Vec<f64> = f2.iter().map(|x| x - reference[1]).collect();
    let scale2 = v
        .iter()
        .map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]).sqrt())
        .fold(0.0, f64::max);
    let rel = |r: &[f64], scale: f64| {
        let m = r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m == 0.0 {
            0.0
        } else {
            m / scale.max(1e-300)
        }
    };
    FirstIntegrals {
        relative_drift: [rel(&r1, reference[0].abs()), rel(&r2, scale2.max(reference[1].abs()))],
        w1_squared: f1,
        w1_d_w2: f2,
        reference,
        residual: [r1, r2],
    }
}

/// Residuals of d/ds v = M v.
#[derive(Clone, Debug, Serialize)]
pub struct DiffvReport {
    /// Rows 5–6 of d/ds v − M v simplify to zero.
    pub symbolic_rows_5_6_vanish: bool,
    /// Rows 1–4 of d/ds v − M v equal −(E^X, E^Y, E^Z, E^{V₃}).
    pub symbolic_rows_1_4_match_el: bool,
    /// Max residual per row with d/ds v evaluated exactly at each node.
    pub pointwise_max: [f64; 6],
    /// `pointwise_max` over max |v|.
    pub pointwise_relative: [f64; 6],
    /// Max interior residual per row, d/ds v by 6th-order finite differences.
    pub fd_max: [f64; 6],
    pub fd_relative: [f64; 6],
}

impl DiffvReport {
    pub fn max_pointwise_relative(&self) -> f64 {
        self.pointwise_relative.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_fd_relative(&self) -> f64 {
        self.fd_relative.iter().copied().fold(0.0, f64::max)
    }
}

/// Number of boundary nodes dropped from interior-only residual norms.
pub const INTERIOR_MARGIN: usize = 3;

pub fn numeric_structure_residual(v: &[[f64; 6]], k1: &[f64], k2: &[f64], h: f64) -> ([f64; 6], [f64; 6]) {
    let n = v.len();
    let mut max = [0.0f64; 6];
    if n < 2 * INTERIOR_MARGIN + 7 {
        return ([f64::NAN; 6], [f64::NAN; 6]);
    }
    let dv: Vec<Vec<f64>> = (0..6)
        .map(|i| diff_scalar_acc(&v.iter().map(|x| x[i]).collect::<Vec<_>>(), h, 1, 6))
        .collect();
    for j in INTERIOR_MARGIN..n - INTERIOR_MARGIN {
        let mv = m_matrix(k1[j], k2[j]) * Vec6::from_row_slice(&v[j]);
        for i in 0..6 {
            max[i] = max[i].max((dv[i][j] - mv[i]).abs());
        }
    }
    let scale = v.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
    (max, max.map(|m| m / scale))
}

fn flow_structure_residual(traj: &InvariantTrajectory, sys: &ElSystem) -> ([f64; 6], [f64; 6]) {
    let nan = ([f64::NAN; 6], [f64::NAN; 6]);
    let Ok(num) = NumericEl::new(sys, 1e-10) else {
        return nan;
    };
    let m = num.state_len();
    if traj.layout.len() < m || traj.layout[..m] != sys.state[..] {
        return nan;
    }
    let (k1, k2) = (traj.k1(), traj.k2());
    let mut max = [0.0f64; 6];
    for (j, x) in traj.jets.iter().enumerate() {
        let Ok(dv) = num.v_derivative(&x[..m]) else {
            return nan;
        };
        let mv = m_matrix(k1[j], k2[j]) * Vec6::from_row_slice(&traj.v[j]);
        for i in 0..6 {
            max[i] = max[i].max((dv[i] - mv[i]).abs());
        }
    }
    let scale = traj.v.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
    (max, max.map(|x| x / scale))
}

pub fn check_diffv(traj: &InvariantTrajectory, sys: &ElSystem) -> DiffvReport {
    let nv = NoetherVector::new(sys);
    let res = nv.structure_residual();
    let rows_5_6 = res[4].is_zero() && res[5].is_zero();
    let rows_1_4 = (0..4).all(|i| res[i].add(&sys.raw[i]).is_zero());
    let (fd_max, fd_relative) = numeric_structure_residual(&traj.v, &traj.k1(), &traj.k2(), traj.ds());
    let (pointwise_max, pointwise_relative) = flow_structure_residual(traj, sys);
    DiffvReport {
        symbolic_rows_5_6_vanish: rows_5_6,
        symbolic_rows_1_4_match_el: rows_1_4,
        pointwise_max,
        pointwise_relative,
        fd_max,
        fd_relative,
    }
}

/// max over interior nodes of |M − (d/ds Ad)Ad⁻¹|, with Ad = (Ad⁻¹)⁻¹ along
/// an RM frame and its curve.
pub fn ad_derivative_mismatch(frame: &FrameField, curve: &CurveSamples) -> f64 {
    let n = frame.len();
    if n < 2 * INTERIOR_MARGIN + 7 || curve.len() != n {
        return f64::NAN;
    }
    let h = frame.ds();
    let inv: Vec<Mat6> = (0..n).map(|i| ad_inverse(&frame.rows[i], &curve.points[i])).collect();
    let mut worst = 0.0f64;
    let entries: Vec<Vec<f64>> = (0..36)
        .map(|e| diff_scalar(&inv.iter().map(|m| m[(e / 6, e % 6)]).collect::<Vec<_>>(), h, 1))
        .collect();
    for j in INTERIOR_MARGIN..n - INTERIOR_MARGIN {
        let d = Mat6::from_fn(|r, c| entries[6 * r + c][j]);
        let ad = inv[j].try_inverse().unwrap_or_else(Mat6::zeros);
        let num = -ad * d;
        let [k1, k2] = frame.curvature[j];
        worst = worst.max((num - m_matrix(k1, k2)).abs().max());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{rm_frame_integrate, rm_invariants, CatalogCurve, RmOptions};
    use crate::jet::{parse_expression, parse_lagrangian};
    use crate::variational::el::assemble_el_system;

    fn rf(s: &str) -> RationalFn {
        parse_expression(s).unwrap().canonical().unwrap()
    }

    fn nv(l: &str) -> (ElSystem, NoetherVector) {
        let s = assemble_el_system(&parse_lagrangian(l).unwrap()).unwrap();
        let v = NoetherVector::new(&s);
        (s, v)
    }

    #[test]
    fn second_example_vector() {
        let (s, v) = nv("k1*D(k2,1) - D(k1,1)*k2");
        let v = v.with_mu(s.mu_closed_form.as_ref().unwrap()).unwrap();
        let want = [
            "2*(k1_s*k2 - k1*k2_s)",
            "-2*k2_ss - k2*(k1^2 + k2^2)",
            // printed with −2κ₁,ₛₛ; −DE^{κ₂} with E^{κ₂} = −2κ₁,ₛ gives +2κ₁,ₛₛ,
            // which is also what row 5 of d/ds v = M v requires
            "2*k1_ss + k1*(k1^2 + k2^2)",
            "k1^2 + k2^2",
            "-2*k1_s",
            "2*k2_s",
        ];
        for (got, w) in v.v.iter().zip(want) {
            assert!(got.equivalent(&rf(w)), "{got} vs {w}");
        }
    }

    #[test]
    fn third_example_vector() {
        let (s, v) = nv("D(k1,1)*D(k2,2) - D(k1,2)*D(k2,1)");
        let want = ["2*k2_ssss - mu*k2", "-2*k1_ssss + mu*k1", "mu", "2*k1_sss", "-2*k2_sss"];
        assert!(v.v[0].equivalent(&s.lambda));
        for (got, w) in v.v[1..].iter().zip(want) {
            assert!(got.equivalent(&rf(w)), "{got} vs {w}");
        }
    }

    #[test]
    fn first_example_vector() {
        let (_, v) = nv("0.5*(k2/k1)^2");
        let want = [
            "0.5*(k2/k1)^2",
            "-k2/k1^4*(k1^4*mu - 2*k1*k2_s + 3*k2*k1_s)",
            "-k2_s/k1^2 + 2*k2*k1_s/k1^3 + mu*k1",
            "mu",
            "k2/k1^2",
            "-k2^2/k1^3",
        ];
        for (got, w) in v.v.iter().zip(want) {
            assert!(got.equivalent(&rf(w)), "{got} vs {w}");
        }
    }

    #[test]
    fn zero_lagrangian_vector_vanishes() {
        let (_, v) = nv("0");
        let v = v.with_mu(&RationalFn::zero()).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn structure_rows() {
        for l in ["0.5*(k2/k1)^2", "k1*D(k2,1) - D(k1,1)*k2", "D(k1,1)*D(k2,2) - D(k1,2)*D(k2,1)"] {
            let (s, v) = nv(l);
            let r = v.structure_residual();
            assert!(r[4].is_zero() && r[5].is_zero(), "{l}");
            for i in 0..4 {
                assert!(r[i].add(&s.raw[i]).is_zero(), "{l} row {i}");
            }
        }
    }

    #[test]
    fn m_is_the_derivative_of_the_adjoint_action() {
        let c = CatalogCurve::RandomFourier { seed: 3, modes: 3 }.sample(3.0, 1e-3);
        let f = rm_frame_integrate(&c, crate::frames::default_normal(&c.d1[0]), RmOptions::default()).unwrap();
        assert!(ad_derivative_mismatch(&f, &c) < 1e-6);
        let g = rm_invariants(&f, &c).unwrap();
        assert_eq!(g.kappa1.unwrap()[10], f.curvature[10][0]);
    }

    #[test]
    fn rotation_keeps_c1_norm() {
        let c = CatalogCurve::Helix { a: 1.0, b: 1.0 }.sample(1.0, 0.01);
        let f = rm_frame_integrate(&c, crate::frames::default_normal(&c.d1[0]), RmOptions::default()).unwrap();
        let v: Vec<[f64; 6]> = (0..c.len()).map(|i| [0.3, -0.1, f.curvature[i][0], 0.2, 0.5, -0.4]).collect();
        let r = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let a = Vec3::new(1.0, 2.0, -3.0);
        let c2 = c.transformed(&r, &a);
        let rows2: Vec<Mat3> = f.rows.iter().map(|m| m * r.transpose()).collect();
        let s1 = constants_from(&v, &f.rows, &c.points).unwrap();
        let s2 = constants_from(&v, &rows2, &c2.points).unwrap();
        for i in 0..c.len() {
            let n1 = Vec3::new(s1.per_node[i][0], s1.per_node[i][1], s1.per_node[i][2]).norm();
            let n2 = Vec3::new(s2.per_node[i][0], s2.per_node[i][1], s2.per_node[i][2]).norm();
            assert!((n1 - n2).abs() < 1e-12);
        }
    }
}
