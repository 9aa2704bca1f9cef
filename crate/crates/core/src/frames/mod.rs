//! Frenet–Serret and rotation minimizing frames along sampled curves.

pub mod curve;
pub mod io;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

pub use curve::{reparametrize_arclength, CatalogCurve, CurveSamples, FourierCurve, Vec3};

use crate::par::Exec;

pub type Mat3 = Matrix3<f64>;

pub const EPS_INFLECTION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FramesError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("sample {index} repeats its predecessor")]
    DegenerateSamples { index: usize },
    #[error("step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("curvature vanishes at node {index} (|P''| = {norm:e}); the Frenet-Serret frame is undefined there")]
    InflectionPoint { index: usize, norm: f64 },
    #[error("initial normal is invalid: | |V0| - 1 | = {norm_error:e}, |V0 . P'(s0)| = {dot:e}")]
    InitialCondition { norm_error: f64, dot: f64 },
    #[error("frame kind mismatch: expected {0:?}")]
    WrongKind(FrameKind),
    #[error("grids differ ({0} vs {1} nodes)")]
    GridMismatch(usize, usize),
    #[error("{0}")]
    Input(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    FrenetSerret,
    RotationMinimizing,
}

/// Right frames σ per node: rows (P', normal, binormal).
///
/// `curvature` holds (κ, τ) for the Frenet–Serret kind and (κ₁, κ₂) for
/// the rotation minimizing kind.
#[derive(Clone, Debug)]
pub struct FrameField {
    pub kind: FrameKind,
    pub s: Vec<f64>,
    pub rows: Vec<Mat3>,
    pub curvature: Vec<[f64; 2]>,
}

pub fn row(m: &Mat3, i: usize) -> Vec3 {
    Vec3::new(m[(i, 0)], m[(i, 1)], m[(i, 2)])
}

pub fn from_rows(a: &Vec3, b: &Vec3, c: &Vec3) -> Mat3 {
    Mat3::new(a.x, a.y, a.z, b.x, b.y, b.z, c.x, c.y, c.z)
}

impl FrameField {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ds(&self) -> f64 {
        if self.s.len() < 2 {
            0.0
        } else {
            (self.s[self.s.len() - 1] - self.s[0]) / (self.s.len() - 1) as f64
        }
    }

    /// max ‖σσᵀ − I‖∞ over nodes.
    pub fn orthonormality_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|m| (m * m.transpose() - Mat3::identity()).abs().max())
            .fold(0.0, f64::max)
    }

    /// max |det σ − 1| over nodes.
    pub fn determinant_error(&self) -> f64 {
        self.rows.iter().map(|m| (m.determinant() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// σ'σ⁻¹ per node, σ' by 6th-order finite differences.
    pub fn curvature_matrices(&self) -> Vec<Mat3> {
        self.curvature_matrices_acc(6)
    }

    pub fn curvature_matrices_acc(&self, accuracy: usize) -> Vec<Mat3> {
        let h = self.ds();
        let stencils = curve::stencils(self.len(), h, 1, accuracy);
        stencils
            .into_iter()
            .enumerate()
            .map(|(i, (start, w))| {
                let d = w
                    .iter()
                    .enumerate()
                    .fold(Mat3::zeros(), |acc, (k, c)| acc + *c * self.rows[start + k]);
                d * self.rows[i].transpose()
            })
            .collect()
    }

    /// max |(σ'σ⁻¹)₂₃|, zero for an exact rotation minimizing frame.
    pub fn rm_constraint_residual(&self) -> f64 {
        self.curvature_matrices().iter().map(|q| q[(1, 2)].abs()).fold(0.0, f64::max)
    }

    /// max |σ'σ⁻¹ + (σ'σ⁻¹)ᵀ|.
    pub fn skew_error(&self) -> f64 {
        self.curvature_matrices()
            .iter()
            .map(|q| (q + q.transpose()).abs().max())
            .fold(0.0, f64::max)
    }
}

/// Per-node invariants of one or both frames.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GaugeData {
    pub s: Vec<f64>,
    pub kappa: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub kappa1: Option<Vec<f64>>,
    pub kappa2: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
}

pub fn frenet_frame(c: &CurveSamples, eps_inflection: f64) -> Result<(FrameField, GaugeData), FramesError> {
    let n = c.len();
    let mut rows = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    for i in 0..n {
        let k = c.d2[i].norm();
        if !(k > eps_inflection) {
            return Err(FramesError::InflectionPoint { index: i, norm: k });
        }
        let t = c.d1[i];
        let nrm = c.d2[i] / k;
        let b = t.cross(&nrm);
        rows.push(from_rows(&t, &nrm, &b));
        kappa.push(k);
        // (σ'σ⁻¹)₂₃ = N'·B = det(P', P'', P''')/κ²
        tau.push(t.cross(&c.d2[i]).dot(&c.d3[i]) / (k * k));
    }
    let curvature = kappa.iter().zip(&tau).map(|(k, t)| [*k, *t]).collect();
    Ok((
        FrameField {
            kind: FrameKind::FrenetSerret,
            s: c.s.clone(),
            rows,
            curvature,
        },
        GaugeData {
            s: c.s.clone(),
            kappa: Some(kappa),
            tau: Some(tau),
            ..GaugeData::default()
        },
    ))
}

#[derive(Clone, Copy, Debug)]
pub struct RmOptions {
    /// Gram–Schmidt V against P' and renormalize after each step.
    pub reproject: bool,
    pub ic_tol: f64,
}

impl Default for RmOptions {
    fn default() -> Self {
        RmOptions {
            reproject: true,
            ic_tol: 1e-10,
        }
    }
}

fn hermite_mid(a: &Vec3, da: &Vec3, b: &Vec3, db: &Vec3, h: f64) -> Vec3 {
    0.5 * (a + b) + h / 8.0 * (da - db)
}

/// Integrate V' = −(P''·V)P' with RK4 on the sample grid. Midpoint values of
/// P' and P'' come from cubic Hermite interpolation.
pub fn rm_frame_integrate(c: &CurveSamples, v0: Vec3, opts: RmOptions) -> Result<FrameField, FramesError> {
    if c.is_empty() {
        return Err(FramesError::TooFewSamples { got: 0, need: 1 });
    }
    let norm_error = (v0.norm() - 1.0).abs();
    let dot = v0.dot(&c.d1[0]).abs();
    if norm_error > opts.ic_tol || dot > opts.ic_tol {
        return Err(FramesError::InitialCondition { norm_error, dot });
    }
    let n = c.len();
    let mut vs = Vec::with_capacity(n);
    let mut v = v0;
    vs.push(v);
    let f = |t: &Vec3, k: &Vec3, v: &Vec3| -k.dot(v) * t;
    for i in 0..n - 1 {
        let h = c.s[i + 1] - c.s[i];
        let (t0, t1) = (c.d1[i], c.d1[i + 1]);
        let (k0, k1) = (c.d2[i], c.d2[i + 1]);
        let tm = hermite_mid(&t0, &k0, &t1, &k1, h);
        let km = hermite_mid(&k0, &c.d3[i], &k1, &c.d3[i + 1], h);
        let a = f(&t0, &k0, &v);
        let b = f(&tm, &km, &(v + 0.5 * h * a));
        let cc = f(&tm, &km, &(v + 0.5 * h * b));
        let d = f(&t1, &k1, &(v + h * cc));
        v += h / 6.0 * (a + 2.0 * b + 2.0 * cc + d);
        if opts.reproject {
            v -= v.dot(&t1) * t1;
            v /= v.norm();
        }
        vs.push(v);
    }
    let rows: Vec<Mat3> = (0..n)
        .map(|i| {
            let t = c.d1[i];
            from_rows(&t, &vs[i], &t.cross(&vs[i]))
        })
        .collect();
    let curvature = (0..n)
        .map(|i| [c.d2[i].dot(&row(&rows[i], 1)), c.d2[i].dot(&row(&rows[i], 2))])
        .collect();
    Ok(FrameField {
        kind: FrameKind::RotationMinimizing,
        s: c.s.clone(),
        rows,
        curvature,
    })
}

/// A unit vector orthogonal to `t`, for callers without a preferred V0.
pub fn default_normal(t: &Vec3) -> Vec3 {
    let seed = if t.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let v = seed - seed.dot(t) * t;
    v / v.norm()
}

/// Rotate V0 = default_normal(P'(s₀)) by `psi0` about P'(s₀).
pub fn normal_from_psi(t: &Vec3, psi0: f64) -> Vec3 {
    let v = default_normal(t);
    psi0.cos() * v + psi0.sin() * t.cross(&v)
}

/// Batch RM frames, one per curve.
pub fn rm_frames_batch(curves: &[CurveSamples], v0: &[Vec3], opts: RmOptions, exec: Exec) -> Vec<Result<FrameField, FramesError>> {
    let jobs: Vec<(&CurveSamples, Vec3)> = curves.iter().zip(v0.iter().copied()).collect();
    exec.map(&jobs, |(c, v)| rm_frame_integrate(c, *v, opts))
}

/// κ₁ = P''·V, κ₂ = P''·(P'×V), θ = atan2(κ₂, κ₁) unwrapped.
pub fn rm_invariants(f: &FrameField, c: &CurveSamples) -> Result<GaugeData, FramesError> {
    if f.kind != FrameKind::RotationMinimizing {
        return Err(FramesError::WrongKind(FrameKind::RotationMinimizing));
    }
    if f.len() != c.len() {
        return Err(FramesError::GridMismatch(f.len(), c.len()));
    }
    let k1: Vec<f64> = (0..f.len()).map(|i| c.d2[i].dot(&row(&f.rows[i], 1))).collect();
    let k2: Vec<f64> = (0..f.len()).map(|i| c.d2[i].dot(&row(&f.rows[i], 2))).collect();
    let theta = unwrap_angles(k1.iter().zip(&k2).map(|(a, b)| b.atan2(*a)));
    Ok(GaugeData {
        s: f.s.clone(),
        kappa1: Some(k1),
        kappa2: Some(k2),
        theta: Some(theta),
        ..GaugeData::default()
    })
}

/// Continuous branch by nearest-angle continuation from the previous value.
pub fn unwrap_angles(raw: impl IntoIterator<Item = f64>) -> Vec<f64> {
    use std::f64::consts::TAU;
    let mut out: Vec<f64> = Vec::new();
    for a in raw {
        match out.last() {
            None => out.push(a),
            Some(&prev) => {
                let k = ((prev - a) / TAU).round();
                out.push(a + k * TAU);
            }
        }
    }
    out
}

/// τ = (κ₁κ₂,ₛ − κ₁,ₛκ₂)/(κ₁² + κ₂²).
pub fn tau_from_rm(k1: f64, k2: f64, k1s: f64, k2s: f64) -> f64 {
    (k1 * k2s - k1s * k2) / (k1 * k1 + k2 * k2)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeReport {
    /// max |κ − √(κ₁² + κ₂²)|
    pub kappa_residual: f64,
    /// max |τ − (κ₁κ₂,ₛ − κ₁,ₛκ₂)/κ²| over compared nodes
    pub tau_residual: f64,
    /// max |θₛ − τ| over compared nodes
    pub theta_s_residual: f64,
    /// max |κ₁ − κ cos θ| + |κ₂ − κ sin θ|
    pub polar_residual: f64,
    /// Nodes where κ fell below the threshold and τ was not compared.
    pub skipped: Vec<usize>,
}

pub fn gauge_relations(fs: &GaugeData, rm: &GaugeData, kappa_min: f64) -> Result<GaugeReport, FramesError> {
    let missing = |what: &str| FramesError::Input(format!("gauge data lacks {what}"));
    let kappa = fs.kappa.as_ref().ok_or_else(|| missing("kappa"))?;
    let tau = fs.tau.as_ref().ok_or_else(|| missing("tau"))?;
    let k1 = rm.kappa1.as_ref().ok_or_else(|| missing("kappa1"))?;
    let k2 = rm.kappa2.as_ref().ok_or_else(|| missing("kappa2"))?;
    if kappa.len() != k1.len() {
        return Err(FramesError::GridMismatch(kappa.len(), k1.len()));
    }
    let n = k1.len();
    if n < 7 {
        return Err(FramesError::TooFewSamples { got: n, need: 7 });
    }
    let h = (rm.s[n - 1] - rm.s[0]) / (n - 1) as f64;
    let theta = match &rm.theta {
        Some(t) => t.clone(),
        None => unwrap_angles(k1.iter().zip(k2).map(|(a, b)| b.atan2(*a))),
    };
    let k1s = curve::diff_scalar(k1, h, 1);
    let k2s = curve::diff_scalar(k2, h, 1);
    let theta_s = curve::diff_scalar(&theta, h, 1);
    let mut report = GaugeReport {
        kappa_residual: 0.0,
        tau_residual: 0.0,
        theta_s_residual: 0.0,
        polar_residual: 0.0,
        skipped: Vec::new(),
    };
    for i in 0..n {
        let kr = (k1[i] * k1[i] + k2[i] * k2[i]).sqrt();
        report.kappa_residual = report.kappa_residual.max((kappa[i] - kr).abs());
        let polar = (k1[i] - kappa[i] * theta[i].cos()).abs() + (k2[i] - kappa[i] * theta[i].sin()).abs();
        report.polar_residual = report.polar_residual.max(polar);
        if kappa[i] < kappa_min || kr < kappa_min {
            report.skipped.push(i);
            continue;
        }
        let t33 = tau_from_rm(k1[i], k2[i], k1s[i], k2s[i]);
        report.tau_residual = report.tau_residual.max((tau[i] - t33).abs());
        report.theta_s_residual = report.theta_s_residual.max((theta_s[i] - tau[i]).abs());
    }
    Ok(report)
}

/// The member W = cos ψ V + sin ψ P'×V of the rotation minimizing family.
pub fn rm_family(f: &FrameField, psi0: f64) -> Result<FrameField, FramesError> {
    if f.kind != FrameKind::RotationMinimizing {
        return Err(FramesError::WrongKind(FrameKind::RotationMinimizing));
    }
    let (sn, cs) = psi0.sin_cos();
    let rows = f
        .rows
        .iter()
        .map(|m| {
            let (t, v, b) = (row(m, 0), row(m, 1), row(m, 2));
            let w = cs * v + sn * b;
            from_rows(&t, &w, &(cs * b - sn * v))
        })
        .collect();
    let curvature = f
        .curvature
        .iter()
        .map(|[k1, k2]| [cs * k1 + sn * k2, cs * k2 - sn * k1])
        .collect();
    Ok(FrameField {
        kind: f.kind,
        s: f.s.clone(),
        rows,
        curvature,
    })
}

/// max over interior nodes of |d/ds(σP'') − (σ'σ⁻¹)(σP'') − σP'''|.
pub fn recurrence_residual(f: &FrameField, c: &CurveSamples) -> f64 {
    let h = f.ds();
    let q = f.curvature_matrices();
    let inv: Vec<Vec3> = (0..f.len()).map(|i| f.rows[i] * c.d2[i]).collect();
    let dinv = curve::diff_vec3(&inv, h, 1);
    (3..f.len().saturating_sub(3))
        .map(|i| (dinv[i] - q[i] * inv[i] - f.rows[i] * c.d3[i]).abs().max())
        .fold(0.0, f64::max)
}

/// Largest |V·P'| and | |V| − 1 | along an integrated RM frame, computed from
/// the stored V rather than the assembled rows.
pub fn normal_drift(f: &FrameField, c: &CurveSamples) -> (f64, f64) {
    let mut dot = 0.0f64;
    let mut norm = 0.0f64;
    for i in 0..f.len() {
        let v = row(&f.rows[i], 1);
        dot = dot.max(v.dot(&c.d1[i]).abs());
        norm = norm.max((v.norm() - 1.0).abs());
    }
    (dot, norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_frames() {
        let c = CatalogCurve::Circle { radius: 1.0 }.sample(6.0, 1e-3);
        let (fs, g) = frenet_frame(&c, EPS_INFLECTION).unwrap();
        assert!(g.kappa.unwrap().iter().all(|k| (k - 1.0).abs() < 1e-12));
        assert!(g.tau.unwrap().iter().all(|t| t.abs() < 1e-12));
        assert!(fs.orthonormality_error() < 1e-12);

        let rm = rm_frame_integrate(&c, Vec3::z(), RmOptions::default()).unwrap();
        assert!(rm.rows.iter().all(|m| (row(m, 1) - Vec3::z()).norm() < 1e-12));
        let inv = rm_invariants(&rm, &c).unwrap();
        assert!(inv.kappa1.unwrap().iter().all(|k| k.abs() < 1e-12));
        assert!(inv.kappa2.unwrap().iter().all(|k| (k + 1.0).abs() < 1e-12));
    }

    #[test]
    fn line_frames() {
        let c = CatalogCurve::Line { direction: [1.0, 0.0, 0.0] }.sample(2.0, 0.01);
        assert!(matches!(
            frenet_frame(&c, EPS_INFLECTION),
            Err(FramesError::InflectionPoint { index: 0, .. })
        ));
        let rm = rm_frame_integrate(&c, Vec3::y(), RmOptions::default()).unwrap();
        assert!(rm.rows.iter().all(|m| row(m, 1) == Vec3::y()));
        let inv = rm_invariants(&rm, &c).unwrap();
        assert!(inv.kappa1.unwrap().iter().chain(inv.kappa2.as_ref().unwrap()).all(|k| *k == 0.0));
    }

    #[test]
    fn helix_frames() {
        let c = CatalogCurve::Helix { a: 1.0, b: 1.0 }.sample(10.0, 1e-3);
        let (_, fs) = frenet_frame(&c, EPS_INFLECTION).unwrap();
        assert!(fs.kappa.as_ref().unwrap().iter().all(|k| (k - 0.5).abs() < 1e-12));
        assert!(fs.tau.as_ref().unwrap().iter().all(|t| (t - 0.5).abs() < 1e-12));
        let v0 = default_normal(&c.d1[0]);
        let rm = rm_frame_integrate(&c, v0, RmOptions::default()).unwrap();
        assert!(rm.rm_constraint_residual() < 1e-6);
        assert!(rm.skew_error() < 1e-8);
        let inv = rm_invariants(&rm, &c).unwrap();
        let k1 = inv.kappa1.as_ref().unwrap();
        let k2 = inv.kappa2.as_ref().unwrap();
        assert!(k1.iter().zip(k2).all(|(a, b)| (a * a + b * b - 0.25).abs() < 1e-10));
        let report = gauge_relations(&fs, &inv, 1e-6).unwrap();
        assert!(report.kappa_residual < 1e-5);
        assert!(report.tau_residual < 1e-5, "{}", report.tau_residual);
        assert!(report.theta_s_residual < 1e-5);
        assert!(report.skipped.is_empty());
        assert!(recurrence_residual(&rm, &c) < 1e-6);
    }

    #[test]
    fn family_members_stay_rotation_minimizing() {
        let c = CatalogCurve::Helix { a: 2.0, b: 0.5 }.sample(5.0, 1e-3);
        let rm = rm_frame_integrate(&c, default_normal(&c.d1[0]), RmOptions::default()).unwrap();
        let same = rm_family(&rm, 0.0).unwrap();
        assert!(same.rows.iter().zip(&rm.rows).all(|(a, b)| (a - b).abs().max() < 1e-15));
        let quarter = rm_family(&rm, std::f64::consts::FRAC_PI_2).unwrap();
        for (a, b) in quarter.rows.iter().zip(&rm.rows) {
            assert!((row(a, 1) - row(b, 2)).norm() < 1e-15);
        }
        for psi in [0.3, 1.7, -2.9] {
            let w = rm_family(&rm, psi).unwrap();
            assert!(w.rm_constraint_residual() < 1e-6);
            assert!(w.orthonormality_error() < 1e-12);
        }
    }

    #[test]
    fn tau_formula_example() {
        for s in [0.0, 0.4, 2.0] {
            let (sn, cs) = f64::sin_cos(s);
            assert!((tau_from_rm(cs, sn, -sn, cs) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn planar_curve_has_constant_theta() {
        let c = CatalogCurve::Circle { radius: 3.0 }.sample(5.0, 1e-2);
        let rm = rm_frame_integrate(&c, Vec3::z(), RmOptions::default()).unwrap();
        let theta = rm_invariants(&rm, &c).unwrap().theta.unwrap();
        assert!(theta.iter().all(|t| (t - theta[0]).abs() < 1e-12));
    }

    #[test]
    fn bad_initial_normal() {
        let c = CatalogCurve::Circle { radius: 1.0 }.sample(1.0, 0.1);
        assert!(matches!(
            rm_frame_integrate(&c, Vec3::y(), RmOptions::default()),
            Err(FramesError::InitialCondition { .. })
        ));
        assert!(matches!(
            rm_frame_integrate(&c, Vec3::z() * 1.1, RmOptions::default()),
            Err(FramesError::InitialCondition { .. })
        ));
    }

    #[test]
    fn unwrap_is_continuous() {
        let raw = [3.0, -3.1, 3.0, -3.0];
        let u = unwrap_angles(raw);
        for w in u.windows(2) {
            assert!((w[1] - w[0]).abs() < 1.0);
        }
    }
}
