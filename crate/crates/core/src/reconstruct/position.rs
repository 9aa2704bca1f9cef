//! Position from the second block of the conservation law.
//!
//! With r = Dc₂ − σᵀDw₂ and D = diag(1, −1, 1) the law reads P × c₁ = r,
//! which fixes X and Y once Z is known:
//! X = (Z c₁,₁ − r₂)/c₁,₃ and Y = (r₁ + Z c₁,₂)/c₁,₃.

use serde::{Deserialize, Serialize};

use crate::frames::{row, CurveSamples, FrameField, Vec3};
use crate::jet::JetVar;
use crate::frames::Mat3;
use crate::odesolve::cumulative_hermite;
use crate::variational::el::curve_from_frame;
use crate::variational::InvariantTrajectory;

use super::ReconstructError;

/// Below |c₁,₃| < EPS_ALG·|c₁| the algebraic formulas are not used.
pub const EPS_ALG: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PositionMethod {
    Algebraic,
    Quadrature,
}

#[derive(Clone, Debug)]
pub struct PositionReconstruction {
    pub curve: CurveSamples,
    pub methods: Vec<PositionMethod>,
    /// max |(X, Y)_algebraic − (X, Y)_quadrature| when both exist; the
    /// quadrature path starts from the algebraic values at s₀.
    pub dual_path_max: Option<f64>,
}

/// Components of P′ = row 1 of σ and of P″ = κ₁V + κ₂V₃.
pub(crate) fn tangent_components(rows: &[Mat3], k1: &[f64], k2: &[f64]) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
    let t = std::array::from_fn(|k| rows.iter().map(|m| m[(0, k)]).collect());
    let dt = std::array::from_fn(|k| (0..rows.len()).map(|i| k1[i] * rows[i][(1, k)] + k2[i] * rows[i][(2, k)]).collect());
    (t, dt)
}

fn dmul(v: &Vec3) -> Vec3 {
    Vec3::new(v.x, -v.y, v.z)
}

/// Recover P along `sigma`. Z integrates the (1, 3) entry of σ from `z0`
/// (Hermite rule, with P″ from the frame equations);
/// `p0`, when given, translates the result so that P(s₀) = p0.
pub fn reconstruct_position(
    sigma: &FrameField,
    traj: &InvariantTrajectory,
    c: &[f64; 6],
    z0: f64,
    p0: Option<Vec3>,
) -> Result<PositionReconstruction, ReconstructError> {
    let n = sigma.len();
    if n == 0 {
        return Err(ReconstructError::Empty);
    }
    if traj.len() != n {
        return Err(ReconstructError::GridMismatch { expected: n, found: traj.len() });
    }
    let h = sigma.ds();
    let k1: Vec<f64> = sigma.curvature.iter().map(|k| k[0]).collect();
    let k2: Vec<f64> = sigma.curvature.iter().map(|k| k[1]).collect();
    let (t, dt) = tangent_components(&sigma.rows, &k1, &k2);
    let z = cumulative_hermite(&t[2], &dt[2], h, z0);
    let c1 = Vec3::new(c[0], c[1], c[2]);
    let c2 = Vec3::new(c[3], c[4], c[5]);
    let algebraic = c1.norm() > 0.0 && c[2].abs() >= EPS_ALG * c1.norm();

    let (x_alg, y_alg): (Vec<f64>, Vec<f64>) = if algebraic {
        let dc2 = dmul(&c2);
        (0..n)
            .map(|i| {
                let w2 = Vec3::new(traj.v[i][3], traj.v[i][4], traj.v[i][5]);
                let r = dc2 - sigma.rows[i].transpose() * dmul(&w2);
                ((z[i] * c[0] - r.y) / c[2], (r.x + z[i] * c[1]) / c[2])
            })
            .unzip()
    } else {
        (Vec::new(), Vec::new())
    };
    let (x_start, y_start) = if algebraic { (x_alg[0], y_alg[0]) } else { (0.0, 0.0) };
    let x_quad = cumulative_hermite(&t[0], &dt[0], h, x_start);
    let y_quad = cumulative_hermite(&t[1], &dt[1], h, y_start);

    let (x, y, method, dual) = if algebraic {
        let d = (0..n)
            .map(|i| (x_alg[i] - x_quad[i]).abs().max((y_alg[i] - y_quad[i]).abs()))
            .fold(0.0, f64::max);
        (x_alg, y_alg, PositionMethod::Algebraic, Some(d))
    } else {
        (x_quad, y_quad, PositionMethod::Quadrature, None)
    };
    let mut points: Vec<Vec3> = (0..n).map(|i| Vec3::new(x[i], y[i], z[i])).collect();
    if let Some(p) = p0 {
        let shift = p - points[0];
        points.iter_mut().for_each(|q| *q += shift);
    }
    if let Some(i) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(ReconstructError::NonFinite(sigma.s[i]));
    }
    let curve = curve_from_frame(
        &sigma.s,
        &sigma.rows,
        points,
        &k1,
        &k2,
        traj.column_or_fd(JetVar::k1(1)),
        traj.column_or_fd(JetVar::k2(1)),
    )
    .ok_or(ReconstructError::GridMismatch { expected: n, found: sigma.curvature.len() })?;
    Ok(PositionReconstruction {
        curve,
        methods: vec![method; n],
        dual_path_max: dual,
    })
}

/// Tangent check: max |P′_fd − row 1 of σ| in the interior.
pub fn tangent_mismatch(curve: &CurveSamples, sigma: &FrameField) -> f64 {
    let n = curve.len();
    if n < 7 {
        return 0.0;
    }
    let d = crate::frames::curve::diff_vec3(&curve.points, curve.ds(), 1);
    (3..n - 3).map(|i| (d[i] - row(&sigma.rows[i], 0)).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::FrameKind;

    fn traj(s: Vec<f64>, v: Vec<[f64; 6]>) -> InvariantTrajectory {
        let n = s.len();
        InvariantTrajectory {
            layout: vec![JetVar::k1(0), JetVar::k2(0)],
            jets: vec![vec![0.0, 0.0]; n],
            lambda: vec![0.0; n],
            s,
            v,
            sigma: None,
            position: None,
            truncated: None,
        }
    }

    #[test]
    fn straight_line() {
        let n = 21;
        let s: Vec<f64> = (0..n).map(|i| 0.05 * i as f64).collect();
        let sig = crate::frames::from_rows(&Vec3::new(0.6, 0.0, 0.8), &Vec3::y(), &Vec3::new(0.6, 0.0, 0.8).cross(&Vec3::y()));
        let frame = FrameField {
            kind: FrameKind::RotationMinimizing,
            s: s.clone(),
            rows: vec![sig; n],
            curvature: vec![[0.0, 0.0]; n],
        };
        // no c₁,₃: quadrature path
        let t = traj(s.clone(), vec![[0.0; 6]; n]);
        let p0 = Vec3::new(1.0, 2.0, 3.0);
        let r = reconstruct_position(&frame, &t, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0, Some(p0)).unwrap();
        assert_eq!(r.methods[0], PositionMethod::Quadrature);
        assert!(r.dual_path_max.is_none());
        for i in 0..n {
            let want = p0 + s[i] * Vec3::new(0.6, 0.0, 0.8);
            assert!((r.curve.points[i] - want).norm() < 1e-14);
        }
        assert!(tangent_mismatch(&r.curve, &frame) < 1e-12);
    }

    /// A line through a known point: the algebraic path recovers it from
    /// the constants of the exact Noether vector v = Ad·c.
    #[test]
    fn algebraic_line() {
        let n = 21;
        let s: Vec<f64> = (0..n).map(|i| 0.05 * i as f64).collect();
        let tdir = Vec3::new(0.0, 0.6, 0.8);
        let vdir = Vec3::x();
        let sig = crate::frames::from_rows(&tdir, &vdir, &tdir.cross(&vdir));
        let base = Vec3::new(0.3, -0.2, 0.5);
        let c = [0.2, 0.1, 0.9, -0.4, 0.7, 0.25];
        let v: Vec<[f64; 6]> = s
            .iter()
            .map(|&x| {
                let p = base + x * tdir;
                let ad = crate::variational::noether::ad_inverse(&sig, &p);
                let w = ad.try_inverse().unwrap() * nalgebra::Vector6::from_row_slice(&c);
                [w[0], w[1], w[2], w[3], w[4], w[5]]
            })
            .collect();
        let frame = FrameField {
            kind: FrameKind::RotationMinimizing,
            s: s.clone(),
            rows: vec![sig; n],
            curvature: vec![[0.0, 0.0]; n],
        };
        let r = reconstruct_position(&frame, &traj(s.clone(), v), &c, base.z, None).unwrap();
        assert_eq!(r.methods[0], PositionMethod::Algebraic);
        assert!(r.dual_path_max.unwrap() < 1e-13);
        for i in 0..n {
            assert!((r.curve.points[i] - (base + s[i] * tdir)).norm() < 1e-13, "{i}");
        }
    }
}
