//! Direct integration of σ′ = Q(κ₁, κ₂)σ, the reference against which the
//! Noether-based reconstruction is checked.

use crate::frames::{FrameField, FrameKind, Mat3, Vec3, CurveSamples};
use crate::jet::JetVar;
use crate::odesolve::cumulative_hermite;
use crate::variational::el::{curve_from_frame, rm_curvature_matrix};
use crate::variational::InvariantTrajectory;

use super::ReconstructError;

#[derive(Clone, Debug)]
pub struct DirectReconstruction {
    pub frame: FrameField,
    pub curve: CurveSamples,
}

/// Midpoint values on each interval: cubic Hermite when the derivative is
/// known, otherwise the four-point Lagrange cubic (linear on two nodes).
fn midpoints(f: &[f64], df: Option<&[f64]>, h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n.saturating_sub(1))
        .map(|i| match df {
            Some(d) => 0.5 * (f[i] + f[i + 1]) + h / 8.0 * (d[i] - d[i + 1]),
            None if n < 4 => 0.5 * (f[i] + f[i + 1]),
            None => {
                let j = i.clamp(1, n - 3);
                let (a, b, c, e) = (f[j - 1], f[j], f[j + 1], f[j + 2]);
                // nodes j-1..j+2 at offsets -1..2, evaluated at i + 1/2 - j
                let x = i as f64 + 0.5 - j as f64;
                let l0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
                let l1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
                let l2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
                let l3 = (x + 1.0) * x * (x - 1.0) / 6.0;
                l0 * a + l1 * b + l2 * c + l3 * e
            }
        })
        .collect()
}

/// RK4 on the trajectory grid for σ, then P by quadrature of its first row.
pub fn reconstruct_direct(traj: &InvariantTrajectory, sigma0: &Mat3, p0: &Vec3) -> Result<DirectReconstruction, ReconstructError> {
    let n = traj.len();
    if n == 0 {
        return Err(ReconstructError::Empty);
    }
    if (sigma0 * sigma0.transpose() - Mat3::identity()).abs().max() > 1e-10 || sigma0.determinant() <= 0.0 {
        return Err(ReconstructError::InvalidParameter("sigma0 is not a rotation".into()));
    }
    let h = traj.ds();
    let (k1, k2) = (traj.k1(), traj.k2());
    let k1s = traj.column(JetVar::k1(1));
    let k2s = traj.column(JetVar::k2(1));
    let m1 = midpoints(&k1, k1s.as_deref(), h);
    let m2 = midpoints(&k2, k2s.as_deref(), h);
    let mut rows = Vec::with_capacity(n);
    let mut sig = *sigma0;
    rows.push(sig);
    for i in 0..n - 1 {
        let q0 = rm_curvature_matrix(k1[i], k2[i]);
        let qm = rm_curvature_matrix(m1[i], m2[i]);
        let q1 = rm_curvature_matrix(k1[i + 1], k2[i + 1]);
        let a = q0 * sig;
        let b = qm * (sig + 0.5 * h * a);
        let c = qm * (sig + 0.5 * h * b);
        let d = q1 * (sig + h * c);
        sig += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        if sig.iter().any(|x| !x.is_finite()) {
            return Err(ReconstructError::NonFinite(traj.s[i + 1]));
        }
        rows.push(sig);
    }
    let (t, dt) = super::position::tangent_components(&rows, &k1, &k2);
    let [x, y, z] = std::array::from_fn(|k| cumulative_hermite(&t[k], &dt[k], h, p0[k]));
    let points = (0..n).map(|i| Vec3::new(x[i], y[i], z[i])).collect();
    let curve = curve_from_frame(&traj.s, &rows, points, &k1, &k2, traj.column_or_fd(JetVar::k1(1)), traj.column_or_fd(JetVar::k2(1)))
        .ok_or(ReconstructError::GridMismatch { expected: n, found: k1.len() })?;
    Ok(DirectReconstruction {
        frame: FrameField {
            kind: FrameKind::RotationMinimizing,
            s: traj.s.clone(),
            rows,
            curvature: k1.iter().zip(&k2).map(|(a, b)| [*a, *b]).collect(),
        },
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::align::align_points;

    fn traj(s: Vec<f64>, k1: Vec<f64>, k2: Vec<f64>) -> InvariantTrajectory {
        let n = s.len();
        InvariantTrajectory {
            layout: vec![JetVar::k1(0), JetVar::k2(0)],
            jets: k1.iter().zip(&k2).map(|(a, b)| vec![*a, *b]).collect(),
            lambda: vec![0.0; n],
            v: vec![[0.0; 6]; n],
            s,
            sigma: None,
            position: None,
            truncated: None,
        }
    }

    fn grid(n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * h).collect()
    }

    #[test]
    fn zero_curvature_is_a_line() {
        let s = grid(11, 0.1);
        let r = reconstruct_direct(&traj(s.clone(), vec![0.0; 11], vec![0.0; 11]), &Mat3::identity(), &Vec3::zeros()).unwrap();
        for (i, p) in r.curve.points.iter().enumerate() {
            assert!((p - Vec3::new(s[i], 0.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn unit_curvature_is_a_unit_circle() {
        let n = 629;
        let s = grid(n, 0.01);
        let r = reconstruct_direct(&traj(s.clone(), vec![1.0; n], vec![0.0; n]), &Mat3::identity(), &Vec3::zeros()).unwrap();
        // center at P + V
        let center = r.curve.points[0] + Vec3::y();
        for p in &r.curve.points {
            assert!(((p - center).norm() - 1.0).abs() < 1e-9, "{}", (p - center).norm() - 1.0);
            assert!(p.z.abs() < 1e-14);
        }
        assert!(r.frame.orthonormality_error() < 1e-10, "{}", r.frame.orthonormality_error());
    }

    #[test]
    fn rotating_curvature_vector_gives_a_helix() {
        // helix with κ = τ = ½: κ₁ = ½cos(s/2), κ₂ = ½sin(s/2)
        let n = 2001;
        let h = 0.005;
        let s = grid(n, h);
        let k1: Vec<f64> = s.iter().map(|x| 0.5 * (0.5 * x).cos()).collect();
        let k2: Vec<f64> = s.iter().map(|x| 0.5 * (0.5 * x).sin()).collect();
        let r = reconstruct_direct(&traj(s.clone(), k1, k2), &Mat3::identity(), &Vec3::zeros()).unwrap();
        // radius a = κ/(κ²+τ²) = 1, pitch b = τ/(κ²+τ²) = 1, speed √2
        let truth: Vec<Vec3> = s
            .iter()
            .map(|x| {
                let u = x / 2f64.sqrt();
                Vec3::new(u.cos(), u.sin(), u)
            })
            .collect();
        let al = align_points(&r.curve.points, &truth).unwrap();
        assert!(al.rms < 1e-9, "{}", al.rms);
    }
}
