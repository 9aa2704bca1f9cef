//! Compatibility of curve evolutions with the syzygy operator: for a family
//! P(s, t) with RM normal V(s, t), d/dt of (ι(X′), κ₁, κ₂, ι(V₃′)) equals ℋ
//! applied to the invariantized evolution (ι(X_t), ι(Y_t), ι(Z_t), ι(V₃,t)).

use nalgebra::Rotation3;
use serde::Serialize;

use crate::frames::curve::diff_scalar_acc;
use crate::frames::Vec3;

use super::linop::syzygy_operator;
use super::VariationalError;

/// A two-parameter family: arc length `s` and evolution time `t`.
pub trait CurveFamily {
    fn point(&self, s: f64, t: f64) -> Vec3;
    /// Rotation minimizing normal along each curve of the family.
    fn normal(&self, s: f64, t: f64) -> Vec3;
}

/// Unit-speed helix of radius `a` with pitch parameter b(t) = b0 + b1·t + 0.3t².
#[derive(Clone, Copy, Debug)]
pub struct HelixPitchFamily {
    pub a: f64,
    pub b0: f64,
    pub b1: f64,
}

impl Default for HelixPitchFamily {
    fn default() -> Self {
        HelixPitchFamily { a: 1.0, b0: 0.5, b1: 0.4 }
    }
}

impl HelixPitchFamily {
    fn parts(&self, t: f64) -> (f64, f64, f64) {
        let b = self.b0 + self.b1 * t + 0.3 * t * t;
        let c = (self.a * self.a + b * b).sqrt();
        (b, c, b / (c * c))
    }
}

impl CurveFamily for HelixPitchFamily {
    fn point(&self, s: f64, t: f64) -> Vec3 {
        let (b, c, _) = self.parts(t);
        let u = s / c;
        Vec3::new(self.a * u.cos(), self.a * u.sin(), b * u)
    }

    /// V = cos(τs)N − sin(τs)B, the Frenet normal rotated back by the
    /// accumulated torsion.
    fn normal(&self, s: f64, t: f64) -> Vec3 {
        let (b, c, tau) = self.parts(t);
        let u = s / c;
        let tan = Vec3::new(-self.a * u.sin(), self.a * u.cos(), b) / c;
        let n = Vec3::new(-u.cos(), -u.sin(), 0.0);
        let bn = tan.cross(&n);
        (tau * s).cos() * n - (tau * s).sin() * bn
    }
}

/// A fixed curve moved by a time-dependent rigid motion.
#[derive(Clone, Copy, Debug)]
pub struct RigidMotionFamily<F> {
    pub base: F,
}

impl<F: CurveFamily> RigidMotionFamily<F> {
    fn motion(t: f64) -> (Rotation3<f64>, Vec3) {
        (
            Rotation3::from_euler_angles(0.7 * t, -0.4 * t, 1.1 * t),
            Vec3::new(t, 2.0 * t * t, -0.5 * t),
        )
    }
}

impl<F: CurveFamily> CurveFamily for RigidMotionFamily<F> {
    fn point(&self, s: f64, t: f64) -> Vec3 {
        let (r, a) = Self::motion(t);
        r * self.base.point(s, 0.0) + a
    }

    fn normal(&self, s: f64, t: f64) -> Vec3 {
        let (r, _) = Self::motion(t);
        r * self.base.normal(s, 0.0)
    }
}

/// A family that does not move.
#[derive(Clone, Copy, Debug)]
pub struct StaticFamily<F> {
    pub base: F,
}

impl<F: CurveFamily> CurveFamily for StaticFamily<F> {
    fn point(&self, s: f64, _t: f64) -> Vec3 {
        self.base.point(s, 0.0)
    }

    fn normal(&self, s: f64, _t: f64) -> Vec3 {
        self.base.normal(s, 0.0)
    }
}

/// Invariantized evolution components on the s-grid at one time.
#[derive(Clone, Debug)]
pub struct EvolutionField {
    pub s: Vec<f64>,
    pub x_t: Vec<f64>,
    pub y_t: Vec<f64>,
    pub z_t: Vec<f64>,
    pub v3_t: Vec<f64>,
}

struct Slice {
    p1: Vec<Vec3>,
    v: Vec<Vec3>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    v3p: Vec<f64>,
}

fn diff_vec(f: &[Vec3], h: f64, m: usize, acc: usize) -> Vec<Vec3> {
    let cols: Vec<Vec<f64>> = (0..3)
        .map(|k| diff_scalar_acc(&f.iter().map(|p| p[k]).collect::<Vec<_>>(), h, m, acc))
        .collect();
    (0..f.len()).map(|i| Vec3::new(cols[0][i], cols[1][i], cols[2][i])).collect()
}

fn slice(fam: &impl CurveFamily, s: &[f64], t: f64, h: f64, acc: usize) -> Slice {
    let p: Vec<Vec3> = s.iter().map(|&x| fam.point(x, t)).collect();
    let v: Vec<Vec3> = s.iter().map(|&x| fam.normal(x, t)).collect();
    let p1 = diff_vec(&p, h, 1, acc);
    let p2 = diff_vec(&p, h, 2, acc);
    let v1 = diff_vec(&v, h, 1, acc);
    let n = s.len();
    let k1 = (0..n).map(|i| p2[i].dot(&v[i])).collect();
    let k2 = (0..n).map(|i| p2[i].dot(&p1[i].cross(&v[i]))).collect();
    let v3p = (0..n).map(|i| p1[i].cross(&v[i]).dot(&v1[i])).collect();
    Slice { p1, v, k1, k2, v3p }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityReport {
    pub h: f64,
    /// Max interior |d/dt(ι(X′), κ₁, κ₂, ι(V₃′)) − ℋ(evolution)| per row.
    pub row_max: [f64; 4],
    pub max: f64,
}

/// Compare both sides at time `t0` on s ∈ [0, length] with ds = dt = h and
/// second-order stencils. Boundary nodes are excluded from the norm.
pub fn check_syzygy_compatibility(fam: &impl CurveFamily, length: f64, t0: f64, h: f64) -> Result<CompatibilityReport, VariationalError> {
    let acc = 2;
    let n = (length / h).round() as usize + 1;
    let s: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let mid = slice(fam, &s, t0, h, acc);
    let fwd = slice(fam, &s, t0 + h, h, acc);
    let bwd = slice(fam, &s, t0 - h, h, acc);
    let dt = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * h)).collect() };
    // ι(X′) = |P′| on the exact family
    let x1f: Vec<f64> = fwd.p1.iter().map(|a| a.norm()).collect();
    let x1b: Vec<f64> = bwd.p1.iter().map(|a| a.norm()).collect();
    let lhs = [dt(&x1f, &x1b), dt(&fwd.k1, &bwd.k1), dt(&fwd.k2, &bwd.k2), dt(&fwd.v3p, &bwd.v3p)];

    let evo = evolution_field(fam, &s, t0, h, &mid);
    let op = syzygy_operator(&mid.k1, &mid.k2, h, acc)?;
    let rhs = op.apply(&[evo.x_t, evo.y_t, evo.z_t, evo.v3_t])?;
    let margin = 3;
    if n < 2 * margin + 1 {
        return Err(VariationalError::GridTooShort { nodes: n, needed: 2 * margin + 1 });
    }
    let mut row_max = [0.0f64; 4];
    for r in 0..4 {
        for i in margin..n - margin {
            let d = lhs[r][i] - rhs[r][i];
            if !d.is_finite() {
                return Err(VariationalError::NonFinite(format!("row {} at s = {}", r + 1, s[i])));
            }
            row_max[r] = row_max[r].max(d.abs());
        }
    }
    Ok(CompatibilityReport {
        h,
        max: row_max.iter().copied().fold(0.0, f64::max),
        row_max,
    })
}

fn evolution_field(fam: &impl CurveFamily, s: &[f64], t0: f64, h: f64, mid: &Slice) -> EvolutionField {
    let n = s.len();
    let mut e = EvolutionField {
        s: s.to_vec(),
        x_t: Vec::with_capacity(n),
        y_t: Vec::with_capacity(n),
        z_t: Vec::with_capacity(n),
        v3_t: Vec::with_capacity(n),
    };
    for i in 0..n {
        let pt = (fam.point(s[i], t0 + h) - fam.point(s[i], t0 - h)) / (2.0 * h);
        let vt = (fam.normal(s[i], t0 + h) - fam.normal(s[i], t0 - h)) / (2.0 * h);
        let (t, v) = (mid.p1[i], mid.v[i]);
        let b = t.cross(&v);
        e.x_t.push(t.dot(&pt));
        e.y_t.push(v.dot(&pt));
        e.z_t.push(b.dot(&pt));
        e.v3_t.push(b.dot(&vt));
    }
    e
}

/// Residuals at h and h/2 and the observed order log₂(r(h)/r(h/2)).
pub fn compatibility_order(fam: &impl CurveFamily, length: f64, t0: f64, h: f64) -> Result<(CompatibilityReport, CompatibilityReport, f64), VariationalError> {
    let a = check_syzygy_compatibility(fam, length, t0, h)?;
    let b = check_syzygy_compatibility(fam, length, t0, h / 2.0)?;
    let order = (a.max / b.max).log2();
    Ok((a, b, order))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helix_normal_is_rotation_minimizing() {
        let f = HelixPitchFamily::default();
        let h = 1e-5;
        for &s in &[0.1, 0.8, 1.7] {
            let v = f.normal(s, 0.2);
            let dv = (f.normal(s + h, 0.2) - f.normal(s - h, 0.2)) / (2.0 * h);
            let t = (f.point(s + h, 0.2) - f.point(s - h, 0.2)) / (2.0 * h);
            assert!((t.norm() - 1.0).abs() < 1e-9);
            assert!(v.dot(&t).abs() < 1e-9);
            // V′ has no component along P′ × V
            assert!(dv.dot(&t.cross(&v)).abs() < 1e-8);
        }
    }

    #[test]
    fn rigid_motion_and_static_families_are_compatible() {
        let base = HelixPitchFamily::default();
        for r in [
            check_syzygy_compatibility(&RigidMotionFamily { base }, 2.0, 0.3, 0.01).unwrap(),
            check_syzygy_compatibility(&StaticFamily { base }, 2.0, 0.3, 0.01).unwrap(),
        ] {
            assert!(r.max < 1e-3, "{r:?}");
        }
    }

    #[test]
    fn pitch_family_converges_at_second_order() {
        let (a, b, order) = compatibility_order(&HelixPitchFamily::default(), 2.0, 0.3, 0.02).unwrap();
        assert!(order >= 1.9, "{a:?} {b:?} {order}");
    }
}
