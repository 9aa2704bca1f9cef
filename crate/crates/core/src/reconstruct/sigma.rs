//! The RM frame from the Noether constants.
//!
//! With c₁ = σᵀw₁ and |w₁| = |c₁| = ρ, every σ with σc₁ = w₁ factors as
//! R(π, w₁ + eρe₃) R(ψ, eρe₃) R(π, c₁ + eρe₃) for e = ±1, and σ′σ⁻¹ has
//! the RM form exactly when ψₛ = −eκ₁ + v₂κ₂/(ρ + ev₃).

use serde::{Deserialize, Serialize};

use crate::frames::{FrameField, FrameKind, Mat3, Vec3};
use crate::jet::JetVar;
use crate::odesolve::{hermite_increment, interval_integral};
use crate::variational::el::rm_curvature_matrix;
use crate::variational::InvariantTrajectory;

use super::cayley::rotation;
use super::ReconstructError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    Case1,
    Case2,
}

impl Case {
    pub fn sign(self) -> f64 {
        match self {
            Case::Case1 => 1.0,
            Case::Case2 => -1.0,
        }
    }

    pub fn other(self) -> Case {
        match self {
            Case::Case1 => Case::Case2,
            Case::Case2 => Case::Case1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSwitch {
    pub s: f64,
    pub from: Case,
    pub to: Case,
    /// max entry of σ_new − σ_old at the switch node.
    pub jump: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionCase {
    pub initial: Case,
    pub c1: [f64; 3],
    pub switches: Vec<CaseSwitch>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaOptions {
    /// Hysteresis band as a fraction of |c₁|.
    pub eps_switch: f64,
    /// Reporting tolerance for |σc₁ − w₁|.
    pub c1_tol: f64,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        SigmaOptions { eps_switch: 0.1, c1_tol: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct SigmaReconstruction {
    pub frame: FrameField,
    pub psi: Vec<f64>,
    pub cases: Vec<Case>,
    pub case_log: ReconstructionCase,
    /// max |σc₁ − w₁|.
    pub c1_residual: f64,
    pub c1_residual_ok: bool,
    /// Interior max of |σ′σ⁻¹ − Q(κ₁, κ₂)|, σ′ by finite differences.
    pub curvature_matrix_residual: f64,
}

struct Factors {
    rho: f64,
    c1: Vec3,
}

impl Factors {
    fn axis(&self, e: f64) -> Vec3 {
        Vec3::new(0.0, 0.0, e * self.rho)
    }

    /// Distance from the singular configurations of case `e`.
    fn admissibility(&self, w1: &Vec3, e: f64) -> f64 {
        let a = self.axis(e);
        (w1 + a).norm().min((self.c1 + a).norm())
    }

    fn outer(&self, w1: &Vec3, e: f64) -> Result<(Mat3, Mat3), ReconstructError> {
        let a = self.axis(e);
        Ok((rotation(std::f64::consts::PI, &(w1 + a))?, rotation(std::f64::consts::PI, &(self.c1 + a))?))
    }

    fn sigma(&self, w1: &Vec3, e: f64, psi: f64) -> Result<Mat3, ReconstructError> {
        let (a, c) = self.outer(w1, e)?;
        Ok(a * rotation(psi, &self.axis(e))? * c)
    }

    /// ψ with sigma(w1, e, ψ) = σ; the middle factor is a rotation about e₃.
    fn match_psi(&self, w1: &Vec3, e: f64, sigma: &Mat3) -> Result<f64, ReconstructError> {
        let (a, c) = self.outer(w1, e)?;
        let b = a.transpose() * sigma * c.transpose();
        Ok(e * b[(1, 0)].atan2(b[(0, 0)]))
    }
}

fn w1_of(v: &[f64; 6]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

/// Integrate ψ and assemble σ node by node. The active case changes when
/// its distance from singularity drops below `eps_switch·|c₁|`; ψ is then
/// re-matched so that σ is continuous.
pub fn reconstruct_sigma(traj: &InvariantTrajectory, c: &[f64; 6], psi0: f64, opts: SigmaOptions) -> Result<SigmaReconstruction, ReconstructError> {
    let n = traj.len();
    if n == 0 {
        return Err(ReconstructError::Empty);
    }
    if traj.v.len() != n {
        return Err(ReconstructError::GridMismatch { expected: n, found: traj.v.len() });
    }
    if !(opts.eps_switch > 0.0 && opts.eps_switch < 1.0) {
        return Err(ReconstructError::InvalidParameter(format!("eps_switch = {}", opts.eps_switch)));
    }
    let c1 = Vec3::new(c[0], c[1], c[2]);
    let rho = c1.norm();
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(ReconstructError::ZeroC1);
    }
    let f = Factors { rho, c1 };
    let eps = opts.eps_switch * rho;
    let (k1, k2) = (traj.k1(), traj.k2());
    let h = traj.ds();
    let rate = |e: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let v = &traj.v[i];
                -e * k1[i] + v[1] * k2[i] / (rho + e * v[2])
            })
            .collect()
    };
    // d/ds of the rate, with w₁′ = Q w₁ and κ′ from the trajectory
    let k1s = traj.column_or_fd(JetVar::k1(1));
    let k2s = traj.column_or_fd(JetVar::k2(1));
    let rate_ds = |e: f64| -> Option<Vec<f64>> {
        let (k1s, k2s) = (k1s.as_ref()?, k2s.as_ref()?);
        Some(
            (0..n)
                .map(|i| {
                    let v = &traj.v[i];
                    let d2 = -k1[i] * v[0];
                    let d3 = -k2[i] * v[0];
                    let den = rho + e * v[2];
                    -e * k1s[i] + (d2 * k2[i] + v[1] * k2s[i]) / den - e * v[1] * k2[i] * d3 / (den * den)
                })
                .collect(),
        )
    };
    let rates = [rate(1.0), rate(-1.0)];
    let slopes = [rate_ds(1.0), rate_ds(-1.0)];
    let idx = |case: Case| match case {
        Case::Case1 => 0,
        Case::Case2 => 1,
    };

    let w0 = w1_of(&traj.v[0]);
    let (m1, m2) = (f.admissibility(&w0, 1.0), f.admissibility(&w0, -1.0));
    if m1.max(m2) < eps {
        return Err(ReconstructError::Inadmissible { s: traj.s[0], case1: m1, case2: m2, eps });
    }
    let mut case = if m1 >= m2 { Case::Case1 } else { Case::Case2 };
    let initial = case;
    let mut psi = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let mut cases = Vec::with_capacity(n);
    let mut switches = Vec::new();
    psi.push(psi0);
    rows.push(f.sigma(&w0, case.sign(), psi0)?);
    cases.push(case);
    for i in 0..n - 1 {
        let k = idx(case);
        let next = psi[i]
            + match &slopes[k] {
                Some(d) => hermite_increment(&rates[k], d, i, h),
                None => {
                    let ok = |j: usize| f.admissibility(&w1_of(&traj.v[j]), case.sign()) >= 0.5 * eps;
                    guarded_increment(&rates[k], i, h, ok)
                }
            };
        let w = w1_of(&traj.v[i + 1]);
        let mut sig = f.sigma(&w, case.sign(), next)?;
        let mut psi_next = next;
        let here = f.admissibility(&w, case.sign());
        if here < eps {
            let other = case.other();
            let there = f.admissibility(&w, other.sign());
            if there < eps {
                let (case1, case2) = match case {
                    Case::Case1 => (here, there),
                    Case::Case2 => (there, here),
                };
                return Err(ReconstructError::Inadmissible { s: traj.s[i + 1], case1, case2, eps });
            }
            psi_next = f.match_psi(&w, other.sign(), &sig)?;
            let rematched = f.sigma(&w, other.sign(), psi_next)?;
            switches.push(CaseSwitch {
                s: traj.s[i + 1],
                from: case,
                to: other,
                jump: (rematched - sig).abs().max(),
            });
            sig = rematched;
            case = other;
        }
        if !psi_next.is_finite() || sig.iter().any(|x| !x.is_finite()) {
            return Err(ReconstructError::NonFinite(traj.s[i + 1]));
        }
        psi.push(psi_next);
        rows.push(sig);
        cases.push(case);
    }

    let c1_residual = (0..n).map(|i| (rows[i] * c1 - w1_of(&traj.v[i])).norm()).fold(0.0, f64::max);
    let frame = FrameField {
        kind: FrameKind::RotationMinimizing,
        s: traj.s.clone(),
        rows,
        curvature: k1.iter().zip(&k2).map(|(a, b)| [*a, *b]).collect(),
    };
    let curvature_matrix_residual = curvature_matrix_residual(&frame);
    Ok(SigmaReconstruction {
        frame,
        psi,
        cases,
        case_log: ReconstructionCase {
            initial,
            c1: [c[0], c[1], c[2]],
            switches,
        },
        c1_residual,
        c1_residual_ok: c1_residual <= opts.c1_tol,
        curvature_matrix_residual,
    })
}

/// Increment over [s_i, s_{i+1}] using only stencil nodes where the rate
/// is well defined (the neighbours of a switch may sit near a singularity).
fn guarded_increment(f: &[f64], i: usize, h: f64, ok: impl Fn(usize) -> bool) -> f64 {
    let lo = if i > 0 && ok(i - 1) { i - 1 } else { i };
    let mut hi = i + 1;
    while hi + 1 < f.len() && hi - lo < 3 && ok(hi + 1) {
        hi += 1;
    }
    interval_integral(&f[lo..=hi], i - lo, h)
}

/// Interior max of |σ′σ⁻¹ − Q| for the curvature stored in the frame.
pub fn curvature_matrix_residual(frame: &FrameField) -> f64 {
    let n = frame.len();
    if n < 7 {
        return 0.0;
    }
    let q = frame.curvature_matrices();
    (3..n - 3)
        .map(|i| {
            let [a, b] = frame.curvature[i];
            (q[i] - rm_curvature_matrix(a, b)).abs().max()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Mat3;
    use crate::variational::el::InvariantTrajectory;
    use crate::jet::JetVar;

    /// A trajectory carrying only κ₁, κ₂ and v along a known frame and
    /// constants c: v = Ad(σ, P)·c.
    pub(crate) fn synthetic(s: Vec<f64>, k1: Vec<f64>, k2: Vec<f64>, v: Vec<[f64; 6]>) -> InvariantTrajectory {
        InvariantTrajectory {
            layout: vec![JetVar::k1(0), JetVar::k2(0)],
            jets: k1.iter().zip(&k2).map(|(a, b)| vec![*a, *b]).collect(),
            lambda: vec![0.0; s.len()],
            s,
            v,
            sigma: None,
            position: None,
            truncated: None,
        }
    }

    #[test]
    fn straight_line_keeps_psi_constant() {
        let n = 11;
        let s: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
        let v = vec![[0.0, 0.0, 2.0, 0.0, 0.0, 0.0]; n];
        let traj = synthetic(s, vec![0.0; n], vec![0.0; n], v);
        let r = reconstruct_sigma(&traj, &[0.0, 0.0, 2.0, 0.0, 0.0, 0.0], 0.4, SigmaOptions::default()).unwrap();
        assert!(r.psi.iter().all(|p| (p - 0.4).abs() < 1e-15));
        let expect = rotation(0.4, &Vec3::z()).unwrap();
        assert!(r.frame.rows.iter().all(|m| (m - expect).abs().max() < 1e-14));
        assert!(r.case_log.switches.is_empty());
        assert!(r.c1_residual < 1e-14);
    }

    #[test]
    fn match_psi_inverts_the_factorization() {
        let f = Factors { rho: 1.5, c1: Vec3::new(0.3, -1.2, 0.84).normalize() * 1.5 };
        let w = Vec3::new(-0.9, 0.2, 1.0).normalize() * 1.5;
        for e in [1.0, -1.0] {
            let sig = f.sigma(&w, e, 0.77).unwrap();
            assert!((sig * f.c1 - w).norm() < 1e-14);
            assert!((f.match_psi(&w, e, &sig).unwrap() - 0.77).abs() < 1e-13);
        }
    }

    #[test]
    fn errors() {
        let s = vec![0.0, 0.1];
        let traj = synthetic(s.clone(), vec![0.0; 2], vec![0.0; 2], vec![[0.0; 6]; 2]);
        assert!(matches!(reconstruct_sigma(&traj, &[0.0; 6], 0.0, SigmaOptions::default()), Err(ReconstructError::ZeroC1)));
        // c₁ on the negative axis with w₁ on the positive one: both cases singular
        let traj = synthetic(s, vec![0.0; 2], vec![0.0; 2], vec![[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]; 2]);
        let err = reconstruct_sigma(&traj, &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0], 0.0, SigmaOptions::default()).unwrap_err();
        assert!(matches!(err, ReconstructError::Inadmissible { .. }), "{err}");
    }

    /// A circle in the T-B plane (κ₁ = 0, κ₂ = 1) sends w₁ = σc₁ once
    /// around; with c₁ near e₁ it passes close to ∓|c₁|e₃, forcing two switches.
    #[test]
    fn case_switch_keeps_sigma_continuous() {
        let n = 2001;
        let h = 2.0 * std::f64::consts::PI / (n - 1) as f64;
        let s: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let sigma: Vec<Mat3> = s
            .iter()
            .map(|&t| Mat3::new(t.cos(), 0.0, t.sin(), 0.0, 1.0, 0.0, -t.sin(), 0.0, t.cos()))
            .collect();
        let c = [1.0, 0.05, 0.0, 0.0, 0.0, 0.0];
        let v: Vec<[f64; 6]> = sigma
            .iter()
            .map(|m| {
                let w = m * Vec3::new(c[0], c[1], c[2]);
                [w.x, w.y, w.z, 0.0, 0.0, 0.0]
            })
            .collect();
        let traj = synthetic(s, vec![0.0; n], vec![1.0; n], v);
        let r = reconstruct_sigma(&traj, &c, 0.0, SigmaOptions::default()).unwrap();
        assert_eq!(r.case_log.switches.len(), 2, "{:?}", r.case_log);
        assert!(r.case_log.switches.iter().all(|sw| sw.jump < 1e-12), "{:?}", r.case_log);
        assert!(r.c1_residual < 1e-12);
        assert!(r.curvature_matrix_residual < h * h, "{}", r.curvature_matrix_residual);
        // consecutive frames stay close
        for i in 1..n {
            assert!((r.frame.rows[i] - r.frame.rows[i - 1]).abs().max() < 5.0 * h);
        }
    }
}
