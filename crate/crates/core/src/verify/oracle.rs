//! Numeric oracles: trigonometric test functions with exact derivatives,
//! seeded random polynomial Lagrangians, the Gateaux-derivative check of the
//! Euler operator and the grid adjoint identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::jet::{euler_operator, parse_lagrangian, Base, Compiled, JetVar};
use crate::variational::{GridOperator, LinOpMatrix, VariationalError};

/// a₀ + Σₖ aₖ cos(kωs) + bₖ sin(kωs) with ω = 2π/period.
#[derive(Clone, Debug)]
pub struct TrigPoly {
    pub omega: f64,
    pub a0: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn random(rng: &mut impl Rng, period: f64, modes: usize, a0: f64) -> Self {
        let mut coef = |k: usize| rng.random_range(-1.0..1.0) / k as f64;
        let cos = (1..=modes).map(&mut coef).collect();
        let sin = (1..=modes).map(&mut coef).collect();
        TrigPoly {
            omega: std::f64::consts::TAU / period,
            a0,
            cos,
            sin,
        }
    }

    /// n-th derivative at s.
    pub fn eval(&self, s: f64, n: u32) -> f64 {
        let shift = n as f64 * std::f64::consts::FRAC_PI_2;
        let mut acc = if n == 0 { self.a0 } else { 0.0 };
        for (i, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let w = (i + 1) as f64 * self.omega;
            let x = w * s + shift;
            acc += w.powi(n as i32) * (a * x.cos() + b * x.sin());
        }
        acc
    }
}

/// Sum of 2–4 monomials with small integer coefficients; each monomial has
/// 1–3 factors drawn from κ₁, κ₂ and their first three derivatives.
pub fn random_lagrangian(rng: &mut impl Rng) -> String {
    let terms = rng.random_range(2..=4);
    let mut out = Vec::new();
    for _ in 0..terms {
        let mut c: i32 = rng.random_range(-3..=3);
        if c == 0 {
            c = 1;
        }
        let mut parts = vec![c.to_string()];
        for _ in 0..rng.random_range(1..=3) {
            let base = if rng.random_bool(0.5) { "k1" } else { "k2" };
            let order: u32 = rng.random_range(0..=3);
            parts.push(if order == 0 { base.to_string() } else { format!("D({base},{order})") });
        }
        out.push(parts.join("*"));
    }
    out.join(" + ")
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GateauxCheck {
    pub lagrangian: String,
    /// Relative error for a perturbation of κ₁ and of κ₂.
    pub relative: [f64; 2],
}

fn layout(top: u32) -> Vec<JetVar> {
    (0..=top).flat_map(|o| [JetVar::k1(o), JetVar::k2(o)]).collect()
}

/// Compare ∫ E^{κᵢ}η ds with d/dε ∫ L(κ + εηeᵢ) ds on periodic κ, η, where
/// the boundary terms vanish. Both integrals use the trapezoid rule on a
/// full period, which is exact for the trigonometric polynomials involved.
pub fn gateaux_check(text: &str, seed: u64) -> Result<GateauxCheck, String> {
    let l = parse_lagrangian(text).map_err(|e| e.to_string())?;
    let lc = l.canonical().map_err(|e| e.to_string())?;
    let lf = Compiled::new(&lc, &layout(3)).map_err(|v| format!("unexpected variable {v}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = 2.0 * std::f64::consts::PI;
    let kappa = [TrigPoly::random(&mut rng, period, 3, 1.0), TrigPoly::random(&mut rng, period, 3, 0.5)];
    let eta = TrigPoly::random(&mut rng, period, 3, 0.2);
    let n = 256;
    let h = period / n as f64;
    let jets = |i: usize, eps: f64, which: usize| -> Vec<f64> {
        let s = i as f64 * h;
        let mut x = Vec::with_capacity(8);
        for o in 0..=3 {
            for (b, k) in kappa.iter().enumerate() {
                let bump = if b == which { eps * eta.eval(s, o) } else { 0.0 };
                x.push(k.eval(s, o) + bump);
            }
        }
        x
    };
    let action = |eps: f64, which: usize| -> f64 { (0..n).map(|i| lf.eval(&jets(i, eps, which))).sum::<f64>() * h };
    let mut relative = [0.0; 2];
    for (which, base) in [Base::Kappa1, Base::Kappa2].into_iter().enumerate() {
        let e = euler_operator(&l, base).canonical().map_err(|e| e.to_string())?;
        let ef = Compiled::new(&e, &layout(6)).map_err(|v| format!("unexpected variable {v}"))?;
        let (mut sym, mut scale) = (0.0, 0.0);
        for i in 0..n {
            let s = i as f64 * h;
            let x: Vec<f64> = (0..=6).flat_map(|o| [kappa[0].eval(s, o), kappa[1].eval(s, o)]).collect();
            let v = ef.eval(&x) * eta.eval(s, 0);
            sym += v * h;
            scale += v.abs() * h;
        }
        // F is polynomial in ε of degree ≤ 3 here, so this stencil is exact
        // up to rounding.
        let eps = 1e-2;
        let num = (8.0 * (action(eps, which) - action(-eps, which)) - (action(2.0 * eps, which) - action(-2.0 * eps, which))) / (12.0 * eps);
        let denom = sym.abs().max(scale);
        relative[which] = if denom < 1e-12 { (num - sym).abs() } else { (num - sym).abs() / denom };
    }
    Ok(GateauxCheck {
        lagrangian: text.to_string(),
        relative,
    })
}

/// exp(−1/(1 − x²)) on (−1, 1), zero outside: smooth with compact support.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AdjointCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// |⟨ℋϕ,ψ⟩ − ⟨ϕ,ℋ*ψ⟩| / (‖ℋϕ‖‖ψ‖).
    pub relative: f64,
}

/// ⟨ℋϕ,ψ⟩ against ⟨ϕ,adjψ⟩ for compactly supported ϕ, ψ on a grid along
/// random smooth κ₁, κ₂.
pub fn adjoint_check(h_op: &LinOpMatrix, adj: &LinOpMatrix, seed: u64) -> Result<AdjointCheck, VariationalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let length = 6.0;
    let n = 3001;
    let h = length / (n - 1) as f64;
    let s: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let k = [TrigPoly::random(&mut rng, length, 3, 1.0), TrigPoly::random(&mut rng, length, 3, 0.0)];
    let k1: Vec<f64> = s.iter().map(|&x| k[0].eval(x, 0)).collect();
    let k2: Vec<f64> = s.iter().map(|&x| k[1].eval(x, 0)).collect();
    let field = |rng: &mut ChaCha8Rng| -> [Vec<f64>; 4] {
        std::array::from_fn(|_| {
            let centre = rng.random_range(2.5..3.5);
            let width = rng.random_range(1.5..2.4);
            let t = TrigPoly::random(rng, length, 2, 1.0);
            s.iter().map(|&x| bump((x - centre) / width) * t.eval(x, 0)).collect()
        })
    };
    let phi = field(&mut rng);
    let psi = field(&mut rng);
    let g = GridOperator::new(h_op, &k1, &k2, h, 6)?;
    let ga = GridOperator::new(adj, &k1, &k2, h, 6)?;
    let hphi = g.apply(&phi)?;
    let apsi = ga.apply(&psi)?;
    let dot = |a: &[Vec<f64>; 4], b: &[Vec<f64>; 4]| -> f64 {
        (0..4).map(|c| a[c].iter().zip(&b[c]).map(|(x, y)| x * y).sum::<f64>()).sum::<f64>() * h
    };
    let lhs = dot(&hphi, &psi);
    let rhs = dot(&phi, &apsi);
    let scale = (dot(&hphi, &hphi) * dot(&psi, &psi)).sqrt().max(1e-300);
    Ok(AdjointCheck {
        lhs,
        rhs,
        relative: (lhs - rhs).abs() / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::syzygy_symbolic;

    #[test]
    fn trig_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = TrigPoly::random(&mut rng, 2.0, 3, 0.7);
        let h = 1e-5;
        for n in 0..4 {
            let fd = (p.eval(0.3 + h, n) - p.eval(0.3 - h, n)) / (2.0 * h);
            let exact = p.eval(0.3, n + 1);
            assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{n}");
        }
    }

    #[test]
    fn random_lagrangians_parse_and_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let l = random_lagrangian(&mut rng);
            let e = parse_lagrangian(&l).unwrap().canonical().unwrap();
            assert!(e.max_order(Base::Kappa1).unwrap_or(0) <= 3 && e.max_order(Base::Kappa2).unwrap_or(0) <= 3, "{l}");
        }
    }

    #[test]
    fn known_lagrangian_passes() {
        let c = gateaux_check("k1^2*D(k2,1) + D(k1,2)^2", 1).unwrap();
        assert!(c.relative.iter().all(|r| *r < 1e-9), "{c:?}");
    }

    #[test]
    fn adjoint_identity_holds_and_catches_a_sign_flip() {
        let hs = syzygy_symbolic();
        let good = adjoint_check(&hs, &hs.adjoint(), 5).unwrap();
        assert!(good.relative < 1e-8, "{good:?}");
        let bad = adjoint_check(&hs, &hs.adjoint().with_negated_entry(0, 1), 5).unwrap();
        assert!(bad.relative > 1e-3, "{bad:?}");
    }

    #[test]
    fn bump_is_compact() {
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(-2.0), 0.0);
        assert!((bump(0.0) - (-1.0f64).exp()).abs() < 1e-15);
    }
}
