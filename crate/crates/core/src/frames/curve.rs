use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FramesError;

pub type Vec3 = Vector3<f64>;

/// A curve sampled on a uniform arc-length grid, with its first three
/// s-derivatives at each node.
#[derive(Clone, Debug)]
pub struct CurveSamples {
    pub s: Vec<f64>,
    pub points: Vec<Vec3>,
    pub d1: Vec<Vec3>,
    pub d2: Vec<Vec3>,
    pub d3: Vec<Vec3>,
}

impl CurveSamples {
    /// Samples from an analytic arc-length parametrization returning
    /// `[P, P', P'', P''']`.
    pub fn from_fn(s: Vec<f64>, f: impl Fn(f64) -> [Vec3; 4]) -> Self {
        let mut out = CurveSamples {
            points: Vec::with_capacity(s.len()),
            d1: Vec::with_capacity(s.len()),
            d2: Vec::with_capacity(s.len()),
            d3: Vec::with_capacity(s.len()),
            s,
        };
        for &si in &out.s {
            let [p, d1, d2, d3] = f(si);
            out.points.push(p);
            out.d1.push(d1);
            out.d2.push(d2);
            out.d3.push(d3);
        }
        out
    }

    /// Samples on a uniform grid; derivatives by 4th-order finite differences.
    pub fn from_points(s0: f64, ds: f64, points: Vec<Vec3>) -> Result<Self, FramesError> {
        if points.len() < 7 {
            return Err(FramesError::TooFewSamples { got: points.len(), need: 7 });
        }
        let s = (0..points.len()).map(|i| s0 + i as f64 * ds).collect();
        let d1 = diff_vec3(&points, ds, 1);
        let d2 = diff_vec3(&points, ds, 2);
        let d3 = diff_vec3(&points, ds, 3);
        Ok(CurveSamples { s, points, d1, d2, d3 })
    }

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

    /// Largest deviation of the grid spacing from its mean.
    pub fn spacing_error(&self) -> f64 {
        let h = self.ds();
        self.s.windows(2).map(|w| ((w[1] - w[0]) - h).abs()).fold(0.0, f64::max)
    }

    /// Largest | |P'| - 1 | over the nodes.
    pub fn unit_speed_error(&self) -> f64 {
        self.d1.iter().map(|t| (t.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Apply `x ↦ R x + a` to the curve.
    pub fn transformed(&self, r: &nalgebra::Matrix3<f64>, a: &Vec3) -> CurveSamples {
        CurveSamples {
            s: self.s.clone(),
            points: self.points.iter().map(|p| r * p + a).collect(),
            d1: self.d1.iter().map(|p| r * p).collect(),
            d2: self.d2.iter().map(|p| r * p).collect(),
            d3: self.d3.iter().map(|p| r * p).collect(),
        }
    }
}

/// Finite-difference weights for the `m`-th derivative at `x0` from nodes `xs`
/// (Fornberg's recursion).
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Per-node stencils `(start, weights)` on a uniform grid of `n` nodes,
/// for the `m`-th derivative with the given even accuracy order.
pub fn stencils(n: usize, h: f64, m: usize, accuracy: usize) -> Vec<(usize, Vec<f64>)> {
    let acc = accuracy.max(2) & !1;
    let (wc, wb) = (2 * m.div_ceil(2) + acc - 1, m + acc);
    let half = wc / 2;
    let mut cache_center: Option<Vec<f64>> = None;
    (0..n)
        .map(|i| {
            if i >= half && i + half < n {
                let w = cache_center
                    .get_or_insert_with(|| {
                        let xs: Vec<f64> = (0..wc).map(|k| k as f64 - half as f64).collect();
                        fd_weights(0.0, &xs, m)
                    })
                    .clone();
                (i - half, w.iter().map(|x| x / h.powi(m as i32)).collect())
            } else {
                let w = wb.min(n);
                let start = if i < half { 0 } else { n - w };
                let xs: Vec<f64> = (0..w).map(|k| (start + k) as f64).collect();
                let wts = fd_weights(i as f64, &xs, m);
                (start, wts.iter().map(|x| x / h.powi(m as i32)).collect())
            }
        })
        .collect()
}

pub fn diff_scalar(f: &[f64], h: f64, m: usize) -> Vec<f64> {
    diff_scalar_acc(f, h, m, 4)
}

/// `m`-th derivative with stencils of the given accuracy order (2 or 4).
pub fn diff_scalar_acc(f: &[f64], h: f64, m: usize, accuracy: usize) -> Vec<f64> {
    if m == 0 {
        return f.to_vec();
    }
    stencils(f.len(), h, m, accuracy)
        .into_iter()
        .map(|(start, w)| w.iter().enumerate().map(|(k, c)| c * f[start + k]).sum())
        .collect()
}

pub fn diff_vec3(f: &[Vec3], h: f64, m: usize) -> Vec<Vec3> {
    stencils(f.len(), h, m, 4)
        .into_iter()
        .map(|(start, w)| {
            w.iter()
                .enumerate()
                .fold(Vec3::zeros(), |acc, (k, c)| acc + *c * f[start + k])
        })
        .collect()
}

/// Natural cubic spline through `(x_i, y_i)`.
#[derive(Clone, Debug)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for the second derivatives, Thomas algorithm
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                a[i] = h0;
                b[i] = 2.0 * (h0 + h1);
                c[i] = h1;
                d[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 2..n - 1 {
                let w = a[i] / b[i - 1];
                b[i] -= w * c[i - 1];
                d[i] -= w * d[i - 1];
            }
            m[n - 2] = d[n - 2] / b[n - 2];
            for i in (1..n - 2).rev() {
                m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
            }
        }
        Spline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    /// Value and first two derivatives on segment `i`.
    fn eval_in(&self, i: usize, t: f64) -> [f64; 3] {
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let dd = a * m0 + b * m1;
        [v, d, dd]
    }
}

struct Spline3 {
    c: [Spline; 3],
}

impl Spline3 {
    fn eval_in(&self, i: usize, t: f64) -> [Vec3; 3] {
        let e = [self.c[0].eval_in(i, t), self.c[1].eval_in(i, t), self.c[2].eval_in(i, t)];
        [
            Vec3::new(e[0][0], e[1][0], e[2][0]),
            Vec3::new(e[0][1], e[1][1], e[2][1]),
            Vec3::new(e[0][2], e[1][2], e[2][2]),
        ]
    }
}

const GL_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// ∫ₐᵇ g by 5-point Gauss–Legendre on `pieces` equal subintervals.
pub fn gauss_legendre(a: f64, b: f64, pieces: usize, g: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / pieces as f64;
    let mut acc = 0.0;
    for p in 0..pieces {
        let mid = a + (p as f64 + 0.5) * h;
        for k in 0..5 {
            acc += GL_W[k] * g(mid + 0.5 * h * GL_X[k]);
        }
    }
    acc * 0.5 * h
}

/// Chord-length cubic spline through `raw`, resampled to a uniform arc-length
/// grid with spacing as close to `target_ds` as the length allows.
pub fn reparametrize_arclength(raw: &[Vec3], target_ds: f64) -> Result<CurveSamples, FramesError> {
    if raw.len() < 4 {
        return Err(FramesError::TooFewSamples { got: raw.len(), need: 4 });
    }
    if !(target_ds > 0.0) {
        return Err(FramesError::InvalidStep(target_ds));
    }
    let mut u = vec![0.0; raw.len()];
    for i in 1..raw.len() {
        let chord = (raw[i] - raw[i - 1]).norm();
        if chord <= 1e-12 * (1.0 + raw[i].norm()) {
            return Err(FramesError::DegenerateSamples { index: i });
        }
        u[i] = u[i - 1] + chord;
    }
    let comps: [Vec<f64>; 3] = std::array::from_fn(|k| raw.iter().map(|p| p[k]).collect());
    let spline = Spline3 {
        c: std::array::from_fn(|k| Spline::new(&u, &comps[k])),
    };
    let speed = |i: usize, t: f64| spline.eval_in(i, t)[1].norm();

    // arc length at the knots
    let mut s_knot = vec![0.0; u.len()];
    for i in 0..u.len() - 1 {
        s_knot[i + 1] = s_knot[i] + gauss_legendre(u[i], u[i + 1], 4, |t| speed(i, t));
    }
    let length = *s_knot.last().unwrap();
    let n = (length / target_ds).round().max(1.0) as usize;
    let ds = length / n as f64;

    let mut samples = CurveSamples {
        s: Vec::with_capacity(n + 1),
        points: Vec::with_capacity(n + 1),
        d1: Vec::with_capacity(n + 1),
        d2: Vec::with_capacity(n + 1),
        d3: Vec::new(),
    };
    let mut seg = 0;
    for j in 0..=n {
        let target = if j == n { length } else { j as f64 * ds };
        while seg + 1 < u.len() - 1 && s_knot[seg + 1] < target {
            seg += 1;
        }
        // Newton on s(t) = target within the segment, bisection as a guard
        let (mut lo, mut hi) = (u[seg], u[seg + 1]);
        let frac = (target - s_knot[seg]) / (s_knot[seg + 1] - s_knot[seg]);
        let mut t = lo + frac.clamp(0.0, 1.0) * (hi - lo);
        for _ in 0..50 {
            let f = s_knot[seg] + gauss_legendre(u[seg], t, 2, |x| speed(seg, x)) - target;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if f.abs() < 1e-14 * length.max(1.0) {
                break;
            }
            let mut next = t - f / speed(seg, t);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            t = next;
        }
        let [p, pu, puu] = spline.eval_in(seg, t);
        let v = pu.norm();
        let tan = pu / v;
        let curv = (puu - puu.dot(&tan) * tan) / (v * v);
        samples.s.push(j as f64 * ds);
        samples.points.push(p);
        samples.d1.push(tan);
        samples.d2.push(curv);
    }
    samples.d3 = if samples.len() >= 7 {
        diff_vec3(&samples.d2, ds, 1)
    } else {
        vec![Vec3::zeros(); samples.len()]
    };
    Ok(samples)
}

/// Built-in analytic curves, parametrized by arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CatalogCurve {
    Line { direction: [f64; 3] },
    Circle { radius: f64 },
    Helix { a: f64, b: f64 },
    RandomFourier { seed: u64, modes: usize },
    /// (t, a t³, b t²): planar-ish cubic whose curvature nearly vanishes at t = 0.
    Inflection { a: f64, b: f64 },
}

impl CatalogCurve {
    pub fn name(&self) -> &'static str {
        match self {
            CatalogCurve::Line { .. } => "line",
            CatalogCurve::Circle { .. } => "circle",
            CatalogCurve::Helix { .. } => "helix",
            CatalogCurve::RandomFourier { .. } => "random_fourier",
            CatalogCurve::Inflection { .. } => "inflection",
        }
    }

    /// Sample on `[0, length]` with spacing close to `ds`.
    pub fn sample(&self, length: f64, ds: f64) -> CurveSamples {
        let n = (length / ds).round().max(1.0) as usize;
        let h = length / n as f64;
        let s: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        match self {
            CatalogCurve::Line { direction } => {
                let d = Vec3::from(*direction).normalize();
                CurveSamples::from_fn(s, |t| [t * d, d, Vec3::zeros(), Vec3::zeros()])
            }
            CatalogCurve::Circle { radius } => {
                let r = *radius;
                CurveSamples::from_fn(s, |t| {
                    let (sn, cs) = (t / r).sin_cos();
                    [
                        Vec3::new(r * cs, r * sn, 0.0),
                        Vec3::new(-sn, cs, 0.0),
                        Vec3::new(-cs, -sn, 0.0) / r,
                        Vec3::new(sn, -cs, 0.0) / (r * r),
                    ]
                })
            }
            CatalogCurve::Helix { a, b } => {
                let (a, b) = (*a, *b);
                let c = (a * a + b * b).sqrt();
                CurveSamples::from_fn(s, |t| {
                    let (sn, cs) = (t / c).sin_cos();
                    [
                        Vec3::new(a * cs, a * sn, b * t / c),
                        Vec3::new(-a * sn / c, a * cs / c, b / c),
                        Vec3::new(-a * cs, -a * sn, 0.0) / (c * c),
                        Vec3::new(a * sn, -a * cs, 0.0) / (c * c * c),
                    ]
                })
            }
            CatalogCurve::RandomFourier { seed, modes } => {
                let curve = FourierCurve::random(*seed, *modes);
                curve.sample_arclength(&s)
            }
            CatalogCurve::Inflection { a, b } => {
                let (a, b) = (*a, *b);
                let jets = move |t: f64| {
                    [
                        Vec3::new(t, a * t * t * t, b * t * t),
                        Vec3::new(1.0, 3.0 * a * t * t, 2.0 * b * t),
                        Vec3::new(0.0, 6.0 * a * t, 2.0 * b),
                        Vec3::new(0.0, 6.0 * a, 0.0),
                    ]
                };
                // start at t = -length/2-ish so the inflection sits mid-curve
                let t0 = -half_length_parameter(&jets, length);
                sample_parametric(&jets, t0, &s)
            }
        }
    }
}

/// Parameter distance from 0 covering half the arc length, for centring.
fn half_length_parameter(jets: &impl Fn(f64) -> [Vec3; 4], length: f64) -> f64 {
    let mut t = 0.0;
    let mut acc = 0.0;
    let dt = 1e-3;
    while acc < 0.5 * length {
        acc += gauss_legendre(-t - dt, -t, 1, |x| jets(x)[1].norm());
        t += dt;
    }
    t
}

/// Arc-length samples of a regular parametric curve given by its t-jets
/// `[P, P_t, P_tt, P_ttt]`, starting at parameter `t0`.
pub fn sample_parametric(jets: &impl Fn(f64) -> [Vec3; 4], t0: f64, s: &[f64]) -> CurveSamples {
    let speed = |t: f64| jets(t)[1].norm();
    let mut t = t0;
    let mut s_at_t = 0.0;
    let s0 = s.first().copied().unwrap_or(0.0);
    let mut out = CurveSamples {
        s: s.to_vec(),
        points: Vec::with_capacity(s.len()),
        d1: Vec::with_capacity(s.len()),
        d2: Vec::with_capacity(s.len()),
        d3: Vec::with_capacity(s.len()),
    };
    for &si in s {
        let target = si - s0;
        // Newton from the previous parameter; increments are short
        for _ in 0..30 {
            let f = s_at_t - target;
            if f.abs() < 1e-15 * (1.0 + target.abs()) {
                break;
            }
            let t_new = t - f / speed(t);
            s_at_t += gauss_legendre(t, t_new, 1, speed);
            t = t_new;
        }
        let [p, pt, ptt, pttt] = jets(t);
        let v = pt.norm();
        let tan = pt / v;
        let vt = ptt.dot(&tan);
        let nrm = ptt - vt * tan;
        let tan_t = nrm / v;
        let nrm_t = pttt - (pttt.dot(&tan) + ptt.dot(&tan_t)) * tan - vt * tan_t;
        let d2 = nrm / (v * v);
        let d3 = (nrm_t / (v * v) - 2.0 * nrm * vt / (v * v * v)) / v;
        out.points.push(p);
        out.d1.push(tan);
        out.d2.push(d2);
        out.d3.push(d3);
    }
    out
}

/// Trigonometric polynomial curve with a drift term keeping it regular.
#[derive(Clone, Debug)]
pub struct FourierCurve {
    drift: Vec3,
    cos: Vec<Vec3>,
    sin: Vec<Vec3>,
}

impl FourierCurve {
    pub const MIN_SPEED: f64 = 0.2;

    /// Coefficients drawn from a seeded generator; redrawn until the speed
    /// stays above [`Self::MIN_SPEED`].
    pub fn random(seed: u64, modes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = modes.max(1);
        loop {
            let mut unit = || {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            };
            let drift = unit().normalize();
            let mut cos = Vec::new();
            let mut sin = Vec::new();
            for k in 1..=modes {
                let scale = 0.8 / (k * k) as f64;
                cos.push(unit() * scale);
                sin.push(unit() * scale);
            }
            let curve = FourierCurve { drift, cos, sin };
            let min_speed = (0..=2000)
                .map(|i| curve.jets(i as f64 * std::f64::consts::TAU / 2000.0)[1].norm())
                .fold(f64::INFINITY, f64::min);
            if min_speed >= Self::MIN_SPEED {
                return curve;
            }
        }
    }

    pub fn jets(&self, t: f64) -> [Vec3; 4] {
        let mut out = [t * self.drift, self.drift, Vec3::zeros(), Vec3::zeros()];
        for (i, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let k = (i + 1) as f64;
            let (sn, cs) = (k * t).sin_cos();
            out[0] += cs * a + sn * b;
            out[1] += k * (-sn * a + cs * b);
            out[2] += k * k * (-cs * a - sn * b);
            out[3] += k * k * k * (sn * a - cs * b);
        }
        out
    }

    pub fn sample_arclength(&self, s: &[f64]) -> CurveSamples {
        sample_parametric(&|t| self.jets(t), 0.0, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fornberg_central_weights() {
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expected = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn derivatives_are_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let f: Vec<f64> = (0..=n).map(|i| (i as f64 * h).sin()).collect();
            let mut worst = 0.0f64;
            for m in 1..=3 {
                let d = diff_scalar(&f, h, m);
                for (i, v) in d.iter().enumerate() {
                    let x = i as f64 * h;
                    let exact = match m {
                        1 => x.cos(),
                        2 => -x.sin(),
                        _ => -x.cos(),
                    };
                    worst = worst.max((v - exact).abs() * h.powi(m as i32 - 1));
                }
            }
            worst
        };
        let order = (err(40) / err(80)).log2();
        assert!(order > 3.8, "{order}");
    }

    #[test]
    fn line_reparametrization() {
        let raw: Vec<Vec3> = [0.0, 0.3, 0.5, 1.1, 1.2, 2.0, 2.9, 3.0]
            .iter()
            .map(|&t| Vec3::new(t, 0.0, 0.0))
            .collect();
        let c = reparametrize_arclength(&raw, 0.1).unwrap();
        assert_eq!(c.len(), 31);
        assert!(c.spacing_error() < 1e-12);
        for (p, t) in c.points.iter().zip(&c.d1) {
            assert!((t - Vec3::x()).norm() < 1e-12);
            assert!(p.y.abs() < 1e-14);
        }
    }

    #[test]
    fn circle_reparametrization_length() {
        let raw: Vec<Vec3> = (0..=200)
            .map(|i| {
                let th = i as f64 * PI / 200.0;
                Vec3::new(2.0 * th.cos(), 2.0 * th.sin(), 0.0)
            })
            .collect();
        let c = reparametrize_arclength(&raw, 0.01).unwrap();
        assert!((c.s.last().unwrap() - 2.0 * PI).abs() < 1e-6);
        assert!(c.unit_speed_error() < 1e-6);
        assert!(c.spacing_error() < 1e-12);
        // spline second derivatives are only second-order accurate
        let mid = c.len() / 2;
        assert!((c.d2[mid].norm() - 0.5).abs() < 5e-4);
    }

    #[test]
    fn reparametrization_errors() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert!(matches!(
            reparametrize_arclength(&[p, p * 2.0, p * 3.0], 0.1),
            Err(FramesError::TooFewSamples { got: 3, .. })
        ));
        assert!(matches!(
            reparametrize_arclength(&[p, p * 2.0, p * 2.0, p * 3.0], 0.1),
            Err(FramesError::DegenerateSamples { index: 2 })
        ));
    }

    #[test]
    fn helix_is_unit_speed() {
        let c = CatalogCurve::Helix { a: 1.0, b: 1.0 }.sample(10.0, 0.01);
        assert!(c.unit_speed_error() < 1e-14);
        assert!((c.d2[17].norm() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn fourier_curve_arclength_jets() {
        let c = CatalogCurve::RandomFourier { seed: 3, modes: 3 }.sample(4.0, 1e-3);
        assert!(c.unit_speed_error() < 1e-12);
        let h = c.ds();
        let fd1 = diff_vec3(&c.points, h, 1);
        let fd2 = diff_vec3(&c.d1, h, 1);
        let fd3 = diff_vec3(&c.d2, h, 1);
        for i in 10..c.len() - 10 {
            assert!((fd1[i] - c.d1[i]).norm() < 1e-9, "{i}");
            assert!((fd2[i] - c.d2[i]).norm() < 1e-8, "{i}");
            assert!((fd3[i] - c.d3[i]).norm() < 1e-7, "{i}");
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = CatalogCurve::RandomFourier { seed: 7, modes: 3 }.sample(1.0, 0.1);
        let b = CatalogCurve::RandomFourier { seed: 7, modes: 3 }.sample(1.0, 0.1);
        let c = CatalogCurve::RandomFourier { seed: 8, modes: 3 }.sample(1.0, 0.1);
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, c.points);
    }
}
