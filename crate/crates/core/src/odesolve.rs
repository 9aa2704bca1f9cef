//! Explicit Runge–Kutta integrators and cumulative quadrature.

use std::fmt;

/// Failure signalled by a right-hand side (e.g. a singular coefficient matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct RhsFailure(pub String);

impl fmt::Display for RhsFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type RhsResult = Result<(), RhsFailure>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Classical RK4 with `substeps` equal steps between output nodes.
    Rk4Fixed { substeps: usize },
    /// Dormand–Prince 5(4) with cubic Hermite dense output.
    Rk45Adaptive { tol: Tolerances, max_step: Option<f64> },
}

impl Method {
    pub fn rk4() -> Self {
        Method::Rk4Fixed { substeps: 1 }
    }

    pub fn rk45(tol: Tolerances) -> Self {
        Method::Rk45Adaptive { tol, max_step: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    StepUnderflow { step: f64 },
    NonFinite,
    Rhs(RhsFailure),
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::StepUnderflow { step } => write!(
                f,
                "step size underflow (h = {step:e}); the problem may be stiff or singular here"
            ),
            StopReason::NonFinite => f.write_str("non-finite value in the right-hand side"),
            StopReason::Rhs(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Completed,
    Stopped { s: f64, reason: StopReason },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// States on the requested output grid. When integration stops early, only
/// the nodes reached are present.
#[derive(Clone, Debug)]
pub struct Solution {
    pub s: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub status: Status,
    pub stats: Stats,
}

impl Solution {
    pub fn completed(&self) -> bool {
        self.status == Status::Completed
    }
}

/// An initial value problem `y' = f(s, y)` with `y(grid[0]) = y0`.
pub struct OdeProblem<F> {
    pub rhs: F,
    pub y0: Vec<f64>,
    /// Output nodes, strictly increasing.
    pub grid: Vec<f64>,
}

impl<F> OdeProblem<F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> RhsResult,
{
    pub fn new(rhs: F, y0: Vec<f64>, grid: Vec<f64>) -> Self {
        OdeProblem { rhs, y0, grid }
    }

    pub fn dimension(&self) -> usize {
        self.y0.len()
    }

    pub fn integrate(&mut self, method: Method) -> Solution {
        match method {
            Method::Rk4Fixed { substeps } => rk4_fixed(self, substeps.max(1)),
            Method::Rk45Adaptive { tol, max_step } => dopri(self, tol, max_step),
        }
    }
}

/// Uniform grid of `n` intervals on `[a, b]` (n + 1 nodes).
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![a];
    }
    let h = (b - a) / n as f64;
    (0..=n).map(|i| if i == n { b } else { a + i as f64 * h }).collect()
}

/// Grid with spacing as close to `ds` as possible that ends exactly at `b`.
pub fn grid_with_step(a: f64, b: f64, ds: f64) -> Vec<f64> {
    let n = ((b - a) / ds).round().max(0.0) as usize;
    uniform_grid(a, b, n)
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// One classical RK4 step from `(s, y)` with step `h`.
pub fn rk4_step<F>(f: &mut F, s: f64, y: &[f64], h: f64, out: &mut [f64]) -> RhsResult
where
    F: FnMut(f64, &[f64], &mut [f64]) -> RhsResult,
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(s, y, &mut k1)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(s + 0.5 * h, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(s + 0.5 * h, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(s + h, &tmp, &mut k4)?;
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

fn rk4_fixed<F>(p: &mut OdeProblem<F>, substeps: usize) -> Solution
where
    F: FnMut(f64, &[f64], &mut [f64]) -> RhsResult,
{
    let mut ys = vec![p.y0.clone()];
    let mut stats = Stats::default();
    let mut y = p.y0.clone();
    let mut next = vec![0.0; y.len()];
    for w in p.grid.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for k in 0..substeps {
            let s = w[0] + k as f64 * h;
            stats.rhs_evals += 4;
            if let Err(e) = rk4_step(&mut p.rhs, s, &y, h, &mut next) {
                return stopped(p, ys, s, StopReason::Rhs(e), stats);
            }
            if !finite(&next) {
                return stopped(p, ys, s, StopReason::NonFinite, stats);
            }
            std::mem::swap(&mut y, &mut next);
            stats.accepted += 1;
        }
        ys.push(y.clone());
    }
    Solution {
        s: p.grid.clone(),
        y: ys,
        status: Status::Completed,
        stats,
    }
}

fn stopped<F>(p: &OdeProblem<F>, ys: Vec<Vec<f64>>, s: f64, reason: StopReason, stats: Stats) -> Solution {
    Solution {
        s: p.grid[..ys.len()].to_vec(),
        y: ys,
        status: Status::Stopped { s, reason },
        stats,
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn hermite(s0: f64, h: f64, y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], s: f64, out: &mut [f64]) {
    let t = (s - s0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

fn dopri<F>(p: &mut OdeProblem<F>, tol: Tolerances, max_step: Option<f64>) -> Solution
where
    F: FnMut(f64, &[f64], &mut [f64]) -> RhsResult,
{
    let n = p.dimension();
    let grid = p.grid.clone();
    let mut ys = vec![p.y0.clone()];
    let mut stats = Stats::default();
    if grid.len() < 2 {
        return Solution {
            s: grid,
            y: ys,
            status: Status::Completed,
            stats,
        };
    }
    let s_end = *grid.last().unwrap();
    let span = s_end - grid[0];
    let hmax = max_step.unwrap_or(span).min(span);
    let mut s = grid[0];
    let mut y = p.y0.clone();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut interp = vec![0.0; n];

    stats.rhs_evals += 1;
    if let Err(e) = (p.rhs)(s, &y, &mut k[0]) {
        return stopped(p, ys, s, StopReason::Rhs(e), stats);
    }
    if !finite(&k[0]) {
        return stopped(p, ys, s, StopReason::NonFinite, stats);
    }

    // initial step from the scaled size of y and y'
    let sc = |i: usize, y: &[f64]| tol.atol + tol.rtol * y[i].abs();
    let d0 = (0..n).map(|i| (y[i] / sc(i, &y)).powi(2)).sum::<f64>().sqrt() / (n as f64).sqrt();
    let d1 = (0..n).map(|i| (k[0][i] / sc(i, &y)).powi(2)).sum::<f64>().sqrt() / (n as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(hmax).max(1e-12 * span);

    let mut next_node = 1;
    let mut last_nonfinite = false;
    while next_node < grid.len() {
        let hmin = 16.0 * f64::EPSILON * s.abs().max(span);
        if h < hmin {
            let reason = if last_nonfinite {
                StopReason::NonFinite
            } else {
                StopReason::StepUnderflow { step: h }
            };
            return stopped(p, ys, s, reason, stats);
        }
        let mut h_try = h.min(hmax);
        if s + h_try > s_end || s_end - (s + h_try) < 1e-12 * span {
            h_try = s_end - s;
        }

        let mut failed: Option<RhsFailure> = None;
        for stage in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..stage {
                    acc += h_try * A[stage][j] * k[j][i];
                }
                tmp[i] = acc;
            }
            stats.rhs_evals += 1;
            if let Err(e) = (p.rhs)(s + C[stage] * h_try, &tmp, &mut k[stage]) {
                failed = Some(e);
                break;
            }
        }
        if let Some(e) = failed {
            // retry smaller before giving up; the failure may be a stage overshoot
            if h_try < 1e3 * hmin {
                return stopped(p, ys, s, StopReason::Rhs(e), stats);
            }
            stats.rejected += 1;
            h = h_try * 0.25;
            continue;
        }
        ynew.copy_from_slice(&tmp);
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            e *= h_try;
            let scale = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / scale).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() || !finite(&ynew) || !finite(&k[6]) {
            stats.rejected += 1;
            last_nonfinite = true;
            h = h_try * 0.25;
            continue;
        }
        last_nonfinite = false;
        if err <= 1.0 {
            let s_new = if h_try == s_end - s { s_end } else { s + h_try };
            while next_node < grid.len() && grid[next_node] <= s_new + 1e-14 * span {
                let g = grid[next_node];
                if (g - s_new).abs() <= 1e-14 * span {
                    ys.push(ynew.clone());
                } else {
                    hermite(s, h_try, &y, &k[0], &ynew, &k[6], g, &mut interp);
                    ys.push(interp.clone());
                }
                next_node += 1;
            }
            s = s_new;
            y.copy_from_slice(&ynew);
            let last = k[6].clone();
            k[0].copy_from_slice(&last);
            stats.accepted += 1;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = h_try * fac;
        } else {
            stats.rejected += 1;
            h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Solution {
        s: grid,
        y: ys,
        status: Status::Completed,
        stats,
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("cumulative quadrature needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
}

/// Cumulative integral of uniformly spaced samples: composite Simpson at even
/// nodes, Simpson plus a 3/8 panel at odd nodes.
pub fn quadrature(f: &[f64], ds: f64) -> Result<Vec<f64>, QuadratureError> {
    let n = f.len();
    if n < 3 {
        return Err(QuadratureError::TooFewNodes(n));
    }
    let mut out = vec![0.0; n];
    out[1] = ds / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
    for i in 2..n {
        out[i] = if i % 2 == 0 {
            out[i - 2] + ds / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i])
        } else {
            out[i - 3] + 3.0 * ds / 8.0 * (f[i - 3] + 3.0 * f[i - 2] + 3.0 * f[i - 1] + f[i])
        };
    }
    Ok(out)
}

/// ∫ over [s_i, s_{i+1}] of uniformly spaced samples: the cubic through the
/// four nearest nodes (quadratic or linear on shorter grids).
pub fn interval_integral(f: &[f64], i: usize, ds: f64) -> f64 {
    let n = f.len();
    assert!(i + 1 < n, "interval {i} outside a grid of {n} nodes");
    match n {
        2 => 0.5 * ds * (f[0] + f[1]),
        3 if i == 0 => ds / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]),
        3 => ds / 12.0 * (-f[0] + 8.0 * f[1] + 5.0 * f[2]),
        _ if i == 0 => ds / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]),
        _ if i + 2 == n => ds / 24.0 * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]),
        _ => ds / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]),
    }
}

/// Running integral from samples and their derivatives: the two-point
/// Hermite (corrected trapezoid) rule, fourth order and local.
pub fn cumulative_hermite(f: &[f64], df: &[f64], ds: f64, start: f64) -> Vec<f64> {
    assert_eq!(f.len(), df.len());
    let mut out = Vec::with_capacity(f.len());
    if f.is_empty() {
        return out;
    }
    out.push(start);
    for i in 0..f.len() - 1 {
        out.push(out[i] + hermite_increment(f, df, i, ds));
    }
    out
}

pub fn hermite_increment(f: &[f64], df: &[f64], i: usize, ds: f64) -> f64 {
    0.5 * ds * (f[i] + f[i + 1]) + ds * ds / 12.0 * (df[i] - df[i + 1])
}

/// Running sum of [`interval_integral`], starting from `start`.
pub fn cumulative(f: &[f64], ds: f64, start: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    if f.is_empty() {
        return out;
    }
    out.push(start);
    for i in 0..f.len() - 1 {
        out.push(out[i] + interval_integral(f, i, ds));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E as EULER, PI};

    fn exp_problem() -> OdeProblem<impl FnMut(f64, &[f64], &mut [f64]) -> RhsResult> {
        OdeProblem::new(
            |_s, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[0];
                Ok(())
            },
            vec![1.0],
            uniform_grid(0.0, 1.0, 10),
        )
    }

    #[test]
    fn constant_solution() {
        let mut p = OdeProblem::new(
            |_s, _y: &[f64], dy: &mut [f64]| {
                dy[0] = 0.0;
                Ok(())
            },
            vec![2.5],
            uniform_grid(0.0, 3.0, 30),
        );
        for m in [Method::rk4(), Method::rk45(Tolerances::default())] {
            let sol = p.integrate(m);
            assert!(sol.completed());
            assert!(sol.y.iter().all(|y| (y[0] - 2.5).abs() < 1e-15));
        }
    }

    #[test]
    fn exponential_rk45() {
        let sol = exp_problem().integrate(Method::rk45(Tolerances {
            rtol: 1e-11,
            atol: 1e-13,
        }));
        assert!((sol.y.last().unwrap()[0] - EULER).abs() < 1e-9);
        // interior nodes come from dense output
        for (s, y) in sol.s.iter().zip(&sol.y) {
            assert!((y[0] - s.exp()).abs() < 1e-8, "{s}");
        }
    }

    #[test]
    fn harmonic_oscillator_returns() {
        let mut p = OdeProblem::new(
            |_s, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            vec![1.0, 0.0],
            uniform_grid(0.0, 2.0 * PI, 64),
        );
        let sol = p.integrate(Method::rk45(Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
        }));
        let end = sol.y.last().unwrap();
        assert!((end[0] - 1.0).abs() < 1e-7 && end[1].abs() < 1e-7);
        let sol = p.integrate(Method::Rk4Fixed { substeps: 40 });
        let end = sol.y.last().unwrap();
        assert!((end[0] - 1.0).abs() < 1e-7 && end[1].abs() < 1e-7);
    }

    #[test]
    fn rk4_order() {
        let errs: Vec<f64> = [20, 40, 80]
            .iter()
            .map(|&n| {
                let mut p = exp_problem();
                p.grid = uniform_grid(0.0, 1.0, n);
                let sol = p.integrate(Method::rk4());
                (sol.y.last().unwrap()[0] - EULER).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 3.9, "{order}");
        }
    }

    #[test]
    fn tolerance_is_respected() {
        for rtol in [1e-6, 1e-8, 1e-10] {
            let sol = exp_problem().integrate(Method::rk45(Tolerances { rtol, atol: rtol * 1e-2 }));
            let rel = (sol.y.last().unwrap()[0] - EULER).abs() / EULER;
            assert!(rel <= 10.0 * rtol, "{rtol}: {rel}");
        }
    }

    #[test]
    fn blow_up_reports_location() {
        // y' = y², y(0) = 1 blows up at s = 1
        let mut p = OdeProblem::new(
            |_s, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            vec![1.0],
            uniform_grid(0.0, 2.0, 20),
        );
        let sol = p.integrate(Method::rk45(Tolerances::default()));
        match sol.status {
            Status::Stopped { s, .. } => assert!((s - 1.0).abs() < 1e-2, "{s}"),
            Status::Completed => panic!("should stop"),
        }
        assert!(sol.s.len() <= 11);
    }

    #[test]
    fn rhs_failure_stops() {
        let mut p = OdeProblem::new(
            |s, _y: &[f64], dy: &mut [f64]| {
                if s > 0.5 {
                    return Err(RhsFailure("singular".into()));
                }
                dy[0] = 1.0;
                Ok(())
            },
            vec![0.0],
            uniform_grid(0.0, 1.0, 10),
        );
        let sol = p.integrate(Method::rk4());
        assert!(matches!(sol.status, Status::Stopped { reason: StopReason::Rhs(_), .. }));
        assert_eq!(sol.y.len(), sol.s.len());
    }

    #[test]
    fn quadrature_examples() {
        let ones = vec![1.0; 11];
        assert!((quadrature(&ones, 0.1).unwrap()[10] - 1.0).abs() < 1e-14);
        for n in [100usize, 101] {
            let h = PI / 2.0 / n as f64;
            let f: Vec<f64> = (0..=n).map(|i| (i as f64 * h).cos()).collect();
            assert!((quadrature(&f, h).unwrap()[n] - 1.0).abs() < 1e-8);
            let h = 2.0 / n as f64;
            let f: Vec<f64> = (0..=n).map(|i| 3.0 * (i as f64 * h).powi(2)).collect();
            let q = quadrature(&f, h).unwrap();
            assert!((q[n] - 8.0).abs() < 1e-8);
            for (i, v) in q.iter().enumerate() {
                assert!((v - (i as f64 * h).powi(3)).abs() < 1e-8);
            }
        }
        assert_eq!(quadrature(&[1.0, 2.0], 0.1), Err(QuadratureError::TooFewNodes(2)));
    }

    #[test]
    fn interval_rule_is_exact_for_cubics() {
        let f: Vec<f64> = (0..9).map(|i| { let x = 0.1 * i as f64; x * x * x - 2.0 * x }).collect();
        let exact = |x: f64| x.powi(4) / 4.0 - x * x;
        let c = cumulative(&f, 0.1, 0.0);
        for (i, v) in c.iter().enumerate() {
            assert!((v - exact(0.1 * i as f64)).abs() < 1e-14, "{i}");
        }
        let g = [1.0, 2.0, 5.0];
        assert!((cumulative(&g, 1.0, 0.0)[2] - 14.0 / 3.0).abs() < 1e-14);
        assert_eq!(cumulative(&[1.0, 3.0], 0.5, 1.0), vec![1.0, 2.0]);
        assert!(cumulative(&[], 0.5, 1.0).is_empty());
    }

    #[test]
    fn hermite_rule_is_exact_for_cubics() {
        let xs: Vec<f64> = (0..6).map(|i| 0.3 * i as f64).collect();
        let f: Vec<f64> = xs.iter().map(|x| x * x * x - x).collect();
        let df: Vec<f64> = xs.iter().map(|x| 3.0 * x * x - 1.0).collect();
        let c = cumulative_hermite(&f, &df, 0.3, 2.0);
        for (x, v) in xs.iter().zip(&c) {
            assert!((v - (2.0 + x.powi(4) / 4.0 - x * x / 2.0)).abs() < 1e-14);
        }
    }
}
