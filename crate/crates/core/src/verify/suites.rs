use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::frames::curve::diff_scalar;
use crate::frames::{
    default_normal, frenet_frame, gauge_relations, normal_drift, rm_frame_integrate, rm_frames_batch, rm_invariants, tau_from_rm, CatalogCurve, RmOptions, Vec3,
    EPS_INFLECTION,
};
use crate::jet::{euler_generic, lambda_generic, parse_expression, parse_lagrangian, Base, JetVar, RationalFn};
use crate::reconstruct::{compare, reconstruct, sweep_surface, twist_metric, PipelineOptions};
use crate::variational::fixtures::{self, Fixture};
use crate::variational::noether::constants_from;
use crate::variational::{
    assemble_el_system, check_diffv, compatibility_order, conservation_constants, first_integrals, solve_el, syzygy_symbolic, trajectory_from_invariants, ElSystem,
    HelixPitchFamily, InvariantTrajectory, LinOpMatrix, SolveOptions,
};

use super::oracle::{adjoint_check, gateaux_check, random_lagrangian};
use super::{Fault, Metric, Sink, VerifyOptions};

pub const SUITE_NAMES: [&str; 10] = [
    "rm-frame-properties",
    "gauge-relations",
    "euler-operator-oracle",
    "el-regression",
    "adjoint-identity",
    "conservation-drift",
    "noether-structure",
    "reconstruction-round-trip",
    "syzygy-compatibility",
    "sweep-surface",
];

pub(super) fn run(id: usize, opts: &VerifyOptions, sink: &mut Sink) {
    match id {
        1 => rm_frame_properties(opts, sink),
        2 => gauge(sink),
        3 => euler_oracle(opts, sink),
        4 => el_regression(sink),
        5 => adjoint_identity(opts, sink),
        6 => conservation(opts, sink),
        7 => noether_structure(opts, sink),
        8 => round_trip(opts, sink),
        9 => compatibility(sink),
        10 => sweep(opts, sink),
        _ => sink.error("suite", format!("no suite {id}")),
    }
}

fn rm_frame_properties(opts: &VerifyOptions, sink: &mut Sink) {
    let t0 = Instant::now();
    let count = if opts.quick { 4 } else { 20 };
    let seeds: Vec<u64> = (0..count).map(|i| opts.seed.wrapping_mul(1000).wrapping_add(i)).collect();
    let curves = opts.exec.map(&seeds, |&seed| CatalogCurve::RandomFourier { seed, modes: 3 }.sample(10.0, 1e-3));
    let v0: Vec<Vec3> = curves.iter().map(|c| default_normal(&c.d1[0])).collect();
    let frames = rm_frames_batch(&curves, &v0, RmOptions::default(), opts.exec);
    let (mut dot, mut norm, mut rm) = (0.0f64, 0.0f64, 0.0f64);
    for (c, f) in curves.iter().zip(frames) {
        match f {
            Ok(f) => {
                let (d, n) = normal_drift(&f, c);
                dot = dot.max(d);
                norm = norm.max(n);
                rm = rm.max(f.rm_constraint_residual());
            }
            Err(e) => return sink.error("rm frame", e),
        }
    }
    sink.note(format!("{count} random Fourier curves, s in [0, 10], ds = 1e-3"));
    sink.push(Metric::at_most("max |V.P'|", dot, 1e-8));
    sink.push(Metric::at_most("max ||V| - 1|", norm, 1e-8));
    sink.push(Metric::at_most("max |Q23|", rm, 1e-6));
    sink.push(Metric::at_most("seconds", t0.elapsed().as_secs_f64(), 10.0));
}

fn gauge(sink: &mut Sink) {
    let c = CatalogCurve::Helix { a: 1.0, b: 1.0 }.sample(10.0, 1e-3);
    let run = || -> Result<(f64, f64, f64), Box<dyn std::error::Error>> {
        let (_, fs) = frenet_frame(&c, EPS_INFLECTION)?;
        let rm = rm_frame_integrate(&c, default_normal(&c.d1[0]), RmOptions::default())?;
        let inv = rm_invariants(&rm, &c)?;
        let report = gauge_relations(&fs, &inv, 1e-6)?;
        let (k1, k2) = (inv.kappa1.clone().unwrap_or_default(), inv.kappa2.clone().unwrap_or_default());
        let h = c.ds();
        let (k1s, k2s) = (diff_scalar(&k1, h, 1), diff_scalar(&k2, h, 1));
        let (mut dk, mut dt) = (0.0f64, 0.0f64);
        for i in 0..k1.len() {
            dk = dk.max(((k1[i] * k1[i] + k2[i] * k2[i]).sqrt() - 0.5).abs());
            dt = dt.max((tau_from_rm(k1[i], k2[i], k1s[i], k2s[i]) - 0.5).abs());
        }
        Ok((dk, dt, report.theta_s_residual))
    };
    match run() {
        Ok((dk, dt, th)) => {
            sink.note("helix with curvature and torsion 1/2, length 10, ds = 1e-3");
            sink.push(Metric::at_most("max |sqrt(k1^2+k2^2) - 1/2|", dk, 1e-5));
            sink.push(Metric::at_most("max |tau_rm - 1/2|", dt, 1e-5));
            sink.push(Metric::at_most("max |theta_s - tau|", th, 1e-5));
        }
        Err(e) => sink.error("gauge", e),
    }
}

fn euler_oracle(opts: &VerifyOptions, sink: &mut Sink) {
    let count = if opts.quick { 3 } else { 10 };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let jobs: Vec<(String, u64)> = (0..count).map(|i| (random_lagrangian(&mut rng), opts.seed.wrapping_mul(1000).wrapping_add(i))).collect();
    let checks = opts.exec.map(&jobs, |(l, seed)| gateaux_check(l, *seed));
    let mut worst = 0.0f64;
    for c in checks {
        match c {
            Ok(c) => {
                let r = c.relative[0].max(c.relative[1]);
                sink.note(format!("{:.3e}  {}", r, c.lagrangian));
                worst = worst.max(r);
            }
            Err(e) => return sink.error("gateaux", e),
        }
    }
    sink.push(Metric::at_most("max relative |E - Gateaux|", worst, 1e-6));
}

fn rf(s: &str) -> Result<RationalFn, String> {
    parse_expression(s).map_err(|e| e.to_string())?.canonical().map_err(|e| e.to_string())
}

fn system(f: &Fixture) -> Result<ElSystem, String> {
    let l = parse_lagrangian(f.lagrangian).map_err(|e| e.to_string())?;
    assemble_el_system(&l).map_err(|e| e.to_string())
}

fn el_regression(sink: &mut Sink) {
    let run = |sink: &mut Sink| -> Result<(), String> {
        let s = system(&fixtures::first_order_torsion())?;
        let closed = s.mu_closed_form.clone().ok_or("no closed-form mu")?;
        sink.push(Metric::holds("first-order torsion: mu", closed.equivalent(&rf("k1^2 + k2^2")?)));
        sink.push(Metric::holds("first-order torsion: lambda", s.lambda.equivalent(&rf("2*(k1_s*k2 - k1*k2_s)")?)));
        let [y, z] = s.residuals_with_closed_mu().ok_or("no closed-form residuals")?;
        sink.push(Metric::holds("first-order torsion: E^Y", y.equivalent(&rf("2*k2_sss + 3*k2_s*(k1^2 + k2^2)")?)));
        sink.push(Metric::holds("first-order torsion: E^Z", z.equivalent(&rf("-2*k1_sss - 3*k1_s*(k1^2 + k2^2)")?)));

        let s = system(&fixtures::second_order_torsion())?;
        let lam = rf("2*k2_sss*k1 - 2*k1_s*k2_ss + 2*k2_s*k1_ss - 2*k2*k1_sss")?;
        let mu_cf = rf("k1_s^2 + k2_s^2 - 2*(k1*k1_ss + k2*k2_ss)")?;
        sink.push(Metric::holds("second-order torsion: lambda", s.lambda.equivalent(&lam)));
        let closed = s.mu_closed_form.clone().ok_or("no closed-form mu")?;
        sink.push(Metric::holds("second-order torsion: mu", closed.equivalent(&mu_cf)));
        let mu = RationalFn::var(JetVar::mu(0));
        let k1 = RationalFn::var(JetVar::k1(0));
        let k2 = RationalFn::var(JetVar::k2(0));
        let ey = rf("-2*k2_sssss")?.add(&k2.mul(&mu).total_derivative()).sub(&k1.mul(&lam));
        let ez = rf("2*k1_sssss")?.sub(&k1.mul(&mu).total_derivative()).sub(&k2.mul(&lam));
        sink.push(Metric::holds("second-order torsion: E^Y", s.raw[1].equivalent(&ey)));
        sink.push(Metric::holds("second-order torsion: E^Z", s.raw[2].equivalent(&ez)));
        Ok(())
    };
    if let Err(e) = run(sink) {
        sink.error("el regression", e);
    }
}

fn adjoint(opts: &VerifyOptions) -> LinOpMatrix {
    let a = syzygy_symbolic().adjoint();
    match opts.fault {
        Some(Fault::AdjointSign { row, col }) if row < 4 && col < 4 => a.with_negated_entry(row, col),
        _ => a,
    }
}

fn adjoint_identity(opts: &VerifyOptions, sink: &mut Sink) {
    let h = syzygy_symbolic();
    let adj = adjoint(opts);
    if let Some(f) = opts.fault {
        sink.note(format!("fault injected: {f:?}"));
    }
    let count = if opts.quick { 3 } else { 10 };
    let seeds: Vec<u64> = (0..count).map(|i| opts.seed.wrapping_mul(1000).wrapping_add(i)).collect();
    let mut worst = 0.0f64;
    for r in opts.exec.map(&seeds, |&s| adjoint_check(&h, &adj, s)) {
        match r {
            Ok(c) => worst = worst.max(c.relative),
            Err(e) => return sink.error("adjoint identity", e),
        }
    }
    sink.push(Metric::at_most("max relative |<H phi,psi> - <phi,H* psi>|", worst, 1e-6));
    for f in fixtures::worked_examples() {
        let row = parse_lagrangian(f.lagrangian).map_err(|e| e.to_string()).and_then(|l| l.canonical().map_err(|e| e.to_string()));
        match row {
            Ok(l) => {
                let e = [lambda_generic(&l), euler_generic(&l, Base::Kappa1), euler_generic(&l, Base::Kappa2), RationalFn::var(JetVar::mu(0))];
                sink.push(Metric::holds(format!("{}: row 1 of H*E vanishes", f.name), adj.apply(&e)[0].is_zero()));
            }
            Err(e) => sink.error(f.name, e),
        }
    }
}

fn solve_fixture(f: &Fixture, quick: bool) -> Result<(ElSystem, InvariantTrajectory), String> {
    let sys = system(f)?;
    let span = if quick { (f.span.0, f.span.0 + 1.0) } else { f.span };
    let traj = solve_el(&sys, &f.ic_map(), span, 1e-3, &SolveOptions::default()).map_err(|e| e.to_string())?;
    Ok((sys, traj))
}

fn conservation(opts: &VerifyOptions, sink: &mut Sink) {
    for f in fixtures::worked_examples() {
        let t0 = Instant::now();
        let run = || -> Result<(f64, [f64; 2], f64), String> {
            let (_, traj) = solve_fixture(&f, opts.quick)?;
            let frame = traj.frame_field().ok_or("no frame")?;
            let curve = traj.curve().ok_or("no curve")?;
            let ns = conservation_constants(&traj, &frame, &curve).map_err(|e| e.to_string())?;
            let fi = first_integrals(&traj.v, Some(&ns.c));
            Ok((ns.max_relative_drift(), fi.relative_drift, *traj.s.last().unwrap_or(&0.0)))
        };
        match run() {
            Ok((c, fi, end)) => {
                sink.note(format!("{}: solved to s = {end:.4}", f.name));
                sink.push(Metric::at_most(format!("{}: c drift", f.name), c, 1e-6));
                sink.push(Metric::at_most(format!("{}: |w1|^2 drift", f.name), fi[0], 1e-6));
                sink.push(Metric::at_most(format!("{}: w1.Dw2 drift", f.name), fi[1], 1e-6));
                sink.push(Metric::at_most(format!("{}: seconds", f.name), t0.elapsed().as_secs_f64(), 30.0));
            }
            Err(e) => sink.error(f.name, e),
        }
    }
}

fn noether_structure(opts: &VerifyOptions, sink: &mut Sink) {
    for f in fixtures::worked_examples() {
        match solve_fixture(&f, opts.quick) {
            Ok((sys, traj)) => {
                let d = check_diffv(&traj, &sys);
                sink.push(Metric::holds(format!("{}: rows 5-6 vanish symbolically", f.name), d.symbolic_rows_5_6_vanish));
                let rows: f64 = d.pointwise_relative[..4].iter().copied().fold(0.0, f64::max);
                sink.push(Metric::at_most(format!("{}: rows 1-4 along solution", f.name), rows, 1e-6));
                sink.note(format!("{}: finite-difference cross-check {:.3e}", f.name, d.fd_relative[..4].iter().copied().fold(0.0, f64::max)));
            }
            Err(e) => sink.error(f.name, e),
        }
    }
}

fn round_trip(opts: &VerifyOptions, sink: &mut Sink) {
    let (a, b) = (1.0, 1.0);
    let length = if opts.quick { 5.0 } else { 10.0 };
    let run = |sink: &mut Sink| -> Result<(), String> {
        let curve = CatalogCurve::Helix { a, b }.sample(length, 1e-3);
        let rm = rm_frame_integrate(&curve, default_normal(&curve.d1[0]), RmOptions::default()).map_err(|e| e.to_string())?;
        let inv = rm_invariants(&rm, &curve).map_err(|e| e.to_string())?;
        let sys = system(&fixtures::elastic())?;
        let (kappa, tau) = (a / (a * a + b * b), b / (a * a + b * b));
        let mu0 = (tau * tau - 0.5 * kappa * kappa) / tau;
        let (k1, k2) = (inv.kappa1.unwrap_or_default(), inv.kappa2.unwrap_or_default());
        let traj = trajectory_from_invariants(&sys, &curve.s, &k1, &k2, mu0).map_err(|e| e.to_string())?;
        let ns = constants_from(&traj.v, &rm.rows, &curve.points).map_err(|e| e.to_string())?;
        let r = reconstruct(&traj, &ns.c, &PipelineOptions::default()).map_err(|e| e.to_string())?;
        let vs = compare(&r.position.curve, &r.sigma.frame.rows, &curve, &rm.rows).map_err(|e| e.to_string())?;
        let direct = r.direct.clone().ok_or("no direct comparison")?;
        sink.note(format!("helix a = {a}, b = {b}, length {length}, ds = 1e-3; case log {:?}", r.sigma.case_log));
        sink.push(Metric::at_most("position rms vs original", vs.position_rms, 1e-4));
        sink.push(Metric::at_most("position rms vs direct oracle", direct.position_rms, 1e-4));
        sink.push(Metric::at_most("max |sigma c1 - w1|", r.sigma.c1_residual, 1e-6));
        sink.note(format!("frame distance vs original {:.3e}, vs direct {:.3e}", vs.frame_distance, direct.frame_distance));
        Ok(())
    };
    if let Err(e) = run(sink) {
        sink.error("round trip", e);
    }
}

fn compatibility(sink: &mut Sink) {
    match compatibility_order(&HelixPitchFamily::default(), 2.0, 0.3, 0.02) {
        Ok((a, b, order)) => {
            sink.note(format!("residual {:.3e} at h = {}, {:.3e} at h = {}", a.max, a.h, b.max, b.h));
            sink.push(Metric::at_least("observed order", order, 1.9));
        }
        Err(e) => sink.error("compatibility", e),
    }
}

fn sweep(opts: &VerifyOptions, sink: &mut Sink) {
    let (major, minor) = (2.0, 0.5);
    let circle = CatalogCurve::Circle { radius: major }.sample(2.0 * std::f64::consts::PI * major, 0.01);
    let run = |sink: &mut Sink| -> Result<(), String> {
        let f = rm_frame_integrate(&circle, Vec3::new(-1.0, 0.0, 0.0), RmOptions::default()).map_err(|e| e.to_string())?;
        let mesh = sweep_surface(&circle, &f, minor, 32, opts.exec).map_err(|e| e.to_string())?;
        let dev = mesh
            .vertices
            .iter()
            .map(|p| {
                let q = (p.x * p.x + p.y * p.y).sqrt() - major;
                ((q * q + p.z * p.z).sqrt() - minor).abs()
            })
            .fold(0.0, f64::max);
        let st = mesh.stats();
        sink.push(Metric::at_most("max torus deviation", dev, 1e-6));
        sink.push(Metric::holds("closed tube has Euler characteristic 0", st.euler_characteristic == 0));
        sink.push(Metric::holds("no degenerate triangles", st.degenerate_triangles == 0));

        let c = CatalogCurve::Inflection { a: 1.0, b: 0.01 }.sample(4.0, 1e-3);
        let (fs, _) = frenet_frame(&c, EPS_INFLECTION).map_err(|e| e.to_string())?;
        let rm = rm_frame_integrate(&c, default_normal(&c.d1[0]), RmOptions::default()).map_err(|e| e.to_string())?;
        let (tf, tr) = (twist_metric(&fs), twist_metric(&rm));
        sink.note(format!("twist on (t, t^3, 0.01 t^2): Frenet max {:.3e} total {:.3e}, RM max {:.3e} total {:.3e}", tf.max, tf.total, tr.max, tr.total));
        sink.push(Metric::at_least("Frenet / RM max twist", tf.max / tr.max, 10.0));
        Ok(())
    };
    if let Err(e) = run(sink) {
        sink.error("sweep", e);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_and_compatibility_suites_pass() {
        let opts = VerifyOptions::default();
        for id in [4, 9] {
            let r = super::super::run_suite(id, &opts);
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn sign_flip_fails_the_adjoint_suite() {
        let opts = VerifyOptions {
            quick: true,
            fault: Some(Fault::AdjointSign { row: 0, col: 1 }),
            ..VerifyOptions::default()
        };
        let r = super::super::run_suite(5, &opts);
        assert!(!r.passed);
        assert!(r.failed_metrics().iter().any(|m| m.name.contains("<H phi,psi>")));
    }

    #[test]
    fn unknown_suite_fails() {
        assert!(!super::super::run_suite(11, &VerifyOptions::default()).passed);
    }
}
