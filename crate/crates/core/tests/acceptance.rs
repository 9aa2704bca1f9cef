//! Acceptance criteria 1-10, one PASS/FAIL line each.
//!
//! Tolerances are pinned here rather than taken from the library: every
//! metric a suite reports must match an entry of `PINNED` with the same
//! bound, and its value is judged against the pinned limit.

use std::process::ExitCode;

use rmframe::verify::{run_suite, Bound, SuiteResult, VerifyOptions};

use Bound::{AtLeast, AtMost};

/// (criterion, metric name suffix, bound, limit)
const PINNED: &[(usize, &str, Bound, f64)] = &[
    (1, "max |V.P'|", AtMost, 1e-8),
    (1, "max ||V| - 1|", AtMost, 1e-8),
    (1, "max |Q23|", AtMost, 1e-6),
    (1, "seconds", AtMost, 10.0),
    (2, "max |sqrt(k1^2+k2^2) - 1/2|", AtMost, 1e-5),
    (2, "max |tau_rm - 1/2|", AtMost, 1e-5),
    (2, "max |theta_s - tau|", AtMost, 1e-5),
    (3, "max relative |E - Gateaux|", AtMost, 1e-6),
    (4, "first-order torsion: mu", AtLeast, 1.0),
    (4, "first-order torsion: lambda", AtLeast, 1.0),
    (4, "first-order torsion: E^Y", AtLeast, 1.0),
    (4, "first-order torsion: E^Z", AtLeast, 1.0),
    (4, "second-order torsion: mu", AtLeast, 1.0),
    (4, "second-order torsion: lambda", AtLeast, 1.0),
    (4, "second-order torsion: E^Y", AtLeast, 1.0),
    (4, "second-order torsion: E^Z", AtLeast, 1.0),
    (5, "max relative |<H phi,psi> - <phi,H* psi>|", AtMost, 1e-6),
    (5, "ratio-squared: row 1 of H*E vanishes", AtLeast, 1.0),
    (5, "first-order-torsion: row 1 of H*E vanishes", AtLeast, 1.0),
    (5, "second-order-torsion: row 1 of H*E vanishes", AtLeast, 1.0),
    (6, "c drift", AtMost, 1e-6),
    (6, "|w1|^2 drift", AtMost, 1e-6),
    (6, "w1.Dw2 drift", AtMost, 1e-6),
    (6, "seconds", AtMost, 30.0),
    (7, "rows 5-6 vanish symbolically", AtLeast, 1.0),
    (7, "rows 1-4 along solution", AtMost, 1e-6),
    (8, "position rms vs original", AtMost, 1e-4),
    (8, "position rms vs direct oracle", AtMost, 1e-4),
    (8, "max |sigma c1 - w1|", AtMost, 1e-6),
    (9, "observed order", AtLeast, 1.9),
    (10, "max torus deviation", AtMost, 1e-6),
    (10, "closed tube has Euler characteristic 0", AtLeast, 1.0),
    (10, "no degenerate triangles", AtLeast, 1.0),
    (10, "Frenet / RM max twist", AtLeast, 10.0),
];

/// Fixtures each criterion must cover, by metric name prefix.
const REQUIRED: &[(usize, &[&str])] = &[
    (6, &["ratio-squared: ", "first-order-torsion: ", "second-order-torsion: "]),
    (7, &["ratio-squared: ", "first-order-torsion: ", "second-order-torsion: "]),
];

fn judge(id: usize, r: &SuiteResult) -> Vec<String> {
    let mut problems = Vec::new();
    let pins: Vec<_> = PINNED.iter().filter(|p| p.0 == id).collect();
    for m in &r.metrics {
        let Some(&&(_, _, bound, limit)) = pins.iter().find(|p| m.name.ends_with(p.1)) else {
            problems.push(format!("unpinned metric `{}`", m.name));
            continue;
        };
        if m.bound != bound || m.limit != limit {
            problems.push(format!("`{}` uses limit {:e}, pinned {:e}", m.name, m.limit, limit));
        }
        let ok = match bound {
            AtMost => m.value <= limit,
            AtLeast => m.value >= limit,
        };
        if !ok {
            problems.push(format!("`{}` = {:e} (limit {:e})", m.name, m.value, limit));
        }
    }
    for p in &pins {
        if !r.metrics.iter().any(|m| m.name.ends_with(p.1)) {
            problems.push(format!("missing metric `{}`", p.1));
        }
    }
    for (_, prefixes) in REQUIRED.iter().filter(|q| q.0 == id) {
        for pre in prefixes.iter() {
            if !r.metrics.iter().any(|m| m.name.starts_with(pre)) {
                problems.push(format!("no result for `{}`", pre.trim_end_matches(": ")));
            }
        }
    }
    if !r.passed && problems.is_empty() {
        problems.push("suite reported failure".into());
    }
    problems
}

fn main() -> ExitCode {
    let opts = VerifyOptions::default();
    let mut failed = 0;
    for id in 1..=10 {
        let r = run_suite(id, &opts);
        let problems = judge(id, &r);
        let status = if problems.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {:<28} {status}  ({:.2} s)", r.name, r.seconds);
        for m in &r.metrics {
            println!("    {:<52} {:>12.4e}", m.name, m.value);
        }
        for p in &problems {
            println!("    FAIL: {p}");
        }
        for n in &r.notes {
            println!("    note: {n}");
        }
        failed += usize::from(!problems.is_empty());
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
