//! The acceptance suites as library code: each returns named metrics with
//! their bounds, so the CLI and the test harness share one implementation.

pub mod oracle;
mod suites;

use std::time::Instant;

use serde::Serialize;

use crate::par::Exec;

pub use suites::SUITE_NAMES;

/// Deliberate defects for checking that the suites notice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    /// Negate entry (row, col) of the formal adjoint ℋ*.
    AdjointSign { row: usize, col: usize },
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Smaller samples and spans; same tolerances.
    pub quick: bool,
    pub seed: u64,
    pub exec: Exec,
    pub fault: Option<Fault>,
    /// Run only these suite ids (1-based); empty means all.
    pub only: Vec<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            quick: false,
            seed: 0,
            exec: Exec::default(),
            fault: None,
            only: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
    pub passed: bool,
}

impl Metric {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            bound: Bound::AtMost,
            limit,
            passed: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            bound: Bound::AtLeast,
            limit,
            passed: value >= limit,
        }
    }

    /// A yes/no check recorded as 1 or 0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Metric::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl SuiteResult {
    pub fn failed_metrics(&self) -> Vec<&Metric> {
        self.metrics.iter().filter(|m| !m.passed).collect()
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub quick: bool,
    pub fault: Option<Fault>,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&SuiteResult> {
        self.suites.iter().filter(|s| !s.passed).collect()
    }
}

/// Collects metrics and notes while a suite runs.
#[derive(Default)]
pub(crate) struct Sink {
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
}

impl Sink {
    pub fn push(&mut self, m: Metric) {
        self.metrics.push(m);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Record an error as a failed check.
    pub fn error(&mut self, what: &str, e: impl std::fmt::Display) {
        self.metrics.push(Metric::holds(format!("{what} ran"), false));
        self.notes.push(format!("{what}: {e}"));
    }
}

pub fn run_suite(id: usize, opts: &VerifyOptions) -> SuiteResult {
    let t0 = Instant::now();
    let mut sink = Sink::default();
    suites::run(id, opts, &mut sink);
    let passed = !sink.metrics.is_empty() && sink.metrics.iter().all(|m| m.passed);
    SuiteResult {
        id,
        name: SUITE_NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown").to_string(),
        passed,
        metrics: sink.metrics,
        notes: sink.notes,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

/// Suites with runtime bounds run alone first so that timings are not
/// inflated by the others; the rest go through `exec`.
pub fn run_all(opts: &VerifyOptions) -> VerifyReport {
    let ids: Vec<usize> = if opts.only.is_empty() {
        (1..=SUITE_NAMES.len()).collect()
    } else {
        opts.only.iter().copied().filter(|i| (1..=SUITE_NAMES.len()).contains(i)).collect()
    };
    let timed = [1usize, 6];
    let mut suites: Vec<SuiteResult> = ids.iter().filter(|i| timed.contains(i)).map(|&i| run_suite(i, opts)).collect();
    let rest: Vec<usize> = ids.iter().copied().filter(|i| !timed.contains(i)).collect();
    suites.extend(opts.exec.map(&rest, |&i| run_suite(i, opts)));
    suites.sort_by_key(|s| s.id);
    VerifyReport {
        seed: opts.seed,
        quick: opts.quick,
        fault: opts.fault,
        passed: !suites.is_empty() && suites.iter().all(|s| s.passed),
        suites,
    }
}
