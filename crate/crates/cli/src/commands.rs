use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use serde::Serialize;

use rmframe::frames::curve::diff_scalar;
use rmframe::frames::io::{csv_line, read_curve_csv, read_curve_json, write_curve_csv, write_frame_csv, write_invariants_csv};
use rmframe::frames::{
    frenet_frame, gauge_relations, normal_drift, normal_from_psi, recurrence_residual, rm_frame_integrate, rm_invariants, tau_from_rm, CurveSamples, FrameField,
    GaugeData, GaugeReport, Mat3, RmOptions, Vec3, EPS_INFLECTION,
};
use rmframe::jet::parse_lagrangian;
use rmframe::par::Exec;
use rmframe::reconstruct::{reconstruct, reconstruct_direct, sweep_surface, twist_metric, Mesh, MeshStats, PipelineOptions, ReconstructError, ReconstructionReport, SigmaOptions};
use rmframe::reconstruct::sweep::TwistStats;
use rmframe::variational::fixtures::{self, Fixture};
use rmframe::variational::io::{read_trajectory_csv, write_trajectory_csv};
use rmframe::variational::{
    assemble_el_system_with, conservation_constants, first_integrals, noether_vector, solve_el, syzygy_symbolic, ElSystem, FrameInit, InvariantTrajectory, SolveOptions,
};
use rmframe::verify::{run_all, Fault, VerifyOptions, VerifyReport};

use crate::config::{parse_curve, Command, FrameChoice, MeshFormat, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Module(String),
    #[error("{path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error("integration stopped early at s = {s}: {reason}")]
    Truncated { s: f64, reason: String },
    #[error("{0}")]
    Inadmissible(String),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Truncated { .. } => 3,
            CliError::Inadmissible(_) => 4,
            _ => 2,
        }
    }
}

fn module(e: impl std::fmt::Display) -> CliError {
    CliError::Module(e.to_string())
}

fn warn(msg: impl std::fmt::Display) {
    eprintln!("warning: {msg}");
}

/// Where a command writes its files.
pub struct Outputs {
    pub dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|err| CliError::Io { path: dir.clone(), err })?;
        Ok(Outputs { dir, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let io = |err| CliError::Io { path: path.clone(), err };
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        f(&mut w).and_then(|_| w.flush()).map_err(io)?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }
}

fn exec(cfg: &RunConfig) -> Exec {
    if cfg.parallel.unwrap_or(true) {
        Exec::Parallel
    } else {
        Exec::Sequential
    }
}

fn load_curve(cfg: &RunConfig) -> Result<CurveSamples, CliError> {
    let ds = cfg.ds.unwrap_or(1e-3);
    if !(ds > 0.0) {
        return Err(CliError::Config(format!("ds must be positive, got {ds}")));
    }
    if let Some(path) = &cfg.input {
        let file = File::open(path).map_err(|err| CliError::Io { path: path.clone(), err })?;
        let raw = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => read_curve_json(file),
            _ => read_curve_csv(file),
        }
        .map_err(module)?;
        return raw.into_samples(ds).map_err(module);
    }
    let spec = cfg.curve.as_deref().unwrap_or("helix a=1 b=1");
    let curve = parse_curve(spec).map_err(CliError::Config)?;
    let length = cfg.length.unwrap_or(10.0);
    if !(length > 0.0) {
        return Err(CliError::Config(format!("length must be positive, got {length}")));
    }
    Ok(curve.sample(length, ds))
}

fn initial_normal(cfg: &RunConfig, c: &CurveSamples) -> Result<Vec3, CliError> {
    match (cfg.v0, cfg.psi0) {
        (Some(v), _) => Ok(Vec3::from(v)),
        (None, Some(psi)) => Ok(normal_from_psi(&c.d1[0], psi)),
        (None, None) => Err(CliError::Config("the RM frame needs an initial normal: set v0 or psi0".into())),
    }
}

#[derive(Serialize)]
struct FrameResiduals {
    nodes: usize,
    rm: Option<RmResiduals>,
    frenet_orthonormality: Option<f64>,
    gauge: Option<GaugeReport>,
}

#[derive(Serialize)]
struct RmResiduals {
    orthonormality: f64,
    determinant: f64,
    rm_constraint: f64,
    skew: f64,
    recurrence: f64,
    max_v_dot_tangent: f64,
    max_v_norm_error: f64,
}

pub fn cmd_frame(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let c = load_curve(cfg)?;
    if c.len() < 2 {
        return Err(CliError::Config("curve needs at least two samples".into()));
    }
    let choice = cfg.frame.unwrap_or(FrameChoice::Both);
    let fs = match choice {
        FrameChoice::Rm => None,
        _ => Some(frenet_frame(&c, EPS_INFLECTION).map_err(module)?),
    };
    let rm = match choice {
        FrameChoice::Frenet => None,
        _ => Some(rm_frame_integrate(&c, initial_normal(cfg, &c)?, RmOptions::default()).map_err(module)?),
    };
    let rm_inv = rm.as_ref().map(|f| rm_invariants(f, &c)).transpose().map_err(module)?;
    let mut inv = GaugeData {
        s: c.s.clone(),
        ..GaugeData::default()
    };
    if let Some((_, g)) = &fs {
        inv.kappa = g.kappa.clone();
        inv.tau = g.tau.clone();
    } else if let Some(g) = &rm_inv {
        let (k1, k2) = (g.kappa1.clone().unwrap_or_default(), g.kappa2.clone().unwrap_or_default());
        let h = c.ds();
        let (k1s, k2s) = (diff_scalar(&k1, h, 1), diff_scalar(&k2, h, 1));
        inv.kappa = Some(k1.iter().zip(&k2).map(|(a, b)| a.hypot(*b)).collect());
        inv.tau = Some((0..k1.len()).map(|i| tau_from_rm(k1[i], k2[i], k1s[i], k2s[i])).collect());
    }
    if let Some(g) = &rm_inv {
        inv.kappa1 = g.kappa1.clone();
        inv.kappa2 = g.kappa2.clone();
        inv.theta = g.theta.clone();
    }
    let gauge = match (&fs, &rm_inv) {
        (Some((_, f)), Some(r)) => Some(gauge_relations(f, r, 1e-6).map_err(module)?),
        _ => None,
    };
    let main: &FrameField = rm.as_ref().or(fs.as_ref().map(|(f, _)| f)).expect("one frame is always computed");
    out.write("frames.csv", |w| write_frame_csv(w, main))?;
    if let (Some((f, _)), Some(_)) = (&fs, &rm) {
        out.write("frames_frenet.csv", |w| write_frame_csv(w, f))?;
    }
    out.write("invariants.csv", |w| write_invariants_csv(w, &inv))?;
    let residuals = FrameResiduals {
        nodes: c.len(),
        rm: rm.as_ref().map(|f| {
            let (dot, norm) = normal_drift(f, &c);
            RmResiduals {
                orthonormality: f.orthonormality_error(),
                determinant: f.determinant_error(),
                rm_constraint: f.rm_constraint_residual(),
                skew: f.skew_error(),
                recurrence: recurrence_residual(f, &c),
                max_v_dot_tangent: dot,
                max_v_norm_error: norm,
            }
        }),
        frenet_orthonormality: fs.as_ref().map(|(f, _)| f.orthonormality_error()),
        gauge,
    };
    out.json("residuals.json", &residuals)
}

struct Problem {
    lagrangian: String,
    fixture: Option<Fixture>,
}

fn problem(cfg: &RunConfig) -> Result<Problem, CliError> {
    let fixture = match &cfg.fixture {
        Some(name) => Some(fixtures::by_name(name).ok_or_else(|| CliError::Config(format!("unknown fixture `{name}`")))?),
        None => None,
    };
    let lagrangian = match (&cfg.lagrangian, &fixture) {
        (Some(l), _) => l.clone(),
        (None, Some(f)) => f.lagrangian.to_string(),
        (None, None) => return Err(CliError::Config("set lagrangian or fixture".into())),
    };
    Ok(Problem { lagrangian, fixture })
}

fn assemble(cfg: &RunConfig, p: &Problem) -> Result<ElSystem, CliError> {
    let l = parse_lagrangian(&p.lagrangian).map_err(|e| CliError::Module(format!("lagrangian: {e}")))?;
    let lc = BigRational::from_float(cfg.lambda_constant.unwrap_or(0.0)).ok_or_else(|| CliError::Config("lambda_constant must be finite".into()))?;
    assemble_el_system_with(&l, &syzygy_symbolic(), lc).map_err(module)
}

fn sigma0(cfg: &RunConfig) -> Mat3 {
    cfg.sigma0.map(|s| Mat3::from_row_slice(&s)).unwrap_or_else(Mat3::identity)
}

fn solve(cfg: &RunConfig, p: &Problem, sys: &ElSystem) -> Result<InvariantTrajectory, CliError> {
    let mut ics = p.fixture.as_ref().map(|f| f.ic_map()).unwrap_or_default();
    ics.extend(cfg.ics.clone());
    let (a, b) = p.fixture.as_ref().map(|f| f.span).unwrap_or((0.0, 5.0));
    let span = (cfg.span_start.unwrap_or(a), cfg.span_end.unwrap_or(b));
    let opts = SolveOptions {
        frame: Some(FrameInit {
            sigma0: sigma0(cfg),
            p0: cfg.p0.map(Vec3::from).unwrap_or_else(Vec3::zeros),
        }),
        singular_tol: cfg.singular_tol.unwrap_or(1e-10),
        ..SolveOptions::default()
    };
    solve_el(sys, &ics, span, cfg.ds.unwrap_or(1e-3), &opts).map_err(module)
}

#[derive(Serialize)]
struct NoetherDoc {
    lagrangian: String,
    span_solved: [f64; 2],
    truncated: Option<rmframe::variational::Truncation>,
    noether_vector: Vec<String>,
    c: Option<[f64; 6]>,
    drift: Option<[f64; 6]>,
    relative_drift: Option<[f64; 6]>,
    max_relative_drift: Option<f64>,
    first_integral_reference: Option<[f64; 2]>,
    first_integral_relative_drift: Option<[f64; 2]>,
}

#[derive(serde::Deserialize)]
struct NoetherC {
    c: Option<[f64; 6]>,
}

pub fn cmd_solve(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let p = problem(cfg)?;
    let sys = assemble(cfg, &p)?;
    let traj = solve(cfg, &p, &sys)?;
    out.write("el_system.txt", |w| w.write_all(sys.to_text().as_bytes()))?;
    out.write("trajectory.csv", |w| write_trajectory_csv(w, &traj))?;
    let mut doc = NoetherDoc {
        lagrangian: p.lagrangian.clone(),
        span_solved: [traj.s.first().copied().unwrap_or(0.0), traj.s.last().copied().unwrap_or(0.0)],
        truncated: traj.truncated.clone(),
        noether_vector: noether_vector(&sys).to_expressions().iter().map(|e| e.to_string()).collect(),
        c: None,
        drift: None,
        relative_drift: None,
        max_relative_drift: None,
        first_integral_reference: None,
        first_integral_relative_drift: None,
    };
    let constants = match (traj.frame_field(), traj.curve()) {
        (Some(f), Some(c)) if traj.len() >= 2 => conservation_constants(&traj, &f, &c).ok(),
        _ => None,
    };
    match &constants {
        Some(ns) => {
            let fi = first_integrals(&traj.v, Some(&ns.c));
            doc.c = Some(ns.c);
            doc.drift = Some(ns.drift);
            doc.relative_drift = Some(ns.relative_drift);
            doc.max_relative_drift = Some(ns.max_relative_drift());
            doc.first_integral_reference = Some(fi.reference);
            doc.first_integral_relative_drift = Some(fi.relative_drift);
            out.write("first_integrals.csv", |w| {
                writeln!(w, "s,w1_squared,w1_d_w2,residual_w1_squared,residual_w1_d_w2")?;
                for i in 0..traj.len() {
                    writeln!(w, "{}", csv_line([traj.s[i], fi.w1_squared[i], fi.w1_d_w2[i], fi.residual[0][i], fi.residual[1][i]]))?;
                }
                Ok(())
            })?;
        }
        None => {
            warn("trajectory too short for conservation checks; c not computed");
            out.write("first_integrals.csv", |w| writeln!(w, "s,w1_squared,w1_d_w2,residual_w1_squared,residual_w1_d_w2"))?;
        }
    }
    out.json("noether.json", &doc)?;
    if let Some(t) = &traj.truncated {
        return Err(CliError::Truncated { s: t.s, reason: t.reason.clone() });
    }
    Ok(())
}

#[derive(Serialize)]
struct ReconstructDoc {
    method: &'static str,
    noether: Option<ReconstructionReport>,
    mesh: MeshStats,
    warnings: Vec<String>,
}

fn noether_c(cfg: &RunConfig, traj: &InvariantTrajectory) -> Result<[f64; 6], CliError> {
    if let Some(c) = cfg.c {
        return Ok(c);
    }
    let sibling = cfg.input.as_ref().and_then(|p| p.parent()).map(|d| d.join("noether.json"));
    if let Some(path) = cfg.noether.clone().or(sibling.filter(|p| p.exists())) {
        let text = std::fs::read_to_string(&path).map_err(|err| CliError::Io { path: path.clone(), err })?;
        let doc: NoetherC = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(c) = doc.c {
            return Ok(c);
        }
    }
    match (traj.frame_field(), traj.curve()) {
        (Some(f), Some(c)) => Ok(conservation_constants(traj, &f, &c).map_err(module)?.c),
        _ => Err(CliError::Config("no conservation constants: set c, provide noether.json, or a trajectory with frame columns".into())),
    }
}

pub fn cmd_reconstruct(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let mut warnings = Vec::new();
    let (traj, fixture) = match &cfg.input {
        Some(path) => {
            let f = File::open(path).map_err(|err| CliError::Io { path: path.clone(), err })?;
            (read_trajectory_csv(f).map_err(module)?, None)
        }
        None => {
            let p = problem(cfg)?;
            let sys = assemble(cfg, &p)?;
            let t = solve(cfg, &p, &sys)?;
            if let Some(tr) = &t.truncated {
                warnings.push(format!("invariants end at s = {} ({})", tr.s, tr.reason));
            }
            (t, p.fixture)
        }
    };
    if traj.len() < 2 {
        return Err(CliError::Config("trajectory needs at least two nodes".into()));
    }
    let c = noether_c(cfg, &traj)?;
    let opts = PipelineOptions {
        psi0: cfg.psi0.or(fixture.as_ref().map(|f| f.psi0)).unwrap_or(0.0),
        z0: cfg.z0.or(fixture.as_ref().and_then(|f| f.z0)).unwrap_or(0.0),
        p0: cfg.p0.map(Vec3::from),
        sigma: SigmaOptions {
            eps_switch: cfg.eps_switch.unwrap_or(SigmaOptions::default().eps_switch),
            ..SigmaOptions::default()
        },
        compare_direct: cfg.compare_direct.unwrap_or(true),
    };
    let (method, report, curve, frame) = match reconstruct(&traj, &c, &opts) {
        Ok(r) => {
            let rep = r.report(&c, opts.psi0);
            ("noether", Some(rep), r.position.curve, r.sigma.frame)
        }
        Err(ReconstructError::ZeroC1) => {
            let msg = "c1 vanishes, so the conservation laws do not fix the frame; integrated the frame equations directly";
            warn(msg);
            warnings.push(msg.into());
            let p0 = cfg.p0.map(Vec3::from).unwrap_or_else(Vec3::zeros);
            let d = reconstruct_direct(&traj, &sigma0(cfg), &p0).map_err(module)?;
            ("direct", None, d.curve, d.frame)
        }
        Err(e @ ReconstructError::Inadmissible { .. }) => return Err(CliError::Inadmissible(e.to_string())),
        Err(e) => return Err(module(e)),
    };
    let mesh = sweep_surface(&curve, &frame, cfg.radius.unwrap_or(0.1), cfg.n_around.unwrap_or(16), exec(cfg)).map_err(module)?;
    out.write("curve.csv", |w| write_curve_csv(w, &curve))?;
    out.write("frame.csv", |w| write_frame_csv(w, &frame))?;
    out.write("sweep.obj", |w| mesh.write_obj(w))?;
    out.json(
        "reconstruction_report.json",
        &ReconstructDoc {
            method,
            noether: report,
            mesh: mesh.stats(),
            warnings,
        },
    )
}

#[derive(Serialize)]
struct SweepDoc {
    frame: &'static str,
    mesh: MeshStats,
    twist: TwistStats,
}

fn write_mesh(out: &mut Outputs, mesh: &Mesh, format: MeshFormat) -> Result<(), CliError> {
    match format {
        MeshFormat::Obj => out.write("sweep.obj", |w| mesh.write_obj(w)),
        MeshFormat::Ply => out.write("sweep.ply", |w| mesh.write_ply_ascii(w)),
        MeshFormat::PlyBinary => out.write("sweep.ply", |w| mesh.write_ply_binary(w)),
    }
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let c = load_curve(cfg)?;
    let (kind, frame) = match cfg.frame.unwrap_or(FrameChoice::Rm) {
        FrameChoice::Frenet => ("frenet", frenet_frame(&c, EPS_INFLECTION).map_err(module)?.0),
        FrameChoice::Rm => ("rm", rm_frame_integrate(&c, initial_normal(cfg, &c)?, RmOptions::default()).map_err(module)?),
        FrameChoice::Both => return Err(CliError::Config("sweep takes frame = rm or frenet".into())),
    };
    let mesh = sweep_surface(&c, &frame, cfg.radius.unwrap_or(0.1), cfg.n_around.unwrap_or(16), exec(cfg)).map_err(module)?;
    write_mesh(out, &mesh, cfg.format.unwrap_or(MeshFormat::Obj))?;
    out.json(
        "sweep_stats.json",
        &SweepDoc {
            frame: kind,
            mesh: mesh.stats(),
            twist: twist_metric(&frame),
        },
    )
}

pub fn parse_fault(s: &str) -> Result<Fault, CliError> {
    match s {
        "adjoint-sign" => Ok(Fault::AdjointSign { row: 0, col: 1 }),
        _ => {
            let bad = || CliError::Config(format!("unknown fault `{s}` (expected adjoint-sign or adjoint-sign:ROW,COL)"));
            let rest = s.strip_prefix("adjoint-sign:").ok_or_else(bad)?;
            let (r, c) = rest.split_once(',').ok_or_else(bad)?;
            let (row, col) = (r.trim().parse::<usize>().map_err(|_| bad())?, c.trim().parse::<usize>().map_err(|_| bad())?);
            if row == 0 || col == 0 || row > 4 || col > 4 {
                return Err(bad());
            }
            Ok(Fault::AdjointSign { row: row - 1, col: col - 1 })
        }
    }
}

pub fn cmd_verify(cfg: &RunConfig, out: &mut Outputs) -> Result<VerifyReport, CliError> {
    let opts = VerifyOptions {
        quick: cfg.quick.unwrap_or(false),
        seed: cfg.seed.unwrap_or(0),
        exec: exec(cfg),
        fault: cfg.fault.as_deref().map(parse_fault).transpose()?,
        only: cfg.only.clone(),
    };
    let report = run_all(&opts);
    for s in &report.suites {
        println!("{:>2} {:<28} {}  ({:.2} s)", s.id, s.name, if s.passed { "PASS" } else { "FAIL" }, s.seconds);
        for m in s.failed_metrics() {
            println!("     failed: {} = {:e} (limit {:e})", m.name, m.value, m.limit);
        }
    }
    out.json("verify.json", &report)?;
    if report.passed {
        Ok(report)
    } else {
        let names: Vec<String> = report.failures().iter().map(|s| s.name.clone()).collect();
        Err(CliError::VerifyFailed(names.join(", ")))
    }
}

pub fn run(command: Command, cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Outputs::new(dir.to_path_buf())?;
    let mut recorded = cfg.clone();
    recorded.command = Some(command);
    out.write("run.conf", |w| w.write_all(recorded.to_text().as_bytes()))?;
    match command {
        Command::Frame => cmd_frame(cfg, &mut out)?,
        Command::Solve => cmd_solve(cfg, &mut out)?,
        Command::Reconstruct => cmd_reconstruct(cfg, &mut out)?,
        Command::Sweep => cmd_sweep(cfg, &mut out)?,
        Command::Verify => {
            cmd_verify(cfg, &mut out)?;
        }
    }
    Ok(out.written)
}
