use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rmframe-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmframe"))
        .args(args)
        .env("RMFRAME_OUTPUT_ROOT", root)
        .current_dir(root)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: PathBuf) -> String {
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn json(p: PathBuf) -> serde_json::Value {
    serde_json::from_str(&read(p)).unwrap()
}

fn same_files(a: &Path, b: &Path, names: &[&str]) {
    for n in names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n} differs");
    }
}

#[test]
fn frame_on_helix() {
    let root = scratch("frame");
    let o = run(&root, &["frame", "--curve", "helix a=1 b=1", "--set", "psi0=0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(root.join("frame/residuals.json"));
    for key in ["orthonormality", "rm_constraint", "skew", "max_v_dot_tangent", "max_v_norm_error"] {
        assert!(r["rm"][key].as_f64().unwrap() <= 1e-5, "{key}");
    }
    for key in ["kappa_residual", "tau_residual", "theta_s_residual"] {
        assert!(r["gauge"][key].as_f64().unwrap() <= 1e-5, "{key}");
    }
    let frames = read(root.join("frame/frames.csv"));
    assert!(frames.starts_with("s,t_x,t_y,t_z,n_x,n_y,n_z,b_x,b_y,b_z\n"));
    assert_eq!(frames.lines().count(), 10002);
    assert!(root.join("frame/frames_frenet.csv").exists());
}

#[test]
fn circle_has_constant_theta() {
    let root = scratch("circle");
    let o = run(&root, &["frame", "--curve", "circle radius=2", "--set", "psi0=0.3", "--set", "length=5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(root.join("frame/invariants.csv"));
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = head.iter().position(|h| *h == "theta").unwrap();
    let theta: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    let (lo, hi) = theta.iter().fold((f64::MAX, f64::MIN), |(a, b), &t| (a.min(t), b.max(t)));
    assert!(hi - lo < 1e-9, "theta varies by {}", hi - lo);
}

#[test]
fn frenet_on_a_line_exits_2() {
    let root = scratch("line");
    let o = run(&root, &["frame", "--curve", "line", "--frame", "frenet"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("curvature vanishes"), "{}", stderr(&o));
    let o = run(&root, &["frame", "--curve", "line", "--frame", "rm", "--set", "v0=0,1,0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let root = scratch("config");
    assert_eq!(code(&run(&root, &["solve", "--set", "bogus=1"])), 2);
    assert_eq!(code(&run(&root, &["solve", "--fixture", "nope"])), 2);
    assert_eq!(code(&run(&root, &["frame", "--frame", "rm"])), 2, "RM needs an initial normal");
    assert_eq!(code(&run(&root, &["solve", "--lagrangian", "k1 +* 2"])), 2);
}

#[test]
fn solve_elastic() {
    let root = scratch("solve");
    let o = run(&root, &["solve", "--fixture", "elastic"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let n = json(root.join("solve/noether.json"));
    assert!(n["max_relative_drift"].as_f64().unwrap() <= 1e-6);
    assert_eq!(n["noether_vector"][0], "-k1^2/2 - k2^2/2");
    assert!(read(root.join("solve/el_system.txt")).contains("k1"));
    assert!(read(root.join("solve/first_integrals.csv")).lines().count() > 100);
}

#[test]
fn zero_span_warns_and_succeeds() {
    let root = scratch("zero");
    let o = run(&root, &["solve", "--fixture", "elastic", "--set", "span=0,0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn truncation_exits_3_with_partial_output() {
    let root = scratch("trunc");
    let o = run(&root, &["solve", "--fixture", "ratio-squared"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let n = json(root.join("solve/noether.json"));
    let s = n["truncated"]["s"].as_f64().unwrap();
    assert!(s > 1.0 && s < 1.2, "{s}");
    assert!(n["max_relative_drift"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn solve_then_reconstruct() {
    let root = scratch("recon");
    assert_eq!(code(&run(&root, &["solve", "--fixture", "first-order-torsion"])), 0);
    let o = run(&root, &["reconstruct", "--input", "solve/trajectory.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(root.join("reconstruct/reconstruction_report.json"));
    assert_eq!(r["method"], "noether");
    assert!(r["noether"]["noether_vs_direct"]["position_rms"].as_f64().unwrap() <= 1e-4);
    assert_eq!(r["mesh"]["degenerate_triangles"], 0);
    assert!(read(root.join("reconstruct/sweep.obj")).starts_with("v "));
    assert!(root.join("reconstruct/curve.csv").exists() && root.join("reconstruct/frame.csv").exists());
}

#[test]
fn straight_line_gives_a_cylinder() {
    let root = scratch("cylinder");
    let zero = ["--set", "ic.k1=0", "--set", "ic.k2=0", "--set", "ic.k1_s=0", "--set", "ic.k2_s=0", "--set", "ic.mu=0"];
    let mut args = vec!["reconstruct", "--fixture", "elastic", "--set", "radius=0.5"];
    args.extend(zero);
    let o = run(&root, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(root.join("reconstruct/reconstruction_report.json"));
    assert_eq!(r["method"], "direct");
    assert_eq!(r["mesh"]["euler_characteristic"], 0);
    let curve = read(root.join("reconstruct/curve.csv"));
    let last: Vec<f64> = curve.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[1] - 5.0).abs() < 1e-12 && last[2].abs() < 1e-12 && last[3].abs() < 1e-12, "{last:?}");
}

#[test]
fn inadmissible_start_exits_4() {
    let root = scratch("inadmissible");
    let o = run(&root, &["reconstruct", "--fixture", "elastic", "--set", "ic.k1=0", "--set", "ic.k2_s=-1", "--set", "c=0,0,-1,0,0,0"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn sweep_formats() {
    let root = scratch("sweep");
    for (fmt, magic) in [("obj", &b"v "[..]), ("ply", &b"ply\nformat ascii"[..]), ("ply-binary", &b"ply\nformat binary_little_endian"[..])] {
        let o = run(&root, &["sweep", "--curve", "circle radius=2", "--set", "psi0=0", "--set", &format!("format={fmt}"), "-o", fmt]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let file = if fmt == "obj" { "sweep.obj" } else { "sweep.ply" };
        assert!(fs::read(root.join(fmt).join(file)).unwrap().starts_with(magic), "{fmt}");
    }
    let s = json(root.join("obj/sweep_stats.json"));
    assert_eq!(s["frame"], "rm");
}

#[test]
fn verify_quick_passes_and_fault_fails() {
    let root = scratch("verify");
    let o = run(&root, &["verify", "--quick"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(root.join("verify/verify.json"))["passed"], true);

    let o = run(&root, &["verify", "--quick", "--fault", "adjoint-sign", "-o", "faulty"]);
    assert_eq!(code(&o), 1);
    let out = String::from_utf8_lossy(&o.stdout);
    let line = out.lines().find(|l| l.contains("adjoint-identity")).unwrap();
    assert!(line.contains("FAIL"), "{line}");
    assert!(stderr(&o).contains("adjoint-identity"));
    let report = json(root.join("faulty/verify.json"));
    let failed: Vec<&str> = report["suites"].as_array().unwrap().iter().filter(|s| s["passed"] == false).map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(failed, ["adjoint-identity"]);

    assert_eq!(code(&run(&root, &["verify", "--fault", "nonsense"])), 2);
}

#[test]
fn outputs_are_deterministic() {
    let root = scratch("determinism");
    for dir in ["a", "b"] {
        assert_eq!(code(&run(&root, &["frame", "--curve", "random_fourier seed=7 modes=3", "--set", "psi0=0.2", "--set", "length=3", "-o", &format!("f{dir}")])), 0);
        assert_eq!(code(&run(&root, &["solve", "--fixture", "second-order-torsion", "-o", &format!("s{dir}")])), 0);
        assert_eq!(code(&run(&root, &["reconstruct", "--fixture", "first-order-torsion", "-o", &format!("r{dir}")])), 0);
    }
    same_files(&root.join("fa"), &root.join("fb"), &["frames.csv", "frames_frenet.csv", "invariants.csv", "residuals.json"]);
    same_files(&root.join("sa"), &root.join("sb"), &["trajectory.csv", "el_system.txt", "noether.json", "first_integrals.csv"]);
    same_files(&root.join("ra"), &root.join("rb"), &["curve.csv", "frame.csv", "sweep.obj", "reconstruction_report.json"]);
}

#[test]
fn sequential_matches_parallel() {
    let root = scratch("exec");
    assert_eq!(code(&run(&root, &["sweep", "--curve", "helix a=1 b=2", "--set", "psi0=0", "-o", "par"])), 0);
    assert_eq!(code(&run(&root, &["sweep", "--curve", "helix a=1 b=2", "--set", "psi0=0", "--sequential", "-o", "seq"])), 0);
    same_files(&root.join("par"), &root.join("seq"), &["sweep.obj"]);
}

#[test]
fn recorded_config_reproduces_the_run() {
    let root = scratch("replay");
    let o = run(&root, &["solve", "--fixture", "elastic", "--set", "ic.k2=0.25", "--set", "span=0,2", "--ds", "2e-3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&root, &["solve", "--config", "solve/run.conf", "-o", "replay"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    same_files(&root.join("solve"), &root.join("replay"), &["trajectory.csv", "noether.json", "first_integrals.csv"]);
    let first = read(root.join("solve/run.conf"));
    let second = read(root.join("replay/run.conf"));
    assert_eq!(first.replace("output = replay\n", ""), second.replace("output = replay\n", ""));
}

#[test]
fn flags_override_the_config_file() {
    let root = scratch("override");
    fs::write(root.join("run.conf"), "# elastic rod\nfixture = elastic\nspan = 0, 1\nds = 0.01\n").unwrap();
    let o = run(&root, &["solve", "--config", "run.conf", "--set", "span=0,0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let n = json(root.join("solve/noether.json"));
    assert_eq!(n["span_solved"][1].as_f64().unwrap(), 0.5);
}

#[test]
fn output_root_applies_to_relative_paths_only() {
    let root = scratch("root");
    let abs = root.join("elsewhere");
    let o = run(&root, &["solve", "--fixture", "elastic", "--set", "span=0,0.1", "-o", abs.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(abs.join("noether.json").exists());
}
