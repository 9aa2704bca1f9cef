//! Run configuration in a `key = value` text form.
//!
//! Lines starting with `#` are comments. Initial conditions use keys of the
//! form `ic.<jet name>`. Flags are applied through [`RunConfig::set`] after
//! the file, so they override it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rmframe::frames::CatalogCurve;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Frame,
    Solve,
    Reconstruct,
    Sweep,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Frame => "frame",
            Command::Solve => "solve",
            Command::Reconstruct => "reconstruct",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "frame" => Command::Frame,
            "solve" => Command::Solve,
            "reconstruct" => Command::Reconstruct,
            "sweep" => Command::Sweep,
            "verify" => Command::Verify,
            _ => return Err(format!("unknown command `{s}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameChoice {
    Rm,
    Frenet,
    Both,
}

impl FromStr for FrameChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "rm" => FrameChoice::Rm,
            "frenet" => FrameChoice::Frenet,
            "both" => FrameChoice::Both,
            _ => return Err(format!("expected rm, frenet or both, got `{s}`")),
        })
    }
}

impl FrameChoice {
    fn name(self) -> &'static str {
        match self {
            FrameChoice::Rm => "rm",
            FrameChoice::Frenet => "frenet",
            FrameChoice::Both => "both",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
    PlyBinary,
}

impl FromStr for MeshFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "obj" => MeshFormat::Obj,
            "ply" => MeshFormat::Ply,
            "ply-binary" => MeshFormat::PlyBinary,
            _ => return Err(format!("expected obj, ply or ply-binary, got `{s}`")),
        })
    }
}

impl MeshFormat {
    fn name(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
            MeshFormat::PlyBinary => "ply-binary",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub input: Option<PathBuf>,
    pub noether: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub curve: Option<String>,
    pub length: Option<f64>,
    pub ds: Option<f64>,
    pub frame: Option<FrameChoice>,
    pub v0: Option<[f64; 3]>,
    pub psi0: Option<f64>,
    pub lagrangian: Option<String>,
    pub fixture: Option<String>,
    pub ics: BTreeMap<String, f64>,
    pub span_start: Option<f64>,
    pub span_end: Option<f64>,
    pub lambda_constant: Option<f64>,
    pub singular_tol: Option<f64>,
    pub eps_switch: Option<f64>,
    pub z0: Option<f64>,
    pub p0: Option<[f64; 3]>,
    pub sigma0: Option<[f64; 9]>,
    pub c: Option<[f64; 6]>,
    pub compare_direct: Option<bool>,
    pub radius: Option<f64>,
    pub n_around: Option<usize>,
    pub format: Option<MeshFormat>,
    pub seed: Option<u64>,
    pub quick: Option<bool>,
    pub fault: Option<String>,
    pub only: Vec<usize>,
    pub parallel: Option<bool>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        msg: msg.to_string(),
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(key, e))
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = parse(key, v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, "not a finite number"))
    }
}

fn parse_array<const N: usize>(key: &str, v: &str) -> Result<[f64; N], ConfigError> {
    let xs: Vec<f64> = v.split(',').map(|p| parse_f64(key, p.trim())).collect::<Result<_, _>>()?;
    xs.try_into().map_err(|xs: Vec<f64>| bad(key, format!("expected {N} numbers, got {}", xs.len())))
}

fn parse_text(key: &str, v: &str) -> Result<String, ConfigError> {
    if v.is_empty() {
        Err(bad(key, "empty"))
    } else {
        Ok(v.to_string())
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        if let Some(name) = key.strip_prefix("ic.") {
            if name.is_empty() {
                return Err(bad(key, "empty initial-condition name"));
            }
            self.ics.insert(name.to_string(), parse_f64(key, v)?);
            return Ok(());
        }
        match key {
            "command" => self.command = Some(parse(key, v)?),
            "input" => self.input = Some(PathBuf::from(parse_text(key, v)?)),
            "noether" => self.noether = Some(PathBuf::from(parse_text(key, v)?)),
            "output" => self.output = Some(PathBuf::from(parse_text(key, v)?)),
            "curve" => {
                parse_curve(v).map_err(|e| bad(key, e))?;
                self.curve = Some(v.to_string());
            }
            "length" => self.length = Some(parse_f64(key, v)?),
            "ds" => self.ds = Some(parse_f64(key, v)?),
            "frame" => self.frame = Some(parse(key, v)?),
            "v0" => self.v0 = Some(parse_array(key, v)?),
            "psi0" => self.psi0 = Some(parse_f64(key, v)?),
            "lagrangian" => self.lagrangian = Some(parse_text(key, v)?),
            "fixture" => self.fixture = Some(parse_text(key, v)?),
            "span" => {
                let [a, b] = parse_array::<2>(key, v)?;
                self.span_start = Some(a);
                self.span_end = Some(b);
            }
            "span_start" => self.span_start = Some(parse_f64(key, v)?),
            "span_end" => self.span_end = Some(parse_f64(key, v)?),
            "lambda_constant" => self.lambda_constant = Some(parse_f64(key, v)?),
            "singular_tol" => self.singular_tol = Some(parse_f64(key, v)?),
            "eps_switch" => self.eps_switch = Some(parse_f64(key, v)?),
            "z0" => self.z0 = Some(parse_f64(key, v)?),
            "p0" => self.p0 = Some(parse_array(key, v)?),
            "sigma0" => self.sigma0 = Some(parse_array(key, v)?),
            "c" => self.c = Some(parse_array(key, v)?),
            "compare_direct" => self.compare_direct = Some(parse(key, v)?),
            "radius" => self.radius = Some(parse_f64(key, v)?),
            "n_around" => self.n_around = Some(parse(key, v)?),
            "format" => self.format = Some(parse(key, v)?),
            "seed" => self.seed = Some(parse(key, v)?),
            "quick" => self.quick = Some(parse(key, v)?),
            "fault" => self.fault = Some(parse_text(key, v)?),
            "only" => {
                self.only = v
                    .split(',')
                    .map(|p| parse::<usize>(key, p.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "parallel" => self.parallel = Some(parse(key, v)?),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// The `key = value` form; [`RunConfig::parse`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let path = |p: &PathBuf| p.to_string_lossy().into_owned();
        if let Some(c) = self.command {
            put("command", c.name().into());
        }
        if let Some(p) = &self.input {
            put("input", path(p));
        }
        if let Some(p) = &self.noether {
            put("noether", path(p));
        }
        if let Some(p) = &self.output {
            put("output", path(p));
        }
        if let Some(c) = &self.curve {
            put("curve", c.clone());
        }
        let num = |x: &Option<f64>| x.map(|x| x.to_string());
        for (k, v) in [("length", &self.length), ("ds", &self.ds)] {
            if let Some(v) = num(v) {
                put(k, v);
            }
        }
        if let Some(f) = self.frame {
            put("frame", f.name().into());
        }
        if let Some(v) = &self.v0 {
            put("v0", join(v));
        }
        if let Some(v) = num(&self.psi0) {
            put("psi0", v);
        }
        if let Some(l) = &self.lagrangian {
            put("lagrangian", l.clone());
        }
        if let Some(f) = &self.fixture {
            put("fixture", f.clone());
        }
        for (k, v) in &self.ics {
            put(&format!("ic.{k}"), v.to_string());
        }
        for (k, v) in [
            ("span_start", &self.span_start),
            ("span_end", &self.span_end),
            ("lambda_constant", &self.lambda_constant),
            ("singular_tol", &self.singular_tol),
            ("eps_switch", &self.eps_switch),
            ("z0", &self.z0),
        ] {
            if let Some(v) = num(v) {
                put(k, v);
            }
        }
        if let Some(v) = &self.p0 {
            put("p0", join(v));
        }
        if let Some(v) = &self.sigma0 {
            put("sigma0", join(v));
        }
        if let Some(v) = &self.c {
            put("c", join(v));
        }
        if let Some(b) = self.compare_direct {
            put("compare_direct", b.to_string());
        }
        if let Some(v) = num(&self.radius) {
            put("radius", v);
        }
        if let Some(n) = self.n_around {
            put("n_around", n.to_string());
        }
        if let Some(f) = self.format {
            put("format", f.name().into());
        }
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        if let Some(q) = self.quick {
            put("quick", q.to_string());
        }
        if let Some(f) = &self.fault {
            put("fault", f.clone());
        }
        if !self.only.is_empty() {
            put("only", self.only.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","));
        }
        if let Some(p) = self.parallel {
            put("parallel", p.to_string());
        }
        out
    }

    /// Output directory: `output` (default: the command name), placed under
    /// `root` when relative.
    pub fn output_dir(&self, command: Command, root: Option<&Path>) -> PathBuf {
        let out = self.output.clone().unwrap_or_else(|| PathBuf::from(command.name()));
        match root {
            Some(r) if out.is_relative() => r.join(out),
            _ => out,
        }
    }
}

/// `name key=value ...`; vectors are comma separated.
pub fn parse_curve(spec: &str) -> Result<CatalogCurve, String> {
    let mut parts = spec.split_whitespace();
    let name = parts.next().ok_or("empty curve specification")?;
    let mut params = BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| format!("expected key=value, got `{p}`"))?;
        params.insert(k.to_string(), v.to_string());
    }
    let mut take = |k: &str, default: f64| -> Result<f64, String> {
        match params.remove(k) {
            Some(v) => v.parse::<f64>().map_err(|e| format!("{k}: {e}")),
            None => Ok(default),
        }
    };
    let curve = match name {
        "line" => {
            let d = match params.remove("direction") {
                Some(v) => parse_array::<3>("direction", &v).map_err(|e| e.to_string())?,
                None => [1.0, 0.0, 0.0],
            };
            if d.iter().all(|x| *x == 0.0) {
                return Err("direction must be nonzero".into());
            }
            CatalogCurve::Line { direction: d }
        }
        "circle" => CatalogCurve::Circle { radius: take("radius", 1.0)? },
        "helix" => CatalogCurve::Helix { a: take("a", 1.0)?, b: take("b", 1.0)? },
        "inflection" => CatalogCurve::Inflection { a: take("a", 1.0)?, b: take("b", 0.01)? },
        "random_fourier" => {
            let seed = take("seed", 0.0)?;
            let modes = take("modes", 3.0)?;
            if seed < 0.0 || seed.fract() != 0.0 || modes < 1.0 || modes.fract() != 0.0 {
                return Err("seed and modes must be non-negative integers (modes ≥ 1)".into());
            }
            CatalogCurve::RandomFourier {
                seed: seed as u64,
                modes: modes as usize,
            }
        }
        _ => return Err(format!("unknown curve `{name}`")),
    };
    if let Some(k) = params.keys().next() {
        return Err(format!("unknown parameter `{k}` for {name}"));
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_comments_and_ics() {
        let cfg = RunConfig::parse("# demo\ncommand = solve\nfixture = ratio-squared\nic.k1 = 1\nic.k2_s=0.5\nspan = 0, 5\n").unwrap();
        assert_eq!(cfg.command, Some(Command::Solve));
        assert_eq!(cfg.ics["k2_s"], 0.5);
        assert_eq!((cfg.span_start, cfg.span_end), (Some(0.0), Some(5.0)));
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(RunConfig::parse("nonsense").unwrap_err(), ConfigError::Syntax { line: 1 });
        assert!(matches!(RunConfig::parse("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RunConfig::parse("ds = abc"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("v0 = 1,2"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("curve = spiral"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn curve_specs() {
        assert_eq!(parse_curve("helix a=2 b=0.5").unwrap(), CatalogCurve::Helix { a: 2.0, b: 0.5 });
        assert_eq!(parse_curve("line direction=0,0,2").unwrap(), CatalogCurve::Line { direction: [0.0, 0.0, 2.0] });
        assert_eq!(parse_curve("random_fourier seed=4").unwrap(), CatalogCurve::RandomFourier { seed: 4, modes: 3 });
        assert!(parse_curve("circle r=2").is_err());
        assert!(parse_curve("line direction=0,0,0").is_err());
    }

    #[test]
    fn output_root_applies_to_relative_paths() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.output_dir(Command::Frame, Some(Path::new("/tmp/r"))), PathBuf::from("/tmp/r/frame"));
        cfg.output = Some(PathBuf::from("/abs"));
        assert_eq!(cfg.output_dir(Command::Frame, Some(Path::new("/tmp/r"))), PathBuf::from("/abs"));
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6f64..1e6, Just(0.1), Just(1.0 / 3.0), Just(-2.5e-300)]
    }

    prop_compose! {
        fn configs()(
            ds in proptest::option::of(finite()),
            psi0 in proptest::option::of(finite()),
            v0 in proptest::option::of([finite(), finite(), finite()]),
            c in proptest::option::of([finite(), finite(), finite(), finite(), finite(), finite()]),
            ics in proptest::collection::btree_map("k[12](_s{1,3})?", finite(), 0..4),
            seed in proptest::option::of(any::<u64>()),
            quick in proptest::option::of(any::<bool>()),
            lag in proptest::option::of("[a-z0-9*+^()_ ]{0,20}[a-z0-9]"),
            n in proptest::option::of(3usize..64),
            only in proptest::collection::vec(1usize..11, 0..4),
        ) -> RunConfig {
            RunConfig {
                command: Some(Command::Solve),
                ds, psi0, v0, c, ics, seed, quick, n_around: n, only,
                lagrangian: lag.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()),
                curve: Some("helix a=1 b=1".into()),
                frame: Some(FrameChoice::Both),
                format: Some(MeshFormat::PlyBinary),
                output: Some(PathBuf::from("runs/a")),
                ..RunConfig::default()
            }
        }
    }

    proptest! {
        #[test]
        fn text_form_round_trips(cfg in configs()) {
            let back = RunConfig::parse(&cfg.to_text()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
