//! Command-line front end: configuration merging, subcommands and the
//! `validate` suite.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::field::{Preset, ScalarField2};
use crate::front::{build_front, facet_report, polar_dual, polygon_distance, FacetCriteria, FrontModel};
use crate::geodesic::{
    action_of_path, adjust, exact_sum, find_crossings, min_closed_geodesic, path_to_json, paths_to_svg,
};
use crate::hamiltonian::{
    convexity_probe, hbar_dual, hbar_mechanical, infmax_upper, level_set, InfmaxConfig, MechanicalConfig,
};
use crate::io::{to_json_string, write_json};
use crate::lattice::{EngineParams, LatticePoint, DEFAULT_N, DEFAULT_QUAD, DEFAULT_STENCIL};
use crate::par::{self, Exec};
use crate::shortest_path::Engine;
use crate::stable_norm::{
    burago_gap, direction_sweep, eps_quad, fekete_refine, norm_estimate, NormTable, SweepStrategy,
    DEFAULT_KMAX, DEFAULT_SWEEP_LAMBDA,
};

pub const THREADS_ENV: &str = "STABLEFRONT_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

/// Settings read from a JSON config file; every key is optional and command
/// line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub grid: Option<PathBuf>,
    #[serde(rename = "preset_V")]
    pub preset_v: Option<String>,
    #[serde(rename = "grid_V")]
    pub grid_v: Option<PathBuf>,
    #[serde(rename = "N")]
    pub n: Option<u32>,
    #[serde(rename = "S")]
    pub s: Option<u32>,
    #[serde(rename = "M")]
    pub m: Option<u32>,
    #[serde(rename = "Q")]
    pub q: Option<u32>,
    pub lambda: Option<u32>,
    pub kmax: Option<u32>,
    pub tol: Option<f64>,
    pub angle_tol: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub exec: Option<Exec>,
    pub strategy: Option<SweepStrategy>,
    pub check_window: Option<bool>,
}

pub const N_RANGE: (u32, u32) = (8, 512);
pub const S_RANGE: (u32, u32) = (1, 16);
pub const Q_RANGE: (u32, u32) = (1, 16);
pub const LAMBDA_RANGE: (u32, u32) = (1, 32);

fn in_range(name: &str, v: u32, r: (u32, u32)) -> Result<()> {
    if v < r.0 || v > r.1 {
        return Err(Error::Config(format!("{name} = {v} outside [{}, {}]", r.0, r.1)));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `other`'s set keys replace ours.
    pub fn overridden_by(self, other: RunConfig) -> RunConfig {
        RunConfig {
            preset: other.preset.or(self.preset),
            grid: other.grid.or(self.grid),
            preset_v: other.preset_v.or(self.preset_v),
            grid_v: other.grid_v.or(self.grid_v),
            n: other.n.or(self.n),
            s: other.s.or(self.s),
            m: other.m.or(self.m),
            q: other.q.or(self.q),
            lambda: other.lambda.or(self.lambda),
            kmax: other.kmax.or(self.kmax),
            tol: other.tol.or(self.tol),
            angle_tol: other.angle_tol.or(self.angle_tol),
            threads: other.threads.or(self.threads),
            out: other.out.or(self.out),
            exec: other.exec.or(self.exec),
            strategy: other.strategy.or(self.strategy),
            check_window: other.check_window.or(self.check_window),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.n {
            in_range("N", n, N_RANGE)?;
        }
        if let Some(s) = self.s {
            in_range("S", s, S_RANGE)?;
        }
        if let Some(q) = self.q {
            in_range("Q", q, Q_RANGE)?;
        }
        if let Some(l) = self.lambda {
            in_range("lambda", l, LAMBDA_RANGE)?;
        }
        if self.m == Some(0) {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::Config(format!("tol = {t} must be positive")));
            }
        }
        if self.preset.is_some() && self.grid.is_some() {
            return Err(Error::Config("give either a preset or a grid file, not both".into()));
        }
        if self.preset_v.is_some() && self.grid_v.is_some() {
            return Err(Error::Config("give either a potential preset or a potential grid, not both".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> EngineParams {
        EngineParams {
            n: self.n.unwrap_or(DEFAULT_N),
            stencil: self.s.unwrap_or(DEFAULT_STENCIL),
            quad: self.m.unwrap_or(DEFAULT_QUAD),
            check_window: self.check_window.unwrap_or(false),
            exec: self.exec.unwrap_or_default(),
            ..EngineParams::default()
        }
    }

    pub fn speed_field(&self) -> Result<ScalarField2> {
        load_field(self.preset.as_deref(), self.grid.as_deref(), true, "--preset or --grid")
    }

    pub fn potential(&self) -> Result<ScalarField2> {
        load_field(self.preset_v.as_deref(), self.grid_v.as_deref(), false, "--preset-V or --grid-V")
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn threads(&self) -> Result<Option<usize>> {
        if let Some(t) = self.threads {
            return Ok(Some(t));
        }
        match std::env::var(THREADS_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{THREADS_ENV} = `{s}` is not a thread count"))),
            Err(_) => Ok(None),
        }
    }
}

fn load_field(preset: Option<&str>, grid: Option<&Path>, positive: bool, what: &str) -> Result<ScalarField2> {
    match (preset, grid) {
        (Some(p), _) => {
            let p = Preset::parse(p)?;
            if positive {
                ScalarField2::speed(p)
            } else {
                ScalarField2::preset(p)
            }
        }
        (None, Some(path)) => ScalarField2::from_json(&crate::io::read_json(path)?, positive),
        (None, None) => Err(Error::Config(format!("no field given; use {what}"))),
    }
}

fn parse_pair_i(s: &str) -> std::result::Result<[i64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected `a,b`, got `{s}`"));
    }
    let a = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let b = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok([a, b])
}

fn parse_pair_f(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected `x,y`, got `{s}`"));
    }
    let a = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let b = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok([a, b])
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExecArg {
    Parallel,
    Sequential,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    SharedSource,
    PerDirection,
}

#[derive(Args, Debug, Default, Clone)]
struct Common {
    /// JSON config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Speed field preset, e.g. `constant:2`, `layered:2,1`, `channel:1,4,0.2`, `bumps:1,4,0.15`.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Speed field grid file `{"n": .., "values": [..]}`.
    #[arg(long, global = true)]
    grid: Option<PathBuf>,
    /// Potential preset, e.g. `zero` or `cos:1`.
    #[arg(long = "preset-V", global = true)]
    preset_v: Option<String>,
    /// Potential grid file.
    #[arg(long = "grid-V", global = true)]
    grid_v: Option<PathBuf>,
    #[arg(id = "N", long = "N", global = true)]
    n: Option<u32>,
    #[arg(id = "S", long = "S", global = true)]
    s: Option<u32>,
    #[arg(id = "M", long = "M", global = true)]
    m: Option<u32>,
    #[arg(id = "Q", long = "Q", global = true)]
    q: Option<u32>,
    #[arg(long, global = true)]
    lambda: Option<u32>,
    #[arg(long, global = true)]
    kmax: Option<u32>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long = "angle-tol", global = true)]
    angle_tol: Option<f64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    exec: Option<ExecArg>,
    #[arg(long, value_enum, global = true)]
    strategy: Option<StrategyArg>,
    /// Re-run point-to-point queries on a wider window and fail on change.
    #[arg(long = "check-window", global = true)]
    check_window: bool,
}

impl Common {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            preset: self.preset.clone(),
            grid: self.grid.clone(),
            preset_v: self.preset_v.clone(),
            grid_v: self.grid_v.clone(),
            n: self.n,
            s: self.s,
            m: self.m,
            q: self.q,
            lambda: self.lambda,
            kmax: self.kmax,
            tol: self.tol,
            angle_tol: self.angle_tol,
            threads: self.threads,
            out: self.out.clone(),
            exec: self.exec.map(|e| match e {
                ExecArg::Parallel => Exec::Parallel,
                ExecArg::Sequential => Exec::Sequential,
            }),
            strategy: self.strategy.map(|s| match s {
                StrategyArg::SharedSource => SweepStrategy::SharedSource,
                StrategyArg::PerDirection => SweepStrategy::PerDirection,
            }),
            check_window: self.check_window.then_some(true),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Dual,
    Infmax,
    Mechanical,
}

#[derive(Parser, Debug)]
#[command(name = "stablefront", version, about = "Stable norms, effective fronts and effective Hamiltonians of 2D periodic media")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Stable-norm estimate d(0, λq)/λ for one direction.
    Norm {
        #[arg(long, value_parser = parse_pair_i)]
        q: [i64; 2],
        /// Also run dyadic refinement and gap diagnostics.
        #[arg(long)]
        refine: bool,
    },
    /// Norm estimates for all primitive directions up to Chebyshev norm Q.
    Sweep,
    /// Effective front D and its polar dual S.
    Front {
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Corner persistence across several Q values.
    Facets {
        #[arg(long = "Q-list", value_delimiter = ',', default_value = "4,8")]
        q_list: Vec<u32>,
        /// Use stencil order S = Q for each front.
        #[arg(long = "stencil-follows-Q")]
        stencil_follows_q: bool,
    },
    /// Effective Hamiltonian at p.
    Hbar {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, value_parser = parse_pair_f)]
        p: [f64; 2],
        #[arg(long = "Nv", default_value_t = 64)]
        nv: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
    },
    /// Level set F_c of a mechanical Hamiltonian.
    LevelSet {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Distance-realizing path between two points.
    Geodesic {
        #[arg(long, value_parser = parse_pair_f)]
        from: [f64; 2],
        #[arg(long, value_parser = parse_pair_f)]
        to: [f64; 2],
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Shortest closed geodesic in the homology class q.
    ClosedGeodesic {
        #[arg(long, value_parser = parse_pair_i)]
        q: [i64; 2],
        #[arg(long, default_value_t = 1)]
        stride: u32,
    },
    /// Inf-max upper bound with its descent trace.
    Infmax {
        #[arg(long, value_parser = parse_pair_f)]
        p: [f64; 2],
        #[arg(long = "Nv", default_value_t = 64)]
        nv: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
    },
    /// Invariant suite on the built-in presets; exit code 2 on failure.
    Validate,
}

/// Runs the command line `argv` (including the program name) and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg = cfg.overridden_by(cli.common.to_config());
    cfg.validate()?;
    let threads = cfg.threads()?;
    let cmd = cli.cmd;
    match threads {
        Some(t) => par::with_threads(t, move || dispatch(cmd, &cfg)),
        None => dispatch(cmd, &cfg),
    }
}

fn dispatch(cmd: Cmd, cfg: &RunConfig) -> Result<i32> {
    let lambda = cfg.lambda.unwrap_or(DEFAULT_SWEEP_LAMBDA);
    let q_max = cfg.q.unwrap_or(4);
    let angle_tol = cfg.angle_tol.unwrap_or(crate::front::DEFAULT_ANGLE_TOL_DEG);
    let strategy = cfg.strategy.unwrap_or_default();
    match cmd {
        Cmd::Norm { q, refine } => {
            let engine = Engine::new(&cfg.speed_field()?, cfg.params())?;
            let mut e = norm_estimate(&engine, q, lambda)?;
            println!("value = {}", e.value);
            let mut diag = json!({ "estimate": e });
            if refine {
                let kmax = cfg.kmax.unwrap_or(DEFAULT_KMAX);
                let f = fekete_refine(&engine, q, kmax)?;
                let gaps = burago_gap(&engine, q, &(1..=8).collect::<Vec<_>>(), kmax)?;
                println!("best = {}  gap slope = {}", f.best, gaps.slope);
                e.best = e.best.min(f.best);
                diag = json!({ "estimate": e, "refinement": f, "gaps": gaps });
            }
            let table = NormTable { q_max: 0, lambda, estimates: vec![e] };
            let dir = cfg.out_dir()?;
            std::fs::write(dir.join("norm.csv"), table.to_csv()?)?;
            write_json(&dir.join("norm.json"), &diag)?;
        }
        Cmd::Sweep => {
            let engine = Engine::new(&cfg.speed_field()?, cfg.params())?;
            let table = direction_sweep(&engine, q_max, lambda, strategy)?;
            std::fs::write(cfg.out_dir()?.join("sweep.csv"), table.to_csv()?)?;
            println!("{} directions", table.len());
        }
        Cmd::Front { svg, json } => {
            let engine = Engine::new(&cfg.speed_field()?, cfg.params())?;
            let table = direction_sweep(&engine, q_max, lambda, strategy)?;
            let front = build_front(&table, angle_tol)?;
            let dir = cfg.out_dir()?;
            std::fs::write(dir.join("sweep.csv"), table.to_csv()?)?;
            write_json(&json.unwrap_or_else(|| dir.join("front.json")), &front.to_json())?;
            if let Some(svg) = svg {
                std::fs::write(svg, front.to_svg())?;
            }
            println!("{} hull vertices, {} corners", front.d_hull.len(), front.corners.len());
        }
        Cmd::Facets { q_list, stencil_follows_q } => {
            let field = cfg.speed_field()?;
            let mut history = Vec::new();
            for &q in &q_list {
                in_range("Q", q, Q_RANGE)?;
                let mut params = cfg.params();
                if stencil_follows_q {
                    params.stencil = q;
                }
                let engine = Engine::new(&field, params)?;
                history.push(build_front(&direction_sweep(&engine, q, lambda, strategy)?, angle_tol)?);
            }
            let report = facet_report(&history, &FacetCriteria { angle_tol_deg: angle_tol, ..FacetCriteria::default() })?;
            write_json(&cfg.out_dir()?.join("facets.json"), &report)?;
            for c in &report.corners {
                println!("q = ({}, {})  {:?}  angles {:?}", c.q[0], c.q[1], c.class, c.angles);
            }
        }
        Cmd::Hbar { method, p, nv, iters } => {
            let diag = match method {
                Method::Dual => {
                    let engine = Engine::new(&cfg.speed_field()?, cfg.params())?;
                    let front = build_front(&direction_sweep(&engine, q_max, lambda, strategy)?, angle_tol)?;
                    let v = hbar_dual(&front, p);
                    println!("hbar = {v}");
                    json!({ "method": "dual", "p": p, "value": v, "Q": q_max })
                }
                Method::Infmax => {
                    let icfg = InfmaxConfig { nv, iters, exec: cfg.params().exec, ..InfmaxConfig::default() };
                    let r = infmax_upper(&cfg.speed_field()?, p, &icfg)?;
                    println!("hbar <= {}", r.value);
                    json!({ "method": "infmax", "p": p, "value": r.value, "initial": r.initial, "trace": r.trace })
                }
                Method::Mechanical => {
                    let r = hbar_mechanical(&cfg.potential()?, p, &mechanical_config(cfg))?;
                    println!("hbar = {} (+/- {})", r.value, r.value_tol);
                    json!({ "method": "mechanical", "p": p, "result": r })
                }
            };
            write_json(&cfg.out_dir()?.join("hbar.json"), &diag)?;
        }
        Cmd::LevelSet { c, svg } => {
            let front = level_set(&cfg.potential()?, c, q_max, &mechanical_config(cfg))?;
            write_json(&cfg.out_dir()?.join("level_set.json"), &front.to_json())?;
            if let Some(svg) = svg {
                std::fs::write(svg, front.to_svg())?;
            }
            println!("{} vertices", front.s_polygon.len());
        }
        Cmd::Geodesic { from, to, svg } => {
            let field = cfg.speed_field()?;
            let engine = Engine::new(&field, cfg.params())?;
            let n = engine.params().n;
            let path = engine.node_path(LatticePoint::snap(from, n), LatticePoint::snap(to, n))?;
            write_json(&cfg.out_dir()?.join("path.json"), &path_to_json(&path))?;
            if let Some(svg) = svg {
                std::fs::write(svg, paths_to_svg(&field, &[&path]))?;
            }
            println!("length = {}", path.length());
        }
        Cmd::ClosedGeodesic { q, stride } => {
            let engine = Engine::new(&cfg.speed_field()?, cfg.params())?;
            let r = min_closed_geodesic(&engine, q, stride)?;
            let doc = json!({
                "q": r.q, "value": r.value, "base": [r.base.i, r.base.j],
                "bases_scanned": r.bases_scanned, "cycle": path_to_json(&r.cycle),
            });
            write_json(&cfg.out_dir()?.join("closed_geodesic.json"), &doc)?;
            println!("value = {}", r.value);
        }
        Cmd::Infmax { p, nv, iters } => {
            let icfg = InfmaxConfig { nv, iters, exec: cfg.params().exec, ..InfmaxConfig::default() };
            let r = infmax_upper(&cfg.speed_field()?, p, &icfg)?;
            write_json(&cfg.out_dir()?.join("infmax.json"), &json!({
                "p": p, "value": r.value, "initial": r.initial, "trace": r.trace, "nv": r.nv, "phi": r.phi,
            }))?;
            println!("value = {}  (initial {})", r.value, r.initial);
        }
        Cmd::Validate => {
            let report = validate(cfg)?;
            let failed: Vec<&Check> = report.iter().filter(|c| !c.passed).collect();
            for c in &report {
                println!("{} {}", if c.passed { "ok  " } else { "FAIL" }, c.name);
            }
            return Ok(if failed.is_empty() { EXIT_OK } else { EXIT_VALIDATION });
        }
    }
    Ok(EXIT_OK)
}

fn mechanical_config(cfg: &RunConfig) -> MechanicalConfig {
    let base = MechanicalConfig::default();
    let mut params = cfg.params();
    if cfg.n.is_none() {
        params.n = base.params.n;
    }
    MechanicalConfig {
        params,
        q_m: cfg.q.unwrap_or(base.q_m),
        lambda: cfg.lambda.unwrap_or(base.lambda),
        strategy: cfg.strategy.unwrap_or(base.strategy),
        tol: cfg.tol.unwrap_or(base.tol),
        ..base
    }
}

/// One invariant check of the `validate` suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

fn check(out: &mut Vec<Check>, name: &str, passed: bool, detail: Value) {
    out.push(Check { name: name.to_string(), passed, detail });
}

const VALIDATE_PRESETS: [(&str, &str); 4] = [
    ("constant", "constant:2"),
    ("layered", "layered:2,1"),
    ("channel", "channel:1,4,0.2"),
    ("bumps", "bumps:1,4,0.15"),
];

/// Runs the invariant suite and writes its artifacts to the output
/// directory. Every artifact is a function of the configuration only.
pub fn validate(cfg: &RunConfig) -> Result<Vec<Check>> {
    let dir = cfg.out_dir()?;
    let mut params = cfg.params();
    if cfg.n.is_none() {
        params.n = 16;
    }
    let q_max = cfg.q.unwrap_or(4);
    let lambda = cfg.lambda.unwrap_or(4);
    let strategy = cfg.strategy.unwrap_or(SweepStrategy::PerDirection);
    let angle_tol = cfg.angle_tol.unwrap_or(crate::front::DEFAULT_ANGLE_TOL_DEG);
    let mut checks = Vec::new();

    for (name, spec) in VALIDATE_PRESETS {
        let field = ScalarField2::speed(Preset::parse(spec)?)?;
        // Periodicity on dyadic points, where integer shifts are exact.
        let periodic = (0..256).all(|s| {
            let y = [(s % 16) as f64 / 16.0 + 0.03125, (s / 16) as f64 / 16.0];
            let k = [(s % 7) as f64 - 3.0, (s % 5) as f64 - 2.0];
            field.sample(y) == field.sample([y[0] + k[0], y[1] + k[1]])
        });
        check(&mut checks, &format!("{name}: periodic sampling"), periodic, json!({}));

        let engine = Engine::new(&field, params)?;
        let table = direction_sweep(&engine, q_max, lambda, strategy)?;
        std::fs::write(dir.join(format!("sweep_{name}.csv")), table.to_csv()?)?;
        let (amin, amax) = field.extrema();
        let symmetric = table.estimates.iter().all(|e| {
            table.get([-e.q[0], -e.q[1]]).is_some_and(|n| n.value.to_bits() == e.value.to_bits())
        });
        check(&mut checks, &format!("{name}: norm symmetry"), symmetric, json!({}));
        let bounded = table.estimates.iter().all(|e| {
            let eu = (e.q[0] as f64).hypot(e.q[1] as f64);
            let l1 = (e.q[0].abs() + e.q[1].abs()) as f64;
            eu / amax <= e.value * (1.0 + 1e-12) && e.value <= l1 / amin * (1.0 + 1e-12)
        });
        check(&mut checks, &format!("{name}: norm comparability bounds"), bounded, json!({}));

        let front = build_front(&table, angle_tol)?;
        let text = to_json_string(&front.to_json())?;
        std::fs::write(dir.join(format!("front_{name}.json")), &text)?;
        std::fs::write(dir.join(format!("front_{name}.svg")), front.to_svg())?;
        let reread = FrontModel::from_json(&serde_json::from_str(&text)?)?;
        check(&mut checks, &format!("{name}: front JSON round trip"), reread == front, json!({}));
        let dd = polar_dual(&front.s_polygon)?;
        let round = polygon_distance(&dd, &front.hull_points());
        check(&mut checks, &format!("{name}: duality round trip"), round <= 1e-9, json!({ "max_deviation": round }));
        let sym = front.d_hull.iter().all(|v| {
            front.d_hull.iter().any(|w| (w.point[0] + v.point[0]).abs() <= 1e-12 && (w.point[1] + v.point[1]).abs() <= 1e-12)
        });
        check(&mut checks, &format!("{name}: central symmetry"), sym, json!({}));
        let mut worst = 0.0f64;
        let support_ok = table.estimates.iter().all(|e| {
            let s = front.s_support([e.q[0] as f64, e.q[1] as f64]);
            worst = worst.max((s / e.value - 1.0).abs());
            s <= e.value * (1.0 + 1e-9) && s >= e.value * (1.0 - 0.02)
        });
        check(&mut checks, &format!("{name}: support consistency"), support_ok, json!({ "max_rel_dev": worst }));
        let p = [0.3, -0.7];
        let h = hbar_dual(&front, p);
        let homog = hbar_dual(&front, [2.0 * p[0], 2.0 * p[1]]) == 2.0 * h && hbar_dual(&front, [-p[0], -p[1]]) == h;
        check(&mut checks, &format!("{name}: dual homogeneity and evenness"), homog, json!({}));
    }

    let constant = Engine::new(&ScalarField2::speed(Preset::Constant { value: 2.0 })?, params)?;
    let v = norm_estimate(&constant, [1, 0], lambda)?.value;
    check(&mut checks, "constant: norm of (1,0)", (v - 0.5).abs() <= 0.005, json!({ "value": v }));
    let layered_field = ScalarField2::speed(Preset::Layered { mean: 2.0, amplitude: 1.0 })?;
    let layered = Engine::new(&layered_field, params)?;
    let v1 = norm_estimate(&layered, [1, 0], lambda)?.value;
    let v2 = norm_estimate(&layered, [0, 1], lambda)?.value;
    let r3 = 3f64.sqrt();
    check(&mut checks, "layered: norm of (1,0)", (v1 * r3 - 1.0).abs() <= 0.02, json!({ "value": v1 }));
    check(&mut checks, "layered: norm of (0,1)", (3.0 * v2 - 1.0).abs() <= 0.02, json!({ "value": v2 }));
    let f = fekete_refine(&layered, [0, 1], 3)?;
    let mono = f.fekete_sequence.windows(2).all(|w| w[1].1 <= w[0].1 + eps_quad(f.fekete_sequence[0].1));
    check(&mut checks, "layered: dyadic sequence non-increasing", mono, json!({ "sequence": f.fekete_sequence }));

    let bumps_field = ScalarField2::speed(Preset::Bumps { base: 1.0, amp: 4.0, sigma: 0.15 })?;
    let bumps = Engine::new(&bumps_field, params)?;
    let n = params.n as i64;
    let (x, y) = (LatticePoint::new(1, 2), LatticePoint::new(2 * n + 5, n + 3));
    let d = bumps.node_distance(x, y)?;
    let dt = bumps.node_distance(x.offset([3 * n, -2 * n]), y.offset([3 * n, -2 * n]))?;
    check(&mut checks, "bumps: translation invariance", d.to_bits() == dt.to_bits(), json!({ "d": d }));

    let layered_front = build_front(&direction_sweep(&layered, q_max, lambda, strategy)?, angle_tol)?;
    let dual = hbar_dual(&layered_front, [1.0, 0.0]);
    let im = infmax_upper(&layered_field, [1.0, 0.0], &InfmaxConfig { nv: 32, iters: 200, ..InfmaxConfig::default() })?;
    write_json(&dir.join("infmax.json"), &json!({ "value": im.value, "initial": im.initial, "trace": im.trace }))?;
    check(
        &mut checks,
        "layered: inf-max bounds dual from above",
        im.value >= dual * (1.0 - 0.03) && im.initial == 3.0,
        json!({ "infmax": im.value, "dual": dual }),
    );

    let zero = ScalarField2::preset(Preset::Constant { value: 0.0 })?;
    let mcfg = MechanicalConfig { params: EngineParams { n: 16, ..params }, ..MechanicalConfig::default() };
    let m = hbar_mechanical(&zero, [1.0, 0.0], &mcfg)?;
    write_json(&dir.join("mechanical.json"), &m)?;
    check(&mut checks, "zero potential: H(1,0) = 1/2", (m.value - 0.5).abs() <= 0.02, json!({ "value": m.value }));
    let probe = convexity_probe(&zero, [1.0, 0.0], [2.0, 0.0], 1, &mcfg)?;
    check(
        &mut checks,
        "zero potential: convexity gap",
        probe.passed && (probe.gaps[0].1 - 0.125).abs() <= 0.03,
        json!({ "gap": probe.gaps[0].1 }),
    );

    // Splicing two shortest paths that share nodes.
    let window = crate::lattice::LatticeWindow::new([-1, -1], [3, 3], params.n)?;
    let graph = bumps.graph(window)?;
    let map = crate::shortest_path::sssp(&graph, LatticePoint::new(0, 0))?;
    let p1 = crate::shortest_path::extract_path(&map, LatticePoint::new(2 * n, 2 * n - 2))?;
    let p2 = crate::shortest_path::extract_path(&map, LatticePoint::new(2 * n - 2, 2 * n))?;
    let cs = find_crossings(&p1, &p2)?;
    let splice_ok = if cs.len() >= 2 {
        let (a, b) = adjust(&p1, &p2, cs[0], cs[cs.len() - 1])?;
        let before = exact_sum(p1.steps.iter().chain(&p2.steps).copied());
        let after = exact_sum(a.steps.iter().chain(&b.steps).copied());
        let da = map.distance(a.last());
        let db = map.distance(b.last());
        before.to_bits() == after.to_bits()
            && (a.length() - da).abs() <= 1e-12 * da
            && (b.length() - db).abs() <= 1e-12 * db
    } else {
        false
    };
    write_json(&dir.join("path_bumps.json"), &path_to_json(&p1))?;
    std::fs::write(dir.join("path_bumps.svg"), paths_to_svg(&bumps_field, &[&p1, &p2]))?;
    check(&mut checks, "bumps: splice conserves length", splice_ok, json!({ "crossings": cs.len() }));

    let cosine = ScalarField2::preset(Preset::Layered { mean: 0.0, amplitude: 1.0 })?;
    let a_c = crate::field::mechanical_to_metric(&cosine, 2.0)?;
    let ec = Engine::new(&a_c, params)?;
    let path = ec.node_path(LatticePoint::new(0, 0), LatticePoint::new(2 * n + 3, n - 1))?;
    let act = action_of_path(&path, &cosine, 2.0)?;
    check(
        &mut checks,
        "cosine potential: action equals a_c length",
        (act - path.length()).abs() <= 1e-12 * act,
        json!({ "action": act }),
    );

    let stride = (params.n / 4).max(1);
    let c_pos = min_closed_geodesic(&layered, [0, 1], stride)?;
    let c_neg = min_closed_geodesic(&layered, [0, -1], stride)?;
    check(
        &mut checks,
        "layered: closed geodesic reversal symmetry",
        (c_pos.value - c_neg.value).abs() <= 1e-12 * c_pos.value,
        json!({ "value": c_pos.value }),
    );

    write_json(&dir.join("report.json"), &json!({ "checks": checks }))?;
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys_and_bad_ranges() {
        let ok: RunConfig = serde_json::from_str(r#"{"N": 32, "preset": "constant:2"}"#).unwrap();
        assert_eq!(ok.n, Some(32));
        assert!(serde_json::from_str::<RunConfig>(r#"{"N": 32, "bogus": 1}"#).is_err());
        for bad in [
            RunConfig { n: Some(4), ..RunConfig::default() },
            RunConfig { s: Some(0), ..RunConfig::default() },
            RunConfig { q: Some(17), ..RunConfig::default() },
            RunConfig { lambda: Some(33), ..RunConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn flags_override_config() {
        let file = RunConfig { n: Some(32), lambda: Some(4), ..RunConfig::default() };
        let flags = RunConfig { n: Some(16), ..RunConfig::default() };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.n, Some(16));
        assert_eq!(merged.lambda, Some(4));
    }

    #[test]
    fn usage_errors_exit_nonzero() {
        assert_eq!(run_command(["stablefront", "bogus"]), EXIT_ERROR);
        assert_eq!(run_command(["stablefront", "norm"]), EXIT_ERROR);
        assert_eq!(run_command(["stablefront", "norm", "--q", "1,0", "--N", "4", "--preset", "constant:2"]), EXIT_ERROR);
    }

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn facets_command_parses_q_list() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = run_command([
            "stablefront", "facets", "--preset", "constant:2", "--N", "8", "--lambda", "2", "--Q-list", "2,4", "--out", out,
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(dir.path().join("facets.json").exists());
    }

    #[test]
    fn norm_command_writes_csv() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = run_command([
            "stablefront", "norm", "--preset", "constant:2", "--q", "1,0", "--lambda", "8", "--N", "16", "--out", out,
        ]);
        assert_eq!(code, EXIT_OK);
        let csv = std::fs::read_to_string(dir.path().join("norm.csv")).unwrap();
        let value: f64 = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
        assert!((value - 0.5).abs() < 0.005);
    }
}
