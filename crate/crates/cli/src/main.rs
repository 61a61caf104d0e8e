//! `reachkit` command-line front end.
//!
//! Every command reads an optional JSON config, applies `--set key=value`
//! overrides and writes its outputs plus a `manifest.json` into one directory.

mod config;
mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use reachkit::contingency::write_trace;
use reachkit::dataset::{generate_dataset, load_dataset, test_scenarios, DatasetConfig};
use reachkit::eval::{
    contingency_csv_row, route_csv_row, run_contingency_suite, run_route_suite, summarize_routes,
    ContingencySuiteConfig, RouteSuiteConfig, CONTINGENCY_CSV_HEADER, ROUTE_CSV_HEADER,
};
use reachkit::levelset::{sdf_obstacles, sdf_target, solve_hji_vi, write_value_field, SolverConfig};
use reachkit::sim::{run_mission, validate, Scenario, SCENARIO_VERSION};
use reachkit::surrogate::{certify, BackendConfig, CertificationReport, CertifyConfig, SurrogateBackend};
use reachkit::{Bounds, Grid3, Obstacle, ObstacleSet};

use manifest::RunManifest;

/// Root for default output directories.
const OUT_ENV: &str = "REACHKIT_OUT";
const DEFAULT_OUT_ROOT: &str = "runs";

/// Exit status of a certification that ran but did not pass.
const EXIT_CERT_FAIL: u8 = 2;

#[derive(Parser)]
#[command(name = "reachkit", version, about = "Certified reach-avoid planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. `solver.horizon=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $REACHKIT_OUT/<command> or runs/<command>].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the reach-avoid value field for a set of disk obstacles.
    Solve(Common),
    /// Write a single-obstacle dataset of obstacle and value fields.
    GenDataset(Common),
    /// Measure a value backend against solved fields.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Dataset directory to certify on instead of a generated test set.
        #[arg(long)]
        test_set: Option<PathBuf>,
    },
    /// Validate and run a multi-goal mission scenario.
    Plan(Common),
    /// Randomised recovery runs toward one safe disk.
    ContingencyEval(Common),
    /// Seeded multi-goal missions over the constraint and map variants.
    RouteEval(Common),
    /// Render a mission trace CSV or a certification report JSON.
    Plot {
        /// `trace.csv` from `plan` or `report.json` from `certify`.
        input: PathBuf,
        /// Scenario whose obstacles, anchors and goals are drawn under a trace.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-hash a run directory against its manifest.
    Verify {
        /// Directory holding `manifest.json`.
        dir: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Solve(_) => "solve",
            Self::GenDataset(_) => "gen-dataset",
            Self::Certify { .. } => "certify",
            Self::Plan(_) => "plan",
            Self::ContingencyEval(_) => "contingency-eval",
            Self::RouteEval(_) => "route-eval",
            Self::Plot { .. } => "plot",
            Self::Verify { .. } => "verify",
        }
    }
}

fn out_dir(explicit: Option<&Path>, command: &str) -> Result<PathBuf> {
    let dir = match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV)
            .map_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT), PathBuf::from)
            .join(command),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Loads the command's config with `--seed` folded in as an override of `seed_key`.
fn load_config<T: serde::de::DeserializeOwned>(c: &Common, seed_key: Option<&str>) -> Result<T> {
    let mut overrides = c.set.clone();
    if let Some(seed) = c.seed {
        let Some(key) = seed_key else {
            bail!("this command is deterministic and takes no --seed");
        };
        overrides.push(format!("{key}={seed}"));
    }
    config::load(c.config.as_deref(), &overrides)
}

fn start_manifest(command: &str, c: &Common, out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, c.config.as_deref(), c.seed, out);
    if let Some(p) = &c.config {
        m.input(p)?;
    }
    Ok(m)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", p.display()))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
}

/// Relative paths inside a config are taken relative to the config file.
fn resolve(config: Option<&Path>, p: &Path) -> PathBuf {
    match config.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn resolve_backend(config: Option<&Path>, b: &mut BackendConfig) {
    if let BackendConfig::Trained { weights, .. } = b {
        *weights = resolve(config, weights);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SolveConfig {
    dims: [usize; 3],
    half_width: f64,
    target_radius: f64,
    obstacles: Vec<Obstacle>,
    bounds: Bounds,
    solver: SolverConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            dims: [50, 50, 25],
            half_width: 10.0,
            target_radius: 1.0,
            obstacles: Vec::new(),
            bounds: Bounds::default(),
            solver: SolverConfig::default(),
        }
    }
}

fn cmd_solve(c: &Common) -> Result<u8> {
    let cfg: SolveConfig = load_config(c, None)?;
    let out = out_dir(c.out.as_deref(), "solve")?;
    let mut m = start_manifest("solve", c, &out)?;
    let h = cfg.half_width;
    let grid = Grid3::new((-h, h), (-h, h), cfg.dims)?;
    let obs = ObstacleSet::new(cfg.obstacles.clone());
    obs.validate()?;
    let ell = sdf_target(&grid, cfg.target_radius);
    let g = sdf_obstacles(&grid, &obs);
    let vf = solve_hji_vi(&grid, &ell, &g, &cfg.bounds, &cfg.solver)?;
    write_value_field(&vf, &out.join("value.hjvf"))?;
    m.artifact("value.hjvf")?;
    write_json(&out, "config.json", &cfg)?;
    m.artifact("config.json")?;
    m.write()?;
    info!("{} slices up to T = {}", vf.slice_count(), vf.horizon());
    println!("{}", out.join("value.hjvf").display());
    Ok(0)
}

fn cmd_gen_dataset(c: &Common) -> Result<u8> {
    let cfg: DatasetConfig = load_config(c, Some("seed"))?;
    let out = out_dir(c.out.as_deref(), "gen-dataset")?;
    let mut m = start_manifest("gen-dataset", c, &out)?;
    let index = generate_dataset(&cfg, &out)?;
    m.artifact(reachkit::dataset::INDEX_FILE)?;
    for s in &index.samples {
        m.artifact(&s.sdf)?;
        m.artifact(&s.value)?;
    }
    m.write()?;
    println!("{} samples in {}", index.samples.len(), out.display());
    Ok(0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CertifyFile {
    backend: BackendConfig,
    certify: CertifyConfig,
    /// Generated in memory unless `test_set_dir` is given.
    test_set: DatasetConfig,
    test_set_dir: Option<PathBuf>,
}

impl Default for CertifyFile {
    fn default() -> Self {
        Self {
            backend: BackendConfig::Perturbed {
                epsilon: 0.1,
                seed: 0,
            },
            certify: CertifyConfig::default(),
            test_set: DatasetConfig {
                seed: 1,
                ..DatasetConfig::default()
            },
            test_set_dir: None,
        }
    }
}

fn cmd_certify(c: &Common, test_set: Option<&Path>) -> Result<u8> {
    let mut cfg: CertifyFile = load_config(c, Some("backend.seed"))?;
    resolve_backend(c.config.as_deref(), &mut cfg.backend);
    let out = out_dir(c.out.as_deref(), "certify")?;
    let mut m = start_manifest("certify", c, &out)?;
    if let BackendConfig::Trained { weights, .. } = &cfg.backend {
        if !weights.is_file() {
            bail!("trained backend: weights file {} not found", weights.display());
        }
        m.input(weights)?;
    }
    let backend = SurrogateBackend::from_config(&cfg.backend).context("loading backend")?;
    let dir = test_set
        .map(Path::to_path_buf)
        .or_else(|| cfg.test_set_dir.as_ref().map(|p| resolve(c.config.as_deref(), p)));
    let scenarios = match &dir {
        Some(d) => {
            m.input(&d.join(reachkit::dataset::INDEX_FILE))?;
            load_dataset(d).with_context(|| format!("loading test set {}", d.display()))?.1
        }
        None => test_scenarios(&cfg.test_set)?,
    };
    let report = certify(&backend, &scenarios, &cfg.certify)?;
    write_json(&out, "report.json", &report)?;
    report.write_csv(&out.join("report.csv"))?;
    m.artifact("report.json")?;
    m.artifact("report.csv")?;
    m.write()?;
    println!(
        "{}: epsilon {:.6} epsilon0 {:.6} rho {:.6} eta {:.6} bound {:.6e}",
        if report.pass { "PASS" } else { "FAIL" },
        report.epsilon,
        report.epsilon0,
        report.rho,
        report.eta_epsilon,
        report.violation_bound
    );
    Ok(if report.pass { 0 } else { EXIT_CERT_FAIL })
}

#[derive(Serialize)]
struct Timing {
    wall_time: f64,
}

fn load_scenario(c: &Common) -> Result<Scenario> {
    if c.config.is_none() {
        bail!("plan needs a scenario file: --config <scenario.json>");
    }
    let mut s: Scenario = load_config(c, Some("seed"))?;
    if s.scenario_version != SCENARIO_VERSION {
        bail!("unsupported scenario_version {}", s.scenario_version);
    }
    resolve_backend(c.config.as_deref(), &mut s.field.backend);
    Ok(s)
}

fn cmd_plan(c: &Common) -> Result<u8> {
    let scn = load_scenario(c)?;
    let out = out_dir(c.out.as_deref(), "plan")?;
    let mut m = start_manifest("plan", c, &out)?;
    let provider = scn.provider()?;
    let v = validate(&scn, &provider)?;
    if !v.is_ok() {
        write_json(&out, "validation.json", &v)?;
        let lines: Vec<String> = v
            .violations
            .iter()
            .map(|x| {
                let kind = serde_json::to_value(x).ok().and_then(|j| j["kind"].as_str().map(String::from));
                format!("{}: {x}", kind.unwrap_or_default())
            })
            .collect();
        bail!("scenario invalid:\n  {}", lines.join("\n  "));
    }
    let r = run_mission(&scn, &provider)?;
    let mut metrics = r.metrics.clone();
    metrics.wall_time = 0.0;
    write_json(&out, "metrics.json", &metrics)?;
    write_json(&out, "tours.json", &r.tours)?;
    let mut buf = Vec::new();
    write_trace(&r.trace, &mut buf)?;
    std::fs::write(out.join("trace.csv"), &buf)?;
    let rows = plot::read_trace(&out.join("trace.csv"))?;
    write_text(&out, "trace.svg", &plot::trace_svg(&rows, Some(&scn)))?;
    for a in ["metrics.json", "tours.json", "trace.csv", "trace.svg"] {
        m.artifact(a)?;
    }
    write_json(&out, "timing.json", &Timing { wall_time: r.metrics.wall_time })?;
    m.volatile("timing.json");
    m.write()?;
    let mt = &r.metrics;
    println!(
        "success {} distance {:.3} sim_time {:.2} order {:?} contingencies {} violations {}",
        mt.success, mt.distance, mt.sim_time, mt.visit_order, mt.contingency_activations, mt.feasibility_violations
    );
    Ok(if mt.success { 0 } else { 1 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ContingencyEvalConfig {
    #[serde(flatten)]
    suite: ContingencySuiteConfig,
    /// One suite per obstacle count; overrides `obstacles`.
    obstacle_counts: Vec<usize>,
}

impl Default for ContingencyEvalConfig {
    fn default() -> Self {
        Self {
            suite: ContingencySuiteConfig::default(),
            obstacle_counts: vec![1, 5],
        }
    }
}

fn cmd_contingency_eval(c: &Common) -> Result<u8> {
    let mut cfg: ContingencyEvalConfig = load_config(c, Some("seed"))?;
    resolve_backend(c.config.as_deref(), &mut cfg.suite.backend);
    let out = out_dir(c.out.as_deref(), "contingency-eval")?;
    let mut m = start_manifest("contingency-eval", c, &out)?;
    let provider = cfg.suite.provider()?;
    let mut csv = format!("{CONTINGENCY_CSV_HEADER}\n");
    let mut summaries = Vec::new();
    for &n in &cfg.obstacle_counts {
        let suite = ContingencySuiteConfig {
            obstacles: n,
            ..cfg.suite.clone()
        };
        let (_, s) = run_contingency_suite(&suite, &provider)?;
        csv.push_str(&contingency_csv_row(&s));
        csv.push('\n');
        summaries.push(s);
    }
    write_text(&out, "contingency.csv", &csv)?;
    write_json(&out, "summary.json", &summaries)?;
    m.artifact("contingency.csv")?;
    m.artifact("summary.json")?;
    m.write()?;
    print!("{csv}");
    Ok(0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RouteEvalConfig {
    /// Base scenario, relative to this config file.
    scenario: PathBuf,
    #[serde(flatten)]
    suite: RouteSuiteConfig,
}

fn cmd_route_eval(c: &Common) -> Result<u8> {
    if c.config.is_none() {
        bail!("route-eval needs a config naming the base scenario: --config <file>");
    }
    let cfg: RouteEvalConfig = load_config(c, Some("seed"))?;
    let path = resolve(c.config.as_deref(), &cfg.scenario);
    let mut base = Scenario::load(&path).with_context(|| format!("loading scenario {}", path.display()))?;
    resolve_backend(Some(&path), &mut base.field.backend);
    let out = out_dir(c.out.as_deref(), "route-eval")?;
    let mut m = start_manifest("route-eval", c, &out)?;
    m.input(&path)?;
    let runs = run_route_suite(&base, &cfg.suite)?;
    let mut csv = format!("{ROUTE_CSV_HEADER}\n");
    for s in summarize_routes(&runs) {
        csv.push_str(&route_csv_row(&s));
        csv.push('\n');
    }
    let timeless: Vec<_> = runs
        .iter()
        .cloned()
        .map(|mut r| {
            r.metrics.wall_time = 0.0;
            r
        })
        .collect();
    write_json(&out, "runs.json", &timeless)?;
    m.artifact("runs.json")?;
    write_text(&out, "routes.csv", &csv)?;
    m.volatile("routes.csv");
    m.write()?;
    print!("{csv}");
    Ok(0)
}

fn cmd_plot(input: &Path, scenario: Option<&Path>, out: Option<&Path>) -> Result<u8> {
    let out = out_dir(out, "plot")?;
    let mut m = RunManifest::new("plot", None, None, &out);
    m.input(input)?;
    let is_report = input.extension().is_some_and(|e| e == "json");
    let (svg, csv) = if is_report {
        let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
        let r: CertificationReport =
            serde_json::from_str(&text).with_context(|| format!("parsing report {}", input.display()))?;
        (plot::report_svg(&r), plot::report_csv(&r))
    } else {
        let rows = plot::read_trace(input)?;
        let scn = match scenario {
            Some(p) => {
                m.input(p)?;
                Some(Scenario::load(p).with_context(|| format!("loading scenario {}", p.display()))?)
            }
            None => None,
        };
        (plot::trace_svg(&rows, scn.as_ref()), plot::trace_csv(&rows))
    };
    write_text(&out, "plot.svg", &svg)?;
    write_text(&out, "plot.csv", &csv)?;
    m.artifact("plot.svg")?;
    m.artifact("plot.csv")?;
    m.write()?;
    println!("{}", out.join("plot.svg").display());
    Ok(0)
}

fn cmd_verify(dir: &Path) -> Result<u8> {
    let p = dir.join(manifest::MANIFEST_FILE);
    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    let mut m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
    // the manifest may have moved with its directory
    m.output_dir = dir.to_path_buf();
    let stale = m.stale()?;
    if stale.is_empty() {
        println!("ok: {} inputs, {} artifacts", m.inputs.len(), m.artifacts.len());
        return Ok(0);
    }
    for s in &stale {
        println!("changed: {s}");
    }
    Ok(1)
}

fn run(cli: Cli) -> Result<u8> {
    info!("reachkit {}", cli.command.name());
    match &cli.command {
        Command::Solve(c) => cmd_solve(c),
        Command::GenDataset(c) => cmd_gen_dataset(c),
        Command::Certify { common, test_set } => cmd_certify(common, test_set.as_deref()),
        Command::Plan(c) => cmd_plan(c),
        Command::ContingencyEval(c) => cmd_contingency_eval(c),
        Command::RouteEval(c) => cmd_route_eval(c),
        Command::Plot { input, scenario, out } => cmd_plot(input, scenario.as_deref(), out.as_deref()),
        Command::Verify { dir } => cmd_verify(dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
