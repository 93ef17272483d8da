//! Command-line front end: argument parsing, subcommand dispatch and artifact
//! emission with a manifest of content hashes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analysis;
use crate::basis::{BasisIndex, StateVector};
use crate::config::{load_config, ConfigFile, DriveConfig, RunConfig};
use crate::error::{Error, Result};
use crate::mis;
use crate::model::Geometry;
use crate::observables::{self, ProjectorMode};
use crate::optimize::{optimize_pulse, PARAMETER_NAMES};
use crate::propagator::{evolve_until, tracking_evolve_from, ContextOptions, HamiltonianContext};
use crate::rng::derive_seed;

/// Caps the automatic MIS run budget.
pub const MAX_AUTO_RUNS: u64 = 10_000_000;

#[derive(Debug, Parser)]
#[command(name = "rydex", version, about = "Rydberg blockade dynamics, pulse search and MIS sampling")]
pub struct Cli {
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "NS")]
    pub dt: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Evolve the configured array and write trajectories, top states and g².
    Simulate,
    /// Search the detuning sweep on a small ring.
    Optimize,
    /// Solve MIS by sampling the driven array.
    Mis {
        #[arg(long, value_name = "PATH")]
        edges: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        coords: Option<PathBuf>,
    },
    /// Closed-form scaling, budget, photon and decay estimates.
    Stats {
        #[arg(value_enum, default_value = "all")]
        report: StatsReport,
    },
    /// Sample final-state measurements and detection-thinned histograms.
    Sample,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Optimize => "optimize",
            Command::Mis { .. } => "mis",
            Command::Stats { .. } => "stats",
            Command::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatsReport {
    Scaling,
    Budget,
    Photons,
    Decay,
    All,
}

/// What a subcommand wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub inputs_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub timestamp_unix: u64,
    pub artifacts: BTreeMap<String, String>,
}

struct Artifacts {
    dir: PathBuf,
    inputs_hash: String,
    hashes: BTreeMap<String, String>,
}

impl Artifacts {
    fn new(dir: PathBuf, inputs_hash: String) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Artifacts { dir, inputs_hash, hashes: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.hashes.insert(name.to_owned(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn write_with<F: FnOnce(&mut Vec<u8>) -> Result<()>>(&mut self, name: &str, f: F) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    /// JSON object tagged with the inputs hash.
    fn write_json(&mut self, name: &str, mut value: serde_json::Value) -> Result<()> {
        if let Some(map) = value.as_object_mut() {
            map.insert("inputs_hash".into(), json!(self.inputs_hash));
        }
        let mut bytes = serde_json::to_vec_pretty(&value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}

/// Everything a subcommand needs besides its own flags.
pub struct Invocation {
    pub config: RunConfig,
    pub config_dir: PathBuf,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

impl Invocation {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let (mut config, config_dir) = match &cli.config {
            Some(path) => (load_config(path)?, path.parent().map(Path::to_path_buf).unwrap_or_default()),
            None => (default_config()?, PathBuf::new()),
        };
        if let Some(seed) = cli.seed {
            config = config.with_seed(seed)?;
        }
        if let Some(dt) = cli.dt {
            config = config.with_dt(dt)?;
        }
        let out = cli.out.clone().unwrap_or_else(|| config.output_dir.clone());
        if cli.workers == Some(0) {
            return Err(Error::Validation { field: "--workers".into(), message: "must be >= 1".into() });
        }
        Ok(Invocation { config, config_dir, out, workers: cli.workers })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }
}

/// Five-site ring with the default ladder.
pub fn default_config() -> Result<RunConfig> {
    let mut file = ConfigFile::default();
    file.geometry.n_sites = Some(5);
    RunConfig::from_file(file)
}

fn inputs_hash(command: &Command, config: &RunConfig, extra: &[Vec<u8>]) -> String {
    let mut h = Sha256::new();
    h.update(command.name().as_bytes());
    h.update([0]);
    h.update(config.to_toml().as_bytes());
    for e in extra {
        h.update([0]);
        h.update(e);
    }
    hex::encode(h.finalize())
}

/// Runs one subcommand and returns the manifest it wrote.
pub fn run_subcommand(command: &Command, inv: &Invocation) -> Result<Manifest> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = inv.workers {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Error::InvalidShape(format!("thread pool: {e}")))?
    };
    pool.install(|| dispatch(command, inv))
}

fn dispatch(command: &Command, inv: &Invocation) -> Result<Manifest> {
    let cfg = &inv.config;
    let mut extra = Vec::new();
    let mut mis_inputs = None;
    if let Command::Mis { edges, coords } = command {
        let edges = edges.clone().or_else(|| cfg.mis.edges.as_ref().map(|p| inv.resolve(p)));
        let coords = coords.clone().or_else(|| cfg.mis.coords.as_ref().map(|p| inv.resolve(p)));
        let read = |p: &Option<PathBuf>| -> Result<Option<(String, String)>> {
            p.as_ref().map(|p| Ok((std::fs::read_to_string(p)?, p.display().to_string()))).transpose()
        };
        let (edges, coords) = (read(&edges)?, read(&coords)?);
        for (text, _) in edges.iter().chain(coords.iter()) {
            extra.push(text.as_bytes().to_vec());
        }
        mis_inputs = Some((edges, coords));
    }
    if let Command::Stats { report } = command {
        extra.push(format!("{report:?}").into_bytes());
    }
    let hash = inputs_hash(command, cfg, &extra);
    let mut out = Artifacts::new(inv.out.clone(), hash.clone())?;
    out.write("config.toml", cfg.to_toml().as_bytes())?;
    match command {
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::Optimize => optimize(cfg, &mut out)?,
        Command::Mis { .. } => {
            let (edges, coords) = mis_inputs.expect("read above");
            solve_mis(cfg, edges, coords, &mut out)?
        }
        Command::Stats { report } => stats(cfg, *report, &mut out)?,
        Command::Sample => sample(cfg, &mut out)?,
    }
    let mut versions = BTreeMap::new();
    versions.insert("rydex".to_owned(), env!("CARGO_PKG_VERSION").to_owned());
    let manifest = Manifest {
        subcommand: command.name().to_owned(),
        inputs_hash: hash,
        seed: cfg.seed(),
        versions,
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        artifacts: out.hashes.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(out.dir.join("manifest.json"), bytes)?;
    Ok(manifest)
}

fn context(cfg: &RunConfig, geometry: &Geometry) -> Result<HamiltonianContext> {
    let options = ContextOptions { memory_cap: cfg.simulation.capacity_bytes, ..ContextOptions::default() };
    HamiltonianContext::with_options(cfg.levels.clone(), cfg.schedule, geometry, options)
}

fn final_state(cfg: &RunConfig, geometry: &Geometry) -> Result<(StateVector, f64)> {
    let ctx = context(cfg, geometry)?;
    let psi0 = StateVector::ground(geometry.n_sites(), cfg.levels.len())?;
    let traj = evolve_until(&psi0, &ctx, cfg.simulation.dt_ns, cfg.schedule.duration, &[])?;
    let drift = traj.norm_drift;
    Ok((traj.states.into_iter().last().expect("final snapshot"), drift))
}

fn objective_for(cfg: &RunConfig, geometry: &Geometry) -> Result<Vec<BasisIndex>> {
    if geometry.n_sites() > mis::MAX_ORACLE_NODES {
        return Ok(Vec::new());
    }
    let graph = mis::blockade_graph(geometry, &cfg.levels, cfg.schedule.omega)?;
    mis::objective_states(&graph, &cfg.levels)
}

fn labels(indices: &[BasisIndex], state: &StateVector) -> Result<Vec<String>> {
    indices
        .iter()
        .map(|&i| crate::basis::decode(i, state.n_sites(), state.levels_per_site()).map(|o| o.label()))
        .collect()
}

fn simulate(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let ctx = context(cfg, &cfg.geometry)?;
    let objective = objective_for(cfg, &cfg.geometry)?;
    let mut tracked = vec![BasisIndex(0)];
    tracked.extend(objective.iter().copied().filter(|i| i.0 != 0));
    let psi0 = StateVector::ground(cfg.geometry.n_sites(), cfg.levels.len())?;
    let times = cfg.simulation.record_times(cfg.schedule.duration);
    let run = tracking_evolve_from(&psi0, &ctx, &tracked, cfg.simulation.dt_ns, &times, cfg.simulation.top_k)?;
    out.write_with("trajectory.csv", |w| run.write_csv(w))?;
    out.write_json("top_k.json", json!({ "states": run.top_k }))?;
    let target = observables::g2_matrix(&run.final_state, ProjectorMode::target(&cfg.levels));
    out.write_with("g2.csv", |w| target.write_csv(w))?;
    let any = observables::g2_matrix(&run.final_state, ProjectorMode::AnyRydberg);
    out.write_with("g2_any_rydberg.csv", |w| any.write_csv(w))?;
    let p_objective = if objective.is_empty() { None } else { Some(observables::objective_probability(&run.final_state, &objective)?) };
    out.write_json(
        "summary.json",
        json!({
            "n_sites": cfg.geometry.n_sites(),
            "dimension": ctx.dim(),
            "objective_states": labels(&objective, &run.final_state)?,
            "objective_probability": p_objective,
            "norm_drift": run.norm_drift,
        }),
    )
}

fn optimize(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let result = optimize_pulse(&cfg.search, &cfg.levels, &cfg.schedule)?;
    let drive = DriveConfig::from_schedule(&result.best_schedule);
    #[derive(Serialize)]
    struct Block<'a> {
        drive: &'a DriveConfig,
    }
    let block = toml::to_string(&Block { drive: &drive }).expect("drive block serializes");
    let params: serde_json::Map<String, serde_json::Value> =
        PARAMETER_NAMES.iter().zip(result.best_params).map(|(k, v)| ((*k).to_owned(), json!(v))).collect();
    out.write_json(
        "optimize.json",
        json!({
            "best_params": params,
            "best_probability": result.best_probability,
            "initial_probability": result.initial_probability,
            "budget_exhausted": result.budget_exhausted,
            "evaluations": result.evaluations,
            "schedule": block,
        }),
    )?;
    out.write("schedule.toml", block.as_bytes())
}

fn solve_mis(
    cfg: &RunConfig,
    edges: Option<(String, String)>,
    coords: Option<(String, String)>,
    out: &mut Artifacts,
) -> Result<()> {
    let geometry = match &coords {
        Some((text, path)) => mis::read_coordinates(text, path)?,
        None => cfg.geometry.clone(),
    };
    let graph = match &edges {
        Some((text, path)) => mis::read_edge_list(text, Some(geometry.n_sites()), path)?,
        None => mis::blockade_graph(&geometry, &cfg.levels, cfg.schedule.omega)?,
    };
    let (state, _) = final_state(cfg, &geometry)?;
    let oracle = if graph.n_nodes() <= mis::MAX_ORACLE_NODES { Some(mis::brute_force_mis(&graph)?) } else { None };
    let p_objective = match &oracle {
        Some((_, sets)) => {
            let states = mis::sets_to_basis(sets, graph.n_nodes(), cfg.levels.len() + 1, cfg.levels.target_code())?;
            Some(observables::objective_probability(&state, &states)?)
        }
        None => None,
    };
    let runs = match (cfg.mis.runs, p_objective, &oracle) {
        (Some(r), _, _) => r,
        (None, Some(p), Some((k, _))) if p > 0.0 && cfg.mis.eta > 0.0 => {
            let budget = analysis::run_budget(p, cfg.mis.eta, *k as u32, cfg.mis.confidence, 0.0)?;
            if budget.runs > MAX_AUTO_RUNS {
                log::warn!("run budget {} capped at {MAX_AUTO_RUNS}", budget.runs);
            }
            budget.runs.min(MAX_AUTO_RUNS) as usize
        }
        _ => cfg.sampling.runs,
    };
    let solution = mis::solve_from_state(&state, &graph, runs, cfg.mis.eta, derive_seed(cfg.seed(), "mis"))?;
    let mut value = serde_json::to_value(&solution)?;
    if let Some(map) = value.as_object_mut() {
        map.insert("objective_probability".into(), json!(p_objective));
        map.insert("eta".into(), json!(cfg.mis.eta));
    }
    out.write_json("solution.json", value)?;
    out.write_with("graph.txt", |w| graph.write_edge_list(w))
}

fn sample(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let (state, drift) = final_state(cfg, &cfg.geometry)?;
    let seed = cfg.seed();
    let draws = observables::sample_states(&state, cfg.sampling.runs, derive_seed(seed, "sample"))?;
    out.write_with("samples.jsonl", |w| draws.write_jsonl(w))?;
    let mut histograms = vec![observables::excitation_histogram(&draws, None, 1.0)];
    for (i, &eta) in cfg.sampling.efficiencies.iter().enumerate() {
        let thinned = observables::thin_detection(&draws, eta, derive_seed(seed, &format!("thin/{i}")))?;
        histograms.push(observables::excitation_histogram(&thinned, None, eta));
    }
    out.write_with("histogram.csv", |w| observables::write_histograms_csv(w, &histograms))?;
    out.write_json(
        "summary.json",
        json!({
            "runs": cfg.sampling.runs,
            "mean_excitations": draws.mean_count(None),
            "norm_drift": drift,
        }),
    )
}

fn stats(cfg: &RunConfig, report: StatsReport, out: &mut Artifacts) -> Result<()> {
    let st = &cfg.stats;
    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut doc = serde_json::Map::new();
    let want = |r: StatsReport| report == StatsReport::All || report == r;
    if want(StatsReport::Scaling) {
        let fit = analysis::fit_exponential_scaling(&st.points)?;
        let (p, sigma) = analysis::extrapolate(&fit, st.extrapolate_to);
        rows.push(("scaling.amplitude".into(), fit.amplitude));
        rows.push(("scaling.rate_per_site".into(), fit.rate));
        rows.push(("scaling.r_squared".into(), fit.r_squared()));
        rows.push((format!("scaling.p_at_{}", st.extrapolate_to), p));
        rows.push((format!("scaling.sigma_at_{}", st.extrapolate_to), sigma));
        doc.insert("scaling".into(), json!({ "fit": fit, "n": st.extrapolate_to, "p": p, "sigma": sigma }));
    }
    if want(StatsReport::Budget) {
        let p_obj = match st.points.is_empty() {
            true => return Err(Error::DegenerateInput("stats.points is empty".into())),
            false => analysis::extrapolate(&analysis::fit_exponential_scaling(&st.points)?, st.extrapolate_to).0,
        };
        let b = analysis::run_budget(p_obj, st.eta, st.k_excitations, st.confidence, st.t_single_run_s)?;
        rows.push(("budget.p_objective".into(), p_obj));
        rows.push(("budget.p_run".into(), b.p_run));
        rows.push(("budget.runs".into(), b.runs as f64));
        rows.push(("budget.wall_time_s".into(), b.wall_time_s));
        doc.insert("budget".into(), json!(b));
    }
    if want(StatsReport::Photons) {
        let mut list = Vec::new();
        for (n_low, l_low) in [(2u32, 1u32), (6, 1)] {
            let b = analysis::photon_budget(25, 0, n_low, l_low, st.wait_lifetimes, st.p_collect)?;
            rows.push((format!("photons.25s_{n_low}p.photons"), b.photons));
            rows.push((format!("photons.25s_{n_low}p.distinguishability"), b.distinguishability));
            list.push(json!({ "n_high": 25, "l_high": 0, "n_low": n_low, "l_low": l_low, "budget": b }));
        }
        doc.insert("photons".into(), json!(list));
    }
    if want(StatsReport::Decay) {
        let (max, mean) = analysis::decay_bound(cfg.schedule.duration, st.decay_onset_ns, st.lifetime_ns)?;
        rows.push(("decay.max_probability".into(), max));
        rows.push(("decay.mean_estimate".into(), mean));
        doc.insert("decay".into(), json!({ "max_probability": max, "mean_estimate": mean }));
    }
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for (k, v) in &rows {
        writeln!(lock, "{k:<width$}  {v:.6e}")?;
    }
    out.write_with("stats.csv", |w| {
        writeln!(w, "quantity,value")?;
        for (k, v) in &rows {
            writeln!(w, "{k},{}", crate::propagator::fmt_f64(*v))?;
        }
        Ok(())
    })?;
    out.write_json("stats.json", serde_json::Value::Object(doc))
}

/// Machine-readable error body for a failed run.
pub fn error_json(e: &Error) -> String {
    let debug = format!("{e:?}");
    let kind = debug.split(['{', '(', ' ']).next().unwrap_or("Error");
    json!({ "error": kind, "message": e.to_string() }).to_string()
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match Invocation::from_cli(&cli).and_then(|inv| run_subcommand(&cli.command, &inv)) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}
