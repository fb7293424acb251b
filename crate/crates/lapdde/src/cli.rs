//! Command-line front end: load or generate scenarios, run integrations and
//! certificates, export trajectories, diagnostics, and plot-ready data.
//!
//! Exit codes: 0 success (for `certify`: at least one branch passes),
//! 1 certificate failure, 2 validation error, 3 runtime error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::diagnostics::{self, ConsensusVerdict, DiagnosticsOptions};
use crate::engine::{integrate_equation, integrate_inequality, SimulationConfig};
use crate::error::{Error, Result};
use crate::graph;
use crate::history::TrajectoryHistory;
use crate::model::{
    EventSequence, NetworkSignal, Prehistory, ResidualSchedule, SignalDocument,
};
use crate::scenarios;

#[derive(Parser)]
#[command(
    name = "lapdde",
    version,
    about = "Delayed averaging consensus: simulation, diagnostics, and structural certificates"
)]
pub struct Cli {
    /// Parallelism for sweeps (default: LAPDDE_JOBS or the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Integrate a scenario and write trajectory, diagnostics, and
    /// certificate artifacts.
    Run(RunArgs),
    /// Check the structural consensus conditions for a scenario.
    Certify(CertifyArgs),
    /// Re-run a scenario across a list of values for one config parameter.
    Sweep(SweepArgs),
    /// Inspect the built-in scenario catalog.
    Scenarios {
        #[command(subcommand)]
        action: ScenariosAction,
    },
}

#[derive(Subcommand)]
pub enum ScenariosAction {
    /// List the built-in scenarios and their default parameters.
    List,
}

/// Flags shared by every command that consumes a config document.
#[derive(Args, Clone)]
pub struct ConfigArgs {
    /// JSON config file; omit to start from defaults.
    pub config: Option<PathBuf>,

    /// Override a config key by dotted path, e.g. `--set integration.step=1e-3`
    /// or `--set scenario.params.weight=2`. May be repeated.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,

    /// Scenario name (shorthand for --set scenario.name=...).
    #[arg(long)]
    pub scenario: Option<String>,

    /// Agent count (shorthand for --set scenario.params.n=...).
    #[arg(long)]
    pub n: Option<usize>,

    /// Communication delay (shorthand for --set scenario.params.delay=...).
    #[arg(long)]
    pub delay: Option<f64>,

    /// Arc weight (shorthand for --set scenario.params.weight=...).
    #[arg(long)]
    pub weight: Option<f64>,

    /// RNG seed for the `random` scenario.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Integration horizon (shorthand for --set integration.t_end=...).
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,

    /// Integration step (shorthand for --set integration.step=...).
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: ConfigArgs,

    /// Output directory for trajectory.csv, diagnostics.{json,csv}, and
    /// certificate.json.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: ConfigArgs,

    /// Threshold for the interval connectivity graphs.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Interval symmetry factor for the type-symmetry branch.
    #[arg(long = "K")]
    pub big_k: Option<f64>,

    /// Period of a uniform event sequence, replacing the scenario's own.
    #[arg(long = "events")]
    pub event_period: Option<f64>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: ConfigArgs,

    /// Dotted config path to vary, e.g. `scenario.params.delay`.
    #[arg(long)]
    pub param: String,

    /// Comma-separated values for the swept parameter.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,

    /// Output directory for summary.csv.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

// ---------------------------------------------------------------------------
// Config document
// ---------------------------------------------------------------------------

fn default_scenario_name() -> String {
    "delayed_ring".to_string()
}

fn default_params() -> Value {
    json!({})
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct ScenarioSection {
    pub name: String,
    pub params: Value,
    /// Load the signal document from a file instead of a named generator.
    pub file: Option<PathBuf>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            name: default_scenario_name(),
            params: default_params(),
            file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct IntegrationSection {
    pub t0: f64,
    pub t_end: Option<f64>,
    pub step: Option<f64>,
    /// Initial values; defaults to n points evenly spaced over [0, 2].
    pub initial: Option<Vec<f64>>,
    /// Constant prehistory; defaults to the initial values.
    pub prehistory: Option<Vec<f64>>,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        IntegrationSection {
            t0: 0.0,
            t_end: None,
            step: None,
            initial: None,
            prehistory: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct DiagnosticsSection {
    pub tolerance: f64,
    pub window_fraction: f64,
    pub divergence_floor: f64,
    pub residual_windows: Vec<f64>,
    /// Export every `stride`-th sample to keep file sizes reasonable.
    pub stride: Option<usize>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        let d = DiagnosticsOptions::default();
        DiagnosticsSection {
            tolerance: d.tolerance,
            window_fraction: d.window_fraction,
            divergence_floor: d.divergence_floor,
            residual_windows: d.residual_windows,
            stride: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct CertificateSection {
    /// Interval graph threshold.
    pub epsilon: f64,
    /// Interval symmetry factor.
    #[serde(rename = "K")]
    pub big_k: f64,
    /// Period of a uniform event sequence when the scenario provides none.
    pub event_period: Option<f64>,
    /// Weight-integral threshold for the finite-horizon persistent graph.
    pub persist_threshold: f64,
}

impl Default for CertificateSection {
    fn default() -> Self {
        CertificateSection {
            epsilon: 0.1,
            big_k: 10.0,
            event_period: None,
            persist_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct Config {
    pub scenario: ScenarioSection,
    pub integration: IntegrationSection,
    pub diagnostics: DiagnosticsSection,
    pub certificate: CertificateSection,
}

/// Assemble the raw config value: file contents, then convenience flags,
/// then explicit `--set` overrides (highest precedence).
fn raw_config(args: &ConfigArgs) -> Result<Value> {
    let mut doc = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        }
        None => json!({}),
    };

    let mut set = |path: &str, value: Value| set_path(&mut doc, path, value);
    if let Some(name) = &args.scenario {
        set("scenario.name", json!(name))?;
    }
    if let Some(n) = args.n {
        set("scenario.params.n", json!(n))?;
    }
    if let Some(d) = args.delay {
        set("scenario.params.delay", json!(d))?;
    }
    if let Some(w) = args.weight {
        set("scenario.params.weight", json!(w))?;
    }
    if let Some(s) = args.seed {
        set("scenario.params.seed", json!(s))?;
    }
    if let Some(t) = args.t_end {
        set("integration.t_end", json!(t))?;
    }
    if let Some(s) = args.step {
        set("integration.step", json!(s))?;
    }

    for item in &args.overrides {
        let (path, text) = item.split_once('=').ok_or_else(|| {
            Error::config(format!("--set expects PATH=VALUE, got `{item}`"))
        })?;
        // Interpret the value as JSON when possible, else as a bare string.
        let value = serde_json::from_str(text).unwrap_or_else(|_| json!(text));
        set_path(&mut doc, path, value)?;
    }
    Ok(doc)
}

/// Insert `value` at a dotted path, creating intermediate objects.
fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("malformed config path `{path}`")));
    }
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(Error::config(format!(
                "config path `{path}` walks through a non-object at `{part}`"
            )));
        }
        node = node
            .as_object_mut()
            .unwrap()
            .entry(part.to_string())
            .or_insert_with(|| json!({}));
    }
    if !node.is_object() {
        return Err(Error::config(format!(
            "config path `{path}` ends inside a non-object"
        )));
    }
    node.as_object_mut()
        .unwrap()
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn typed_config(raw: Value) -> Result<Config> {
    let deserializer = raw;
    serde_path_to_error::deserialize(deserializer)
        .map_err(|e| Error::config(format!("config key `{}`: {}", e.path(), e.inner())))
}

fn load_config(args: &ConfigArgs) -> Result<Config> {
    typed_config(raw_config(args)?)
}

// ---------------------------------------------------------------------------
// Scenario materialization
// ---------------------------------------------------------------------------

/// Everything a command needs about one materialized scenario.
pub struct Materialized {
    pub signal: NetworkSignal,
    pub events: Option<EventSequence>,
    pub residuals: Option<ResidualSchedule>,
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub initial: Vec<f64>,
    pub prehistory: Vec<f64>,
}

const DEFAULT_T_END: f64 = 20.0;
const DEFAULT_STEP_CAP: f64 = 1e-2;

fn linspace_initial(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64).collect()
}

/// Pick a default step: half the tightest stability bound, capped at 1e-2.
fn default_step(signal: &NetworkSignal) -> f64 {
    let mut step = DEFAULT_STEP_CAP;
    if signal.h_bar() > 0.0 {
        step = step.min(signal.h_bar() / 8.0);
    }
    if signal.n() > 1 && signal.a_bar() > 0.0 {
        step = step.min(0.05 / ((signal.n() - 1) as f64 * signal.a_bar()));
    }
    step
}

pub fn materialize(config: &Config) -> Result<Materialized> {
    let (signal, events, residuals, t_end) = match &config.scenario.file {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let doc: SignalDocument = serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
            let signal = doc.signal()?;
            let t_end = config
                .integration
                .t_end
                .unwrap_or_else(|| signal.horizon());
            if t_end > signal.horizon() {
                return Err(Error::config(format!(
                    "integration.t_end = {t_end} exceeds the signal horizon {}",
                    signal.horizon()
                )));
            }
            (signal, doc.event_times, doc.residuals, t_end)
        }
        None => {
            let t_end = config.integration.t_end.unwrap_or(DEFAULT_T_END);
            let (signal, events) =
                scenarios::from_name(&config.scenario.name, &config.scenario.params, t_end)?;
            (signal, events, None, t_end)
        }
    };

    let n = signal.n();
    let initial = match &config.integration.initial {
        Some(v) => {
            if v.len() != n {
                return Err(Error::config(format!(
                    "integration.initial has {} entries for {n} agents",
                    v.len()
                )));
            }
            v.clone()
        }
        None => linspace_initial(n),
    };
    let prehistory = match &config.integration.prehistory {
        Some(v) => {
            if v.len() != n {
                return Err(Error::config(format!(
                    "integration.prehistory has {} entries for {n} agents",
                    v.len()
                )));
            }
            v.clone()
        }
        None => initial.clone(),
    };
    let step = config
        .integration
        .step
        .unwrap_or_else(|| default_step(&signal));

    Ok(Materialized {
        signal,
        events,
        residuals,
        t0: config.integration.t0,
        t_end,
        step,
        initial,
        prehistory,
    })
}

fn integrate(mat: &Materialized) -> Result<TrajectoryHistory> {
    let mut sim = SimulationConfig::new(mat.t0, mat.t_end, mat.step, mat.initial.clone())
        .with_prehistory(Prehistory::Constant(mat.prehistory.clone()));
    match &mat.residuals {
        Some(res) => {
            sim = sim.with_residuals(res.clone());
            integrate_inequality(&mat.signal, &sim)
        }
        None => integrate_equation(&mat.signal, &sim),
    }
}

/// Event sequence for certificates: CLI override first, then the scenario's
/// own, then a uniform default carving the horizon into eight intervals.
fn certificate_events(
    mat: &Materialized,
    cert: &CertificateSection,
    override_period: Option<f64>,
) -> Result<EventSequence> {
    let horizon = mat.signal.horizon();
    if let Some(period) = override_period.or(cert.event_period) {
        return EventSequence::uniform(period, horizon);
    }
    if let Some(events) = &mat.events {
        return Ok(events.clone());
    }
    EventSequence::uniform(horizon / 8.0, horizon)
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Write a file via a temp path in the same directory plus an atomic rename.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn verdict_line(verdict: &ConsensusVerdict, final_diameter: f64) -> String {
    match verdict {
        ConsensusVerdict::ConvergedCommonLimit { c_star } => {
            format!("converged c*\u{2248}{c_star:.1e}")
        }
        ConsensusVerdict::DivergedToMinusInfinity => "diverged_to_-infinity".to_string(),
        ConsensusVerdict::NotConvergedAtHorizon => {
            format!("not_converged final_diameter\u{2248}{final_diameter:.1e}")
        }
    }
}

fn diagnostics_options(section: &DiagnosticsSection, sample_count: usize) -> DiagnosticsOptions {
    // Default stride keeps exports near 10k rows regardless of the step.
    let stride = section
        .stride
        .unwrap_or_else(|| (sample_count / 10_000).max(1));
    DiagnosticsOptions {
        tolerance: section.tolerance,
        window_fraction: section.window_fraction,
        divergence_floor: section.divergence_floor,
        residual_windows: section.residual_windows.clone(),
        stride,
    }
}

struct RunOutcome {
    verdict: ConsensusVerdict,
    final_diameter: f64,
    /// First time after which the diameter stays within tolerance.
    time_to_tolerance: Option<f64>,
}

fn execute_run(config: &Config, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let mat = materialize(config)?;
    let history = integrate(&mat)?;

    let monotonicity_tol =
        1e-9 + 10.0 * mat.step * mat.signal.a_bar() * mat.signal.n() as f64;
    let opts = diagnostics_options(&config.diagnostics, history.len());
    let residuals = mat.residuals.clone().unwrap_or_else(ResidualSchedule::zero);
    let report = diagnostics::compute_report(&history, &residuals, monotonicity_tol, &opts)?;

    let final_diameter = *report.diameter.last().unwrap_or(&f64::NAN);
    let time_to_tolerance = {
        let last_over = report
            .diameter
            .iter()
            .rposition(|&d| d > config.diagnostics.tolerance);
        match last_over {
            None => report.times.first().copied(),
            Some(k) if k + 1 < report.times.len() => Some(report.times[k + 1]),
            Some(_) => None,
        }
    };

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;

        let mut trajectory = Vec::new();
        history.write_csv(&mut trajectory)?;
        write_atomic(&dir.join("trajectory.csv"), &trajectory)?;

        write_atomic(&dir.join("diagnostics.json"), report.to_json()?.as_bytes())?;
        let mut diag_csv = Vec::new();
        report.write_csv(&mut diag_csv)?;
        write_atomic(&dir.join("diagnostics.csv"), &diag_csv)?;

        let events = certificate_events(&mat, &config.certificate, None)?;
        let cert = graph::repeated_strong_connectivity(
            &mat.signal,
            &events,
            config.certificate.epsilon,
        )?;
        write_atomic(&dir.join("certificate.json"), cert.to_json()?.as_bytes())?;
    }

    Ok(RunOutcome {
        verdict: report.verdict,
        final_diameter,
        time_to_tolerance,
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let config = load_config(&args.common)?;
    let outcome = execute_run(&config, Some(&args.out))?;
    println!("{}", verdict_line(&outcome.verdict, outcome.final_diameter));
    Ok(0)
}

pub fn cmd_certify(args: &CertifyArgs) -> Result<i32> {
    let config = load_config(&args.common)?;
    let mat = materialize(&config)?;
    let cert = &config.certificate;
    let epsilon = args.epsilon.unwrap_or(cert.epsilon);
    let big_k = args.big_k.unwrap_or(cert.big_k);
    let events = certificate_events(&mat, cert, args.event_period)?;

    let symmetric = graph::type_symmetry_check(&mat.signal, &events, big_k)?;
    let persistent =
        graph::persistent_graph(&mat.signal, mat.signal.horizon(), cert.persist_threshold)?;
    let (quasi, root) = graph::quasi_strongly_connected(&persistent);
    let branch_i = symmetric && quasi;

    let connectivity = graph::repeated_strong_connectivity(&mat.signal, &events, epsilon)?;
    let branch_ii = connectivity.verdict;

    let m = graph::m_bound(&mat.signal, &events)?;

    println!(
        "branch i  (interval type-symmetry K={big_k}, persistent-graph quasi-strong connectivity): {}",
        if branch_i { "pass" } else { "fail" }
    );
    println!(
        "  type-symmetry: {}; quasi-strongly connected: {}{}",
        pass_fail(symmetric),
        pass_fail(quasi),
        root.map(|r| format!(" (root {r})")).unwrap_or_default()
    );
    println!(
        "branch ii (repeated strong connectivity, epsilon={epsilon}): {}",
        if branch_ii { "pass" } else { "fail" }
    );
    println!("M = {m:.6e}");

    Ok(if branch_i || branch_ii { 0 } else { 1 })
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    if args.values.is_empty() {
        return Err(Error::config("--values must list at least one value"));
    }
    let known_roots = ["scenario", "integration", "diagnostics", "certificate"];
    let root = args.param.split('.').next().unwrap_or("");
    if !known_roots.contains(&root) {
        return Err(Error::config(format!(
            "unknown sweep parameter `{}`; the path must start with one of {:?}",
            args.param, known_roots
        )));
    }

    let base = raw_config(&args.common)?;

    // Validate every configuration up front so a bad value fails fast with
    // exit 2 instead of surfacing mid-sweep.
    let mut configs = Vec::new();
    for text in &args.values {
        let value: Value = serde_json::from_str(text).unwrap_or_else(|_| json!(text));
        let mut doc = base.clone();
        set_path(&mut doc, &args.param, value)?;
        configs.push((text.clone(), typed_config(doc)?));
    }

    use rayon::prelude::*;
    let results: Vec<Result<RunOutcome>> = configs
        .par_iter()
        .map(|(_, config)| execute_run(config, None))
        .collect();

    let mut csv = String::from("value,verdict,c_star,final_diameter,time_to_tolerance\n");
    for ((text, _), outcome) in configs.iter().zip(results) {
        let outcome = outcome?;
        let (verdict, c_star) = match &outcome.verdict {
            ConsensusVerdict::ConvergedCommonLimit { c_star } => {
                ("converged".to_string(), format!("{c_star:.16e}"))
            }
            ConsensusVerdict::DivergedToMinusInfinity => {
                ("diverged_to_minus_infinity".to_string(), String::new())
            }
            ConsensusVerdict::NotConvergedAtHorizon => {
                ("not_converged".to_string(), String::new())
            }
        };
        let reach = outcome
            .time_to_tolerance
            .map(|t| format!("{t:.16e}"))
            .unwrap_or_default();
        csv.push_str(&format!(
            "{text},{verdict},{c_star},{:.16e},{reach}\n",
            outcome.final_diameter
        ));
        println!(
            "{}={text}: {}",
            args.param,
            verdict_line(&outcome.verdict, outcome.final_diameter)
        );
    }

    fs::create_dir_all(&args.out)?;
    write_atomic(&args.out.join("summary.csv"), csv.as_bytes())?;
    Ok(0)
}

pub fn cmd_scenarios_list() -> i32 {
    for info in scenarios::catalog() {
        println!("{:<24} {}", info.name, info.description);
        println!("{:<24} defaults: {}", "", info.params);
    }
    0
}

/// Entry point shared by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    if let Some(jobs) = cli.jobs.or_else(|| {
        std::env::var("LAPDDE_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    }) {
        // Ignore failure: the global pool may already exist in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }

    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Scenarios { action: ScenariosAction::List } => return cmd_scenarios_list(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
