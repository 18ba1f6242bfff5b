//! Benchmark harness behind the `pplag-bench` binary: instance generation,
//! single solver runs, head-to-head comparison and α-sweeps, with CSV traces
//! and JSON reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::EpsKktReport;
use crate::error::{Error, Result};
use crate::io::{self, InstanceMeta};
use crate::pplag::{self, PplagConfig, PplagParams, PplagState};
use crate::problem::{generate_lcqp, CompositeProblem, GeneratorConfig, LcqpInstance};
use crate::sproxalm::{self, SproxParams, SproxState};
use crate::trace::{
    CertificateSummary, IterationRecord, SolveResult, StoppingRule, Termination, TraceSink, CSV_HEADER,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output root.
pub const OUTPUT_DIR_ENV: &str = "PPLAG_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ITERATION_CAP: i32 = 2;
pub const EXIT_NUMERICAL_FAILURE: i32 = 3;
pub const EXIT_CONFIG_ERROR: i32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Generate(GeneratorConfig),
    Load { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Pplag,
    Sproxalm,
    Both,
}

impl SolverChoice {
    fn runs_pplag(self) -> bool {
        matches!(self, SolverChoice::Pplag | SolverChoice::Both)
    }

    fn runs_sprox(self) -> bool {
        matches!(self, SolverChoice::Sproxalm | SolverChoice::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopConfig {
    pub max_iters: u64,
    pub eps_stat: f64,
    pub eps_feas: f64,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            eps_stat: 1e-4,
            eps_feas: 1e-4,
        }
    }
}

/// Everything one CLI invocation needs. Loadable from JSON; unspecified
/// fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub instance: InstanceSource,
    pub solver: SolverChoice,
    pub pplag: PplagConfig,
    /// SProx-ALM penalty; `2 L_f` when absent.
    pub gamma: Option<f64>,
    pub stop: StopConfig,
    /// Trace stride; 1 for `n <= 100`, 10 otherwise when absent.
    pub record_every: Option<u64>,
    /// Seed of the random starting point; the instance seed when absent.
    pub init_seed: Option<u64>,
    /// Fill the `wallclock_ns` trace column. Off by default so traces are
    /// byte-reproducible.
    pub timing: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            instance: InstanceSource::Generate(GeneratorConfig::new(50, 10, 0)),
            solver: SolverChoice::Pplag,
            pplag: PplagConfig::default(),
            gamma: None,
            stop: StopConfig::default(),
            record_every: None,
            init_seed: None,
            timing: false,
            output_dir: std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let InstanceSource::Generate(g) = &self.instance {
            g.validate()?;
        }
        self.stopping_rule(1).validate()?;
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("gamma must be positive, got {g}")));
            }
        }
        pplag::derive_rho(self.pplag.alpha, self.pplag.beta)?;
        PplagParams::new(self.pplag.alpha, self.pplag.beta, self.pplag.r_ratio, self.pplag.delta0, 1.0)?;
        if !(self.pplag.eta_safety > 0.0 && self.pplag.eta_safety <= 1.0) {
            return Err(Error::invalid("eta safety must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn stopping_rule(&self, n: usize) -> StoppingRule {
        let every = self.record_every.unwrap_or(if n <= 100 { 1 } else { 10 });
        StoppingRule::new(self.stop.max_iters, self.stop.eps_stat, self.stop.eps_feas).with_record_every(every)
    }
}

/// A loaded instance with its problem form and metadata.
pub struct PreparedInstance {
    pub instance: LcqpInstance,
    pub meta: InstanceMeta,
    pub problem: CompositeProblem,
}

pub fn prepare_instance(source: &InstanceSource) -> Result<PreparedInstance> {
    let (instance, meta) = match source {
        InstanceSource::Generate(cfg) => {
            let inst = generate_lcqp(cfg)?;
            let meta = InstanceMeta::for_instance(&inst);
            (inst, meta)
        }
        InstanceSource::Load { path } => io::read_instance(path)?,
    };
    let problem = instance.to_problem_with_constants(meta.lipschitz, meta.sigma_max)?;
    Ok(PreparedInstance {
        instance,
        meta,
        problem,
    })
}

/// Writes a generated instance into `dir`.
pub fn cmd_gen(cfg: &GeneratorConfig, dir: &Path, force: bool) -> Result<InstanceMeta> {
    let inst = generate_lcqp(cfg)?;
    io::write_instance(&inst, dir, force)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Tolerance,
    IterationCap,
    NumericalFailure,
}

impl From<Termination> for RunOutcome {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Tolerance => RunOutcome::Tolerance,
            Termination::IterationCap => RunOutcome::IterationCap,
        }
    }
}

impl RunOutcome {
    pub fn exit_code(self) -> i32 {
        match self {
            RunOutcome::Tolerance => EXIT_OK,
            RunOutcome::IterationCap => EXIT_ITERATION_CAP,
            RunOutcome::NumericalFailure => EXIT_NUMERICAL_FAILURE,
        }
    }
}

/// Result of one solver run as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver: String,
    pub outcome: RunOutcome,
    pub error: Option<String>,
    pub iterations: u64,
    pub final_stationarity: Option<f64>,
    pub final_feasibility: Option<f64>,
    pub final_objective: Option<f64>,
    pub eps_kkt: Option<EpsKktReport>,
    pub wallclock_ns: Option<u64>,
    pub certificates: Option<CertificateSummary>,
    pub trace: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PplagReportParams {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub r_ratio: f64,
    pub delta0: f64,
    pub eta: f64,
    pub eta_safety: f64,
}

impl PplagReportParams {
    fn new(params: &PplagParams, safety: f64) -> Self {
        Self {
            alpha: params.alpha(),
            beta: params.beta(),
            rho: params.rho(),
            r_ratio: params.r_ratio(),
            delta0: params.delta0(),
            eta: params.eta(),
            eta_safety: safety,
        }
    }
}

/// The JSON written by `solve` and `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub instance: InstanceMeta,
    pub init_seed: u64,
    pub stop: StopConfig,
    pub record_every: u64,
    pub pplag_params: Option<PplagReportParams>,
    pub sprox_params: Option<SproxParams>,
    pub runs: Vec<RunSummary>,
}

impl ComparisonReport {
    /// Worst outcome across runs.
    pub fn exit_code(&self) -> i32 {
        self.runs.iter().map(|r| r.outcome.exit_code()).max().unwrap_or(EXIT_OK)
    }
}

/// Sink that writes CSV rows, optionally blanking the wallclock column.
struct TraceFile {
    out: BufWriter<File>,
    path: PathBuf,
    timing: bool,
}

impl TraceFile {
    fn create(path: PathBuf, timing: bool) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CSV_HEADER}").map_err(|e| Error::io(&path, e))?;
        Ok(Self { out, path, timing })
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

impl TraceSink for TraceFile {
    fn record(&mut self, rec: &IterationRecord) -> Result<()> {
        let mut row = rec.csv_row();
        if !self.timing {
            let cut = row.rfind(',').map_or(0, |i| i + 1);
            row.truncate(cut);
        }
        writeln!(self.out, "{row}").map_err(|e| Error::io(&self.path, e))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn summarize<S>(
    solver: &str,
    result: Result<SolveResult<S>>,
    stop: &StoppingRule,
    trace: PathBuf,
    timing: bool,
) -> Result<RunSummary> {
    match result {
        Ok(res) => Ok(RunSummary {
            solver: solver.to_string(),
            outcome: res.termination.into(),
            error: None,
            iterations: res.iterations,
            final_stationarity: Some(res.stationarity),
            final_feasibility: Some(res.feasibility),
            final_objective: Some(res.objective),
            eps_kkt: Some(EpsKktReport::new(
                stop.eps_stat,
                stop.eps_feas,
                res.stationarity,
                res.feasibility,
                Some(res.iterations),
            )),
            wallclock_ns: timing.then_some(res.wallclock_ns),
            certificates: res.certificates,
            trace,
        }),
        Err(Error::NumericalFailure { step, iteration }) => Ok(RunSummary {
            solver: solver.to_string(),
            outcome: RunOutcome::NumericalFailure,
            error: Some(format!("non-finite value in step `{step}` at iteration {iteration}")),
            iterations: iteration,
            final_stationarity: None,
            final_feasibility: None,
            final_objective: None,
            eps_kkt: None,
            wallclock_ns: None,
            certificates: None,
            trace,
        }),
        Err(e) => Err(e),
    }
}

pub fn run_pplag_to(
    prep: &PreparedInstance,
    params: &PplagParams,
    init_seed: u64,
    stop: &StoppingRule,
    trace: PathBuf,
    timing: bool,
) -> Result<RunSummary> {
    let init = PplagState::random_initial(&prep.problem, params, init_seed)?;
    let mut sink = TraceFile::create(trace.clone(), timing)?;
    let result = pplag::solve(&prep.problem, params, init, stop, &mut sink);
    sink.finish()?;
    summarize("pplag", result, stop, trace, timing)
}

pub fn run_sprox_to(
    prep: &PreparedInstance,
    params: &SproxParams,
    init_seed: u64,
    stop: &StoppingRule,
    trace: PathBuf,
    timing: bool,
) -> Result<RunSummary> {
    let init = SproxState::random_initial(&prep.problem, init_seed)?;
    let mut sink = TraceFile::create(trace.clone(), timing)?;
    let result = sproxalm::sprox_solve(&prep.problem, params, init, stop, &mut sink);
    sink.finish()?;
    summarize("sproxalm", result, stop, trace, timing)
}

fn run_selected(cfg: &RunConfig, choice: SolverChoice, report_name: &str) -> Result<ComparisonReport> {
    cfg.validate()?;
    let prep = prepare_instance(&cfg.instance)?;
    let stop = cfg.stopping_rule(prep.problem.n());
    let init_seed = cfg.init_seed.unwrap_or(prep.meta.seed);
    ensure_dir(&cfg.output_dir)?;

    let pplag_params = if choice.runs_pplag() {
        Some(cfg.pplag.resolve(&prep.problem)?)
    } else {
        None
    };
    let sprox_params = if choice.runs_sprox() {
        let gamma = cfg.gamma.unwrap_or_else(|| SproxParams::default_gamma(&prep.problem));
        Some(SproxParams::defaults(&prep.problem, gamma)?)
    } else {
        None
    };

    let mut runs = Vec::new();
    if let Some(params) = &pplag_params {
        runs.push(run_pplag_to(
            &prep,
            params,
            init_seed,
            &stop,
            cfg.output_dir.join("pplag_trace.csv"),
            cfg.timing,
        )?);
    }
    if let Some(params) = &sprox_params {
        runs.push(run_sprox_to(
            &prep,
            params,
            init_seed,
            &stop,
            cfg.output_dir.join("sproxalm_trace.csv"),
            cfg.timing,
        )?);
    }

    let report = ComparisonReport {
        schema_version: REPORT_SCHEMA_VERSION,
        instance: prep.meta.clone(),
        init_seed,
        stop: cfg.stop,
        record_every: stop.record_every,
        pplag_params: pplag_params.map(|p| PplagReportParams::new(&p, cfg.pplag.eta_safety)),
        sprox_params,
        runs,
    };
    write_json(&cfg.output_dir.join(report_name), &report)?;
    Ok(report)
}

/// Runs the configured solver(s); writes `<solver>_trace.csv` and `summary.json`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<ComparisonReport> {
    run_selected(cfg, cfg.solver, "summary.json")
}

/// Runs both solvers on the same instance, start point and stopping rule;
/// writes both traces and `report.json`.
pub fn cmd_compare(cfg: &RunConfig) -> Result<ComparisonReport> {
    run_selected(cfg, SolverChoice::Both, "report.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub params: PplagReportParams,
    pub run: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub instance: InstanceMeta,
    pub init_seed: u64,
    pub stop: StopConfig,
    pub record_every: u64,
    pub entries: Vec<SweepEntry>,
    /// Runs that could not start (e.g. invalid α), keyed by α.
    pub failures: Vec<(f64, String)>,
}

impl SweepReport {
    pub fn exit_code(&self) -> i32 {
        let worst = self.entries.iter().map(|e| e.run.outcome.exit_code()).max().unwrap_or(EXIT_OK);
        if self.failures.is_empty() {
            worst
        } else {
            worst.max(EXIT_NUMERICAL_FAILURE)
        }
    }
}

/// One P-Lagrangian run per α, in parallel, on a shared instance and start
/// point; `η` is re-derived for each α. Writes `pplag_alpha_<i>.csv` per run
/// (in list order) and `sweep.json`.
pub fn cmd_sweep_alpha(cfg: &RunConfig, alphas: &[f64]) -> Result<SweepReport> {
    if alphas.is_empty() {
        return Err(Error::invalid("alpha list is empty"));
    }
    cfg.validate()?;
    let prep = prepare_instance(&cfg.instance)?;
    let stop = cfg.stopping_rule(prep.problem.n());
    let init_seed = cfg.init_seed.unwrap_or(prep.meta.seed);
    ensure_dir(&cfg.output_dir)?;

    let outcomes: Vec<(f64, Result<SweepEntry>)> = alphas
        .par_iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let run = || -> Result<SweepEntry> {
                let pc = PplagConfig { alpha, ..cfg.pplag };
                let params = pc.resolve(&prep.problem)?;
                let trace = cfg.output_dir.join(format!("pplag_alpha_{i}.csv"));
                let run = run_pplag_to(&prep, &params, init_seed, &stop, trace, cfg.timing)?;
                Ok(SweepEntry {
                    params: PplagReportParams::new(&params, pc.eta_safety),
                    run,
                })
            };
            (alpha, run())
        })
        .collect();

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (alpha, outcome) in outcomes {
        match outcome {
            Ok(e) => entries.push(e),
            Err(e) => failures.push((alpha, e.to_string())),
        }
    }
    let report = SweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        instance: prep.meta.clone(),
        init_seed,
        stop: cfg.stop,
        record_every: stop.record_every,
        entries,
        failures,
    };
    write_json(&cfg.output_dir.join("sweep.json"), &report)?;
    Ok(report)
}
