//! Command-line surface: configuration parsing, the run modes and
//! deterministic report emission.
//!
//! Exit codes: 0 success, 1 failed `verify` check, 2 configuration or I/O
//! error, 3 solver non-convergence, 4 hypothesis violation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::error::Error;
use crate::exhaustion::{run_exhaustion_trace, BallSource, ExhaustionConfig, ExhaustionTrace, GlobalCandidate};
use crate::exec::Execution;
use crate::functionals::{ConstantsLedger, GlobalProblem, LocalProblem, Problem, DEFAULT_EPSILON};
use crate::graph::{
    ball, build_graph, gradient_pair, laplacian, Domain, Graph, GraphFile, GraphSpec, LatticeGenerator, VertexFunction,
};
use crate::solvers::{
    certify, default_start, negative_endpoint, solve_deflated, solve_mountain_pass, solve_nehari, solve_newton,
    Certificate, Method, Solution, SolverConfig,
};
use crate::spaces::{check_hypotheses, HypothesisMode, HypothesisReport, PotentialSpec};

pub const SCHEMA_VERSION: &str = "graphlog.report.v1";
pub const FIXTURES_ENV: &str = "GRAPHLOG_FIXTURES";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;

const BUILTIN_FIXTURES: [(&str, &str); 5] = [
    ("p3.json", include_str!("../fixtures/p3.json")),
    ("h1.json", include_str!("../fixtures/h1.json")),
    ("path5.json", include_str!("../fixtures/path5.json")),
    ("h_path5.json", include_str!("../fixtures/h_path5.json")),
    ("h_quadratic.json", include_str!("../fixtures/h_quadratic.json")),
];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown flag: {0}")]
    UnknownFlag(String),
    #[error("missing required argument: {0}")]
    MissingRequired(String),
    #[error("{path}:{line}:{column}: {message}")]
    MalformedFile {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    /// `--help` or `--version`; carries the rendered text.
    #[error("{0}")]
    Help(String),
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("refusing to emit a non-finite number at {0}")]
    NonFinite(String),
    #[error("no CSV view for mode {0:?}")]
    NoCsv(Mode),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SolveLocal,
    Exhaust,
    Multi,
    Verify,
    CheckH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HypothesisArg {
    Positive,
    SignChanging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Newton,
    Nehari,
    MountainPass,
}

#[derive(Debug, Parser)]
#[command(name = "graphlog", version, about = "Logarithmic Schrödinger equation on weighted graphs")]
struct Args {
    /// Run mode.
    #[arg(value_enum)]
    mode: Mode,
    /// Graph file, or `path:N`, `cycle:N`, `lattice:D`.
    #[arg(long)]
    graph: Option<String>,
    /// Potential file, or `constant:V`, `quadratic_shift:S`.
    #[arg(long)]
    potential: Option<String>,
    /// Ball radius (solve-local, check-h, multi truncation).
    #[arg(long)]
    k: Option<usize>,
    /// Exhaustion range `A:B`.
    #[arg(long = "k-range")]
    k_range: Option<String>,
    /// Observation window radius for exhaust.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    eps: f64,
    /// Level threshold α for sign-changing potentials.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Window Cauchy tolerance for exhaust.
    #[arg(long = "tol-conv", default_value_t = 1e-8)]
    tol_conv: f64,
    #[arg(long = "max-iter", default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Center vertex label; the graph origin by default.
    #[arg(long)]
    center: Option<String>,
    /// Solver for solve-local.
    #[arg(long, value_enum, default_value_t = MethodArg::MountainPass)]
    method: MethodArg,
    /// Hypothesis family for check-h.
    #[arg(long = "mode", value_enum, default_value_t = HypothesisArg::Positive)]
    hypothesis: HypothesisArg,
    /// Number of solutions requested by multi.
    #[arg(long, default_value_t = 3)]
    count: usize,
    /// Starts per deflated search.
    #[arg(long, default_value_t = 64)]
    starts: usize,
    /// Record wall-clock timings (makes reports run-dependent).
    #[arg(long)]
    timings: bool,
    /// Disable data parallelism.
    #[arg(long)]
    sequential: bool,
}

/// How the graph is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphInput {
    Spec(GraphSpec),
    /// `ℤ^dim`, materialized as large as the mode needs.
    Lattice { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(skip)]
    pub graph: Option<GraphInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    pub solver: SolverConfig,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_range: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_radius: Option<usize>,
    pub tol_conv: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub hypothesis_mode: HypothesisMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<String>,
    pub count: usize,
    pub format: Format,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub timings: bool,
}

/// Parses arguments (without the program name) into a resolved config.
pub fn parse_config<S: AsRef<str>>(args: &[S]) -> Result<RunConfig, ConfigError> {
    let argv = std::iter::once("graphlog").chain(args.iter().map(|a| a.as_ref()));
    let a = Args::try_parse_from(argv).map_err(clap_error)?;

    let need = |present: bool, name: &str| {
        if present {
            Ok(())
        } else {
            Err(ConfigError::MissingRequired(name.to_string()))
        }
    };
    match a.mode {
        Mode::Verify => {}
        Mode::SolveLocal | Mode::CheckH => {
            need(a.graph.is_some(), "graph")?;
            need(a.potential.is_some(), "potential")?;
            need(a.k.is_some(), "k")?;
        }
        Mode::Exhaust => {
            need(a.graph.is_some(), "graph")?;
            need(a.potential.is_some(), "potential")?;
            need(a.k_range.is_some(), "k-range")?;
            need(a.window.is_some(), "window")?;
        }
        Mode::Multi => {
            need(a.graph.is_some(), "graph")?;
            need(a.potential.is_some(), "potential")?;
        }
    }
    if !(a.eps > 0.0 && a.eps < 1.0) {
        return Err(ConfigError::Invalid(format!("--eps must lie in (0, 1), got {}", a.eps)));
    }
    let hypothesis_mode = match a.hypothesis {
        HypothesisArg::Positive => HypothesisMode::Positive,
        HypothesisArg::SignChanging => HypothesisMode::SignChanging,
    };
    if a.mode == Mode::CheckH && hypothesis_mode == HypothesisMode::SignChanging && a.alpha.is_none() {
        return Err(ConfigError::MissingRequired("alpha".into()));
    }
    let k_range = a.k_range.as_deref().map(parse_range).transpose()?;
    let graph = a.graph.as_deref().map(resolve_graph).transpose()?;
    let potential = a.potential.as_deref().map(resolve_potential).transpose()?;

    let solver = SolverConfig {
        method: match a.mode {
            Mode::Multi => Method::Deflated,
            _ => match a.method {
                MethodArg::Newton => Method::Newton,
                MethodArg::Nehari => Method::Nehari,
                MethodArg::MountainPass => Method::MountainPass,
            },
        },
        tol_residual: a.tol,
        max_iter: a.max_iter,
        seed: a.seed,
        starts: a.starts,
        execution: if a.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        ..SolverConfig::default()
    };
    solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

    Ok(RunConfig {
        mode: a.mode,
        graph,
        graph_source: a.graph,
        potential,
        solver,
        epsilon: a.eps,
        k: a.k,
        k_range,
        window_radius: a.window,
        tol_conv: a.tol_conv,
        alpha: a.alpha,
        hypothesis_mode,
        center: a.center,
        count: a.count,
        format: a.format,
        seed: a.seed,
        out: a.out,
        timings: a.timings,
    })
}

fn clap_error(e: clap::Error) -> ConfigError {
    use clap::error::{ContextKind, ErrorKind};
    let context = |kind| e.get(kind).map(|v| v.to_string()).unwrap_or_default();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ConfigError::Help(e.to_string()),
        ErrorKind::UnknownArgument => ConfigError::UnknownFlag(context(ContextKind::InvalidArg)),
        ErrorKind::MissingRequiredArgument => ConfigError::MissingRequired(context(ContextKind::InvalidArg)),
        _ => ConfigError::Invalid(e.to_string()),
    }
}

fn parse_range(s: &str) -> Result<(usize, usize), ConfigError> {
    let bad = || ConfigError::Invalid(format!("--k-range expects A:B, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if b < a {
        return Err(bad());
    }
    Ok((a, b))
}

fn parse_count(prefix: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::Invalid(format!("{prefix}: expected an integer, got '{value}'")))
}

/// File contents: an existing path wins, then a fixture of the same name.
fn read_input(source: &str) -> Result<(String, String), ConfigError> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{source}: {e}")))?;
        return Ok((source.to_string(), text));
    }
    fixture_text(source).map(|t| (format!("fixture:{source}"), t))
}

/// A fixture by file name, from `$GRAPHLOG_FIXTURES` when set.
pub fn fixture_text(name: &str) -> Result<String, ConfigError> {
    if let Some(dir) = std::env::var_os(FIXTURES_ENV) {
        let path = Path::new(&dir).join(name);
        return std::fs::read_to_string(&path).map_err(|_| ConfigError::FileNotFound(path.display().to_string()));
    }
    BUILTIN_FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| t.to_string())
        .ok_or_else(|| ConfigError::FileNotFound(name.to_string()))
}

fn malformed(path: &str, e: serde_json::Error) -> ConfigError {
    ConfigError::MalformedFile {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn resolve_graph(source: &str) -> Result<GraphInput, ConfigError> {
    if let Some((kind, arg)) = source.split_once(':') {
        match kind {
            "path" => return Ok(GraphInput::Spec(GraphSpec::Path(parse_count("path", arg)?))),
            "cycle" => return Ok(GraphInput::Spec(GraphSpec::Cycle(parse_count("cycle", arg)?))),
            "lattice" => {
                let dim = parse_count("lattice", arg)?;
                if dim == 0 {
                    return Err(ConfigError::Invalid("lattice dimension must be positive".into()));
                }
                return Ok(GraphInput::Lattice { dim });
            }
            _ => {}
        }
    }
    let (origin, text) = read_input(source)?;
    let file = GraphFile::from_json(&text).map_err(|e| malformed(&origin, e))?;
    Ok(GraphInput::Spec(GraphSpec::Explicit(file)))
}

fn resolve_potential(source: &str) -> Result<PotentialSpec, ConfigError> {
    if let Some((kind, arg)) = source.split_once(':') {
        let value = || {
            arg.parse::<f64>()
                .map_err(|_| ConfigError::Invalid(format!("{kind}: expected a number, got '{arg}'")))
        };
        match kind {
            "constant" => return Ok(PotentialSpec::constant(value()?)),
            "quadratic_shift" => return Ok(PotentialSpec::quadratic_shift(value()?)),
            _ => {}
        }
    }
    let (origin, text) = read_input(source)?;
    PotentialSpec::from_json(&text).map_err(|e| malformed(&origin, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub mode: Mode,
    pub status: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<ConstantsLedger>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solutions: Vec<Solution>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<ExhaustionTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<GlobalCandidate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl Report {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            mode: cfg.mode,
            status: "ok".into(),
            config: cfg.clone(),
            fingerprint: None,
            labels: Vec::new(),
            ledger: None,
            solutions: Vec::new(),
            certificates: Vec::new(),
            hypotheses: None,
            trace: None,
            candidate: None,
            checks: Vec::new(),
            timings: None,
        }
    }
}

/// A finished run: the report and the process exit code it implies.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
}

/// Exit code for a library error.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::SingularJacobian
        | Error::NotConverged { .. }
        | Error::CollapseToZero
        | Error::PathCollapse
        | Error::NoNewSolution
        | Error::LocalSolveFailed { .. }
        | Error::NoConvergenceInRange => EXIT_NOT_CONVERGED,
        Error::NonpositivePotential { .. } | Error::PotentialBelowMinusOne { .. } => EXIT_HYPOTHESIS,
        _ => EXIT_CONFIG,
    }
}

struct Clock {
    enabled: bool,
    start: Instant,
    laps: BTreeMap<String, f64>,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            start: Instant::now(),
            laps: BTreeMap::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        if self.enabled {
            let now = Instant::now();
            self.laps.insert(name.to_string(), (now - self.start).as_secs_f64());
            self.start = now;
        }
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.laps)
    }
}

/// Coordinates of a lattice label such as `-1,2`.
fn lattice_offset(label: Option<&str>) -> Result<usize, Error> {
    let Some(label) = label else { return Ok(0) };
    label
        .split(',')
        .map(|c| c.trim().parse::<i64>().map(|v| v.unsigned_abs() as usize))
        .try_fold(0, |m, c| c.map(|c| m.max(c)))
        .map_err(|_| Error::UnknownVertex(label.to_string()))
}

/// Builds the graph for a fixed-radius mode and moves the origin to the
/// requested center.
fn materialize(cfg: &RunConfig, k: usize) -> Result<Graph, Error> {
    let g = match cfg.graph.as_ref().expect("graph checked at parse time") {
        GraphInput::Spec(spec) => build_graph(spec)?,
        GraphInput::Lattice { dim } => {
            let offset = lattice_offset(cfg.center.as_deref())?;
            LatticeGenerator::new(*dim).materialize(LatticeGenerator::radius_for_ball(k) + offset)
        }
    };
    recenter(g, cfg.center.as_deref())
}

fn recenter(g: Graph, center: Option<&str>) -> Result<Graph, Error> {
    match center {
        Some(label) => {
            let c = g.vertex(label)?;
            Ok(g.with_origin(c))
        }
        None => Ok(g),
    }
}

/// Executes the configured mode.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, Error> {
    match cfg.mode {
        Mode::SolveLocal => run_solve_local(cfg),
        Mode::Exhaust => run_exhaust(cfg),
        Mode::Multi => run_multi(cfg),
        Mode::CheckH => run_check_h(cfg),
        Mode::Verify => Ok(run_verify(cfg)),
    }
}

fn potential(cfg: &RunConfig) -> &PotentialSpec {
    cfg.potential.as_ref().expect("potential checked at parse time")
}

fn hypothesis_stop(mut report: Report, hyp: HypothesisReport) -> Option<Outcome> {
    let violated = hyp.violated();
    report.hypotheses = Some(hyp);
    violated.then(|| {
        report.status = "hypothesis-violated".into();
        Outcome {
            report,
            exit_code: EXIT_HYPOTHESIS,
        }
    })
}

fn run_solve_local(cfg: &RunConfig) -> Result<Outcome, Error> {
    let mut clock = Clock::new(cfg.timings);
    let k = cfg.k.expect("k checked at parse time");
    let g = materialize(cfg, k)?;
    let mut report = Report::new(cfg);
    let hyp = check_hypotheses(&g, potential(cfg), HypothesisMode::Positive, k, None)?;
    if let Some(stop) = hypothesis_stop(report.clone(), hyp.clone()) {
        return Ok(stop);
    }
    report.hypotheses = Some(hyp);
    let domain = ball(&g, g.origin(), k)?;
    let p = LocalProblem::new(&g, domain, potential(cfg).evaluate(&g)?, cfg.epsilon)?;
    clock.lap("setup");

    let start = default_start(&p)?;
    let s = match cfg.solver.method {
        Method::Newton => solve_newton(&p, &start, &cfg.solver)?,
        Method::Nehari => solve_nehari(&p, &start, &cfg.solver)?,
        _ => solve_mountain_pass(&p, &negative_endpoint(&p, &start)?, &cfg.solver)?,
    };
    clock.lap("solve");

    let ledger = p.constants_ledger()?.with_level(s.energy)?;
    let certificate = certify(&p, &s, &ledger)?;
    clock.lap("certify");
    let exit_code = if s.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    if !s.converged {
        report.status = "not-converged".into();
    }
    report.fingerprint = Some(s.fingerprint.clone());
    report.labels = g.labels().to_vec();
    report.ledger = Some(ledger);
    report.solutions = vec![s];
    report.certificates = vec![certificate];
    report.timings = clock.finish();
    Ok(Outcome { report, exit_code })
}

fn run_exhaust(cfg: &RunConfig) -> Result<Outcome, Error> {
    let mut clock = Clock::new(cfg.timings);
    let (k_from, k_to) = cfg.k_range.expect("k-range checked at parse time");
    let ecfg = ExhaustionConfig {
        k_from,
        k_to,
        window_radius: cfg.window_radius.expect("window checked at parse time"),
        tol_conv: cfg.tol_conv,
        epsilon: cfg.epsilon,
        center: cfg.center.clone(),
    };
    let source: Box<dyn BallSource> = match cfg.graph.as_ref().expect("graph checked at parse time") {
        GraphInput::Spec(spec) => Box::new(build_graph(spec)?),
        GraphInput::Lattice { dim } => Box::new(LatticeGenerator::new(*dim)),
    };
    let g = recenter(source.graph_for(k_to)?, cfg.center.as_deref())?;
    let mut report = Report::new(cfg);
    let hyp = check_hypotheses(&g, potential(cfg), HypothesisMode::Positive, k_to, None)?;
    if let Some(stop) = hypothesis_stop(report.clone(), hyp.clone()) {
        return Ok(stop);
    }
    report.hypotheses = Some(hyp);
    clock.lap("setup");

    let (trace, candidate) = run_exhaustion_trace(source.as_ref(), potential(cfg), &ecfg, &cfg.solver)?;
    clock.lap("exhaust");

    let domain = ball(&g, g.origin(), k_to)?;
    let p = LocalProblem::new(&g, domain, potential(cfg).evaluate(&g)?, cfg.epsilon)?;
    let mut ledger = p.constants_ledger()?;
    ledger.uniform_bound = Some(trace.uniform_bound_used);
    let exit_code = if trace.converged_at.is_some() {
        EXIT_OK
    } else {
        report.status = "not-converged".into();
        EXIT_NOT_CONVERGED
    };
    report.fingerprint = Some(crate::solvers::fingerprint(&p));
    report.labels = g.labels().to_vec();
    report.ledger = Some(ledger);
    report.trace = Some(trace);
    report.candidate = Some(candidate);
    report.timings = clock.finish();
    Ok(Outcome { report, exit_code })
}

fn run_multi(cfg: &RunConfig) -> Result<Outcome, Error> {
    let mut clock = Clock::new(cfg.timings);
    if matches!(cfg.graph, Some(GraphInput::Lattice { .. })) && cfg.k.is_none() {
        return Err(Error::InvalidConfig("multi on a lattice needs --k for the truncation".into()));
    }
    let g = materialize(cfg, cfg.k.unwrap_or(0))?;
    let mut report = Report::new(cfg);
    if cfg.alpha.is_some() {
        let radius = cfg.k.unwrap_or(g.len());
        let hyp = check_hypotheses(&g, potential(cfg), HypothesisMode::SignChanging, radius, cfg.alpha)?;
        if let Some(stop) = hypothesis_stop(report.clone(), hyp.clone()) {
            return Ok(stop);
        }
        report.hypotheses = Some(hyp);
    }
    let truncation = match cfg.k {
        Some(k) => ball(&g, g.origin(), k)?,
        None => Domain::whole(&g),
    };
    let p = GlobalProblem::new(&g, truncation, potential(cfg).evaluate(&g)?)?;
    let ledger = p.constants_ledger()?;
    clock.lap("setup");

    let solutions = multi_solutions(&p, cfg.count, &cfg.solver)?;
    clock.lap("solve");
    let exit_code = if solutions.is_empty() {
        report.status = "no-solution".into();
        EXIT_NOT_CONVERGED
    } else {
        if solutions.len() < cfg.count {
            report.status = format!("found {} of {}", solutions.len(), cfg.count);
        }
        EXIT_OK
    };
    report.certificates = solutions
        .iter()
        .map(|s| certify(&p, s, &ledger))
        .collect::<Result<_, _>>()?;
    report.fingerprint = Some(crate::solvers::fingerprint(&p));
    report.labels = g.labels().to_vec();
    report.ledger = Some(ledger);
    report.solutions = solutions;
    report.timings = clock.finish();
    Ok(Outcome { report, exit_code })
}

/// Up to `count` deflated solutions with increasing energy.
pub fn multi_solutions(p: &Problem<'_>, count: usize, solver: &SolverConfig) -> Result<Vec<Solution>, Error> {
    let mut found: Vec<Solution> = Vec::new();
    while found.len() < count {
        match solve_deflated(p, &found, solver) {
            Ok(s) => found.push(s),
            Err(Error::NoNewSolution) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(found)
}

fn run_check_h(cfg: &RunConfig) -> Result<Outcome, Error> {
    let k = cfg.k.expect("k checked at parse time");
    let g = materialize(cfg, k)?;
    let hyp = check_hypotheses(&g, potential(cfg), cfg.hypothesis_mode, k, cfg.alpha)?;
    let report = Report::new(cfg);
    if let Some(stop) = hypothesis_stop(report.clone(), hyp.clone()) {
        return Ok(stop);
    }
    let mut report = report;
    report.hypotheses = Some(hyp);
    Ok(Outcome {
        report,
        exit_code: EXIT_OK,
    })
}

/// Runs the invariant suite on the fixtures.
fn run_verify(cfg: &RunConfig) -> Outcome {
    let mut clock = Clock::new(cfg.timings);
    let mut report = Report::new(cfg);
    report.checks = verify_checks(&cfg.solver);
    clock.lap("verify");
    let ok = report.checks.iter().all(|c| c.passed);
    if !ok {
        report.status = "verification-failed".into();
    }
    report.timings = clock.finish();
    Outcome {
        report,
        exit_code: if ok { EXIT_OK } else { EXIT_VERIFY_FAILED },
    }
}

fn check(name: &str, result: Result<(bool, String), String>) -> Check {
    match result {
        Ok((passed, detail)) => Check {
            name: name.into(),
            passed,
            detail,
        },
        Err(detail) => Check {
            name: name.into(),
            passed: false,
            detail,
        },
    }
}

fn fixture_graph(name: &str) -> Result<Graph, String> {
    let text = fixture_text(name).map_err(|e| e.to_string())?;
    let file = GraphFile::from_json(&text).map_err(|e| format!("{name}: {e}"))?;
    build_graph(&GraphSpec::Explicit(file)).map_err(|e| e.to_string())
}

fn fixture_potential(name: &str) -> Result<PotentialSpec, String> {
    let text = fixture_text(name).map_err(|e| e.to_string())?;
    PotentialSpec::from_json(&text).map_err(|e| format!("{name}: {e}"))
}

/// The fixture invariant suite used by `verify`.
pub fn verify_checks(solver: &SolverConfig) -> Vec<Check> {
    let s = |e: Error| e.to_string();
    let root = 1.5f64.exp();
    vec![
        check(
            "green-identities",
            (|| {
                let mut worst: f64 = 0.0;
                for name in ["p3.json", "path5.json"] {
                    let g = fixture_graph(name)?;
                    let n = g.len();
                    let u = VertexFunction::from_fn(n, |i| ((i + 1) as f64).sin());
                    let v = VertexFunction::from_fn(n, |i| (2.0 * i as f64).cos());
                    let mut lhs = 0.0;
                    let mut rhs = 0.0;
                    for x in 0..n {
                        lhs += g.measure(x) * gradient_pair(&g, &u, &v, x).map_err(s)?;
                        rhs -= g.measure(x) * laplacian(&g, &u, x).map_err(s)? * v.get(x);
                    }
                    worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE));
                }
                Ok((worst <= 1e-12, format!("max relative error {worst:e}")))
            })(),
        ),
        check(
            "f1-closed-form",
            (|| {
                let g = fixture_graph("p3.json")?;
                let h = fixture_potential("h1.json")?.evaluate(&g).map_err(s)?;
                let d = Domain::new(&g, [g.vertex("v1").map_err(s)?]).map_err(s)?;
                let p = LocalProblem::new(&g, d, h, DEFAULT_EPSILON).map_err(s)?;
                let start = default_start(&p).map_err(s)?;
                let t = p.nehari_projection(&VertexFunction::delta(3, 1, 1.0)).map_err(s)?;
                let mut worst_u: f64 = (t - root).abs();
                let mut worst_e: f64 = 0.0;
                let runs = [
                    solve_newton(&p, &start, solver),
                    solve_nehari(&p, &start, solver),
                    solve_mountain_pass(&p, &negative_endpoint(&p, &start).map_err(s)?, solver),
                ];
                for r in runs {
                    let sol = r.map_err(s)?;
                    worst_u = worst_u.max((sol.u.get(1).abs() - root).abs());
                    worst_e = worst_e.max((sol.energy - 0.5 * 3f64.exp()).abs());
                }
                Ok((
                    worst_u <= 1e-10 && worst_e <= 1e-9,
                    format!("max |u(v1)| error {worst_u:e}, max energy error {worst_e:e}"),
                ))
            })(),
        ),
        check(
            "f1-certificate",
            (|| {
                let g = fixture_graph("p3.json")?;
                let h = fixture_potential("h1.json")?.evaluate(&g).map_err(s)?;
                let d = Domain::new(&g, [1]).map_err(s)?;
                let p = LocalProblem::new(&g, d, h, DEFAULT_EPSILON).map_err(s)?;
                let sol = solve_newton(&p, &default_start(&p).map_err(s)?, solver).map_err(s)?;
                let ledger = p.constants_ledger().map_err(s)?.with_level(sol.energy).map_err(s)?;
                let c = certify(&p, &sol, &ledger).map_err(s)?;
                Ok((c.passed(), format!("residual {:e}, identity gap {:e}", c.residual_norm, c.energy_identity_gap)))
            })(),
        ),
        check(
            "path5-multiplicity",
            (|| {
                let g = fixture_graph("path5.json")?;
                let h = fixture_potential("h_path5.json")?.evaluate(&g).map_err(s)?;
                let p = GlobalProblem::new(&g, Domain::whole(&g), h).map_err(s)?;
                let sols = multi_solutions(&p, 3, solver).map_err(s)?;
                let increasing = sols.windows(2).all(|w| w[0].energy < w[1].energy);
                let residual = sols.iter().map(|x| x.residual_norm).fold(0.0, f64::max);
                Ok((
                    sols.len() >= 3 && increasing && residual <= 1e-10,
                    format!("{} solutions, max residual {residual:e}", sols.len()),
                ))
            })(),
        ),
        check(
            "hypotheses",
            (|| {
                let g = fixture_graph("path5.json")?;
                let spec = fixture_potential("h_path5.json")?;
                let r = check_hypotheses(&g, &spec, HypothesisMode::SignChanging, g.len(), Some(1.0)).map_err(s)?;
                let bad = check_hypotheses(&g, &spec, HypothesisMode::Positive, g.len(), None).map_err(s)?;
                Ok((
                    !r.violated() && bad.violated(),
                    format!("sign-changing {:?}/{:?}, positive {:?}", r.lower_bound, r.integrability, bad.lower_bound),
                ))
            })(),
        ),
        check(
            "z1-exhaustion",
            (|| {
                let spec = fixture_potential("h_quadratic.json")?;
                let ecfg = ExhaustionConfig {
                    k_from: 2,
                    k_to: 6,
                    window_radius: 2,
                    ..ExhaustionConfig::default()
                };
                let (trace, cand) =
                    run_exhaustion_trace(&LatticeGenerator::new(1), &spec, &ecfg, solver).map_err(s)?;
                Ok((
                    trace.converged_at.is_some() && cand.nontrivial && trace.norms_bounded() && trace.window_bounded(),
                    format!("converged at {:?}", trace.converged_at),
                ))
            })(),
        ),
    ]
}

/// `serde_json` pretty output with every real printed as `{:.16e}`.
struct CanonicalFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(w)
    }
}

fn find_null(v: &Value, path: &mut String) -> bool {
    match v {
        Value::Null => true,
        Value::Array(items) => items.iter().enumerate().any(|(i, x)| {
            let len = path.len();
            path.push_str(&format!("[{i}]"));
            let hit = find_null(x, path);
            if !hit {
                path.truncate(len);
            }
            hit
        }),
        Value::Object(map) => map.iter().any(|(k, x)| {
            let len = path.len();
            path.push('.');
            path.push_str(k);
            let hit = find_null(x, path);
            if !hit {
                path.truncate(len);
            }
            hit
        }),
        _ => false,
    }
}

/// Canonical JSON: sorted keys, reals as `{:.16e}`, trailing newline.
/// Non-finite reals serialize to `null`, so any `null` is refused.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, EmitError> {
    let tree = serde_json::to_value(value)?;
    let mut path = String::from("$");
    if find_null(&tree, &mut path) {
        return Err(EmitError::NonFinite(path));
    }
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        CanonicalFormatter {
            inner: PrettyFormatter::with_indent(b"  "),
        },
    );
    tree.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("json is utf-8"))
}

pub fn parse_report(text: &str) -> Result<Report, serde_json::Error> {
    serde_json::from_str(text)
}

/// Plot-ready CSV for the report's mode.
pub fn to_csv(report: &Report) -> Result<String, EmitError> {
    if let Some(trace) = &report.trace {
        return trace.to_csv().map_err(|e| EmitError::NonFinite(e.to_string()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let real = |v: f64| format!("{v:.16e}");
    match report.mode {
        Mode::SolveLocal | Mode::Multi => {
            w.write_record(["solution", "vertex", "label", "u", "energy"])?;
            for (i, s) in report.solutions.iter().enumerate() {
                for (x, v) in s.u.values().iter().enumerate() {
                    let label = report.labels.get(x).cloned().unwrap_or_default();
                    w.write_record([i.to_string(), x.to_string(), label, real(*v), real(s.energy)])?;
                }
            }
        }
        Mode::Verify => {
            w.write_record(["check", "passed", "detail"])?;
            for c in &report.checks {
                w.write_record([c.name.clone(), c.passed.to_string(), c.detail.clone()])?;
            }
        }
        Mode::CheckH => {
            let Some(h) = &report.hypotheses else {
                return Err(EmitError::NoCsv(report.mode));
            };
            w.write_record(["radius", "h0_or_h1", "inverse_integral", "lower_bound", "integrability"])?;
            w.write_record([
                h.radius_checked.to_string(),
                real(h.h0_or_h1),
                real(h.inverse_integral),
                format!("{:?}", h.lower_bound),
                format!("{:?}", h.integrability),
            ])?;
        }
        Mode::Exhaust => return Err(EmitError::NoCsv(report.mode)),
    }
    let bytes = w.into_inner().map_err(|e| EmitError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Renders the report in the configured format and writes it to `--out`
/// or stdout. Returns the rendered text.
pub fn emit(report: &Report, cfg: &RunConfig) -> Result<String, EmitError> {
    // JSON validation runs for both formats so CSV never hides a NaN.
    let json = to_canonical_json(report)?;
    let text = match cfg.format {
        Format::Json => json,
        Format::Csv => to_csv(report)?,
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, &text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(text)
}

/// Full CLI entry point; returns the process exit code.
pub fn run<S: AsRef<str>>(args: &[S]) -> i32 {
    let cfg = match parse_config(args) {
        Ok(cfg) => cfg,
        Err(ConfigError::Help(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Err(e) => {
            eprintln!("graphlog: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("graphlog: {e}");
            return exit_code_for(&e);
        }
    };
    match emit(&outcome.report, &cfg) {
        Ok(_) => outcome.exit_code,
        Err(e @ EmitError::NonFinite(_)) => {
            eprintln!("graphlog: {e}");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("graphlog: {e}");
            EXIT_CONFIG
        }
    }
}
