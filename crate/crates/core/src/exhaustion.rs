//! Local-to-global driver: solve on balls `B_k` for increasing `k` and watch
//! the solutions settle on a fixed observation window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{ConstantsLedger, LocalProblem, Problem, DEFAULT_EPSILON};
use crate::graph::{ball, laplacian_unchecked, Domain, Graph, LatticeGenerator, VertexFunction};
use crate::solvers::{certify, negative_endpoint, spike_start, solve_mountain_pass, Certificate, Solution, SolverConfig};
use crate::spaces::PotentialSpec;

pub use crate::functionals::uniform_bound;

/// Exponents tried when reporting the uniform bound; the smallest bound wins.
pub const EPSILON_SWEEP: [f64; 3] = [0.25, 0.5, 0.75];

/// Seeded restarts per ball when the warm-started solve fails.
pub const RETRIES: usize = 3;

/// Source of graphs large enough to host every ball up to a given radius.
pub trait BallSource {
    fn graph_for(&self, k_max: usize) -> Result<Graph>;
}

impl BallSource for LatticeGenerator {
    fn graph_for(&self, k_max: usize) -> Result<Graph> {
        Ok(self.materialize(LatticeGenerator::radius_for_ball(k_max)))
    }
}

impl BallSource for Graph {
    fn graph_for(&self, _k_max: usize) -> Result<Graph> {
        Ok(self.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionConfig {
    pub k_from: usize,
    pub k_to: usize,
    pub window_radius: usize,
    pub tol_conv: f64,
    pub epsilon: f64,
    /// Center label; the graph origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<String>,
}

impl Default for ExhaustionConfig {
    fn default() -> Self {
        Self {
            k_from: 3,
            k_to: 12,
            window_radius: 3,
            tol_conv: 1e-8,
            epsilon: DEFAULT_EPSILON,
            center: None,
        }
    }
}

impl ExhaustionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_to < self.k_from {
            return Err(Error::InvalidConfig(format!(
                "k range {}:{} is decreasing",
                self.k_from, self.k_to
            )));
        }
        if self.window_radius == 0 || self.k_from < self.window_radius {
            return Err(Error::InvalidConfig(format!(
                "window radius {} must be positive and at most k_from = {}",
                self.window_radius, self.k_from
            )));
        }
        if !(self.tol_conv > 0.0) {
            return Err(Error::InvalidConfig("tol_conv must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionStep {
    pub k: usize,
    /// `‖u_k‖_{𝓗(B_k)}`.
    pub norm_h: f64,
    pub energy: f64,
    pub sup_window: f64,
    /// `sup_A |u_k - u_{k-1}|`, absent for the first ball.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_change: Option<f64>,
    pub window_values: Vec<f64>,
    pub residual_norm: f64,
    /// Number of seeded restarts that were needed (0 for the warm start).
    pub restarts: usize,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionTrace {
    /// Labels of the window `A = B_{window_radius}`.
    pub window: Vec<String>,
    pub steps: Vec<ExhaustionStep>,
    pub uniform_bound_used: f64,
    pub uniform_bound_epsilon: f64,
    /// `min h` and `μ_min` over the largest ball.
    pub h0: f64,
    pub mu_min: f64,
    pub tol_conv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged_at: Option<usize>,
}

impl ExhaustionTrace {
    /// `‖u_k‖²_𝓗 ≤ bound` for every step.
    pub fn norms_bounded(&self) -> bool {
        self.steps.iter().all(|s| s.norm_h * s.norm_h <= self.uniform_bound_used)
    }

    /// `sup_A |u_k| ≤ √(bound / (h0·μ_min))` for every step.
    pub fn window_bounded(&self) -> bool {
        let cap = (self.uniform_bound_used / (self.h0 * self.mu_min)).sqrt();
        self.steps.iter().all(|s| s.sup_window <= cap)
    }

    /// One row per step: `k, norm_H, energy, sup_window, converged`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
        w.write_record(["k", "norm_H", "energy", "sup_window", "converged"])
            .map_err(io)?;
        for s in &self.steps {
            let converged = s.window_change.is_some_and(|d| d <= self.tol_conv);
            w.write_record([
                s.k.to_string(),
                format!("{:.16e}", s.norm_h),
                format!("{:.16e}", s.energy),
                format!("{:.16e}", s.sup_window),
                converged.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalCandidate {
    pub k: usize,
    /// Zero-extended final solution on the materialized graph.
    pub u_star: VertexFunction,
    /// Sup of `|μ·(-Δu + hu - u log u²)|` on the window.
    pub residual_window: f64,
    /// The same over `B_{k-1}`, where all neighbors are materialized.
    pub residual_interior: f64,
    /// Number of vertices in the excluded boundary layer `B_k ∖ B_{k-1}`.
    pub boundary_layer: usize,
    /// `∫u*² log u*² dμ` over `B_k`.
    pub log_mass: f64,
    pub max_abs: f64,
    pub nontrivial: bool,
}

/// True iff the partial log-mass reaches `θ` and some `|u*(x)| > 1`.
pub fn nontriviality_check(candidate: &GlobalCandidate, ledger: &ConstantsLedger) -> bool {
    candidate.log_mass >= ledger.nontriviality_theta && candidate.max_abs > 1.0
}

/// Smallest uniform bound over [`EPSILON_SWEEP`], with its exponent.
pub fn best_uniform_bound(c: f64, h0: f64, mu_min: f64) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, EPSILON_SWEEP[0]);
    for &eps in &EPSILON_SWEEP {
        let b = uniform_bound(c, eps, h0, mu_min)?;
        if b < best.0 {
            best = (b, eps);
        }
    }
    Ok(best)
}

/// Sup of `|μ·R(u)|` over `set` for the equation on the whole graph.
fn global_residual(g: &Graph, h: &[f64], u: &VertexFunction, set: &[usize]) -> f64 {
    set.iter()
        .map(|&x| {
            let ux = u.get(x);
            let r = -laplacian_unchecked(g, u, x) + h[x] * ux - crate::functionals::log_nonlinearity(ux);
            (g.measure(x) * r).abs()
        })
        .fold(0.0, f64::max)
}

/// Runs the exhaustion and reports the trace even when the window never
/// settles (`converged_at == None`).
pub fn run_exhaustion_trace(
    source: &dyn BallSource,
    potential: &PotentialSpec,
    cfg: &ExhaustionConfig,
    solver: &SolverConfig,
) -> Result<(ExhaustionTrace, GlobalCandidate)> {
    cfg.validate()?;
    solver.validate()?;
    let g = source.graph_for(cfg.k_to)?;
    let center = match &cfg.center {
        Some(label) => g.vertex(label)?,
        None => g.origin(),
    };
    let h = potential.evaluate(&g)?;
    let window = ball(&g, center, cfg.window_radius)?;

    let mut solutions: Vec<(Domain, Solution, usize)> = Vec::new();
    for k in cfg.k_from..=cfg.k_to {
        let domain = ball(&g, center, k)?;
        let p = LocalProblem::new(&g, domain.clone(), h.clone(), cfg.epsilon)?;
        let warm = match solutions.last() {
            Some((_, prev, _)) => prev.u.clone(),
            None => spike_start(&p, center)?,
        };
        let (s, restarts) = solve_ball(&p, k, &warm, solver)?;
        solutions.push((domain, s, restarts));
    }

    let last_domain = &solutions.last().expect("k range is nonempty").0;
    let h0 = h.min_on(last_domain.interior()).0;
    let mu_min = g.mu_min();
    let level = solutions.iter().map(|(_, s, _)| s.energy).fold(0.0, f64::max);
    let (bound, bound_eps) = best_uniform_bound(level, h0, mu_min)?;

    let mut steps = Vec::with_capacity(solutions.len());
    let mut converged_at = None;
    let mut previous: Option<Vec<f64>> = None;
    for (k, (domain, s, restarts)) in (cfg.k_from..).zip(&solutions) {
        let p = LocalProblem::new(&g, domain.clone(), h.clone(), cfg.epsilon)?;
        let mut ledger = p.constants_ledger()?;
        ledger.uniform_bound = Some(bound);
        let certificate = certify(&p, s, &ledger)?;
        let window_values: Vec<f64> = window.interior().iter().map(|&x| s.u.get(x)).collect();
        let window_change = previous.as_ref().map(|prev| {
            prev.iter()
                .zip(&window_values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        if converged_at.is_none() && window_change.is_some_and(|d| d <= cfg.tol_conv) {
            converged_at = Some(k);
        }
        steps.push(ExhaustionStep {
            k,
            norm_h: certificate.h_norm_sq.sqrt(),
            energy: s.energy,
            sup_window: window_values.iter().fold(0.0, |m, v| m.max(v.abs())),
            window_change,
            residual_norm: certificate.residual_norm,
            restarts: *restarts,
            certificate,
            window_values: window_values.clone(),
        });
        previous = Some(window_values);
    }

    let (final_domain, final_solution, _) = solutions.last().expect("k range is nonempty");
    let p = LocalProblem::new(&g, final_domain.clone(), h.clone(), cfg.epsilon)?;
    let ledger = p.constants_ledger()?;
    let inner = ball(&g, center, cfg.k_to.saturating_sub(1).max(1))?;
    let u = &final_solution.u;
    let mut candidate = GlobalCandidate {
        k: cfg.k_to,
        u_star: u.clone(),
        residual_window: global_residual(&g, h.values(), u, window.interior()),
        residual_interior: global_residual(&g, h.values(), u, inner.interior()),
        boundary_layer: final_domain.interior().len() - inner.interior().len(),
        log_mass: p.log_mass(u)?,
        max_abs: u.sup_norm(),
        nontrivial: false,
    };
    candidate.nontrivial = nontriviality_check(&candidate, &ledger);

    let trace = ExhaustionTrace {
        window: window.interior().iter().map(|&x| g.label(x).to_string()).collect(),
        steps,
        uniform_bound_used: bound,
        uniform_bound_epsilon: bound_eps,
        h0,
        mu_min,
        tol_conv: cfg.tol_conv,
        converged_at,
    };
    Ok((trace, candidate))
}

/// As [`run_exhaustion_trace`], failing with `NoConvergenceInRange` when the
/// window never settles.
pub fn run_exhaustion(
    source: &dyn BallSource,
    potential: &PotentialSpec,
    cfg: &ExhaustionConfig,
    solver: &SolverConfig,
) -> Result<(ExhaustionTrace, GlobalCandidate)> {
    let (trace, candidate) = run_exhaustion_trace(source, potential, cfg, solver)?;
    if trace.converged_at.is_none() {
        return Err(Error::NoConvergenceInRange);
    }
    Ok((trace, candidate))
}

/// Mountain pass on one ball from a warm start; seeded random restarts if
/// that fails or lands on the trivial solution.
fn solve_ball(p: &Problem<'_>, k: usize, warm: &VertexFunction, solver: &SolverConfig) -> Result<(Solution, usize)> {
    let ledger = p.constants_ledger()?;
    let attempt = |start: &VertexFunction| -> Result<Solution> {
        let e = negative_endpoint(p, start)?;
        let s = solve_mountain_pass(p, &e, solver)?.require_converged()?;
        if certify(p, &s, &ledger)?.nontriviality_ok {
            Ok(s)
        } else {
            Err(Error::PathCollapse)
        }
    };
    let first_error = match attempt(warm) {
        Ok(s) => return Ok((s, 0)),
        Err(e) => e,
    };
    let retries = solver.execution.map_range(RETRIES, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(solver.seed);
        rng.set_stream((k * RETRIES + i) as u64);
        let values: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(0.0..1.0)).collect();
        attempt(&p.to_function(&values))
    });
    retries
        .into_iter()
        .enumerate()
        .find_map(|(i, r)| r.ok().map(|s| (s, i + 1)))
        .ok_or_else(|| Error::LocalSolveFailed {
            k,
            reason: first_error.to_string(),
        })
}
