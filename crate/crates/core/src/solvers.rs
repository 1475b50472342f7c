//! Critical-point solvers and post-solve certificates.
//!
//! All solvers work on interior coordinates of the problem's domain and
//! return a [`Solution`] whose vertex function vanishes off the interior.
//! A solver that runs out of iterations still returns its best iterate, with
//! `converged == false`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::functionals::{ConstantsLedger, Problem, ProblemKind};
use crate::graph::VertexFunction;

/// Relative L² distance below which two sign-normalized solutions count as
/// the same critical point.
pub const DISTINCTNESS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Newton,
    Nehari,
    MountainPass,
    Deflated,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "newton" => Ok(Method::Newton),
            "nehari" => Ok(Method::Nehari),
            "mountain-pass" => Ok(Method::MountainPass),
            "deflated" => Ok(Method::Deflated),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Sup-norm tolerance on the μ-weighted residual.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Newton backtracking factor and maximal number of halvings.
    pub backtrack: f64,
    pub max_halvings: usize,
    pub seed: u64,
    /// Mountain-pass path discretization.
    pub path_points: usize,
    /// Mountain-pass step as a fraction of the node's 𝓗 norm.
    pub path_step: f64,
    pub path_sweeps: usize,
    pub deflation_power: f64,
    pub deflation_shift: f64,
    /// Random starts per deflated search.
    pub starts: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Newton,
            tol_residual: 1e-10,
            max_iter: 200,
            backtrack: 0.5,
            max_halvings: 60,
            seed: 0,
            path_points: 41,
            path_step: 0.05,
            path_sweeps: 2000,
            deflation_power: 2.0,
            deflation_shift: 1.0,
            starts: 64,
            execution: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::InvalidConfig("tol_residual must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.path_points < 3 {
            return Err(Error::InvalidConfig("path_points must be at least 3".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidConfig("backtrack must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub u: VertexFunction,
    pub energy: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub method: Method,
    pub converged: bool,
    pub tolerance: f64,
    /// SHA-256 of graph, domain and potential.
    pub fingerprint: String,
}

impl Solution {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.residual_norm,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub residual_ok: bool,
    pub residual_norm: f64,
    /// `|E(u) - ½‖u‖²₂|`.
    pub energy_identity_gap: f64,
    /// `|‖u‖²_𝓗 - ∫u² log u² dμ|`.
    pub nehari_gap: f64,
    /// `∫|∇u|² dμ + ∫h u² dμ`.
    pub h_norm_sq: f64,
    pub nontriviality_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mp_floor_ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform_bound_ok: Option<bool>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.residual_ok
            && self.nontriviality_ok
            && self.mp_floor_ok.unwrap_or(true)
            && self.uniform_bound_ok.unwrap_or(true)
    }
}

pub fn fingerprint(p: &Problem<'_>) -> String {
    let g = p.graph();
    let mut hasher = Sha256::new();
    for x in 0..g.len() {
        hasher.update(g.label(x).as_bytes());
        hasher.update([0]);
        hasher.update(g.measure(x).to_bits().to_le_bytes());
        hasher.update(p.potential().at(x).to_bits().to_le_bytes());
        for &(y, w) in g.neighbors(x) {
            hasher.update((y as u64).to_le_bytes());
            hasher.update(w.to_bits().to_le_bytes());
        }
    }
    for &x in p.domain().interior() {
        hasher.update((x as u64).to_le_bytes());
    }
    hasher.update([p.kind() as u8]);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Riesz map for the inner product `∫|∇u|² + (h+1)u² dμ`.
struct Metric {
    chol: Cholesky<f64, Dyn>,
    matrix: DMatrix<f64>,
}

impl Metric {
    fn new(p: &Problem<'_>) -> Result<Self> {
        let matrix = p.inner_product_matrix();
        let chol = Cholesky::new(matrix.clone()).ok_or(Error::SingularJacobian)?;
        Ok(Self { chol, matrix })
    }

    /// `A^{-1} g`.
    fn riesz(&self, g: &[f64]) -> Vec<f64> {
        self.chol.solve(&DVector::from_column_slice(g)).as_slice().to_vec()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let a = DVector::from_column_slice(a);
        let b = DVector::from_column_slice(b);
        a.dot(&(&self.matrix * &b))
    }

    fn norm(&self, v: &[f64]) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }
}

struct NewtonRun {
    x: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
}

/// Damped Newton on `R(u) = 0`. A step is accepted as soon as the residual
/// sup-norm decreases; if no halving helps, one normalized Riesz-gradient
/// step is taken instead.
fn newton_run(p: &Problem<'_>, metric: &Metric, mut x: Vec<f64>, cfg: &SolverConfig) -> Result<NewtonRun> {
    let mut residual = p.residual_norm_vec(&x);
    for it in 0..cfg.max_iter {
        if residual <= cfg.tol_residual {
            return Ok(NewtonRun {
                x,
                residual,
                iterations: it,
                converged: true,
            });
        }
        let g = p.gradient_vec(&x);
        let hessian = p.hessian_dense(&x);
        let rhs = DVector::from_iterator(g.len(), g.iter().map(|v| -v));
        let step = hessian.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian);
        }

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
            let r = p.residual_norm_vec(&trial);
            if r < residual {
                accepted = Some((trial, r));
                break;
            }
            scale *= cfg.backtrack;
        }
        match accepted {
            Some((trial, r)) => {
                x = trial;
                residual = r;
            }
            None => {
                x = gradient_step(metric, &x, &g, 0.05);
                residual = p.residual_norm_vec(&x);
            }
        }
    }
    Ok(NewtonRun {
        converged: residual <= cfg.tol_residual,
        x,
        residual,
        iterations: cfg.max_iter,
    })
}

/// `x - len·w/‖w‖` with `w` the Riesz gradient and `len = fraction·‖x‖`.
fn gradient_step(metric: &Metric, x: &[f64], g: &[f64], fraction: f64) -> Vec<f64> {
    let w = metric.riesz(g);
    let wn = metric.norm(&w);
    if !(wn > 0.0) {
        return x.to_vec();
    }
    let len = fraction * metric.norm(x).max(f64::MIN_POSITIVE);
    x.iter().zip(&w).map(|(a, b)| a - len / wn * b).collect()
}

fn package(p: &Problem<'_>, run: NewtonRun, method: Method, cfg: &SolverConfig, extra_iterations: usize) -> Solution {
    Solution {
        energy: p.energy_vec(&run.x),
        u: p.to_function(&run.x),
        residual_norm: run.residual,
        iterations: run.iterations + extra_iterations,
        method,
        converged: run.converged,
        tolerance: cfg.tol_residual,
        fingerprint: fingerprint(p),
    }
}

pub fn solve_newton(p: &Problem<'_>, u0: &VertexFunction, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let x0 = p.interior_values(u0)?;
    let metric = Metric::new(p)?;
    let run = newton_run(p, &metric, x0, cfg)?;
    Ok(package(p, run, Method::Newton, cfg, 0))
}

/// `t*·u` for interior values `u`.
fn nehari_project(p: &Problem<'_>, x: &[f64]) -> Result<Vec<f64>> {
    let t = p.nehari_scale_vec(x)?;
    Ok(x.iter().map(|v| t * v).collect())
}

/// Nehari-projected spike `δ_x` at an interior vertex.
pub fn spike_start(p: &Problem<'_>, vertex: usize) -> Result<VertexFunction> {
    let slot = p
        .domain()
        .slot(vertex)
        .ok_or_else(|| Error::UnknownVertex(p.graph().label(vertex).to_string()))?;
    let mut x = vec![0.0; p.dim()];
    x[slot] = 1.0;
    Ok(p.to_function(&nehari_project(p, &x)?))
}

/// The default start: a Nehari-projected spike at the graph origin if it is
/// interior, otherwise at the first interior vertex.
pub fn default_start(p: &Problem<'_>) -> Result<VertexFunction> {
    let origin = p.graph().origin();
    let center = if p.domain().contains(origin) {
        origin
    } else {
        p.domain().interior()[0]
    };
    spike_start(p, center)
}

/// Projected gradient descent on the Nehari manifold followed by a Newton
/// polish. On the manifold `E(u) = ½‖u‖²₂`, so the descent minimizes mass.
pub fn solve_nehari(p: &Problem<'_>, u0: &VertexFunction, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let metric = Metric::new(p)?;
    let x0 = p.interior_values(u0)?;
    let mut x = nehari_project(p, &x0)?;
    let mut energy = p.energy_vec(&x);
    let mut alpha = 1.0;
    let mut iterations = 0;
    let descent_budget = 50 * cfg.max_iter;
    let switch_tol = 1e-6 * (1.0 + sup(&x));
    while iterations < descent_budget {
        iterations += 1;
        let g = p.gradient_vec(&x);
        if sup(&g) <= switch_tol {
            break;
        }
        let w = metric.riesz(&g);
        let slope: f64 = g.iter().zip(&w).map(|(a, b)| a * b).sum();
        let mut moved = false;
        while alpha > 1e-14 {
            let trial: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a - alpha * b).collect();
            let projected = match nehari_project(p, &trial) {
                Ok(v) => v,
                Err(_) => return Err(Error::CollapseToZero),
            };
            let e = p.energy_vec(&projected);
            if e <= energy - 1e-4 * alpha * slope {
                x = projected;
                energy = e;
                moved = true;
                alpha = (alpha * 2.0).min(1.0);
                break;
            }
            alpha *= 0.5;
        }
        if p.l2_sq_vec(&x).sqrt() < 1e-12 {
            return Err(Error::CollapseToZero);
        }
        if !moved {
            break;
        }
    }
    let run = newton_run(p, &metric, x, cfg)?;
    if p.l2_sq_vec(&run.x).sqrt() <= DISTINCTNESS {
        return Err(Error::CollapseToZero);
    }
    Ok(package(p, run, Method::Nehari, cfg, iterations))
}

/// Sweeps between attempts to finish a mountain-pass path with Newton.
const POLISH_EVERY: usize = 25;

/// Mountain pass between `0` and an endpoint `e` with `E(e) < 0`.
///
/// The straight segment `0 → e` is discretized into `path_points` nodes.
/// Each sweep moves every interior node along the component of its Riesz
/// gradient normal to the path (the highest node climbs along the tangent
/// instead), with the step capped at `path_step·‖node‖`. The nodes are then
/// resampled to equal arc length and the path is cut at the first node past
/// the peak with negative energy, so it always joins `0` to a point of
/// negative energy. Every few sweeps the highest node is Newton-polished; the
/// result is accepted once it is a nontrivial critical point whose energy
/// does not exceed the path maximum.
pub fn solve_mountain_pass(p: &Problem<'_>, e: &VertexFunction, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let end = p.interior_values(e)?;
    let end_energy = p.energy_vec(&end);
    if !(end_energy < 0.0) {
        return Err(Error::NonnegativeEndpoint(end_energy));
    }
    let metric = Metric::new(p)?;
    let n = cfg.path_points;
    let mut nodes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            end.iter().map(|v| t * v).collect()
        })
        .collect();

    // Newton from the highest node, kept only if it lands on a nontrivial
    // critical point no higher than the current path maximum.
    let polish = |node: &[f64], level: f64| -> Option<NewtonRun> {
        if !(level > 0.0) {
            return None;
        }
        let run = newton_run(p, &metric, node.to_vec(), cfg).ok()?;
        let e = p.energy_vec(&run.x);
        let ok = run.converged
            && p.l2_sq_vec(&run.x).sqrt() > DISTINCTNESS
            && e > 0.0
            && e <= level + 1e-9 * level.abs().max(1.0);
        ok.then_some(run)
    };
    let mut best = peak(p, &nodes);
    let mut sweeps = 0;
    while sweeps < cfg.path_sweeps {
        sweeps += 1;
        let climber = best.0;
        let current_nodes = &nodes;
        let moved = cfg.execution.map_range(n - 2, |k| {
            let i = k + 1;
            let node = &current_nodes[i];
            let g = p.gradient_vec(node);
            let mut w = metric.riesz(&g);
            let chord: Vec<f64> = current_nodes[i + 1]
                .iter()
                .zip(&current_nodes[i - 1])
                .map(|(a, b)| a - b)
                .collect();
            let cn = metric.norm(&chord);
            if cn > 0.0 {
                let along = metric.inner(&w, &chord) / (cn * cn);
                let factor = if i == climber { 2.0 } else { 1.0 };
                for (wj, cj) in w.iter_mut().zip(&chord) {
                    *wj -= factor * along * cj;
                }
            }
            let wn = metric.norm(&w);
            if !(wn > 0.0) {
                return node.clone();
            }
            let len = wn.min(cfg.path_step * metric.norm(node));
            node.iter().zip(&w).map(|(a, b)| a - len / wn * b).collect::<Vec<f64>>()
        });
        for (slot, node) in nodes[1..n - 1].iter_mut().zip(moved) {
            *slot = node;
        }
        nodes = redistribute(&metric, &nodes, n);
        let (top, _) = peak(p, &nodes);
        if let Some(cut) = (top + 1..n).find(|&j| p.energy_vec(&nodes[j]) < 0.0) {
            if cut < n - 1 {
                nodes = redistribute(&metric, &nodes[..=cut], n);
            }
        }

        best = peak(p, &nodes);
        if sweeps % POLISH_EVERY == 0 {
            if let Some(run) = polish(&nodes[best.0], best.1) {
                return Ok(package(p, run, Method::MountainPass, cfg, sweeps));
            }
        }
    }
    if !(best.1 > 0.0) {
        return Err(Error::PathCollapse);
    }
    let run = newton_run(p, &metric, nodes[best.0].clone(), cfg)?;
    if p.l2_sq_vec(&run.x).sqrt() <= DISTINCTNESS {
        return Err(Error::PathCollapse);
    }
    Ok(package(p, run, Method::MountainPass, cfg, sweeps))
}

/// Index and energy of the highest node.
fn peak(p: &Problem<'_>, nodes: &[Vec<f64>]) -> (usize, f64) {
    nodes
        .iter()
        .enumerate()
        .map(|(i, v)| (i, p.energy_vec(v)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
}

/// Piecewise-linear resampling to `count` nodes at equal arc length,
/// endpoints fixed.
fn redistribute(metric: &Metric, nodes: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut arc = vec![0.0; n];
    for i in 1..n {
        let diff: Vec<f64> = nodes[i].iter().zip(&nodes[i - 1]).map(|(a, b)| a - b).collect();
        arc[i] = arc[i - 1] + metric.norm(&diff);
    }
    let total = arc[n - 1];
    if !(total > 0.0) {
        return nodes.to_vec();
    }
    let mut out = Vec::with_capacity(count);
    out.push(nodes[0].clone());
    let mut seg = 1;
    for i in 1..count - 1 {
        let target = total * i as f64 / (count - 1) as f64;
        while seg < n - 1 && arc[seg] < target {
            seg += 1;
        }
        let span = arc[seg] - arc[seg - 1];
        let t = if span > 0.0 { (target - arc[seg - 1]) / span } else { 0.0 };
        out.push(
            nodes[seg - 1]
                .iter()
                .zip(&nodes[seg])
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        );
    }
    out.push(nodes[n - 1].clone());
    out
}

/// Flips the sign so that the entry of largest magnitude is positive.
pub fn sign_normalized(values: &[f64]) -> Vec<f64> {
    let pivot = values
        .iter()
        .copied()
        .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
    if pivot < 0.0 {
        values.iter().map(|v| -v).collect()
    } else {
        values.to_vec()
    }
}

fn l2_dist(p: &Problem<'_>, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    p.l2_sq_vec(&d).sqrt()
}

/// Whether `candidate` differs from every element of `known` after sign
/// normalization.
pub fn is_distinct(p: &Problem<'_>, candidate: &[f64], known: &[Vec<f64>]) -> bool {
    let c = sign_normalized(candidate);
    let scale = 1.0 + p.l2_sq_vec(&c).sqrt();
    known
        .iter()
        .all(|k| l2_dist(p, &c, &sign_normalized(k)) > DISTINCTNESS * scale)
}

/// Start `index` of a multi-start search. The first `dim` starts are unit
/// spikes at each interior slot; after that, odd indices draw uniformly from
/// `(0, 1]` and even ones from `[-1, 1]`, using ChaCha8 seeded with `seed`
/// on stream `index`.
pub fn start_vector(dim: usize, index: usize, seed: u64) -> Vec<f64> {
    if index < dim {
        let mut x = vec![0.0; dim];
        x[index] = 1.0;
        return x;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    if index % 2 == 1 {
        (0..dim).map(|_| 1.0 - rng.gen::<f64>()).collect()
    } else {
        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }
}

struct Deflation {
    roots: Vec<Vec<f64>>,
    power: f64,
    shift: f64,
}

impl Deflation {
    /// `M(u) = Π_j (‖u - u_j‖^{-p} + s)` and `⟨∇log M(u), d⟩`.
    fn factor_and_slope(&self, p: &Problem<'_>, x: &[f64], d: &[f64]) -> (f64, f64) {
        let mut m = 1.0;
        let mut slope = 0.0;
        for r in &self.roots {
            let diff: Vec<f64> = x.iter().zip(r).map(|(a, b)| a - b).collect();
            let dist_sq = p.l2_sq_vec(&diff);
            let dist = dist_sq.sqrt();
            let core = dist.powf(-self.power);
            let factor = core + self.shift;
            m *= factor;
            let inner: f64 = diff
                .iter()
                .zip(d)
                .zip(p.domain().interior())
                .map(|((a, b), &v)| p.graph().measure(v) * a * b)
                .sum();
            slope += -self.power * core / dist_sq * inner / factor;
        }
        (m, slope)
    }
}

/// Newton on `M(u)·R(u)` from one start. Returns interior values when the
/// undeflated residual reaches tolerance.
fn deflated_run(p: &Problem<'_>, deflation: &Deflation, mut x: Vec<f64>, cfg: &SolverConfig) -> Option<Vec<f64>> {
    let zero = vec![0.0; x.len()];
    for _ in 0..cfg.max_iter {
        let residual = p.residual_norm_vec(&x);
        if residual <= cfg.tol_residual {
            return Some(x);
        }
        let g = p.gradient_vec(&x);
        let rhs = DVector::from_iterator(g.len(), g.iter().map(|v| -v));
        let step = p.hessian_dense(&x).lu().solve(&rhs)?;
        let step: Vec<f64> = step.iter().copied().collect();
        let (m, slope) = deflation.factor_and_slope(p, &x, &step);
        let denom = 1.0 - slope;
        if !(denom.abs() > 1e-12) || !m.is_finite() {
            return None;
        }
        let factor = 1.0 / denom;
        let merit = m * residual;
        let mut scale = factor;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + scale * d).collect();
            let (mt, _) = deflation.factor_and_slope(p, &trial, &zero);
            let r = p.residual_norm_vec(&trial);
            if mt.is_finite() && mt * r < merit {
                accepted = Some(trial);
                break;
            }
            scale *= cfg.backtrack;
        }
        x = accepted?;
    }
    None
}

/// Searches for a critical point that differs from all `known` solutions
/// (up to sign) and from the trivial one, with energy above every known
/// energy.
///
/// Starts come from [`start_vector`] and are Nehari-projected. The
/// candidates are sorted by `(energy, values)` and the lowest admissible
/// one is returned.
pub fn solve_deflated(p: &Problem<'_>, known: &[Solution], cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let metric = Metric::new(p)?;
    let known_values = known
        .iter()
        .map(|s| p.interior_values(&s.u))
        .collect::<Result<Vec<_>>>()?;
    let mut roots = vec![vec![0.0; p.dim()]];
    for k in &known_values {
        roots.push(k.clone());
        roots.push(k.iter().map(|v| -v).collect());
    }
    let deflation = Deflation {
        roots,
        power: cfg.deflation_power,
        shift: cfg.deflation_shift,
    };
    let level = known
        .iter()
        .map(|s| s.energy)
        .fold(f64::NEG_INFINITY, f64::max);

    let candidates = cfg.execution.map_range(cfg.starts, |start| {
        let raw = start_vector(p.dim(), start, cfg.seed);
        let x0 = nehari_project(p, &raw).ok()?;
        let x = deflated_run(p, &deflation, x0, cfg)?;
        // Polish without deflation so the reported residual is the true one.
        let run = newton_run(p, &metric, x, cfg).ok()?;
        run.converged.then(|| sign_normalized(&run.x))
    });

    let mut admissible: Vec<(f64, Vec<f64>)> = candidates
        .into_iter()
        .flatten()
        .filter(|x| p.l2_sq_vec(x).sqrt() > DISTINCTNESS)
        .filter(|x| is_distinct(p, x, &known_values))
        .map(|x| (p.energy_vec(&x), x))
        .filter(|(e, _)| known.is_empty() || *e > level + 1e-9 * (1.0 + level.abs()))
        .collect();
    admissible.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let (energy, x) = admissible.into_iter().next().ok_or(Error::NoNewSolution)?;
    Ok(Solution {
        energy,
        residual_norm: p.residual_norm_vec(&x),
        u: p.to_function(&x),
        iterations: cfg.starts,
        method: Method::Deflated,
        converged: true,
        tolerance: cfg.tol_residual,
        fingerprint: fingerprint(p),
    })
}

/// Dispatches on `cfg.method` for a single solve from `u0`. For the
/// mountain pass `u0` is scaled up until it has negative energy and used as
/// the endpoint.
pub fn solve(p: &Problem<'_>, u0: &VertexFunction, cfg: &SolverConfig) -> Result<Solution> {
    match cfg.method {
        Method::Newton => solve_newton(p, u0, cfg),
        Method::Nehari => solve_nehari(p, u0, cfg),
        Method::MountainPass => solve_mountain_pass(p, &negative_endpoint(p, u0)?, cfg),
        Method::Deflated => solve_deflated(p, &[], cfg),
    }
}

/// Smallest `2^j·u` (j ≥ 0) with negative energy.
pub fn negative_endpoint(p: &Problem<'_>, u: &VertexFunction) -> Result<VertexFunction> {
    let x = p.interior_values(u)?;
    if !(p.l2_sq_vec(&x) > 0.0) {
        return Err(Error::ZeroFunction);
    }
    let mut t = 1.0;
    for _ in 0..200 {
        let scaled: Vec<f64> = x.iter().map(|v| t * v).collect();
        if p.energy_vec(&scaled) < 0.0 {
            return Ok(p.to_function(&scaled));
        }
        t *= 2.0;
    }
    Err(Error::NonnegativeEndpoint(p.energy_vec(&x)))
}

/// Recomputes residual, energy identity, Nehari gap and the floors for `s`.
///
/// The `θ` floor comes from the positive-potential theory, so it is applied
/// to local problems only; for global problems nontriviality means
/// `‖u‖₂ > DISTINCTNESS`.
pub fn certify(p: &Problem<'_>, s: &Solution, ledger: &ConstantsLedger) -> Result<Certificate> {
    let x = p.interior_values(&s.u)?;
    let residual_norm = p.residual_norm_vec(&x);
    let energy = p.energy_vec(&x);
    let l2 = p.l2_sq_vec(&x);
    let q = p.quadratic_form_vec(&x);
    let log_mass = p.log_mass_vec(&x);
    let nontriviality_ok = match p.kind() {
        ProblemKind::Local => q >= ledger.nontriviality_theta,
        ProblemKind::Global => l2.sqrt() > DISTINCTNESS,
    };
    let mp_floor_ok = (s.method == Method::MountainPass && p.kind() == ProblemKind::Local)
        .then_some(energy >= ledger.mp_level_floor);
    Ok(Certificate {
        residual_ok: residual_norm <= s.tolerance,
        residual_norm,
        energy_identity_gap: (energy - 0.5 * l2).abs(),
        nehari_gap: (q - log_mass).abs(),
        h_norm_sq: q,
        nontriviality_ok,
        mp_floor_ok,
        uniform_bound_ok: ledger.uniform_bound.map(|b| q <= b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{GlobalProblem, LocalProblem};
    use crate::graph::{ball, build_graph, Domain, Graph, GraphSpec, LatticeGenerator};
    use crate::spaces::PotentialSpec;

    const ROOT: f64 = 4.4816890703380645; // e^{3/2}

    fn f1(g: &Graph) -> Problem<'_> {
        let d = Domain::new(g, [1]).unwrap();
        let h = PotentialSpec::constant(1.0).evaluate(g).unwrap();
        LocalProblem::new(g, d, h, 0.5).unwrap()
    }

    fn z1_ball(g: &Graph, k: usize) -> Problem<'_> {
        let d = ball(g, g.origin(), k).unwrap();
        let h = PotentialSpec::constant(1.0).evaluate(g).unwrap();
        LocalProblem::new(g, d, h, 0.5).unwrap()
    }

    #[test]
    fn newton_on_f1() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let cfg = SolverConfig::default();
        let s = solve_newton(&p, &VertexFunction::delta(3, 1, 4.0), &cfg).unwrap();
        assert!(s.converged);
        assert!((s.u.get(1) - ROOT).abs() < 1e-10);
        assert!((s.energy - 0.5 * 3f64.exp()).abs() < 1e-9);
        let neg = solve_newton(&p, &VertexFunction::delta(3, 1, -4.0), &cfg).unwrap();
        assert_eq!(neg.u, s.u.neg());
    }

    #[test]
    fn nehari_matches_newton_on_f1() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let cfg = SolverConfig::default();
        let a = solve_nehari(&p, &VertexFunction::delta(3, 1, 1.0), &cfg).unwrap();
        let b = solve_nehari(&p, &VertexFunction::delta(3, 1, 3.0), &cfg).unwrap();
        assert!((a.u.get(1) - ROOT).abs() < 1e-10);
        assert!((a.u.get(1) - b.u.get(1)).abs() < 1e-12);
    }

    #[test]
    fn mountain_pass_on_f1() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let cfg = SolverConfig::default();
        let e = VertexFunction::delta(3, 1, 10.0);
        assert!(p.energy(&e).unwrap() < 0.0);
        let s = solve_mountain_pass(&p, &e, &cfg).unwrap();
        assert!((s.u.get(1).abs() - ROOT).abs() < 1e-10);
        let ledger = p.constants_ledger().unwrap();
        assert!(s.energy >= ledger.mp_level_floor);
        assert!(matches!(
            solve_mountain_pass(&p, &VertexFunction::delta(3, 1, 1.0), &cfg),
            Err(Error::NonnegativeEndpoint(_))
        ));
    }

    #[test]
    fn methods_agree_on_small_lattice_ball() {
        let z = LatticeGenerator::new(1).materialize(4);
        let p = z1_ball(&z, 2);
        let cfg = SolverConfig::default();
        let start = default_start(&p).unwrap();
        let nehari = solve_nehari(&p, &start, &cfg).unwrap();
        let mp = solve_mountain_pass(&p, &negative_endpoint(&p, &start).unwrap(), &cfg).unwrap();
        assert!(nehari.converged && mp.converged);
        assert!((nehari.energy - mp.energy).abs() < 1e-8, "{} vs {}", nehari.energy, mp.energy);

        let p3 = z1_ball(&z, 3);
        let start = default_start(&p3).unwrap();
        let newton = solve_newton(&p3, &start, &cfg).unwrap();
        let nehari = solve_nehari(&p3, &start, &cfg).unwrap();
        assert!(newton.converged && nehari.converged);
        assert!(nehari.energy <= newton.energy + 1e-9);
    }

    #[test]
    fn certificate_flags() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let cfg = SolverConfig::default();
        let ledger = p.constants_ledger().unwrap();
        let s = solve_newton(&p, &VertexFunction::delta(3, 1, 4.0), &cfg).unwrap();
        let c = certify(&p, &s, &ledger).unwrap();
        assert!(c.passed());
        assert!(c.energy_identity_gap <= 1e-10 * (1.0 + s.energy));
        assert!(c.nehari_gap <= 1e-9);

        let mut zero = s.clone();
        zero.u = VertexFunction::zeros(3);
        assert!(!certify(&p, &zero, &ledger).unwrap().nontriviality_ok);

        let mut bumped = s.clone();
        bumped.u.set(1, s.u.get(1) + 0.1);
        assert!(!certify(&p, &bumped, &ledger).unwrap().residual_ok);
    }

    #[test]
    fn deflation_on_two_vertices_finds_ground_state_first() {
        let g = build_graph(&GraphSpec::Path(2)).unwrap();
        let h = PotentialSpec::table(&[("v0", -0.5), ("v1", 2.0)]).evaluate(&g).unwrap();
        let p = GlobalProblem::new(&g, Domain::whole(&g), h).unwrap();
        let cfg = SolverConfig::default();
        let first = solve_deflated(&p, &[], &cfg).unwrap();
        let nehari = solve_nehari(&p, &first.u, &cfg).unwrap();
        assert!((first.energy - nehari.energy).abs() < 1e-9);
    }

    #[test]
    fn sign_normalization() {
        assert_eq!(sign_normalized(&[1.0, -3.0]), vec![-1.0, 3.0]);
        assert_eq!(sign_normalized(&[0.0, 2.0]), vec![0.0, 2.0]);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            path_points: 2,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(SolverConfig {
            tol_residual: 0.0,
            ..SolverConfig::default()
        }
        .validate()
        .is_err());
    }
}
