//! Energies, residuals and explicit constants for
//! `-Δu + h(x)u = u log u²`.
//!
//! Both the Dirichlet problem on a ball and the truncated global problem
//! share the functional
//!
//! ```text
//! E(u) = ½∫|∇u|² dμ + ½∫(h+1)u² dμ - ½∫u² log u² dμ
//! ```
//!
//! whose μ-weighted gradient is the residual
//! `R(u) = -Δu + hu - u log u²`. Unknowns live on the interior of a
//! [`Domain`]; the function is zero everywhere else.
//!
//! `u log u²` and `u² log u²` are extended by 0 at `u = 0`. The energy and
//! the residual are continuous there, but the residual is not
//! differentiable, so the Jacobian evaluates its log term at
//! [`JACOBIAN_FLOOR`] whenever `|u| < JACOBIAN_FLOOR`.

use std::f64::consts::E;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Domain, Graph, VertexFunction};
use crate::spaces::{check_boundary, embedding_constant, Potential};

pub const JACOBIAN_FLOOR: f64 = 1e-150;
pub const DEFAULT_EPSILON: f64 = 0.5;

/// `t log t²`, with value 0 at `t = 0`.
pub fn log_nonlinearity(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * (t * t).ln()
    }
}

/// `t² log t²`, with value 0 at `t = 0`.
pub fn log_density(t: f64) -> f64 {
    t * log_nonlinearity(t)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon))
    }
}

/// Certified upper bound for `sup_{t>0} t²|log t²| / (t^{2-ε} + t^{2+ε})`.
///
/// With `s = ln t` the ratio is `|s| / cosh(εs)`, which has one interior
/// maximizer on each side of `t = 1`. Each is bracketed by bisection on the
/// sign of the derivative; the larger bracketed value is inflated by a
/// relative `1e-12` to cover evaluation roundoff. The result lies in
/// `[sup, sup·(1 + 1e-9)]` and never exceeds `2/(eε)`.
pub fn c_eps(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let envelope = 2.0 / (E * epsilon);
    let ratio = |s: f64| s.abs() / (epsilon * s).cosh();

    // t > 1: derivative sign is sign(1 - εs·tanh(εs)); t < 1 mirrors it.
    let upper = bisect_peak(|s| 1.0 - epsilon * s * (epsilon * s).tanh(), 0.0, 2.0 / epsilon);
    let lower = bisect_peak(|s| epsilon * s * (epsilon * s).tanh() - 1.0, -2.0 / epsilon, 0.0);

    let best = [upper.0, upper.1, lower.0, lower.1]
        .into_iter()
        .map(ratio)
        .fold(0.0, f64::max);
    let certified = best * (1.0 + 1e-12);
    debug_assert!(certified <= envelope);
    Ok(certified.min(envelope))
}

/// Shrinks `[lo, hi]` around the sign change of `slope` (positive on the
/// left, negative on the right).
fn bisect_peak(slope: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Exact `sup_{t ≥ 1} log t² / t^ε = 2/(eε)`, rounded up by a few ulps.
///
/// This is the constant for the one-sided bound
/// `t² log t² ≤ K t^{2+ε}` on `{|t| ≥ 1}`, which is what the mountain-pass
/// radius, the nontriviality floor and the uniform bound rely on.
pub fn c_eps_tail(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(2.0 / (E * epsilon) * (1.0 + 4.0 * f64::EPSILON))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Dirichlet problem on a ball, `h > 0`.
    Local,
    /// Global equation realized on a truncation, `h > -1`.
    Global,
}

/// Precomputed interior operator: `K` is the stiffness matrix of
/// `∫|∇u|² dμ` restricted to interior unknowns.
#[derive(Debug, Clone)]
struct InteriorOperator {
    mu: Vec<f64>,
    h: Vec<f64>,
    degree: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl InteriorOperator {
    fn new(g: &Graph, d: &Domain, h: &Potential) -> Self {
        let interior = d.interior();
        Self {
            mu: interior.iter().map(|&x| g.measure(x)).collect(),
            h: interior.iter().map(|&x| h.at(x)).collect(),
            degree: interior.iter().map(|&x| g.degree(x)).collect(),
            neighbors: interior
                .iter()
                .map(|&x| {
                    g.neighbors(x)
                        .iter()
                        .filter_map(|&(y, w)| d.slot(y).map(|j| (j, w)))
                        .collect()
                })
                .collect(),
        }
    }

    fn len(&self) -> usize {
        self.mu.len()
    }

    /// `(K u)_i = Σ_j ω_ij (u_i - u_j)` with `u = 0` off the interior.
    fn stiffness_apply(&self, u: &[f64], i: usize) -> f64 {
        let coupling: f64 = self.neighbors[i].iter().map(|&(j, w)| w * u[j]).sum();
        self.degree[i] * u[i] - coupling
    }
}

/// A critical-point problem for the logarithmic functional on a domain.
#[derive(Debug, Clone)]
pub struct Problem<'g> {
    graph: &'g Graph,
    domain: Domain,
    potential: Potential,
    kind: ProblemKind,
    epsilon: f64,
    op: InteriorOperator,
}

/// Dirichlet problem on a ball: `h > 0` on the interior.
pub struct LocalProblem;

/// Global problem realized on a truncation: `h > -1` on the interior.
pub struct GlobalProblem;

impl LocalProblem {
    pub fn new<'g>(graph: &'g Graph, domain: Domain, potential: Potential, epsilon: f64) -> Result<Problem<'g>> {
        check_epsilon(epsilon)?;
        let (h0, x) = potential.min_on(domain.interior());
        if !(h0 > 0.0) {
            return Err(Error::NonpositivePotential {
                vertex: graph.label(x).to_string(),
                value: h0,
            });
        }
        Ok(Problem::assemble(graph, domain, potential, ProblemKind::Local, epsilon))
    }
}

impl GlobalProblem {
    pub fn new<'g>(graph: &'g Graph, truncation: Domain, potential: Potential) -> Result<Problem<'g>> {
        let (h1, x) = potential.min_on(truncation.interior());
        if !(h1 > -1.0) {
            return Err(Error::PotentialBelowMinusOne {
                vertex: graph.label(x).to_string(),
                value: h1,
            });
        }
        Ok(Problem::assemble(graph, truncation, potential, ProblemKind::Global, DEFAULT_EPSILON))
    }
}

/// Symmetric sparse matrix on interior unknowns, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseJacobian {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseJacobian {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|&&(c, _)| c == j).map_or(0.0, |&(_, v)| v)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * v[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                m[(i, j)] = a;
            }
        }
        m
    }
}

impl<'g> Problem<'g> {
    fn assemble(graph: &'g Graph, domain: Domain, potential: Potential, kind: ProblemKind, epsilon: f64) -> Self {
        let op = InteriorOperator::new(graph, &domain, &potential);
        Self {
            graph,
            domain,
            potential,
            kind,
            epsilon,
            op,
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of interior unknowns.
    pub fn dim(&self) -> usize {
        self.op.len()
    }

    /// `inf h` over the interior.
    pub fn h_min(&self) -> f64 {
        self.op.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks that `u` vanishes off the interior and returns interior values.
    pub fn interior_values(&self, u: &VertexFunction) -> Result<Vec<f64>> {
        u.check_len(self.graph)?;
        match self.kind {
            ProblemKind::Local => check_boundary(self.graph, &self.domain, u)?,
            ProblemKind::Global => {
                if let Some(x) = (0..u.len()).find(|&x| u.get(x) != 0.0 && !self.domain.contains(x)) {
                    return Err(Error::SupportOutsideTruncation(self.graph.label(x).to_string()));
                }
            }
        }
        Ok(self.domain.gather(u))
    }

    pub fn to_function(&self, values: &[f64]) -> VertexFunction {
        self.domain.scatter(self.graph.len(), values)
    }

    // ---- interior-vector kernels -------------------------------------------------

    /// `∫|∇u|² dμ + ∫ h u² dμ`, i.e. `‖u‖²_{𝓗(Ω)}` for local problems.
    pub fn quadratic_form_vec(&self, u: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| u[i] * self.op.stiffness_apply(u, i) + self.op.mu[i] * self.op.h[i] * u[i] * u[i])
            .sum()
    }

    /// `∫ u² dμ`.
    pub fn l2_sq_vec(&self, u: &[f64]) -> f64 {
        (0..self.dim()).map(|i| self.op.mu[i] * u[i] * u[i]).sum()
    }

    /// `∫ u² log u² dμ`.
    pub fn log_mass_vec(&self, u: &[f64]) -> f64 {
        (0..self.dim()).map(|i| self.op.mu[i] * log_density(u[i])).sum()
    }

    pub fn energy_vec(&self, u: &[f64]) -> f64 {
        0.5 * (self.quadratic_form_vec(u) + self.l2_sq_vec(u) - self.log_mass_vec(u))
    }

    /// Residual `R(u)(x) = -Δu(x) + h(x)u(x) - u(x) log u(x)²` at interior vertices.
    pub fn residual_vec(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let lap = self.op.stiffness_apply(u, i) / self.op.mu[i];
                lap + self.op.h[i] * u[i] - log_nonlinearity(u[i])
            })
            .collect()
    }

    /// Euclidean gradient of the energy in interior coordinates, `μ·R(u)`.
    pub fn gradient_vec(&self, u: &[f64]) -> Vec<f64> {
        self.residual_vec(u)
            .into_iter()
            .zip(&self.op.mu)
            .map(|(r, m)| r * m)
            .collect()
    }

    /// Sup-norm of the μ-weighted residual.
    pub fn residual_norm_vec(&self, u: &[f64]) -> f64 {
        self.gradient_vec(u).iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Jacobian of the residual: off-diagonal `-ω_xy/μ(x)`, diagonal
    /// `deg(x)/μ(x) + h(x) - (log u(x)² + 2)`.
    pub fn jacobian_vec(&self, u: &[f64]) -> SparseJacobian {
        let rows = (0..self.dim())
            .map(|i| {
                let mu = self.op.mu[i];
                let log_sq = 2.0 * u[i].abs().max(JACOBIAN_FLOOR).ln();
                let diag = self.op.degree[i] / mu + self.op.h[i] - (log_sq + 2.0);
                let mut row: Vec<(usize, f64)> =
                    self.op.neighbors[i].iter().map(|&(j, w)| (j, -w / mu)).collect();
                row.push((i, diag));
                row.sort_by_key(|&(j, _)| j);
                row
            })
            .collect();
        SparseJacobian { rows }
    }

    /// μ-weighted Jacobian `μ(x)·J(x, ·)`, symmetric; the Hessian of the
    /// energy in interior coordinates.
    pub fn hessian_dense(&self, u: &[f64]) -> DMatrix<f64> {
        let mut m = self.jacobian_vec(u).to_dense();
        for (i, mu) in self.op.mu.iter().enumerate() {
            m.row_mut(i).scale_mut(*mu);
        }
        m
    }

    /// Matrix of `∫|∇u|² dμ + ∫(h+1)u² dμ` in interior coordinates; positive
    /// definite whenever `h > -1`.
    pub fn inner_product_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.op.degree[i] + self.op.mu[i] * (self.op.h[i] + 1.0);
            for &(j, w) in &self.op.neighbors[i] {
                m[(i, j)] -= w;
            }
        }
        m
    }

    /// Closed-form `t* > 0` with `⟨E'(t*u), t*u⟩ = 0`:
    /// `log t*² = (‖u‖²_𝓗 - ∫u² log u²) / ‖u‖²₂`.
    pub fn nehari_scale_vec(&self, u: &[f64]) -> Result<f64> {
        let mass = self.l2_sq_vec(u);
        if !(mass > 0.0) {
            return Err(Error::ZeroFunction);
        }
        let exponent = (self.quadratic_form_vec(u) - self.log_mass_vec(u)) / mass;
        Ok((0.5 * exponent).exp())
    }

    // ---- vertex-function API ------------------------------------------------------

    pub fn energy(&self, u: &VertexFunction) -> Result<f64> {
        Ok(self.energy_vec(&self.interior_values(u)?))
    }

    /// Residual as a vertex function, zero off the interior.
    pub fn residual(&self, u: &VertexFunction) -> Result<VertexFunction> {
        let values = self.interior_values(u)?;
        Ok(self.to_function(&self.residual_vec(&values)))
    }

    pub fn residual_norm(&self, u: &VertexFunction) -> Result<f64> {
        Ok(self.residual_norm_vec(&self.interior_values(u)?))
    }

    /// `⟨E'(u), v⟩ = ∫ R(u) v dμ` for `v` supported in the interior.
    pub fn energy_gradient_pairing(&self, u: &VertexFunction, v: &VertexFunction) -> Result<f64> {
        let uu = self.interior_values(u)?;
        let vv = self.interior_values(v)?;
        Ok(self.gradient_vec(&uu).iter().zip(&vv).map(|(g, v)| g * v).sum())
    }

    pub fn jacobian(&self, u: &VertexFunction) -> Result<SparseJacobian> {
        Ok(self.jacobian_vec(&self.interior_values(u)?))
    }

    pub fn nehari_projection(&self, u: &VertexFunction) -> Result<f64> {
        self.nehari_scale_vec(&self.interior_values(u)?)
    }

    /// `∫|∇u|² dμ + ∫ h u² dμ`.
    pub fn quadratic_form(&self, u: &VertexFunction) -> Result<f64> {
        Ok(self.quadratic_form_vec(&self.interior_values(u)?))
    }

    pub fn l2_sq(&self, u: &VertexFunction) -> Result<f64> {
        Ok(self.l2_sq_vec(&self.interior_values(u)?))
    }

    pub fn log_mass(&self, u: &VertexFunction) -> Result<f64> {
        Ok(self.log_mass_vec(&self.interior_values(u)?))
    }

    /// Constants for this problem at its own `ε`.
    pub fn constants_ledger(&self) -> Result<ConstantsLedger> {
        let h0 = match self.kind {
            ProblemKind::Local => self.h_min(),
            // the 𝓦 norm plays the role of 𝓗 with h replaced by h + 1
            ProblemKind::Global => self.h_min() + 1.0,
        };
        ConstantsLedger::new(self.epsilon, h0, self.graph.mu_min())
    }
}

/// Explicit constants used by the certificates.
///
/// The embedding constant enters the estimates in its `q`-th power form
/// `C(q)^q = h0^{-q/2} μ_min^{(2-q)/2}` (the bound on `∫|u|^q`), and the
/// logarithm is controlled on `{|u| ≥ 1}` by `c_eps_tail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub epsilon: f64,
    pub h0: f64,
    pub mu_min: f64,
    /// Two-sided constant of `|t² log t²| ≤ C(|t|^{2-ε} + |t|^{2+ε})`.
    pub c_eps: f64,
    /// One-sided constant of `t² log t² ≤ K|t|^{2+ε}` for `|t| ≥ 1`.
    pub c_eps_tail: f64,
    /// `C(2+ε)` with `‖u‖_{2+ε} ≤ C(2+ε)‖u‖_𝓗`.
    pub c_embed_2plus: f64,
    pub mp_radius: f64,
    pub mp_level_floor: f64,
    pub nontriviality_theta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform_bound: Option<f64>,
}

impl ConstantsLedger {
    pub fn new(epsilon: f64, h0: f64, mu_min: f64) -> Result<Self> {
        let c_eps_value = c_eps(epsilon)?;
        let tail = c_eps_tail(epsilon)?;
        let q = 2.0 + epsilon;
        let c_embed = embedding_constant(h0, mu_min, q)?;
        let k2 = tail * c_embed.powf(q);
        let mp_radius = (1.0 / (2.0 * k2)).powf(1.0 / epsilon);
        Ok(Self {
            epsilon,
            h0,
            mu_min,
            c_eps: c_eps_value,
            c_eps_tail: tail,
            c_embed_2plus: c_embed,
            mp_radius,
            mp_level_floor: 0.25 * mp_radius * mp_radius,
            nontriviality_theta: 0.5 * k2.powf(-2.0 / epsilon),
            uniform_bound: None,
        })
    }

    /// Records the uniform bound for critical points at level `c`.
    pub fn with_level(mut self, c: f64) -> Result<Self> {
        self.uniform_bound = Some(uniform_bound(c, self.epsilon, self.h0, self.mu_min)?);
        Ok(self)
    }

    /// `(C_tail · C(2+ε)^{2+ε})^{-2/ε}`, the floor on `‖u‖²_𝓗` for nontrivial
    /// critical points; `θ` is half of it.
    pub fn nontriviality_ceiling(&self) -> f64 {
        (self.c_eps_tail * self.c_embed_2plus.powf(2.0 + self.epsilon)).powf(-2.0 / self.epsilon)
    }
}

/// Upper bound on `‖u‖²_{𝓗(B_k)}` for critical points at level `c > 0`.
///
/// At a critical point `‖u‖²₂ = 2c` and
/// `‖u‖²_𝓗 = ∫u² log u² ≤ K ‖u‖₂ ‖u‖_𝓗^{1+ε}` with
/// `K = C_tail · C(2+2ε)^{1+ε}`, so `‖u‖²_𝓗 ≤ K^{2/(1-ε)} (2c)^{1/(1-ε)}`.
pub fn uniform_bound(c: f64, epsilon: f64, h0: f64, mu_min: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let c = c.max(0.0);
    let k = c_eps_tail(epsilon)? * embedding_constant(h0, mu_min, 2.0 + 2.0 * epsilon)?.powf(1.0 + epsilon);
    let p = 1.0 / (1.0 - epsilon);
    Ok(k.powf(2.0 * p) * (2.0 * c).powf(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, GraphSpec};
    use crate::spaces::PotentialSpec;

    fn f1(g: &Graph) -> Problem<'_> {
        let d = Domain::new(g, [1]).unwrap();
        let h = PotentialSpec::constant(1.0).evaluate(g).unwrap();
        LocalProblem::new(g, d, h, 0.5).unwrap()
    }

    #[test]
    fn nonlinearity_values() {
        assert_eq!(log_nonlinearity(1.0), 0.0);
        assert_eq!(log_nonlinearity(0.0), 0.0);
        let t = 1.5f64.exp();
        assert!((log_nonlinearity(t) - 3.0 * t).abs() < 1e-13);
        assert!((log_nonlinearity(t) - 13.4451).abs() < 1e-4);
        assert_eq!(log_nonlinearity(-t), -log_nonlinearity(t));
    }

    #[test]
    fn c_eps_bounds() {
        let c1 = c_eps(1.0).unwrap();
        assert!(c1 > 0.0 && c1 <= 2.0 / E);
        let c05 = c_eps(0.5).unwrap();
        assert!(c05 > 0.0 && c05 <= 4.0 / E);
        assert!(matches!(c_eps(0.0), Err(Error::InvalidEpsilon(_))));
        assert!(matches!(c_eps(1.5), Err(Error::InvalidEpsilon(_))));

        // brute-force maximization on a fine grid in s = ln t
        for eps in [0.1, 0.5, 1.0] {
            let c = c_eps(eps).unwrap();
            let brute = (0..2_000_001)
                .map(|i| -60.0 + 120.0 * i as f64 / 2e6)
                .map(|s: f64| s.abs() / (eps * s).cosh())
                .fold(0.0, f64::max);
            assert!(c >= brute);
            assert!(c <= brute * (1.0 + 1e-9));
        }
    }

    #[test]
    fn c_eps_grid_check_at_one() {
        let c = c_eps(1.0).unwrap();
        for i in 0..=1200 {
            let t = 10f64.powf(-6.0 + 12.0 * i as f64 / 1200.0);
            assert!(log_density(t).abs() <= c * (t + t.powi(3)));
        }
    }

    #[test]
    fn tail_constant_is_needed() {
        // At t = e^{1/ε} the one-sided ratio reaches 2/(eε), above c_eps.
        let eps: f64 = 0.5;
        let t = (1.0 / eps).exp();
        let ratio = log_density(t) / t.powf(2.0 + eps);
        assert!(ratio > c_eps(eps).unwrap());
        assert!(ratio <= c_eps_tail(eps).unwrap());
    }

    #[test]
    fn local_energy_examples() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let d = VertexFunction::delta(3, 1, 1.0);
        assert_eq!(p.energy(&d).unwrap(), 2.0);
        assert_eq!(p.energy(&VertexFunction::zeros(3)).unwrap(), 0.0);
        let t = 1.5f64.exp();
        let e = p.energy(&d.scaled(t)).unwrap();
        assert!((e - 0.5 * 3f64.exp()).abs() < 1e-12 * e);
        assert!(matches!(
            p.energy(&VertexFunction::delta(3, 0, 1.0)),
            Err(Error::NonzeroBoundary(_))
        ));
    }

    #[test]
    fn global_energy_examples() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let h = PotentialSpec::constant(0.0).evaluate(&g).unwrap();
        let p = GlobalProblem::new(&g, Domain::whole(&g), h).unwrap();
        let d = VertexFunction::delta(3, 1, 1.0);
        assert_eq!(p.energy(&VertexFunction::zeros(3)).unwrap(), 0.0);
        assert_eq!(p.energy(&d).unwrap(), 1.5);
        assert_eq!(p.energy(&d.neg()).unwrap(), 1.5);

        let h = PotentialSpec::constant(0.0).evaluate(&g).unwrap();
        let small = GlobalProblem::new(&g, Domain::new(&g, [1]).unwrap(), h).unwrap();
        assert!(matches!(
            small.energy(&VertexFunction::delta(3, 2, 1.0)),
            Err(Error::SupportOutsideTruncation(_))
        ));
    }

    #[test]
    fn residual_examples() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let d = VertexFunction::delta(3, 1, 1.0);
        assert_eq!(p.residual(&d).unwrap().get(1), 3.0);
        let r = p.residual(&d.scaled(1.5f64.exp())).unwrap();
        assert!(r.get(1).abs() < 1e-13);
        assert_eq!(p.residual(&VertexFunction::zeros(3)).unwrap(), VertexFunction::zeros(3));
    }

    #[test]
    fn pairing_examples() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let u = VertexFunction::delta(3, 1, 1.5f64.exp());
        for v in [0.3, -2.0, 7.0] {
            let vv = VertexFunction::delta(3, 1, v);
            assert!(p.energy_gradient_pairing(&u, &vv).unwrap().abs() < 1e-12);
        }
        let d = VertexFunction::delta(3, 1, 1.0);
        assert_eq!(p.energy_gradient_pairing(&d, &VertexFunction::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn jacobian_examples() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let t = 1.5f64.exp();
        let j = p.jacobian(&VertexFunction::delta(3, 1, t)).unwrap();
        assert_eq!(j.dim(), 1);
        assert!((j.entry(0, 0) + 2.0).abs() < 1e-13);
        let j = p.jacobian(&VertexFunction::delta(3, 1, 1.0)).unwrap();
        assert_eq!(j.entry(0, 0), 1.0);
        // finite log term at zero
        let j0 = p.jacobian(&VertexFunction::zeros(3)).unwrap();
        assert!(j0.entry(0, 0).is_finite() && j0.entry(0, 0) > 600.0);
    }

    #[test]
    fn nehari_examples() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let d = VertexFunction::delta(3, 1, 1.0);
        let t = p.nehari_projection(&d).unwrap();
        assert!((t - 1.5f64.exp()).abs() < 1e-12);
        let again = p.nehari_projection(&d.scaled(t)).unwrap();
        assert!((again - 1.0).abs() < 1e-12);
        let scaled = p.nehari_projection(&d.scaled(2.5)).unwrap();
        assert!((scaled - t / 2.5).abs() < 1e-12);
        assert!(matches!(
            p.nehari_projection(&VertexFunction::zeros(3)),
            Err(Error::ZeroFunction)
        ));
    }

    #[test]
    fn ledger_on_f1() {
        let g = build_graph(&GraphSpec::Path(3)).unwrap();
        let p = f1(&g);
        let ledger = p.constants_ledger().unwrap();
        assert_eq!(ledger.c_embed_2plus, 1.0);
        assert!((ledger.mp_level_floor - ledger.mp_radius.powi(2) / 4.0).abs() < 1e-15);
        assert!(ledger.nontriviality_theta < ledger.nontriviality_ceiling());
        assert!(
            ledger.nontriviality_theta < (ledger.c_eps * ledger.c_embed_2plus).powf(-2.0 / ledger.epsilon)
        );
        // exact solution clears θ: ‖u‖²_𝓗 = 3e³
        assert!(3.0 * 3f64.exp() >= ledger.nontriviality_theta);

        let a = ConstantsLedger::new(1.0, 1.0, 1.0).unwrap();
        assert!((a.mp_radius - 1.0 / (2.0 * a.c_eps_tail)).abs() < 1e-15);
        let b = ConstantsLedger::new(0.5, 1.0, 1.0).unwrap();
        assert_eq!((a.h0, a.mu_min), (b.h0, b.mu_min));
        assert_ne!(a.c_eps, b.c_eps);
    }

    #[test]
    fn uniform_bound_examples() {
        let c = 0.5 * 3f64.exp();
        let exact = 3.0 * 3f64.exp();
        let bounds: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&eps| uniform_bound(c, eps, 1.0, 1.0).unwrap())
            .collect();
        assert!(bounds.iter().all(|&b| b.is_finite() && b >= exact));
        assert!(uniform_bound(2.0 * c, 0.5, 1.0, 1.0).unwrap() > bounds[1]);
        assert!(matches!(uniform_bound(c, 1.0, 1.0, 1.0), Err(Error::InvalidEpsilon(_))));
    }
}
