//! Potentials, function-space norms and the hypothesis checks on `h`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ball, dirichlet_energy, gradient_pair_unchecked, Domain, Extent, Graph, VertexFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Table,
    Formula,
}

/// Serializable description of a potential `h : V → ℝ`.
///
/// Formula families (distances ρ are measured from `origin`, or the graph's
/// origin when absent):
///
/// * `constant`: `h = value`
/// * `quadratic_shift`: `h = scale·ρ² + shift`
/// * `well`: `h = core_value` for `ρ ≤ core_radius`, else `scale·ρ^power + shift`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl PotentialSpec {
    pub fn constant(value: f64) -> Self {
        Self::formula("constant", &[("value", value)])
    }

    pub fn quadratic_shift(shift: f64) -> Self {
        Self::formula("quadratic_shift", &[("shift", shift)])
    }

    pub fn formula(name: &str, params: &[(&str, f64)]) -> Self {
        Self {
            kind: PotentialKind::Formula,
            name: name.to_string(),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            values: BTreeMap::new(),
            origin: None,
        }
    }

    pub fn table(values: &[(&str, f64)]) -> Self {
        Self {
            kind: PotentialKind::Table,
            name: "table".into(),
            params: BTreeMap::new(),
            values: values.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            origin: None,
        }
    }

    pub fn with_default(mut self, default: f64) -> Self {
        self.params.insert("default".into(), default);
        self
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    fn param(&self, key: &str, default: Option<f64>) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .or(default)
            .ok_or_else(|| Error::InvalidPotential(format!("{}: missing parameter '{key}'", self.name)))
    }

    /// Evaluates the potential on every vertex of `g`.
    pub fn evaluate(&self, g: &Graph) -> Result<Potential> {
        let values = match self.kind {
            PotentialKind::Table => {
                let default = self.params.get("default").copied();
                g.labels()
                    .iter()
                    .map(|l| {
                        self.values.get(l).copied().or(default).ok_or_else(|| {
                            Error::InvalidPotential(format!("table has no value for vertex {l}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            PotentialKind::Formula => {
                let origin = match &self.origin {
                    Some(label) => g.vertex(label)?,
                    None => g.origin(),
                };
                let rho = g.distances_from(origin)?;
                let f = self.formula_fn()?;
                rho.iter().map(|&r| f(r as f64)).collect()
            }
        };
        if let Some((x, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidPotential(format!(
                "non-finite value {v} at {}",
                g.label(x)
            )));
        }
        Ok(Potential { values })
    }

    fn formula_fn(&self) -> Result<Box<dyn Fn(f64) -> f64>> {
        Ok(match self.name.as_str() {
            "constant" => {
                let c = self.param("value", None)?;
                Box::new(move |_| c)
            }
            "quadratic_shift" => {
                let shift = self.param("shift", Some(0.0))?;
                let scale = self.param("scale", Some(1.0))?;
                Box::new(move |r| scale * r * r + shift)
            }
            "well" => {
                let core = self.param("core_value", None)?;
                let radius = self.param("core_radius", None)?;
                let scale = self.param("scale", Some(1.0))?;
                let power = self.param("power", Some(2.0))?;
                let shift = self.param("shift", Some(0.0))?;
                Box::new(move |r| if r <= radius { core } else { scale * r.powf(power) + shift })
            }
            other => return Err(Error::InvalidPotential(format!("unknown formula '{other}'"))),
        })
    }
}

/// A potential evaluated on the vertices of a particular graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
}

impl Potential {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn at(&self, x: usize) -> f64 {
        self.values[x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest value on `set` and the vertex attaining it.
    pub fn min_on(&self, set: &[usize]) -> (f64, usize) {
        set.iter()
            .map(|&x| (self.values[x], x))
            .fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 { b } else { a })
    }
}

/// `‖u‖_q = (Σ μ|u|^q)^{1/q}`, or `sup |u|` for `q = ∞`.
pub fn norm_lq(g: &Graph, u: &VertexFunction, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::InvalidExponent(q));
    }
    if q == f64::INFINITY {
        return Ok(u.sup_norm());
    }
    let s: f64 = u
        .values()
        .iter()
        .enumerate()
        .map(|(x, v)| g.measure(x) * v.abs().powf(q))
        .sum();
    Ok(s.powf(1.0 / q))
}

/// `‖u‖_{q,Ω}`, the `L^q` norm of `u` restricted to the interior of `domain`.
pub fn norm_lq_on(g: &Graph, domain: &Domain, u: &VertexFunction, q: f64) -> Result<f64> {
    norm_lq(g, &u.restricted(domain), q)
}

pub(crate) fn check_boundary(g: &Graph, d: &Domain, u: &VertexFunction) -> Result<()> {
    match d.boundary().iter().find(|&&y| u.get(y) != 0.0) {
        Some(&y) => Err(Error::NonzeroBoundary(g.label(y).to_string())),
        None => Ok(()),
    }
}

/// `∫_{Ω̄} |∇u|² dμ + ∫_Ω h u² dμ` for `u` restricted to `Ω`.
pub(crate) fn h_form(g: &Graph, d: &Domain, u: &VertexFunction, h: &Potential) -> f64 {
    let u = u.restricted(d);
    dirichlet_energy(g, d, &u) + d.interior().iter().map(|&x| g.measure(x) * h.at(x) * u.get(x).powi(2)).sum::<f64>()
}

/// `‖u‖_{𝓗(Ω)} = (∫_{Ω̄} |∇u|² dμ + ∫_Ω h u² dμ)^{1/2}`.
pub fn norm_h_domain(g: &Graph, d: &Domain, u: &VertexFunction, h: &Potential) -> Result<f64> {
    check_boundary(g, d, u)?;
    let (h0, x) = h.min_on(d.interior());
    if !(h0 > 0.0) {
        return Err(Error::NonpositivePotential {
            vertex: g.label(x).to_string(),
            value: h0,
        });
    }
    Ok(h_form(g, d, u, h).sqrt())
}

/// `‖u‖_𝓦 = (∫_V |∇u|² + (h+1)u² dμ)^{1/2}`.
pub fn norm_w(g: &Graph, u: &VertexFunction, h: &Potential) -> Result<f64> {
    if let Some((x, &v)) = h.values().iter().enumerate().find(|(_, &v)| v <= -1.0) {
        return Err(Error::PotentialBelowMinusOne {
            vertex: g.label(x).to_string(),
            value: v,
        });
    }
    let s: f64 = (0..g.len())
        .map(|x| {
            let ux = u.get(x);
            g.measure(x) * (gradient_pair_unchecked(g, u, u, x) + (h.at(x) + 1.0) * ux * ux)
        })
        .sum();
    Ok(s.sqrt())
}

/// Constant `C` in `‖u‖_{q,Ω} ≤ C ‖u‖_{𝓗(Ω)}` for `h ≥ h0`, `μ ≥ μ_min`:
/// `h0^{-1/2} μ_min^{(2-q)/(2q)}` for finite `q ≥ 2` and `(h0 μ_min)^{-1/2}`
/// for `q = ∞`. The constant does not depend on `Ω`.
pub fn embedding_constant(h0: f64, mu_min: f64, q: f64) -> Result<f64> {
    if q.is_nan() || q < 2.0 {
        return Err(Error::InvalidExponent(q));
    }
    if !(h0 > 0.0) || !(mu_min > 0.0) {
        return Err(Error::InvalidPotential(format!(
            "embedding constant needs h0 > 0 and mu_min > 0 (got {h0}, {mu_min})"
        )));
    }
    if q == f64::INFINITY {
        Ok((h0 * mu_min).powf(-0.5))
    } else {
        Ok(h0.powf(-0.5) * mu_min.powf((2.0 - q) / (2.0 * q)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisMode {
    Positive,
    SignChanging,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Verified on a finite graph.
    Holds,
    /// Verified on the materialized ball only.
    HoldsOnTruncation,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub mode: HypothesisMode,
    /// `inf h` over the checked ball (`h₀` or `h₁`).
    pub h0_or_h1: f64,
    /// Partial sum of `∫ h^{-1} dμ`, over `V` or over `V ∖ V_α`.
    pub inverse_integral: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_alpha_volume: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub radius_checked: usize,
    /// Lower-bound condition on `h`.
    pub lower_bound: Verdict,
    /// Integrability condition on `h^{-1}` (and finiteness of `Vol(V_α)`).
    pub integrability: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl HypothesisReport {
    pub fn violated(&self) -> bool {
        self.lower_bound.is_violated() || self.integrability.is_violated()
    }
}

/// Checks the hypotheses on `h` over `B_radius` around the graph's origin.
///
/// Integrability of `h^{-1}` on an infinite lattice cannot be decided from
/// finitely many terms, so truncated graphs get at best
/// [`Verdict::HoldsOnTruncation`].
pub fn check_hypotheses(
    g: &Graph,
    spec: &PotentialSpec,
    mode: HypothesisMode,
    radius: usize,
    alpha: Option<f64>,
) -> Result<HypothesisReport> {
    if mode == HypothesisMode::SignChanging && !alpha.is_some_and(|a| a > 0.0) {
        return Err(Error::MissingAlpha);
    }
    let h = spec.evaluate(g)?;
    let region = ball(g, g.origin(), radius.max(1))?;
    let set = region.interior();
    let truncated = matches!(g.extent(), Extent::Truncation { .. });
    let holds = if truncated {
        Verdict::HoldsOnTruncation
    } else {
        Verdict::Holds
    };
    let (inf_h, argmin) = h.min_on(set);
    let mut witness = None;

    let report = match mode {
        HypothesisMode::Positive => {
            let lower_bound = if inf_h > 0.0 {
                holds.clone()
            } else {
                witness = Some(g.label(argmin).to_string());
                Verdict::Violated
            };
            let inverse_integral: f64 = set.iter().map(|&x| g.measure(x) / h.at(x)).sum();
            let integrability = if inf_h > 0.0 {
                holds
            } else {
                Verdict::Inconclusive
            };
            HypothesisReport {
                mode,
                h0_or_h1: inf_h,
                inverse_integral: if inverse_integral.is_finite() { inverse_integral } else { 0.0 },
                v_alpha_volume: None,
                alpha: None,
                radius_checked: radius,
                lower_bound,
                integrability,
                witness,
            }
        }
        HypothesisMode::SignChanging => {
            let alpha = alpha.expect("checked above");
            let lower_bound = if inf_h > -1.0 {
                holds.clone()
            } else {
                witness = Some(g.label(argmin).to_string());
                Verdict::Violated
            };
            let in_v_alpha = |x: usize| h.at(x) <= alpha;
            let volume: f64 = set.iter().filter(|&&x| in_v_alpha(x)).map(|&x| g.measure(x)).sum();
            let inverse_integral: f64 = set
                .iter()
                .filter(|&&x| !in_v_alpha(x))
                .map(|&x| g.measure(x) / h.at(x))
                .sum();
            // V_α reaching the outermost checked shell may continue beyond
            // the truncation.
            let rho = g.distances_from(g.origin())?;
            let touches_edge = set.iter().any(|&x| in_v_alpha(x) && rho[x] + 1 == radius.max(1));
            let integrability = if truncated && touches_edge {
                Verdict::Inconclusive
            } else {
                holds
            };
            HypothesisReport {
                mode,
                h0_or_h1: inf_h,
                inverse_integral,
                v_alpha_volume: Some(volume),
                alpha: Some(alpha),
                radius_checked: radius,
                lower_bound,
                integrability,
                witness,
            }
        }
    };
    Ok(report)
}
