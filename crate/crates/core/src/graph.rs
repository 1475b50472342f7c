//! Weighted measured graphs and the discrete calculus on them.
//!
//! A [`Graph`] stores per-vertex measures `μ(x)` and symmetric edge weights
//! `ω_xy`. Vertices carry opaque string labels but are addressed internally
//! by their insertion index, which fixes the iteration order of every sum.
//!
//! The operators follow the usual conventions on measured graphs:
//!
//! ```text
//! Δu(x)    = (1/μ(x)) Σ_{y~x} ω_xy (u(y) - u(x))
//! ∇u∇v(x)  = (1/(2μ(x))) Σ_{y~x} ω_xy (u(y) - u(x)) (v(y) - v(x))
//! ∫ u dμ   = Σ_x μ(x) u(x)
//! ```
//!
//! Infinite lattices are handled through [`LatticeGenerator`], which
//! materializes a finite box and remembers its radius so that balls are only
//! requested where every neighbor is present.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a graph relates to the object it represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extent {
    /// The graph is the whole object.
    Finite,
    /// A box of the given radius cut out of an infinite lattice.
    Truncation { radius: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VertexEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgeEntry {
    pub a: String,
    pub b: String,
    pub w: f64,
}

/// On-disk graph description. Each undirected edge is listed once; listing
/// both orientations is accepted only when the weights agree.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphFile {
    #[serde(default = "one")]
    pub mu_default: f64,
    pub vertices: Vec<VertexEntry>,
    pub edges: Vec<EdgeEntry>,
}

fn one() -> f64 {
    1.0
}

impl GraphFile {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Inputs accepted by [`build_graph`].
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Explicit(GraphFile),
    /// `v0 - v1 - ... - v{n-1}` with unit weights and measure.
    Path(usize),
    /// Path closed into a ring.
    Cycle(usize),
    /// `[-radius, radius]^dim ⊂ ℤ^dim` as a standalone finite graph.
    LatticeBox { dim: usize, radius: usize },
}

/// Lazily materialized `ℤ^dim` with unit weights and unit measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeGenerator {
    pub dim: usize,
}

impl LatticeGenerator {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    /// The box `[-radius, radius]^dim`, flagged as a truncation of the
    /// infinite lattice.
    pub fn materialize(&self, radius: usize) -> Graph {
        let mut g = lattice_box(self.dim, radius);
        g.extent = Extent::Truncation { radius };
        g
    }

    /// Materialization radius needed to evaluate everything on `B_k`
    /// around the origin, including neighbors of `∂B_k`.
    pub fn radius_for_ball(k: usize) -> usize {
        k + 1
    }
}

/// A connected, locally finite graph with vertex measure and symmetric
/// positive edge weights. Immutable after construction.
#[derive(Debug)]
pub struct Graph {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    measure: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
    mu_min: f64,
    origin: usize,
    extent: Extent,
    coords: Option<Vec<Vec<i64>>>,
    distances: Mutex<HashMap<usize, Arc<Vec<usize>>>>,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            index: self.index.clone(),
            measure: self.measure.clone(),
            adjacency: self.adjacency.clone(),
            mu_min: self.mu_min,
            origin: self.origin,
            extent: self.extent,
            coords: self.coords.clone(),
            distances: Mutex::new(HashMap::new()),
        }
    }
}

pub fn build_graph(spec: &GraphSpec) -> Result<Graph> {
    match spec {
        GraphSpec::Explicit(file) => from_file(file),
        GraphSpec::Path(n) => {
            let labels: Vec<String> = (0..*n).map(|i| format!("v{i}")).collect();
            let edges = (1..*n).map(|i| (i - 1, i, 1.0)).collect::<Vec<_>>();
            assemble(labels, vec![1.0; *n], &edges, None)
        }
        GraphSpec::Cycle(n) => {
            let labels: Vec<String> = (0..*n).map(|i| format!("v{i}")).collect();
            let mut edges = (1..*n).map(|i| (i - 1, i, 1.0)).collect::<Vec<_>>();
            if *n > 2 {
                edges.push((n - 1, 0, 1.0));
            }
            assemble(labels, vec![1.0; *n], &edges, None)
        }
        GraphSpec::LatticeBox { dim, radius } => Ok(lattice_box(*dim, *radius)),
    }
}

fn from_file(file: &GraphFile) -> Result<Graph> {
    let mut labels = Vec::with_capacity(file.vertices.len());
    let mut measure = Vec::with_capacity(file.vertices.len());
    let mut seen = HashMap::new();
    for v in &file.vertices {
        if seen.insert(v.id.clone(), labels.len()).is_some() {
            return Err(Error::DuplicateVertex(v.id.clone()));
        }
        labels.push(v.id.clone());
        measure.push(v.mu.unwrap_or(file.mu_default));
    }
    let lookup = |id: &str| seen.get(id).copied().ok_or_else(|| Error::UnknownVertex(id.into()));

    // Collapse the listed edges into unordered pairs, rejecting mismatched
    // duplicates.
    let mut pairs: BTreeMap<(usize, usize), (usize, usize, f64)> = BTreeMap::new();
    for e in &file.edges {
        let a = lookup(&e.a)?;
        let b = lookup(&e.b)?;
        if a == b {
            return Err(Error::SelfLoop(e.a.clone()));
        }
        let key = (a.min(b), a.max(b));
        match pairs.get(&key) {
            Some(&(pa, pb, w)) if w != e.w => {
                return Err(Error::AsymmetricWeight {
                    a: labels[pa].clone(),
                    b: labels[pb].clone(),
                    forward: w,
                    backward: e.w,
                })
            }
            Some(_) => {}
            None => {
                pairs.insert(key, (a, b, e.w));
            }
        }
    }
    let edges: Vec<_> = pairs.into_values().collect();
    assemble(labels, measure, &edges, None)
}

fn lattice_box(dim: usize, radius: usize) -> Graph {
    let r = radius as i64;
    let side = 2 * radius + 1;
    let count = side.pow(dim as u32);
    let mut coords = Vec::with_capacity(count);
    let mut current = vec![-r; dim];
    for _ in 0..count {
        coords.push(current.clone());
        for slot in current.iter_mut().rev() {
            if *slot < r {
                *slot += 1;
                break;
            }
            *slot = -r;
        }
    }
    let labels: Vec<String> = coords.iter().map(|c| coord_label(c)).collect();
    let position = |c: &[i64]| -> usize {
        c.iter()
            .fold(0usize, |acc, &x| acc * side + (x + r) as usize)
    };
    let mut edges = Vec::new();
    for (i, c) in coords.iter().enumerate() {
        for axis in 0..dim {
            if c[axis] < r {
                let mut next = c.clone();
                next[axis] += 1;
                edges.push((i, position(&next), 1.0));
            }
        }
    }
    let origin = position(&vec![0; dim]);
    let mut g = assemble(labels, vec![1.0; count], &edges, Some(origin))
        .expect("lattice boxes are valid graphs");
    g.coords = Some(coords);
    g
}

fn coord_label(c: &[i64]) -> String {
    c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn assemble(
    labels: Vec<String>,
    measure: Vec<f64>,
    edges: &[(usize, usize, f64)],
    origin: Option<usize>,
) -> Result<Graph> {
    if labels.is_empty() {
        return Err(Error::EmptyGraph);
    }
    for (label, &m) in labels.iter().zip(&measure) {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::NonpositiveMeasure {
                vertex: label.clone(),
                measure: m,
            });
        }
    }
    let mut adjacency = vec![Vec::new(); labels.len()];
    for &(a, b, w) in edges {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonpositiveWeight {
                a: labels[a].clone(),
                b: labels[b].clone(),
                weight: w,
            });
        }
        adjacency[a].push((b, w));
        adjacency[b].push((a, w));
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(y, _)| y);
    }
    let index = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect();
    let mu_min = measure.iter().copied().fold(f64::INFINITY, f64::min);
    let g = Graph {
        labels,
        index,
        measure,
        adjacency,
        mu_min,
        origin: origin.unwrap_or(0),
        extent: Extent::Finite,
        coords: None,
        distances: Mutex::new(HashMap::new()),
    };
    let components = g.component_count();
    if components != 1 {
        return Err(Error::DisconnectedGraph { components });
    }
    Ok(g)
}

impl Graph {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vertex(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(label.to_string()))
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn measure(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    /// Weighted degree `Σ_{y~x} ω_xy`.
    pub fn degree(&self, x: usize) -> f64 {
        self.adjacency[x].iter().map(|&(_, w)| w).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn weight(&self, x: usize, y: usize) -> Option<f64> {
        self.adjacency[x]
            .binary_search_by_key(&y, |&(z, _)| z)
            .ok()
            .map(|i| self.adjacency[x][i].1)
    }

    /// Reference vertex `O` for distance-based potentials and default balls.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn with_origin(mut self, origin: usize) -> Self {
        self.origin = origin;
        self
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    /// Lattice coordinates, when the graph came from a lattice.
    pub fn coords(&self, x: usize) -> Option<&[i64]> {
        self.coords.as_ref().map(|c| c[x].as_slice())
    }

    fn check(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(format!("#{x}")))
        }
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut count = 0;
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in &self.adjacency[x] {
                    if !seen[y] {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
        }
        count
    }

    /// Combinatorial distance ρ from `center` (minimal number of edges),
    /// memoized per center.
    pub fn distances_from(&self, center: usize) -> Result<Arc<Vec<usize>>> {
        self.check(center)?;
        let mut cache = self.distances.lock().expect("distance cache poisoned");
        if let Some(d) = cache.get(&center) {
            return Ok(Arc::clone(d));
        }
        let mut dist = vec![usize::MAX; self.len()];
        dist[center] = 0;
        let mut queue = VecDeque::from([center]);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &self.adjacency[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        let dist = Arc::new(dist);
        cache.insert(center, Arc::clone(&dist));
        Ok(dist)
    }

    pub fn to_file(&self) -> GraphFile {
        let mut edges = Vec::with_capacity(self.edge_count());
        for x in 0..self.len() {
            for &(y, w) in &self.adjacency[x] {
                if x < y {
                    edges.push(EdgeEntry {
                        a: self.labels[x].clone(),
                        b: self.labels[y].clone(),
                        w,
                    });
                }
            }
        }
        GraphFile {
            mu_default: 1.0,
            vertices: self
                .labels
                .iter()
                .zip(&self.measure)
                .map(|(id, &mu)| VertexEntry {
                    id: id.clone(),
                    mu: Some(mu),
                })
                .collect(),
            edges,
        }
    }
}

pub fn load_graph_file(path: &Path) -> std::io::Result<GraphFile> {
    let text = std::fs::read_to_string(path)?;
    GraphFile::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

/// A real-valued function on the vertices of one graph, stored densely in
/// the graph's vertex order. Vertices outside the intended support simply
/// hold zero, which is the zero extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexFunction {
    values: Vec<f64>,
}

impl VertexFunction {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            values: vec![c; n],
        }
    }

    /// `scale · δ_x`.
    pub fn delta(n: usize, x: usize, scale: f64) -> Self {
        let mut f = Self::zeros(n);
        f.values[x] = scale;
        f
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self {
            values: (0..n).map(f).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `x`; anything past the stored range reads as zero.
    pub fn get(&self, x: usize) -> f64 {
        self.values.get(x).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, x: usize, value: f64) {
        self.values[x] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// `self + t·other`.
    pub fn axpy(&self, t: f64, other: &Self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + t * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index of the entry with the largest magnitude (first one on ties).
    pub fn argmax_abs(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v.abs() > b) {
                best = Some((i, v.abs()));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Keeps the values on `domain.interior`, zeroing everything else.
    pub fn restricted(&self, domain: &Domain) -> Self {
        let mut out = Self::zeros(self.len());
        for &x in domain.interior() {
            out.values[x] = self.values[x];
        }
        out
    }

    pub fn check_len(&self, g: &Graph) -> Result<()> {
        if self.len() == g.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: g.len(),
                got: self.len(),
            })
        }
    }
}

/// Finite connected vertex set `Ω` together with its vertex boundary
/// `∂Ω = { y ∉ Ω : y ~ x for some x ∈ Ω }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    interior: Vec<usize>,
    boundary: Vec<usize>,
    slot: Vec<Option<usize>>,
    on_boundary: Vec<bool>,
}

impl Domain {
    pub fn new(g: &Graph, interior: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut interior: Vec<usize> = interior.into_iter().collect();
        interior.sort_unstable();
        interior.dedup();
        if interior.is_empty() {
            return Err(Error::InvalidDomain);
        }
        for &x in &interior {
            g.check(x)?;
        }
        let mut slot = vec![None; g.len()];
        for (i, &x) in interior.iter().enumerate() {
            slot[x] = Some(i);
        }
        let mut on_boundary = vec![false; g.len()];
        for &x in &interior {
            for &(y, _) in g.neighbors(x) {
                if slot[y].is_none() {
                    on_boundary[y] = true;
                }
            }
        }
        let boundary = (0..g.len()).filter(|&y| on_boundary[y]).collect();

        // connectivity of the induced subgraph
        let mut seen = vec![false; g.len()];
        seen[interior[0]] = true;
        let mut queue = VecDeque::from([interior[0]]);
        let mut reached = 1;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in g.neighbors(x) {
                if slot[y].is_some() && !seen[y] {
                    seen[y] = true;
                    reached += 1;
                    queue.push_back(y);
                }
            }
        }
        if reached != interior.len() {
            return Err(Error::InvalidDomain);
        }
        Ok(Self {
            interior,
            boundary,
            slot,
            on_boundary,
        })
    }

    /// The whole (finite) graph as a domain with empty boundary.
    pub fn whole(g: &Graph) -> Self {
        Self::new(g, 0..g.len()).expect("graphs are connected")
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// `Ω ∪ ∂Ω` in vertex order.
    pub fn closure(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.interior.iter().chain(&self.boundary).copied().collect();
        all.sort_unstable();
        all
    }

    pub fn contains(&self, x: usize) -> bool {
        self.slot.get(x).is_some_and(Option::is_some)
    }

    pub fn is_boundary(&self, x: usize) -> bool {
        self.on_boundary.get(x).copied().unwrap_or(false)
    }

    /// Position of `x` among the interior vertices.
    pub fn slot(&self, x: usize) -> Option<usize> {
        self.slot.get(x).copied().flatten()
    }

    pub fn size(&self) -> usize {
        self.interior.len()
    }

    /// Values of `u` on the interior, in interior order.
    pub fn gather(&self, u: &VertexFunction) -> Vec<f64> {
        self.interior.iter().map(|&x| u.get(x)).collect()
    }

    /// Zero-extended vertex function from interior values.
    pub fn scatter(&self, n: usize, values: &[f64]) -> VertexFunction {
        let mut u = VertexFunction::zeros(n);
        for (&x, &v) in self.interior.iter().zip(values) {
            u.set(x, v);
        }
        u
    }
}

/// `B_k = {ρ < k}` with boundary `{ρ = k}` around `center`.
pub fn ball(g: &Graph, center: usize, k: usize) -> Result<Domain> {
    g.check(center)?;
    if k == 0 {
        return Err(Error::InvalidDomain);
    }
    if let Extent::Truncation { radius } = g.extent {
        // A box of radius R centred at the origin contains every vertex
        // within lattice distance R - |c|_∞ of c.
        let offset = g
            .coords(center)
            .map(|c| c.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0))
            .unwrap_or(0);
        let needed = k + 1 + offset;
        if needed > radius {
            return Err(Error::InsufficientMaterialization {
                center: g.label(center).to_string(),
                requested: k,
                needed: k + 1,
                available: radius.saturating_sub(offset),
            });
        }
    }
    let dist = g.distances_from(center)?;
    Domain::new(g, (0..g.len()).filter(|&x| dist[x] < k))
}

/// `Δu(x) = (1/μ(x)) Σ_{y~x} ω_xy (u(y) - u(x))`.
pub fn laplacian(g: &Graph, u: &VertexFunction, x: usize) -> Result<f64> {
    g.check(x)?;
    Ok(laplacian_unchecked(g, u, x))
}

pub(crate) fn laplacian_unchecked(g: &Graph, u: &VertexFunction, x: usize) -> f64 {
    let ux = u.get(x);
    let s: f64 = g.neighbors(x).iter().map(|&(y, w)| w * (u.get(y) - ux)).sum();
    s / g.measure(x)
}

/// `∇u∇v(x) = (1/(2μ(x))) Σ_{y~x} ω_xy (u(y)-u(x))(v(y)-v(x))`.
pub fn gradient_pair(g: &Graph, u: &VertexFunction, v: &VertexFunction, x: usize) -> Result<f64> {
    g.check(x)?;
    Ok(gradient_pair_unchecked(g, u, v, x))
}

pub(crate) fn gradient_pair_unchecked(
    g: &Graph,
    u: &VertexFunction,
    v: &VertexFunction,
    x: usize,
) -> f64 {
    let (ux, vx) = (u.get(x), v.get(x));
    let s: f64 = g
        .neighbors(x)
        .iter()
        .map(|&(y, w)| w * (u.get(y) - ux) * (v.get(y) - vx))
        .sum();
    s / (2.0 * g.measure(x))
}

/// `|∇u|²(x)`.
pub fn gradient_length_sq(g: &Graph, u: &VertexFunction, x: usize) -> Result<f64> {
    gradient_pair(g, u, u, x)
}

/// `∫_V u dμ`.
pub fn integrate(g: &Graph, u: &VertexFunction) -> f64 {
    u.values()
        .iter()
        .enumerate()
        .map(|(x, v)| g.measure(x) * v)
        .sum()
}

/// `Σ_{x ∈ set} μ(x) f(x)`.
pub fn integrate_over(g: &Graph, set: &[usize], mut f: impl FnMut(usize) -> f64) -> f64 {
    set.iter().map(|&x| g.measure(x) * f(x)).sum()
}

/// `∫ |∇u|² dμ` over the closure of `domain`. For `u` vanishing off the
/// interior this equals the integral over all of `V`.
pub fn dirichlet_energy(g: &Graph, domain: &Domain, u: &VertexFunction) -> f64 {
    // Each edge with at least one interior end contributes ω(u(y)-u(x))²
    // once from each endpoint's half; summing over the closure counts it
    // exactly once in total.
    domain
        .closure()
        .iter()
        .map(|&x| g.measure(x) * gradient_pair_unchecked(g, u, u, x))
        .sum()
}
