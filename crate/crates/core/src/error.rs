use thiserror::Error;

/// Errors raised by graph construction, the functionals and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph is not connected ({components} components)")]
    DisconnectedGraph { components: usize },
    #[error("edge {a}-{b} has nonpositive weight {weight}")]
    NonpositiveWeight { a: String, b: String, weight: f64 },
    #[error("vertex {vertex} has nonpositive measure {measure}")]
    NonpositiveMeasure { vertex: String, measure: f64 },
    #[error("edge {a}-{b} is listed with weights {forward} and {backward}")]
    AsymmetricWeight {
        a: String,
        b: String,
        forward: f64,
        backward: f64,
    },
    #[error("self-loop at vertex {0}")]
    SelfLoop(String),
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("graph is empty")]
    EmptyGraph,
    #[error("ball of radius {requested} around {center} needs materialization radius {needed}, have {available}")]
    InsufficientMaterialization {
        center: String,
        requested: usize,
        needed: usize,
        available: usize,
    },
    #[error("domain interior is empty or not connected")]
    InvalidDomain,
    #[error("vertex function has length {got}, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid exponent {0}")]
    InvalidExponent(f64),
    #[error("function is nonzero on the domain boundary at {0}")]
    NonzeroBoundary(String),
    #[error("function is supported outside the truncation at {0}")]
    SupportOutsideTruncation(String),
    #[error("potential is nonpositive at {vertex} (h = {value})")]
    NonpositivePotential { vertex: String, value: f64 },
    #[error("potential is at or below -1 at {vertex} (h = {value})")]
    PotentialBelowMinusOne { vertex: String, value: f64 },
    #[error("potential: {0}")]
    InvalidPotential(String),
    #[error("sign-changing mode requires alpha > 0")]
    MissingAlpha,
    #[error("epsilon must lie in the allowed range, got {0}")]
    InvalidEpsilon(f64),
    #[error("function is identically zero")]
    ZeroFunction,
    #[error("linear solve failed: Jacobian is singular")]
    SingularJacobian,
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("Nehari descent collapsed to the zero function")]
    CollapseToZero,
    #[error("mountain-pass endpoint must have negative energy, got {0}")]
    NonnegativeEndpoint(f64),
    #[error("mountain-pass path collapsed onto the trivial critical point")]
    PathCollapse,
    #[error("no new solution found")]
    NoNewSolution,
    #[error("local solve failed on ball k = {k}: {reason}")]
    LocalSolveFailed { k: usize, reason: String },
    #[error("window restrictions did not become Cauchy in the requested range")]
    NoConvergenceInRange,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
