use thiserror::Error;

use crate::specfun::BesselKind;
use crate::C64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample too dilute/small: eta = {eta}, radius = {radius} gives zero atoms")]
    TooDilute { eta: f64, radius: f64 },

    #[error(
        "{kind:?} order {order} at z = {z} is outside the working domain (|z| <= {max_abs}, order <= {max_order})"
    )]
    Domain {
        kind: BesselKind,
        order: usize,
        z: C64,
        max_abs: f64,
        max_order: usize,
    },

    #[error("{kind:?} order {order} at z = {z}: {what} (value not representable in f64)")]
    Range {
        kind: BesselKind,
        order: usize,
        z: C64,
        what: &'static str,
    },

    #[error("Mie order {order} at radius {radius}, epsilon = {epsilon}: {source}")]
    MieTerm {
        order: usize,
        radius: f64,
        epsilon: C64,
        #[source]
        source: Box<Error>,
    },

    #[error("permittivity branch ambiguity at delta = {delta}, A = {coupling}: candidate roots {candidates:?}")]
    BranchAmbiguity {
        delta: f64,
        coupling: f64,
        candidates: Vec<C64>,
    },

    #[error("no causal root of the permittivity equation at delta = {delta}, A = {coupling}: {candidates:?}")]
    NoCausalRoot {
        delta: f64,
        coupling: f64,
        candidates: Vec<C64>,
    },

    #[error("self-consistent permittivity residual {residual:e} exceeds tolerance at delta = {delta}")]
    Residual { delta: f64, residual: f64 },

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("could not place {n_atoms} atoms with separation >= {min_separation} inside radius {radius} after {retries} retries")]
    PackingTooDense {
        n_atoms: usize,
        radius: f64,
        min_separation: f64,
        retries: usize,
    },

    #[error("atoms {i} and {j} coincide (distance {distance:e})")]
    CoincidentAtoms { i: usize, j: usize, distance: f64 },

    #[error("eigendecomposition failed: {detail}")]
    Eigen { detail: String },

    #[error("resolvent is numerically singular at delta = {delta}")]
    NearSingular { delta: f64 },

    #[error("non-positive fluorescence rate {value:e} at t = {t} inside the fit window")]
    NonPositiveIntensity { t: f64, value: f64 },

    #[error("requested dense dimension 3N = {requested} exceeds the configured limit {limit}")]
    ResourceCap { requested: usize, limit: usize },

    #[error("configuration {index}: {source}")]
    Configuration {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::TooDilute { .. } => true,
            Error::Configuration { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
