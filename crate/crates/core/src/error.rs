use alloc::boxed::Box;

use crate::simulate::McEstimate;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    // network construction
    #[error("edge list is empty")]
    EmptyEdgeList,
    #[error("graph is not connected ({reached} of {nodes} nodes reachable from node 0)")]
    DisconnectedGraph { reached: usize, nodes: usize },
    #[error("invalid edge ({i}, {j}, {resistance}): {reason}")]
    InvalidEdge { i: usize, j: usize, resistance: f64, reason: &'static str },
    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("lattice dimension {0} not in 1..=3")]
    InvalidDimension(usize),
    #[error("invalid size: {0}")]
    InvalidSize(&'static str),
    #[error("fuzz radius must be at least 1, got {0}")]
    InvalidFuzzRadius(usize),
    #[error("communication scaling must be positive, got {0}")]
    NonPositiveGamma(f64),

    // numerics
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("system matrix is not Hurwitz")]
    NotHurwitz,
    #[error("linear system is singular")]
    SingularSystem,
    #[error("matrix is not a graph Laplacian: {0}")]
    NotLaplacian(&'static str),
    #[error("Laplacian has {zero_modes} zero eigenvalues, expected exactly one")]
    Disconnected { zero_modes: usize },

    // systems
    #[error("controller parameter {name} must be positive and finite, got {value}")]
    InvalidParams { name: &'static str, value: f64 },
    #[error("closed-form evaluation needs uniform parameters")]
    NonUniformParams,
    #[error("state dimension {dim} exceeds the Lyapunov oracle cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    // resistance
    #[error("effective resistance needs two distinct nodes, got {0} twice")]
    SameNode(usize),
    #[error("removing edge {0} disconnects the graph")]
    DisconnectsGraph(usize),
    #[error("resistance scaling factor must be >= 1, got {0}")]
    InvalidScaling(f64),

    // simulate
    #[error("time step {dt:e} exceeds stability limit {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("invalid horizon: {0}")]
    InvalidHorizon(&'static str),
    #[error("state became non-finite at step {0}")]
    NonFiniteState(usize),
    #[error("at least two samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("transient tail still above threshold at T_max = {t_max}")]
    TruncationNotConverged { t_max: f64, estimate: Box<McEstimate> },
}

impl Error {
    /// Variant name, used by the command line front end.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyEdgeList => "EmptyEdgeList",
            Error::DisconnectedGraph { .. } => "DisconnectedGraph",
            Error::InvalidEdge { .. } => "InvalidEdge",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::InvalidDimension(_) => "InvalidDimension",
            Error::InvalidSize(_) => "InvalidSize",
            Error::InvalidFuzzRadius(_) => "InvalidFuzzRadius",
            Error::NonPositiveGamma(_) => "NonPositiveGamma",
            Error::NotSymmetric(_) => "NotSymmetric",
            Error::NotSquare { .. } => "NotSquare",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotHurwitz => "NotHurwitz",
            Error::SingularSystem => "SingularSystem",
            Error::NotLaplacian(_) => "NotLaplacian",
            Error::Disconnected { .. } => "Disconnected",
            Error::InvalidParams { .. } => "InvalidParams",
            Error::NonUniformParams => "NonUniformParams",
            Error::DimensionCap { .. } => "DimensionCap",
            Error::SameNode(_) => "SameNode",
            Error::DisconnectsGraph(_) => "DisconnectsGraph",
            Error::InvalidScaling(_) => "InvalidScaling",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::InvalidHorizon(_) => "InvalidHorizon",
            Error::NonFiniteState(_) => "NonFiniteState",
            Error::TooFewSamples(_) => "TooFewSamples",
            Error::TruncationNotConverged { .. } => "TruncationNotConverged",
        }
    }
}
