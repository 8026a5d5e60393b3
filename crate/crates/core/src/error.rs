use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("layer {layer} out of range 1..={max}")]
    LayerRange { layer: usize, max: usize },
    #[error("parse error at token {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("permeability field has shape {got:?}, expected {expected:?}")]
    Shape { got: (usize, usize), expected: (usize, usize) },
    #[error("pure-Neumann data incompatible: source integral {source_total:e} vs boundary outflow {outflow:e}")]
    Incompatible { source_total: f64, outflow: f64 },
    #[error("i/o error on {path}: {err}")]
    Io { path: String, err: std::io::Error },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("boundary closure list has {got} entries, region has {expected} boundary edges")]
    ClosureCount { got: usize, expected: usize },
    #[error("invalid closure on boundary edge {edge}: {reason}")]
    BadClosure { edge: usize, reason: String },
    #[error("matrix not factorizable: pivot {pivot:e} at row {row}")]
    Pivot { row: usize, pivot: f64 },
    #[error("vector length {got} does not match system size {expected}")]
    Length { got: usize, expected: usize },
    #[error("no pressure trace on Neumann boundary edge {0}")]
    NeumannTrace(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error("{n} cells along {axis} not divisible into {m} subdomains")]
    NotDivisible { axis: char, n: usize, m: usize },
    #[error("oversampling {l} too large for subdomains of {n} cells (need 2l < n)")]
    OversamplingTooLarge { l: usize, n: usize },
    #[error("coloring check failed for subdomains {0} and {1}")]
    Coloring(usize, usize),
    #[error("subdomain index {0} out of range")]
    Index(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
pub enum MrcmError {
    #[error("coarse face {face} is not part of subdomain {sub}'s interface")]
    FaceNotOnInterface { face: usize, sub: usize },
    #[error("interface space family {0} is only supported without oversampling")]
    UnsupportedFamily(&'static str),
    #[error("dimension condition violated: sum of multiplier dims {lambda} != {m} + {v}")]
    Dimension { lambda: usize, m: usize, v: usize },
    #[error("interface system rank deficient by {0}")]
    IllPosedSpaces(usize),
    #[error("edge {0} on an oversampled boundary is not covered by any neighbor")]
    Uncovered(usize),
    #[error("face path is not a straight connected line: {0}")]
    FacePath(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub type Result<T, E = MrcmError> = std::result::Result<T, E>;
