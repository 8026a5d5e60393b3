//! Multiscale Robin coupled solvers for 2D Darcy flow on uniform grids.
//!
//! The crate is organized bottom-up: [`mesh`] and [`problem`] describe the fine
//! grid and the data, [`darcy`] solves it on a single box, [`decomposition`]
//! splits it into subdomains, [`spaces`] builds interface spaces and
//! multiscale basis functions, [`mrcm`] couples them, [`smoothing`] post
//! processes with overlapping Robin sweeps and [`metrics`] measures errors.

pub mod darcy;
pub mod decomposition;
pub mod error;
pub mod local;
pub mod metrics;
pub mod mesh;
pub mod mrcm;
pub mod pipeline;
pub mod problem;
pub mod smoothing;
pub mod spaces;

pub use error::{DecompositionError, MeshError, MrcmError, ProblemError, SolverError};
