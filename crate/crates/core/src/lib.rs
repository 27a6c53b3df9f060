//! Mean curvature flow with obstacle on voxel grids, and the mean-convex
//! hulls it computes.
//!
//! Each time step of the flow minimizes a discrete perimeter plus a signed
//! distance bulk term over all voxel sets containing the obstacle. The
//! minimization is exact: the energy is submodular, so every step reduces to
//! a single max-flow computation whose residual graph yields the minimal and
//! maximal minimizers. Iterating the maximal minimizer from a large initial
//! set and shrinking the obstacle dilation produces the mean-convex hull.

pub mod flow;
pub mod grid;
pub mod hull;
pub mod mesh;
pub mod mincut;
pub mod scenes;
pub mod sdf;
pub mod stencil;
pub mod verify;

pub use flow::{FlowParams, StepReport, Trajectory};
pub use grid::{CellIndex, GridSpec, VoxelSet};
pub use hull::{HullParams, HullReport, SetComparison};
pub use mincut::{StepInstance, StepSolution};
pub use scenes::{SceneKind, SceneSpec};
pub use sdf::ScalarField;
pub use stencil::Stencil;
pub use verify::CheckReport;

/// Error type shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid spec mismatch between operands")]
    SpecMismatch,
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("set is empty")]
    EmptySet,
    #[error("boundary undefined: set is empty or fills the whole interior")]
    BoundaryUndefined,
    #[error("obstacle too large for domain")]
    ObstacleTooLarge,
    #[error("set touches the domain frame")]
    FrameContact,
    #[error("too many free cells for enumeration: {0} (cap {1})")]
    TooManyFreeCells(usize, usize),
    #[error("bad volume file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
