//! Error type shared across the solver library.

use thiserror::Error;

use crate::lattice::CellId;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({0:?}) lies outside the computational box")]
    OutOfDomain(Vec3),
    #[error("cell {0:?} lies outside the lattice bounds")]
    CellOutOfBounds(CellId),
    #[error("level set is singular at ({0:?})")]
    SingularPoint(Vec3),
    #[error("level-set gradient vanishes at ({0:?})")]
    VanishingGradient(Vec3),
    #[error("no cut cells found at t = {0}; surface left the box or the level set is degenerate")]
    EmptyBand(f64),
    #[error("degenerate cell: volume {0:.3e}")]
    DegenerateCell(f64),
    #[error("unsupported quadrature degree {0} (supported: 2, 4)")]
    UnsupportedQuadratureDegree(usize),
    #[error("point ({point:?}) is outside the previous narrow band; the inclusion condition was violated")]
    OutsideBand { point: Vec3 },
    #[error("surface at t = {time} escapes the previous band at ({point:?}); reduce the time step")]
    InclusionViolation { time: f64, point: Vec3 },
    #[error("non-finite element contribution in cell {0:?}")]
    NonFiniteElement(CellId),
    #[error("linear solve failed: {0}")]
    SolveFailed(String),
    #[error("ILU(0) breakdown: pivot {pivot:.3e} in row {row}")]
    IluBreakdown { row: usize, pivot: f64 },
    #[error("matrix dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
