//! Cahn-Hilliard phase separation on evolving surfaces.
//!
//! The surface is the zero set of an analytic level set and travels through
//! a fixed background lattice. Each time step extracts the discrete surface
//! by marching tetrahedra on the half-size lattice, activates a narrow band
//! of background cells around it, and solves one semi-implicit step of the
//! mixed Cahn-Hilliard system with P1 trace finite elements plus a
//! normal-derivative volume stabilization that extends the solution across
//! the band. Lagged quantities from the previous step stay evaluable because
//! the previous band is wide enough to contain the new surface.
//!
//! Modules:
//! - [`lattice`]: implicit Kuhn-subdivided background mesh
//! - [`levelset`]: analytic scenario fields and the nodal interpolant
//! - [`cutgeom`]: narrow band, marching tetrahedra, surface quadrature
//! - [`assembly`]: the coupled step system
//! - [`solver`]: CSR, GMRES, ILU(0)
//! - [`timeloop`]: time marching and diagnostics
//! - [`manufactured`]: synthetic benchmark solution and source term
//! - [`config`], [`scenarios`], [`output`]: run configuration, benchmark
//!   presets and sweeps, VTK/CSV writers

pub mod assembly;
pub mod config;
pub mod cutgeom;
pub mod dual;
pub mod error;
pub mod lattice;
pub mod levelset;
pub mod manufactured;
pub mod output;
pub mod scenarios;
pub mod solver;
pub mod timeloop;

/// Spatial vectors and points.
pub type Vec3 = nalgebra::Vector3<f64>;

pub use assembly::{ModelParams, SystemState};
pub use config::RunConfig;
pub use cutgeom::{CutSurface, NarrowBand};
pub use error::{Error, Result};
pub use lattice::{CellId, LatticeSpec, NodeId};
pub use levelset::{DiscreteLevelSet, ScenarioField};
pub use solver::{SolveReport, SolverOptions, SparseMatrix};
pub use timeloop::{InitialCondition, Schedule, Simulation, SimulationSetup, StepRecord};
