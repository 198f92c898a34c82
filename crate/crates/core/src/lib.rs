//! Thermodynamic formalism for hyperbolic endomorphisms of tori.
//!
//! The crate computes topological pressure from periodic-point sums, solves
//! Bowen's equation for the stable dimension, builds periodic-point
//! approximations of equilibrium measures, and runs empirical checks on the
//! conditional measures those equilibria induce along stable manifolds.
//!
//! Module map:
//!
//! * [`models`]: the built-in maps with evaluation, derivatives and preimages.
//! * [`orbits`]: periodic-point enumeration and Birkhoff sums.
//! * [`stable`]: stable directions, the stable potential, prehistory trees.
//! * [`pressure`]: partition sums, pressure estimates, Bowen's equation.
//! * [`measures`]: atomic equilibrium measures and the verification checks.

pub mod error;
pub mod grid;
pub mod lattice;
pub mod measures;
pub mod models;
pub mod orbits;
pub mod point;
pub mod potential;
pub mod pressure;
pub mod stable;

pub use error::{Error, Result};
pub use lattice::IntMatrix2;
pub use measures::{AtomicMeasure, DimensionFit, GeometricVerdict, SliceMeasure};
pub use models::{EndomorphismModel, ModelSpec};
pub use orbits::{BirkhoffSum, OrbitMethod, PeriodicOrbitSet};
pub use point::Point;
pub use potential::Potential;
pub use pressure::{BowenRoot, PartitionSum, PressureEstimate};
pub use stable::{PrehistoryTree, RhoMaximalSet, StableDirection};

/// Version of this crate, echoed in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default upper bound on the number of atoms any enumeration may produce.
pub const ATOM_BUDGET: u128 = 10_000_000;
