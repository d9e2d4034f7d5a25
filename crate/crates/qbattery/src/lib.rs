//! Simulation engine for cavity-coupled N-qubit quantum batteries.
//!
//! The qubit ensemble is represented in the collective (permutation-invariant)
//! Dicke manifold `|J = N/2, m>`, so the joint Hilbert space scales as
//! `(N+1) * (n_max+1)` instead of `2^N * (n_max+1)`. On top of that sit:
//!
//! - [`space`]: Hilbert-space bookkeeping, collective spin and cavity
//!   operators, partial traces, von Neumann entropy;
//! - [`model`]: Dicke / Tavis–Cummings Hamiltonians, Gaussian drive,
//!   collapse operators, initial states;
//! - [`liouville`]: the vectorized Lindblad generator;
//! - [`propagator`]: adaptive embedded Runge–Kutta propagation with
//!   physicality watchdogs;
//! - [`observables`]: stored energy, charging time, power, entanglement
//!   entropies;
//! - [`sweep`]: deterministic parameter-grid execution and persistence;
//! - [`scaling`]: robust log–log power-law fits and hardware rate mapping;
//! - [`oracle`]: dense full-space (`2^N`) reference engine for validating
//!   the collective reduction at small N.

pub mod error;
pub(crate) mod linalg;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod output;
pub mod propagator;
pub mod scaling;
pub mod space;
pub mod sparse;
pub mod sweep;

pub mod liouville;

pub use error::{Error, Result};
pub use model::{
    DissipationConfig, DriveConfig, InitialStateSpec, Interaction, ModelConfig, Scenario,
};
pub use observables::{ObservableSeries, ObservableSummary};
pub use propagator::{FockPolicy, SimulationConfig, Trajectory};
pub use space::{DensityMatrix, HilbertSpace, Operator};
