//! Bifurcation atlas of the Liley mean-field cortical model.
//!
//! The crate maps how the model cortex responds to altered inhibition: it
//! finds equilibria of the 14-dimensional mean-field ODE system, traces
//! saddle-node and Hopf curves in the `(R, k)` inhibitory modulation plane,
//! classifies each parameter set into one of two topological families by a
//! cusp census, sweeps thalamic drive to locate family metamorphoses, and
//! correlates family membership with linearized EEG power responses and
//! parameter statistics over large batches.

pub mod atlas;
pub mod bif;
pub mod model;
pub mod solver;
pub mod spectra;
pub mod stats;

pub use atlas::{classify_family, FamilyLabel, FamilyReport};
pub use bif::{BifurcationKind, BifurcationPoint, CycleBranch};
pub use model::{Modulation, ParameterSet, StateVector};
pub use solver::{Branch, ContinuationConfig};
