//! Bifurcation detection and continuation: codimension-one events along
//! equilibrium branches, fold and Hopf curves in two-parameter planes,
//! codimension-two points, and periodic-orbit continuation by shooting.

mod cycles;
mod detect;
mod family;
mod lyapunov;
mod systems;

pub use cycles::{continue_periodic_orbit, CycleBranch, CyclePoint, ShootingConfig};
pub use detect::{
    detect_bt, detect_bt_on_hopf, detect_codim1, detect_cusp, detect_fold_hopf, detect_gh,
    locate_sign_changes,
};
pub use family::{Axis, LileyFamily, OdeFamily};
pub use lyapunov::first_lyapunov_coeff;
pub use systems::{
    continue_equilibrium_branch, continue_fold_curve, continue_hopf_curve, EquilibriumSystem,
    FoldCurveSystem, HopfCurveSystem,
};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BifurcationKind {
    SaddleNode,
    Hopf,
    Cusp,
    BogdanovTakens,
    FoldHopf,
    GeneralizedHopf,
    FoldOfCycles,
}

impl BifurcationKind {
    pub fn label(&self) -> &'static str {
        match self {
            BifurcationKind::SaddleNode => "sn",
            BifurcationKind::Hopf => "hb",
            BifurcationKind::Cusp => "c",
            BifurcationKind::BogdanovTakens => "bt",
            BifurcationKind::FoldHopf => "fh",
            BifurcationKind::GeneralizedHopf => "gh",
            BifurcationKind::FoldOfCycles => "lpc",
        }
    }
}

/// A detected bifurcation with its normal-form diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub kind: BifurcationKind,
    /// Values of the active continuation parameters at the point.
    pub location: Vec<f64>,
    /// Equilibrium state (model coordinates).
    pub state: Vec<f64>,
    /// Eigenvalues closest to the defining condition.
    pub critical_eigenvalues: Vec<Complex64>,
    /// Imaginary part of the critical pair for Hopf-type points (rad/s).
    pub hopf_frequency: Option<f64>,
    /// First Lyapunov coefficient where applicable.
    pub l1: Option<f64>,
    /// Index of the bracketing branch interval the point was refined from.
    pub branch_index: usize,
}

impl BifurcationPoint {
    pub fn state_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.state)
    }
}

#[derive(Debug, Error)]
pub enum BifError {
    #[error("starting point does not satisfy the {0} defining condition (residual {1:.3e})")]
    InitializationFailure(&'static str, f64),
    #[error("bordered solve for center eigenvectors is ill-conditioned")]
    IllConditioned,
    #[error("shooting corrector diverged at parameter {0}")]
    ShootingDivergence(f64),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
}
