//! Root finding, time integration, eigenvalue diagnostics, and generic
//! pseudo-arclength continuation over extended systems.

mod continuation;
mod eigen;
mod equilibrium;
mod integrate;
mod newton;

pub use continuation::{
    continue_branch, fd_jacobian, Branch, BranchEvent, BranchPoint, ContinuationConfig,
    ExtendedSystem, Termination,
};
pub(crate) use continuation::refine_between;
pub use eigen::{eigen_residual, eigen_spectrum};
pub use equilibrium::{
    equilibria_scan, solve_equilibrium, solve_equilibrium_reduced, EQUILIBRIUM_TOL,
};
pub use equilibrium::rhs_scales as rhs_row_scales;
pub use integrate::{integrate_adaptive, rk4_step};
pub use newton::newton_solve;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Newton iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("continuation step collapsed below minimum step {min_step:.3e} at arclength {arclength:.6}")]
    StepCollapse { min_step: f64, arclength: f64 },
    #[error("eigenvalue computation failed to converge")]
    EigenFailure,
    #[error("singular linear system in solver")]
    SingularSystem,
    #[error("initial point violates the extended system: residual {0:.3e}")]
    InitializationFailure(f64),
}
