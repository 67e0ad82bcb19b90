//! Equilibrium solvers for the mean-field system: a damped Newton run on the
//! full 14-variable residual with a time-integration fallback, the
//! two-variable reduced solve, and a multi-start equilibrium census.

use nalgebra::{DMatrix, DVector};

use crate::model::{
    jacobian, lift_reduced, reduced_residual, rhs, state_scales, Modulation, ParameterSet,
    StateVector,
};

use super::newton::newton_solve;
use super::SolverError;

/// Characteristic magnitude of each right-hand-side row, used to scale
/// equilibrium residuals.
pub fn rhs_scales(params: &ParameterSet) -> DVector<f64> {
    let s = state_scales(params);
    let rates = [
        1.0 / params.tau_e,
        1.0 / params.tau_i,
        params.gamma_ee,
        params.gamma_ee,
        params.gamma_ei,
        params.gamma_ei,
        params.gamma_ie,
        params.gamma_ie,
        params.gamma_ii,
        params.gamma_ii,
        params.omega(),
        params.omega(),
        params.omega(),
        params.omega(),
    ];
    DVector::from_fn(14, |i, _| s[i] * rates[i])
}

/// Newton tolerance for equilibria, in the scaled norm.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

/// Find an equilibrium of the modulated system starting from `guess`.
///
/// Tries damped Newton on the full system first; on failure falls back to
/// integrating toward the attractor and re-running Newton from there.
pub fn solve_equilibrium(
    params: &ParameterSet,
    m: Modulation,
    guess: &StateVector,
) -> Result<StateVector, SolverError> {
    let f = |x: &DVector<f64>| rhs(&StateVector::from_slice(x.as_slice()), params, m).to_dvector();
    let jac = |x: &DVector<f64>| jacobian(&StateVector::from_slice(x.as_slice()), params, m);
    let scales = rhs_scales(params);

    let x0 = guess.to_dvector();
    if let Ok((x, _)) = newton_solve(&f, &jac, &x0, &scales, EQUILIBRIUM_TOL, 40) {
        return Ok(StateVector::from_slice(x.as_slice()));
    }

    // Fallback: relax toward the attractor, then polish with Newton.
    let state_sc = state_scales(params);
    let mut x = x0;
    let mut last_err = f64::INFINITY;
    for _ in 0..6 {
        x = super::integrate::integrate_adaptive(&f, &x, 0.25, 1e-7, &state_sc, |_, _| {});
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
        match newton_solve(&f, &jac, &x, &scales, EQUILIBRIUM_TOL, 40) {
            Ok((sol, _)) => return Ok(StateVector::from_slice(sol.as_slice())),
            Err(SolverError::NonConvergence { residual, .. }) => last_err = residual,
            Err(e) => return Err(e),
        }
    }
    Err(SolverError::NonConvergence {
        residual: last_err,
        iterations: 40,
    })
}

/// Solve the two-variable reduced equilibrium system from a `(h_e, h_i)`
/// guess and lift the result to the full state.
pub fn solve_equilibrium_reduced(
    params: &ParameterSet,
    m: Modulation,
    guess: (f64, f64),
) -> Result<StateVector, SolverError> {
    let f = |v: &DVector<f64>| {
        let r = reduced_residual(v[0], v[1], params, m);
        DVector::from_row_slice(&r)
    };
    let jac = |v: &DVector<f64>| {
        let h = 1e-6;
        let mut j = DMatrix::zeros(2, 2);
        for col in 0..2 {
            let mut up = v.clone();
            let mut um = v.clone();
            up[col] += h;
            um[col] -= h;
            let d = (f(&up) - f(&um)) / (2.0 * h);
            j.set_column(col, &d);
        }
        j
    };
    let scales = DVector::from_element(2, 10.0);
    let x0 = DVector::from_row_slice(&[guess.0, guess.1]);
    let (v, _) = newton_solve(&f, &jac, &x0, &scales, 1e-12, 60)?;
    let lifted = lift_reduced(v[0], v[1], params, m);
    // Lifted states satisfy the full system by construction; polish anyway so
    // the 14-dimensional residual meets the equilibrium tolerance exactly.
    solve_equilibrium(params, m, &lifted)
}

/// Multi-start equilibrium census over a grid of `(h_e, h_i)` guesses.
///
/// Returns the distinct equilibria found, sorted by `h_e`. `grid_per_axis^2`
/// starts are seeded uniformly over the soma-potential box `[-90, -30] mV`.
pub fn equilibria_scan(
    params: &ParameterSet,
    m: Modulation,
    grid_per_axis: usize,
) -> Vec<StateVector> {
    let mut found: Vec<StateVector> = Vec::new();
    let lo = -90.0;
    let hi = -30.0;
    let n = grid_per_axis.max(2);
    for i in 0..n {
        for jdx in 0..n {
            let he = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
            let hi_guess = lo + (hi - lo) * (jdx as f64 + 0.5) / n as f64;
            if let Ok(x) = solve_equilibrium_reduced(params, m, (he, hi_guess)) {
                let is_new = found
                    .iter()
                    .all(|y| (y.h_e() - x.h_e()).abs() > 1e-5 || (y.h_i() - x.h_i()).abs() > 1e-5);
                if is_new {
                    found.push(x);
                }
            }
        }
    }
    found.sort_by(|a, b| a.h_e().partial_cmp(&b.h_e()).unwrap());
    found
}
