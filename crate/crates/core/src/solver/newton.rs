use nalgebra::{DMatrix, DVector};

use super::SolverError;

/// Damped Newton iteration on `f(x) = 0` with a simple backtracking line
/// search. Norms are weighted by `residual_scales` so mixed-unit residuals
/// are comparable.
///
/// Returns the solution and the final scaled residual norm.
pub fn newton_solve(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    jac: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    x0: &DVector<f64>,
    residual_scales: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, f64), SolverError> {
    let scaled_norm = |r: &DVector<f64>| -> f64 {
        (r.iter()
            .zip(residual_scales.iter())
            .map(|(v, s)| (v / s).powi(2))
            .sum::<f64>()
            / r.len() as f64)
            .sqrt()
    };

    let mut x = x0.clone();
    let mut res = f(&x);
    let mut norm = scaled_norm(&res);
    for it in 0..max_iter {
        if norm <= tol {
            return Ok((x, norm));
        }
        let j = jac(&x);
        let lu = j.lu();
        let Some(delta) = lu.solve(&res) else {
            return Err(SolverError::SingularSystem);
        };
        // Backtracking: halve the step until the residual stops growing.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial = &x - lambda * &delta;
            let trial_res = f(&trial);
            let trial_norm = scaled_norm(&trial_res);
            if trial_norm.is_finite() && (trial_norm < norm || trial_norm <= tol) {
                x = trial;
                res = trial_res;
                norm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(SolverError::NonConvergence {
                residual: norm,
                iterations: it + 1,
            });
        }
    }
    if norm <= tol {
        Ok((x, norm))
    } else {
        Err(SolverError::NonConvergence {
            residual: norm,
            iterations: max_iter,
        })
    }
}
