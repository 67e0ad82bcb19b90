//! Pseudo-arclength predictor-corrector continuation.
//!
//! The engine is generic over an [`ExtendedSystem`]: a residual with exactly
//! one more unknown than equations. Equilibrium branches, fold curves, Hopf
//! curves, and shooting systems all plug in here. Internally all unknowns are
//! rescaled to O(1) by the system-provided scales so arclength is meaningful
//! across mixed units.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SolverError;

/// A square-minus-one system of equations for continuation.
pub trait ExtendedSystem {
    /// Number of unknowns (one more than the number of equations).
    fn dim(&self) -> usize;

    /// Residual, length `dim() - 1`.
    fn residual(&self, u: &DVector<f64>) -> DVector<f64>;

    /// Jacobian of the residual, `(dim()-1) x dim()`.
    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64>;

    /// Typical magnitude per unknown.
    fn scales(&self) -> DVector<f64> {
        DVector::from_element(self.dim(), 1.0)
    }

    /// Typical magnitude per residual row.
    fn residual_scales(&self) -> DVector<f64> {
        DVector::from_element(self.dim() - 1, 1.0)
    }

    /// Diagnostics attached to each accepted point (state-Jacobian spectrum
    /// for bifurcation branches).
    fn eigenvalues(&self, _u: &DVector<f64>) -> Option<Vec<Complex64>> {
        None
    }

    /// Whether the point is still inside the continuation window.
    fn in_window(&self, _u: &DVector<f64>) -> bool {
        true
    }

    /// Called after a point is accepted; systems with adaptive internals
    /// (bordering vectors) refresh them here.
    fn on_accept(&self, _u: &DVector<f64>) {}
}

/// Central finite-difference Jacobian for systems without an analytic one.
pub fn fd_jacobian<S: ExtendedSystem + ?Sized>(sys: &S, u: &DVector<f64>) -> DMatrix<f64> {
    let n = sys.dim();
    let scales = sys.scales();
    let mut j = DMatrix::zeros(n - 1, n);
    for col in 0..n {
        let h = 1e-6 * scales[col].max(1e-12);
        let mut up = u.clone();
        let mut um = u.clone();
        up[col] += h;
        um[col] -= h;
        let d = (sys.residual(&up) - sys.residual(&um)) / (2.0 * h);
        j.set_column(col, &d);
    }
    j
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    pub max_points: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            initial_step: 1e-2,
            min_step: 1e-8,
            max_step: 0.1,
            newton_tol: 1e-9,
            max_newton_iter: 10,
            max_points: 4000,
        }
    }
}

impl ContinuationConfig {
    /// Basic sanity check on the step-size ordering.
    pub fn validate(&self) -> bool {
        0.0 < self.min_step
            && self.min_step <= self.initial_step
            && self.initial_step <= self.max_step
            && self.newton_tol > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    WindowExit,
    MaxPoints,
    ClosedLoop,
    StepCollapse,
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    /// Full unknown vector in model units.
    pub u: DVector<f64>,
    pub arclength: f64,
    /// Unit tangent in scaled coordinates, oriented along the branch.
    pub tangent: DVector<f64>,
    pub eigenvalues: Option<Vec<Complex64>>,
}

/// Mark left by an event detector on a branch: the index of the first point
/// of the bracketing interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchEvent {
    pub index: usize,
    pub kind: String,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub events: Vec<BranchEvent>,
    /// Why each direction of the run stopped: `(backward, forward)`.
    pub termination: (Termination, Termination),
}

impl Branch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct Scaled<'a, S: ExtendedSystem + ?Sized> {
    sys: &'a S,
    scales: DVector<f64>,
    res_scales: DVector<f64>,
}

impl<'a, S: ExtendedSystem + ?Sized> Scaled<'a, S> {
    fn new(sys: &'a S) -> Self {
        Scaled {
            scales: sys.scales(),
            res_scales: sys.residual_scales(),
            sys,
        }
    }

    fn to_model(&self, w: &DVector<f64>) -> DVector<f64> {
        w.component_mul(&self.scales)
    }

    fn from_model(&self, u: &DVector<f64>) -> DVector<f64> {
        u.component_div(&self.scales)
    }

    fn residual(&self, w: &DVector<f64>) -> DVector<f64> {
        self.sys
            .residual(&self.to_model(w))
            .component_div(&self.res_scales)
    }

    fn jacobian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut j = self.sys.jacobian(&self.to_model(w));
        let (m, n) = j.shape();
        for i in 0..m {
            for c in 0..n {
                j[(i, c)] = j[(i, c)] / self.res_scales[i] * self.scales[c];
            }
        }
        j
    }

    /// Nullspace tangent of the scaled Jacobian, oriented along `prev`.
    fn tangent(&self, w: &DVector<f64>, prev: Option<&DVector<f64>>) -> Option<DVector<f64>> {
        let n = self.sys.dim();
        let j = self.jacobian(w);
        let mut aug = DMatrix::zeros(n, n);
        aug.view_mut((0, 0), (n - 1, n)).copy_from(&j);
        let last = match prev {
            Some(t) => t.clone(),
            None => DVector::from_fn(n, |i, _| if i == n - 1 { 1.0 } else { 0.0 }),
        };
        aug.row_mut(n - 1).copy_from(&last.transpose());
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let t = aug.lu().solve(&rhs)?;
        let norm = t.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return None;
        }
        let mut t = t / norm;
        if let Some(prev) = prev {
            if t.dot(prev) < 0.0 {
                t = -t;
            }
        }
        Some(t)
    }

    /// Newton correction onto the branch with the pseudo-arclength
    /// constraint `tangent . (w - w_pred) = 0`.
    fn correct(
        &self,
        w_pred: &DVector<f64>,
        tangent: &DVector<f64>,
        cfg: &ContinuationConfig,
    ) -> Option<(DVector<f64>, usize)> {
        let n = self.sys.dim();
        let mut w = w_pred.clone();
        for it in 0..cfg.max_newton_iter {
            let res = self.residual(&w);
            let constraint = tangent.dot(&(&w - w_pred));
            let norm = (res.norm_squared() + constraint * constraint).sqrt()
                / ((n as f64).sqrt());
            if !norm.is_finite() {
                return None;
            }
            if norm <= cfg.newton_tol {
                return Some((w, it));
            }
            let mut aug = DMatrix::zeros(n, n);
            aug.view_mut((0, 0), (n - 1, n)).copy_from(&self.jacobian(&w));
            aug.row_mut(n - 1).copy_from(&tangent.transpose());
            let mut full_res = DVector::zeros(n);
            full_res.rows_mut(0, n - 1).copy_from(&res);
            full_res[n - 1] = constraint;
            let delta = aug.lu().solve(&full_res)?;
            w -= delta;
        }
        // Accept a final check after the loop.
        let res = self.residual(&w);
        let constraint = tangent.dot(&(&w - w_pred));
        let norm =
            (res.norm_squared() + constraint * constraint).sqrt() / (n as f64).sqrt();
        if norm <= cfg.newton_tol {
            Some((w, cfg.max_newton_iter))
        } else {
            None
        }
    }
}

/// Damped Newton polish of a branch seed that does not yet satisfy the
/// extended system. The nullspace direction is pinned with a hyperplane that
/// is refreshed at every iterate, so the seed can travel further than the
/// single fixed-hyperplane correction used between continuation steps.
fn polish_seed<S: ExtendedSystem + ?Sized>(
    scaled: &Scaled<'_, S>,
    mut w: DVector<f64>,
    cfg: &ContinuationConfig,
) -> Option<DVector<f64>> {
    let n = scaled.sys.dim();
    let norm_of = |w: &DVector<f64>| scaled.residual(w).norm() / (n as f64).sqrt();
    let mut norm = norm_of(&w);
    for _ in 0..30 {
        if !norm.is_finite() {
            return None;
        }
        if norm <= cfg.newton_tol {
            return Some(w);
        }
        let tangent = scaled.tangent(&w, None)?;
        let mut aug = DMatrix::zeros(n, n);
        aug.view_mut((0, 0), (n - 1, n)).copy_from(&scaled.jacobian(&w));
        aug.row_mut(n - 1).copy_from(&tangent.transpose());
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, n - 1).copy_from(&scaled.residual(&w));
        let delta = aug.lu().solve(&rhs)?;
        // Backtracking line search on the residual norm.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial = &w - &delta * step;
            let trial_norm = norm_of(&trial);
            if trial_norm.is_finite() && trial_norm < norm {
                w = trial;
                norm = trial_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (norm <= cfg.newton_tol).then_some(w)
}

/// Trace the solution branch through `start` in both directions.
///
/// The two half-branches are concatenated with the backward half reversed, so
/// arclength increases strictly along the output. Folds in any single
/// coordinate are traversed; termination is per direction.
pub fn continue_branch<S: ExtendedSystem + ?Sized>(
    sys: &S,
    start: &DVector<f64>,
    cfg: &ContinuationConfig,
) -> Result<Branch, SolverError> {
    assert!(cfg.validate(), "invalid continuation config");
    let scaled = Scaled::new(sys);
    let w0 = scaled.from_model(start);

    // The start must already satisfy the system; polish it if it does not.
    let res0 = scaled.residual(&w0).norm() / (sys.dim() as f64).sqrt();
    let w0 = if res0 <= cfg.newton_tol {
        w0
    } else {
        polish_seed(&scaled, w0, cfg).ok_or(SolverError::InitializationFailure(res0))?
    };

    let t0 = scaled
        .tangent(&w0, None)
        .ok_or(SolverError::SingularSystem)?;

    let forward = trace_direction(&scaled, &w0, &t0, cfg);
    let backward = trace_direction(&scaled, &w0, &(-&t0), cfg);

    // Stitch: reversed backward half (skipping its copy of the start), then
    // the forward half. Arclength is shifted to start at zero.
    let mut points: Vec<BranchPoint> = Vec::with_capacity(backward.0.len() + forward.0.len());
    let back_len = backward.0.last().map(|p| p.arclength).unwrap_or(0.0);
    for p in backward.0.into_iter().skip(1).rev() {
        points.push(BranchPoint {
            arclength: back_len - p.arclength,
            tangent: -p.tangent,
            ..p
        });
    }
    for p in forward.0.into_iter() {
        points.push(BranchPoint {
            arclength: back_len + p.arclength,
            ..p
        });
    }

    if points.is_empty() {
        return Err(SolverError::StepCollapse {
            min_step: cfg.min_step,
            arclength: 0.0,
        });
    }

    Ok(Branch {
        points,
        events: Vec::new(),
        termination: (backward.1, forward.1),
    })
}

fn trace_direction<S: ExtendedSystem + ?Sized>(
    scaled: &Scaled<'_, S>,
    w0: &DVector<f64>,
    t0: &DVector<f64>,
    cfg: &ContinuationConfig,
) -> (Vec<BranchPoint>, Termination) {
    let mut points = Vec::new();
    let push = |points: &mut Vec<BranchPoint>, scaled: &Scaled<'_, S>, w: &DVector<f64>, s: f64, t: &DVector<f64>| {
        let u = scaled.to_model(w);
        let eig = scaled.sys.eigenvalues(&u);
        points.push(BranchPoint {
            u,
            arclength: s,
            tangent: t.clone(),
            eigenvalues: eig,
        });
    };
    push(&mut points, scaled, w0, 0.0, t0);

    let mut w = w0.clone();
    let mut tangent = t0.clone();
    let mut h = cfg.initial_step;
    let mut arclength = 0.0;

    loop {
        if points.len() >= cfg.max_points {
            return (points, Termination::MaxPoints);
        }
        let w_pred = &w + h * &tangent;
        match scaled.correct(&w_pred, &tangent, cfg) {
            Some((w_new, iters)) => {
                let t_new = match scaled.tangent(&w_new, Some(&tangent)) {
                    Some(t) => t,
                    None => {
                        h *= 0.5;
                        if h < cfg.min_step {
                            return (points, Termination::StepCollapse);
                        }
                        continue;
                    }
                };
                // Reject sharp turns unless the step is already minimal.
                if t_new.dot(&tangent) < 0.2 && h > 4.0 * cfg.min_step {
                    h *= 0.5;
                    continue;
                }
                arclength += (&w_new - &w).norm();
                w = w_new;
                tangent = t_new;
                scaled.sys.on_accept(&scaled.to_model(&w));
                push(&mut points, scaled, &w, arclength, &tangent);

                if !scaled.sys.in_window(&scaled.to_model(&w)) {
                    return (points, Termination::WindowExit);
                }
                // Closed-loop: back near the start with an aligned tangent.
                if points.len() > 10 {
                    let dist = (&w - w0).norm();
                    if dist < h && tangent.dot(t0) > 0.99 {
                        return (points, Termination::ClosedLoop);
                    }
                }
                if iters <= 3 {
                    h = (h * 1.5).min(cfg.max_step);
                }
            }
            None => {
                h *= 0.5;
                if h < cfg.min_step {
                    return (points, Termination::StepCollapse);
                }
            }
        }
    }
}

/// Re-correct a point interpolated between two branch points, constrained to
/// the hyperplane orthogonal to the secant. Used by event detectors to
/// bisect sign changes in test functions across folds.
pub(crate) fn refine_between<S: ExtendedSystem + ?Sized>(
    sys: &S,
    a: &DVector<f64>,
    b: &DVector<f64>,
    t: f64,
    cfg: &ContinuationConfig,
) -> Option<DVector<f64>> {
    let scaled = Scaled::new(sys);
    let wa = scaled.from_model(a);
    let wb = scaled.from_model(b);
    let secant = &wb - &wa;
    let norm = secant.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return None;
    }
    let secant = secant / norm;
    let w_pred = &wa * (1.0 - t) + &wb * t;
    let (w, _) = scaled.correct(&w_pred, &secant, cfg)?;
    Some(scaled.to_model(&w))
}
