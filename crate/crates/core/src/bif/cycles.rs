//! Periodic-orbit continuation by multi-segment shooting in one active
//! parameter, seeded from a Hopf point.
//!
//! The unknowns are the segment start states, the period, and the parameter.
//! A custom pseudo-arclength loop is used instead of the generic engine so
//! the phase anchor can move with the orbit after every accepted step.
//! Monodromy matrices come from Runge-Kutta integration of the variational
//! equations alongside the state.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;

use crate::solver::{eigen_spectrum, rk4_step, ContinuationConfig, Termination};

use super::family::OdeFamily;
use super::systems::complex_null_vector;
use super::{BifError, BifurcationKind, BifurcationPoint};

#[derive(Debug, Clone, Copy)]
pub struct ShootingConfig {
    /// Number of shooting segments per period.
    pub segments: usize,
    /// Fixed Runge-Kutta steps per segment.
    pub steps_per_segment: usize,
    /// Initial orbit amplitude, in scaled state units.
    pub amplitude: f64,
    pub newton_tol: f64,
    pub max_newton_iter: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            segments: 4,
            steps_per_segment: 60,
            amplitude: 0.02,
            newton_tol: 1e-8,
            max_newton_iter: 12,
        }
    }
}

/// One point on a cycle branch.
#[derive(Debug, Clone)]
pub struct CyclePoint {
    pub param: f64,
    pub period: f64,
    /// Segment start states, model coordinates.
    pub states: Vec<Vec<f64>>,
    /// Floquet multipliers of the full-period monodromy (one is the trivial
    /// multiplier near unity).
    pub floquet: Vec<Complex64>,
    /// Maximum of the first state coordinate over the orbit.
    pub peak: f64,
    pub arclength: f64,
}

#[derive(Debug, Clone)]
pub struct CycleBranch {
    pub points: Vec<CyclePoint>,
    /// Folds of cycles (parameter extrema along the branch).
    pub folds: Vec<BifurcationPoint>,
    pub termination: Termination,
}

struct Shooter<'a, F: OdeFamily> {
    fam: &'a F,
    m: usize,
    steps: usize,
    d: DVector<f64>,
    t_scale: f64,
    p_scale: f64,
}

impl<'a, F: OdeFamily> Shooter<'a, F> {
    fn n(&self) -> usize {
        self.fam.dim()
    }

    fn dim_w(&self) -> usize {
        self.m * self.n() + 2
    }

    fn decode(&self, w: &DVector<f64>) -> (Vec<DVector<f64>>, f64, f64) {
        let n = self.n();
        let xs = (0..self.m)
            .map(|j| DVector::from_fn(n, |i, _| w[j * n + i] * self.d[i]))
            .collect();
        (xs, w[self.m * n] * self.t_scale, w[self.m * n + 1] * self.p_scale)
    }

    fn flow(&self, x0: &DVector<f64>, tau: f64, p: f64) -> (DVector<f64>, f64) {
        let pv = DVector::from_element(1, p);
        let f = |x: &DVector<f64>| self.fam.f(x, &pv);
        let dt = tau / self.steps as f64;
        let mut x = x0.clone();
        let mut peak = x[0];
        for _ in 0..self.steps {
            x = rk4_step(&f, &x, dt);
            peak = peak.max(x[0]);
        }
        (x, peak)
    }

    /// Flow together with the fundamental matrix and the parameter
    /// sensitivity over one segment.
    fn flow_var(
        &self,
        x0: &DVector<f64>,
        tau: f64,
        p: f64,
    ) -> (DVector<f64>, DMatrix<f64>, DVector<f64>, f64) {
        let n = self.n();
        let pv = DVector::from_element(1, p);
        let dim = n + n * n + n;
        let rhs = |y: &DVector<f64>| -> DVector<f64> {
            let x = y.rows(0, n).into_owned();
            let phi = DMatrix::from_column_slice(n, n, y.rows(n, n * n).as_slice());
            let s = y.rows(n + n * n, n).into_owned();
            let f = self.fam.f(&x, &pv);
            let j = self.fam.jac_x(&x, &pv);
            let fp = self.fam.jac_p(&x, &pv).column(0).into_owned();
            let dphi = &j * phi;
            let ds = &j * s + fp;
            let mut dy = DVector::zeros(dim);
            dy.rows_mut(0, n).copy_from(&f);
            dy.rows_mut(n, n * n).copy_from_slice(dphi.as_slice());
            dy.rows_mut(n + n * n, n).copy_from(&ds);
            dy
        };
        let mut y = DVector::zeros(dim);
        y.rows_mut(0, n).copy_from(x0);
        for i in 0..n {
            y[n + i * n + i] = 1.0;
        }
        let dt = tau / self.steps as f64;
        let mut peak = x0[0];
        for _ in 0..self.steps {
            y = rk4_step(&rhs, &y, dt);
            peak = peak.max(y[0]);
        }
        let x_end = y.rows(0, n).into_owned();
        let phi = DMatrix::from_column_slice(n, n, y.rows(n, n * n).as_slice());
        let s = y.rows(n + n * n, n).into_owned();
        (x_end, phi, s, peak)
    }

    fn residual(&self, w: &DVector<f64>, anchor: &(DVector<f64>, DVector<f64>)) -> DVector<f64> {
        let n = self.n();
        let (xs, t, p) = self.decode(w);
        let mut r = DVector::from_element(self.m * n + 1, f64::NAN);
        if !(t.is_finite() && t > 0.0) {
            return r;
        }
        let tau = t / self.m as f64;
        for j in 0..self.m {
            let (xe, _) = self.flow(&xs[j], tau, p);
            let target = &xs[(j + 1) % self.m];
            for i in 0..n {
                r[j * n + i] = (xe[i] - target[i]) / self.d[i];
            }
        }
        let x0_hat = w.rows(0, n).into_owned();
        r[self.m * n] = anchor.1.dot(&(&x0_hat - &anchor.0));
        r
    }

    fn jacobian(
        &self,
        w: &DVector<f64>,
        anchor: &(DVector<f64>, DVector<f64>),
    ) -> Option<DMatrix<f64>> {
        let n = self.n();
        let m = self.m;
        let (xs, t, p) = self.decode(w);
        if !(t.is_finite() && t > 0.0) {
            return None;
        }
        let tau = t / m as f64;
        let pv = DVector::from_element(1, p);
        let mut jac = DMatrix::zeros(m * n + 1, m * n + 2);
        for j in 0..m {
            let (xe, phi, s, _) = self.flow_var(&xs[j], tau, p);
            let f_end = self.fam.f(&xe, &pv);
            let next = (j + 1) % m;
            for r in 0..n {
                for c in 0..n {
                    // d r_j / d x_hat_j = D^-1 Phi D
                    jac[(j * n + r, j * n + c)] = phi[(r, c)] * self.d[c] / self.d[r];
                }
                jac[(j * n + r, next * n + r)] += -1.0;
                jac[(j * n + r, m * n)] = f_end[r] / self.d[r] * self.t_scale / m as f64;
                jac[(j * n + r, m * n + 1)] = s[r] / self.d[r] * self.p_scale;
            }
        }
        for c in 0..n {
            jac[(m * n, c)] = anchor.1[c];
        }
        Some(jac)
    }

    fn correct(
        &self,
        w_pred: &DVector<f64>,
        tangent: &DVector<f64>,
        anchor: &(DVector<f64>, DVector<f64>),
        cfg: &ShootingConfig,
    ) -> Option<(DVector<f64>, usize)> {
        let nn = self.dim_w();
        let mut w = w_pred.clone();
        for it in 0..=cfg.max_newton_iter {
            let res = self.residual(&w, anchor);
            let con = tangent.dot(&(&w - w_pred));
            let norm = (res.norm_squared() + con * con).sqrt() / (nn as f64).sqrt();
            if !norm.is_finite() {
                return None;
            }
            if norm <= cfg.newton_tol {
                return Some((w, it));
            }
            if it == cfg.max_newton_iter {
                return None;
            }
            let mut aug = DMatrix::zeros(nn, nn);
            aug.view_mut((0, 0), (nn - 1, nn))
                .copy_from(&self.jacobian(&w, anchor)?);
            aug.row_mut(nn - 1).copy_from(&tangent.transpose());
            let mut full = DVector::zeros(nn);
            full.rows_mut(0, nn - 1).copy_from(&res);
            full[nn - 1] = con;
            let delta = aug.lu().solve(&full)?;
            w -= delta;
        }
        None
    }

    fn tangent(
        &self,
        w: &DVector<f64>,
        prev: Option<&DVector<f64>>,
        anchor: &(DVector<f64>, DVector<f64>),
    ) -> Option<DVector<f64>> {
        let nn = self.dim_w();
        let mut aug = DMatrix::zeros(nn, nn);
        aug.view_mut((0, 0), (nn - 1, nn))
            .copy_from(&self.jacobian(w, anchor)?);
        let last = match prev {
            Some(t) => t.clone(),
            None => DVector::from_fn(nn, |i, _| if i == nn - 1 { 1.0 } else { 0.0 }),
        };
        aug.row_mut(nn - 1).copy_from(&last.transpose());
        let mut rhs = DVector::zeros(nn);
        rhs[nn - 1] = 1.0;
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

    fn point_data(&self, w: &DVector<f64>, arclength: f64) -> CyclePoint {
        let n = self.n();
        let (xs, t, p) = self.decode(w);
        let tau = t / self.m as f64;
        let mut mono = DMatrix::identity(n, n);
        let mut peak = f64::NEG_INFINITY;
        for x in &xs {
            let (_, phi, _, pk) = self.flow_var(x, tau, p);
            peak = peak.max(pk);
            let mut phi_hat = phi;
            for r in 0..n {
                for c in 0..n {
                    phi_hat[(r, c)] *= self.d[c] / self.d[r];
                }
            }
            mono = phi_hat * mono;
        }
        let floquet = eigen_spectrum(&mono).unwrap_or_default();
        CyclePoint {
            param: p,
            period: t,
            states: xs.iter().map(|x| x.iter().copied().collect()).collect(),
            floquet,
            peak,
            arclength,
        }
    }

    fn fresh_anchor(&self, w: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = self.n();
        let (xs, _, p) = self.decode(w);
        let pv = DVector::from_element(1, p);
        let f0 = self.fam.f(&xs[0], &pv);
        let mut dir = DVector::from_fn(n, |i, _| f0[i] / self.d[i]);
        let norm = dir.norm();
        if !(norm.is_finite() && norm > 1e-14) {
            return None;
        }
        dir /= norm;
        Some((w.rows(0, n).into_owned(), dir))
    }
}

/// Continue the family of periodic orbits born at the Hopf point
/// `(x_hopf, p_hopf)` with angular frequency `omega`, in the family's single
/// active parameter. Traces away from the Hopf point in the direction of
/// growing amplitude.
pub fn continue_periodic_orbit<F: OdeFamily>(
    fam: &F,
    x_hopf: &DVector<f64>,
    p_hopf: f64,
    omega: f64,
    scfg: &ShootingConfig,
    ccfg: &ContinuationConfig,
) -> Result<CycleBranch, BifError> {
    assert_eq!(fam.n_params(), 1, "cycle continuation needs one axis");
    assert!(omega > 0.0, "Hopf frequency must be positive");
    let n = fam.dim();
    let m = scfg.segments.max(2);
    let shooter = Shooter {
        fam,
        m,
        steps: scfg.steps_per_segment.max(8),
        d: fam.state_scales(),
        t_scale: 2.0 * std::f64::consts::PI / omega,
        p_scale: fam.param_scales()[0],
    };

    // Linearized orbit around the Hopf equilibrium for the initial guess.
    let p_vec = DVector::from_element(1, p_hopf);
    let j_hat = fam.jac_x_scaled(x_hopf, &p_vec);
    let q = complex_null_vector(&j_hat, Complex::new(0.0, omega))
        .ok_or(BifError::IllConditioned)?;
    let qn = q.norm();
    if !(qn.is_finite() && qn > 0.0) {
        return Err(BifError::IllConditioned);
    }
    let q = q / Complex::new(qn, 0.0);
    let qr: DVector<f64> = q.map(|z| z.re);
    let qi: DVector<f64> = q.map(|z| z.im);
    let x_eq_hat = DVector::from_fn(n, |i, _| x_hopf[i] / shooter.d[i]);

    let build_guess = |amp: f64| -> DVector<f64> {
        let mut w = DVector::zeros(shooter.dim_w());
        for jdx in 0..m {
            let theta = 2.0 * std::f64::consts::PI * jdx as f64 / m as f64;
            for i in 0..n {
                w[jdx * n + i] =
                    x_eq_hat[i] + amp * (qr[i] * theta.cos() - qi[i] * theta.sin());
            }
        }
        w[m * n] = 1.0; // period = t_scale
        w[m * n + 1] = p_hopf / shooter.p_scale;
        w
    };

    // Amplitude direction in the unknown space, used to orient the branch
    // away from the equilibrium.
    let amp_dir = |w: &DVector<f64>| -> DVector<f64> {
        let mut a = DVector::zeros(shooter.dim_w());
        for jdx in 0..m {
            for i in 0..n {
                a[jdx * n + i] = w[jdx * n + i] - x_eq_hat[i];
            }
        }
        let norm = a.norm();
        if norm > 0.0 {
            a / norm
        } else {
            a
        }
    };

    // First orbit: correct the linearized guess with the amplitude direction
    // as the constraint so the corrector cannot collapse onto the
    // equilibrium. Retry with smaller amplitude if it diverges.
    let mut first: Option<DVector<f64>> = None;
    let mut amp = scfg.amplitude;
    for _ in 0..6 {
        let w0 = build_guess(amp);
        let anchor0 = (
            w0.rows(0, n).into_owned(),
            {
                let mut dir = -qi.clone();
                let norm = dir.norm();
                if norm > 1e-14 {
                    dir /= norm;
                } else {
                    dir = qr.clone();
                }
                dir
            },
        );
        let constraint = amp_dir(&w0);
        if let Some((w, _)) = shooter.correct(&w0, &constraint, &anchor0, scfg) {
            let reached = amp_dir(&w).dot(&constraint);
            let size = (0..m * n)
                .map(|i| (w[i] - build_guess(0.0)[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            if reached > 0.0 && size > 0.05 * amp {
                first = Some(w);
                break;
            }
        }
        amp *= 0.5;
    }
    let mut w = first.ok_or(BifError::ShootingDivergence(p_hopf))?;

    let mut anchor = shooter
        .fresh_anchor(&w)
        .ok_or(BifError::ShootingDivergence(p_hopf))?;
    let mut tangent = shooter
        .tangent(&w, None, &anchor)
        .ok_or(BifError::ShootingDivergence(p_hopf))?;
    if tangent.dot(&amp_dir(&w)) < 0.0 {
        tangent = -tangent;
    }

    let mut arclength = 0.0;
    let mut points = vec![shooter.point_data(&w, arclength)];
    let mut h = ccfg.initial_step;
    let termination;

    loop {
        if points.len() >= ccfg.max_points {
            termination = Termination::MaxPoints;
            break;
        }
        let w_pred = &w + h * &tangent;
        match shooter.correct(&w_pred, &tangent, &anchor, scfg) {
            Some((w_new, iters)) => {
                let anchor_new = match shooter.fresh_anchor(&w_new) {
                    Some(a) => a,
                    None => {
                        termination = Termination::StepCollapse;
                        break;
                    }
                };
                let t_new = match shooter.tangent(&w_new, Some(&tangent), &anchor_new) {
                    Some(t) => t,
                    None => {
                        h *= 0.5;
                        if h < ccfg.min_step {
                            termination = Termination::StepCollapse;
                            break;
                        }
                        continue;
                    }
                };
                if t_new.dot(&tangent) < 0.2 && h > 4.0 * ccfg.min_step {
                    h *= 0.5;
                    continue;
                }
                arclength += (&w_new - &w).norm();
                w = w_new;
                anchor = anchor_new;
                tangent = t_new;
                points.push(shooter.point_data(&w, arclength));
                let p_now = w[m * n + 1] * shooter.p_scale;
                if !fam.in_window(&DVector::from_element(1, p_now)) {
                    termination = Termination::WindowExit;
                    break;
                }
                if iters <= 3 {
                    h = (h * 1.5).min(ccfg.max_step);
                }
            }
            None => {
                h *= 0.5;
                if h < ccfg.min_step {
                    termination = Termination::StepCollapse;
                    break;
                }
            }
        }
    }

    let folds = find_cycle_folds(&points);
    Ok(CycleBranch {
        points,
        folds,
        termination,
    })
}

/// Folds of cycles: strict parameter extrema along the branch, with the
/// extremal parameter refined by a parabola through the three bracketing
/// points in `(arclength, param)`.
fn find_cycle_folds(points: &[CyclePoint]) -> Vec<BifurcationPoint> {
    let mut out = Vec::new();
    for i in 1..points.len().saturating_sub(1) {
        let dp0 = points[i].param - points[i - 1].param;
        let dp1 = points[i + 1].param - points[i].param;
        if dp0 * dp1 < 0.0 {
            let (s0, s1, s2) = (
                points[i - 1].arclength,
                points[i].arclength,
                points[i + 1].arclength,
            );
            let (p0, p1, p2) = (
                points[i - 1].param,
                points[i].param,
                points[i + 1].param,
            );
            // Vertex of the interpolating parabola.
            let d01 = (p1 - p0) / (s1 - s0);
            let d12 = (p2 - p1) / (s2 - s1);
            let curv = (d12 - d01) / (s2 - s0);
            // Vertex of the Newton-form parabola through the three samples.
            let p_star = if curv.abs() > 1e-300 {
                let s_star = (0.5 * (s0 + s1) - d01 / (2.0 * curv)).clamp(s0, s2);
                p0 + d01 * (s_star - s0) + curv * (s_star - s0) * (s_star - s1)
            } else {
                p1
            };
            let mut mult = points[i].floquet.clone();
            mult.sort_by(|a, b| {
                (a - Complex64::new(1.0, 0.0))
                    .norm()
                    .partial_cmp(&(b - Complex64::new(1.0, 0.0)).norm())
                    .unwrap()
            });
            out.push(BifurcationPoint {
                kind: BifurcationKind::FoldOfCycles,
                location: vec![p_star],
                state: points[i].states[0].clone(),
                critical_eigenvalues: mult.into_iter().take(2).collect(),
                hopf_frequency: None,
                l1: None,
                branch_index: i,
            });
        }
    }
    out
}
