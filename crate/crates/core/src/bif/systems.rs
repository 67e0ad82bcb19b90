//! Extended systems plugged into the continuation engine: plain equilibrium
//! branches, fold curves via a bordered singularity test, and Hopf curves
//! via explicit tracking of the critical eigenplane.

use std::cell::RefCell;

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;

use crate::solver::{
    continue_branch, eigen_spectrum, Branch, ContinuationConfig, ExtendedSystem,
};

use super::family::OdeFamily;
use super::BifError;

/// Split the unknown vector of an equilibrium-type system into state and
/// parameter parts.
pub(crate) fn split_u(u: &DVector<f64>, n: usize) -> (DVector<f64>, DVector<f64>) {
    (u.rows(0, n).into_owned(), u.rows(n, u.len() - n).into_owned())
}

// ---------------------------------------------------------------------------
// Equilibrium branch in one active parameter
// ---------------------------------------------------------------------------

pub struct EquilibriumSystem<'a, F: OdeFamily> {
    pub family: &'a F,
}

impl<'a, F: OdeFamily> EquilibriumSystem<'a, F> {
    pub fn new(family: &'a F) -> Self {
        assert_eq!(family.n_params(), 1, "equilibrium branch needs one axis");
        EquilibriumSystem { family }
    }
}

impl<F: OdeFamily> ExtendedSystem for EquilibriumSystem<'_, F> {
    fn dim(&self) -> usize {
        self.family.dim() + 1
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let (x, p) = split_u(u, self.family.dim());
        self.family.f(&x, &p)
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.family.dim();
        let (x, p) = split_u(u, n);
        let mut j = DMatrix::zeros(n, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(&self.family.jac_x(&x, &p));
        j.view_mut((0, n), (n, 1)).copy_from(&self.family.jac_p(&x, &p));
        j
    }

    fn scales(&self) -> DVector<f64> {
        stack(&self.family.state_scales(), &self.family.param_scales())
    }

    fn residual_scales(&self) -> DVector<f64> {
        self.family.f_scales()
    }

    fn eigenvalues(&self, u: &DVector<f64>) -> Option<Vec<Complex64>> {
        let (x, p) = split_u(u, self.family.dim());
        eigen_spectrum(&self.family.jac_x_scaled(&x, &p)).ok()
    }

    fn in_window(&self, u: &DVector<f64>) -> bool {
        let (_, p) = split_u(u, self.family.dim());
        self.family.in_window(&p)
    }
}

/// Continue the equilibrium branch through `(x0, p0)` in the family's single
/// active parameter.
pub fn continue_equilibrium_branch<F: OdeFamily>(
    family: &F,
    x0: &DVector<f64>,
    p0: f64,
    cfg: &ContinuationConfig,
) -> Result<Branch, BifError> {
    let sys = EquilibriumSystem::new(family);
    let mut u0 = DVector::zeros(family.dim() + 1);
    u0.rows_mut(0, family.dim()).copy_from(x0);
    u0[family.dim()] = p0;
    Ok(continue_branch(&sys, &u0, cfg)?)
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

// ---------------------------------------------------------------------------
// Bordered singularity test
// ---------------------------------------------------------------------------

/// Solve the bordered system `[[J, b], [c^T, 0]] [w; g] = [0; 1]`.
///
/// Returns `(w, g)`: near a fold `g` crosses zero and `w` aligns with the
/// right null vector of `J`.
pub(crate) fn bordered_solve(
    j: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    let n = j.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(j);
    m.view_mut((0, n), (n, 1)).copy_from(b);
    m.view_mut((n, 0), (1, n)).copy_from(&c.transpose());
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let sol = m.lu().solve(&rhs)?;
    let w = sol.rows(0, n).into_owned();
    let g = sol[n];
    if w.iter().all(|v| v.is_finite()) && g.is_finite() {
        Some((w, g))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Fold curve in two active parameters
// ---------------------------------------------------------------------------

/// Extended system `{f(x, p) = 0, g(x, p) = 0}` with `g` the bordered
/// singularity test of the (similarity-scaled) state Jacobian. Bordering
/// vectors adapt to the current null vectors after every accepted point.
pub struct FoldCurveSystem<'a, F: OdeFamily> {
    pub family: &'a F,
    borders: RefCell<(DVector<f64>, DVector<f64>)>,
}

impl<'a, F: OdeFamily> FoldCurveSystem<'a, F> {
    /// Initialize at a fold point; the bordering vectors come from the
    /// singular vectors of the scaled Jacobian.
    pub fn at_point(
        family: &'a F,
        x: &DVector<f64>,
        p: &DVector<f64>,
    ) -> Result<Self, BifError> {
        assert_eq!(family.n_params(), 2, "fold curve needs two axes");
        let j = family.jac_x_scaled(x, p);
        let svd = j.clone().svd(true, true);
        let sv = &svd.singular_values;
        let min_idx = sv.imin();
        let sigma_min = sv[min_idx];
        let sigma_max = sv.max();
        // The scaled Jacobian is O(1), so compare against max(sigma_max, 1)
        // rather than sigma_max alone (for 1-D systems they coincide).
        if sigma_min > 1e-4 * sigma_max.max(1.0) {
            return Err(BifError::InitializationFailure(
                "fold",
                sigma_min / sigma_max,
            ));
        }
        let u = svd.u.as_ref().unwrap();
        let vt = svd.v_t.as_ref().unwrap();
        let left = u.column(min_idx).into_owned();
        let right = vt.row(min_idx).transpose();
        Ok(FoldCurveSystem {
            family,
            borders: RefCell::new((left, right)),
        })
    }

    /// Bordered test value and the right/left null-vector approximations at
    /// the given unknowns.
    pub fn test_data(&self, u: &DVector<f64>) -> Option<(f64, DVector<f64>, DVector<f64>)> {
        let n = self.family.dim();
        let (x, p) = split_u(u, n);
        let j = self.family.jac_x_scaled(&x, &p);
        let (b, c) = self.borders.borrow().clone();
        let (w, g) = bordered_solve(&j, &b, &c)?;
        let (v, _) = bordered_solve(&j.transpose(), &c, &b)?;
        Some((g, w, v))
    }

    fn g_value(&self, u: &DVector<f64>) -> f64 {
        self.test_data(u).map(|(g, _, _)| g).unwrap_or(f64::NAN)
    }
}

impl<F: OdeFamily> ExtendedSystem for FoldCurveSystem<'_, F> {
    fn dim(&self) -> usize {
        self.family.dim() + 2
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.family.dim();
        let (x, p) = split_u(u, n);
        let mut r = DVector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&self.family.f(&x, &p));
        r[n] = self.g_value(u);
        r
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.family.dim();
        let (x, p) = split_u(u, n);
        let mut j = DMatrix::zeros(n + 1, n + 2);
        j.view_mut((0, 0), (n, n)).copy_from(&self.family.jac_x(&x, &p));
        j.view_mut((0, n), (n, 2)).copy_from(&self.family.jac_p(&x, &p));
        // g row by central differences.
        let scales = self.scales();
        for col in 0..n + 2 {
            let h = 1e-6 * scales[col].max(1e-12);
            let mut up = u.clone();
            let mut um = u.clone();
            up[col] += h;
            um[col] -= h;
            j[(n, col)] = (self.g_value(&up) - self.g_value(&um)) / (2.0 * h);
        }
        j
    }

    fn scales(&self) -> DVector<f64> {
        stack(&self.family.state_scales(), &self.family.param_scales())
    }

    fn residual_scales(&self) -> DVector<f64> {
        stack(&self.family.f_scales(), &DVector::from_element(1, 1.0))
    }

    fn eigenvalues(&self, u: &DVector<f64>) -> Option<Vec<Complex64>> {
        let (x, p) = split_u(u, self.family.dim());
        eigen_spectrum(&self.family.jac_x_scaled(&x, &p)).ok()
    }

    fn in_window(&self, u: &DVector<f64>) -> bool {
        let (_, p) = split_u(u, self.family.dim());
        self.family.in_window(&p)
    }

    fn on_accept(&self, u: &DVector<f64>) {
        if let Some((_, w, v)) = self.test_data(u) {
            let (wn, vn) = (w.norm(), v.norm());
            if wn > 0.0 && vn > 0.0 {
                *self.borders.borrow_mut() = (v / vn, w / wn);
            }
        }
    }
}

/// Continue the fold curve through the fold at `(x, p)` in the family's two
/// active parameters.
pub fn continue_fold_curve<'a, F: OdeFamily>(
    family: &'a F,
    x: &DVector<f64>,
    p: &DVector<f64>,
    cfg: &ContinuationConfig,
) -> Result<(Branch, FoldCurveSystem<'a, F>), BifError> {
    let sys = FoldCurveSystem::at_point(family, x, p)?;
    let u0 = stack(x, p);
    let branch = continue_branch(&sys, &u0, cfg)?;
    Ok((branch, sys))
}

// ---------------------------------------------------------------------------
// Hopf curve in two active parameters
// ---------------------------------------------------------------------------

/// Extended system for Hopf loci: `{f = 0, (J^2 + kappa I) q = 0,
/// c1.q = 1, c2.q = 0}` with `kappa = omega^2` carried explicitly.
///
/// Tracking `kappa` directly gives the Bogdanov-Takens test for free
/// (`kappa` crosses zero) and lets the curve continue through BT as a
/// neutral saddle (`kappa < 0`).
pub struct HopfCurveSystem<'a, F: OdeFamily> {
    pub family: &'a F,
    refs: RefCell<(DVector<f64>, DVector<f64>)>,
    kappa_scale: f64,
}

impl<'a, F: OdeFamily> HopfCurveSystem<'a, F> {
    /// Initialize at a Hopf point with angular frequency `omega`.
    pub fn at_point(
        family: &'a F,
        x: &DVector<f64>,
        p: &DVector<f64>,
        omega: f64,
    ) -> Result<(Self, DVector<f64>), BifError> {
        assert_eq!(family.n_params(), 2, "Hopf curve needs two axes");
        let n = family.dim();
        let j = family.jac_x_scaled(x, p);
        let qc = complex_null_vector(&j, Complex::new(0.0, omega))
            .ok_or(BifError::IllConditioned)?;
        let qr: DVector<f64> = qc.map(|z| z.re);
        let qi: DVector<f64> = qc.map(|z| z.im);
        let qr_norm = qr.norm();
        if qr_norm < 1e-12 {
            return Err(BifError::IllConditioned);
        }
        let q0 = qr / qr_norm;
        let mut c2 = &qi - qi.dot(&q0) * &q0;
        let c2_norm = c2.norm();
        if c2_norm < 1e-12 {
            // Degenerate eigenplane sample; fall back to J q0.
            c2 = &j * &q0;
            c2 -= c2.dot(&q0) * &q0;
        }
        c2 = c2.normalize();
        let kappa = omega * omega;
        let sys = HopfCurveSystem {
            family,
            refs: RefCell::new((q0.clone(), c2)),
            kappa_scale: kappa.abs().max(1.0),
        };
        let mut u0 = DVector::zeros(2 * n + 3);
        u0.rows_mut(0, n).copy_from(x);
        u0.rows_mut(n, n).copy_from(&q0);
        u0[2 * n] = kappa;
        u0.rows_mut(2 * n + 1, 2).copy_from(p);
        Ok((sys, u0))
    }

    pub fn unpack<'u>(
        &self,
        u: &'u DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, f64, DVector<f64>) {
        let n = self.family.dim();
        (
            u.rows(0, n).into_owned(),
            u.rows(n, n).into_owned(),
            u[2 * n],
            u.rows(2 * n + 1, 2).into_owned(),
        )
    }

    /// `kappa = omega^2` at the given unknowns.
    pub fn kappa(&self, u: &DVector<f64>) -> f64 {
        u[2 * self.family.dim()]
    }
}

impl<F: OdeFamily> ExtendedSystem for HopfCurveSystem<'_, F> {
    fn dim(&self) -> usize {
        2 * self.family.dim() + 3
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.family.dim();
        let (x, q, kappa, p) = self.unpack(u);
        let j = self.family.jac_x_scaled(&x, &p);
        let (c1, c2) = self.refs.borrow().clone();
        let mut r = DVector::zeros(2 * n + 2);
        r.rows_mut(0, n).copy_from(&self.family.f(&x, &p));
        let jq = &j * &q;
        let jjq = &j * &jq;
        r.rows_mut(n, n).copy_from(&(jjq + kappa * &q));
        r[2 * n] = c1.dot(&q) - 1.0;
        r[2 * n + 1] = c2.dot(&q);
        r
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.family.dim();
        let (x, q, kappa, p) = self.unpack(u);
        let j_state = self.family.jac_x_scaled(&x, &p);
        let (c1, c2) = self.refs.borrow().clone();
        let mut j = DMatrix::zeros(2 * n + 2, 2 * n + 3);

        // f rows: analytic in x and p.
        j.view_mut((0, 0), (n, n)).copy_from(&self.family.jac_x(&x, &p));
        j.view_mut((0, 2 * n + 1), (n, 2))
            .copy_from(&self.family.jac_p(&x, &p));

        // Eigenplane rows: analytic in q and kappa.
        let jj = &j_state * &j_state;
        for r in 0..n {
            for c in 0..n {
                j[(n + r, n + c)] = jj[(r, c)] + if r == c { kappa } else { 0.0 };
            }
            j[(n + r, 2 * n)] = q[r];
        }
        // Eigenplane rows: finite differences in x and p.
        let s_scales = self.family.state_scales();
        let p_scales = self.family.param_scales();
        let eig_rows = |x: &DVector<f64>, p: &DVector<f64>| -> DVector<f64> {
            let jm = self.family.jac_x_scaled(x, p);
            let jq = &jm * &q;
            &jm * &jq + kappa * &q
        };
        for col in 0..n {
            let h = 1e-6 * s_scales[col].max(1e-12);
            let mut up = x.clone();
            let mut um = x.clone();
            up[col] += h;
            um[col] -= h;
            let d = (eig_rows(&up, &p) - eig_rows(&um, &p)) / (2.0 * h);
            j.view_mut((n, col), (n, 1)).copy_from(&d);
        }
        for col in 0..2 {
            let h = 1e-6 * p_scales[col].max(1e-12);
            let mut up = p.clone();
            let mut um = p.clone();
            up[col] += h;
            um[col] -= h;
            let d = (eig_rows(&x, &up) - eig_rows(&x, &um)) / (2.0 * h);
            j.view_mut((n, 2 * n + 1 + col), (n, 1)).copy_from(&d);
        }

        // Normalization rows.
        for c in 0..n {
            j[(2 * n, n + c)] = c1[c];
            j[(2 * n + 1, n + c)] = c2[c];
        }
        j
    }

    fn scales(&self) -> DVector<f64> {
        let n = self.family.dim();
        let mut s = DVector::from_element(2 * n + 3, 1.0);
        s.rows_mut(0, n).copy_from(&self.family.state_scales());
        s[2 * n] = self.kappa_scale;
        s.rows_mut(2 * n + 1, 2).copy_from(&self.family.param_scales());
        s
    }

    fn residual_scales(&self) -> DVector<f64> {
        let n = self.family.dim();
        let mut s = DVector::from_element(2 * n + 2, 1.0);
        s.rows_mut(0, n).copy_from(&self.family.f_scales());
        for r in n..2 * n {
            s[r] = self.kappa_scale;
        }
        s
    }

    fn eigenvalues(&self, u: &DVector<f64>) -> Option<Vec<Complex64>> {
        let (x, _, _, p) = self.unpack(u);
        eigen_spectrum(&self.family.jac_x_scaled(&x, &p)).ok()
    }

    fn in_window(&self, u: &DVector<f64>) -> bool {
        let (_, _, _, p) = self.unpack(u);
        self.family.in_window(&p)
    }

    fn on_accept(&self, u: &DVector<f64>) {
        let (x, q, _, p) = self.unpack(u);
        let qn = q.norm();
        if qn < 1e-12 {
            return;
        }
        let q0 = q / qn;
        let j = self.family.jac_x_scaled(&x, &p);
        let mut c2 = &j * &q0;
        c2 -= c2.dot(&q0) * &q0;
        let c2n = c2.norm();
        if c2n > 1e-12 {
            *self.refs.borrow_mut() = (q0.clone() / qn, c2 / c2n);
        }
    }
}

/// Continue the Hopf curve through the Hopf point at `(x, p)` with angular
/// frequency `omega`.
pub fn continue_hopf_curve<'a, F: OdeFamily>(
    family: &'a F,
    x: &DVector<f64>,
    p: &DVector<f64>,
    omega: f64,
    cfg: &ContinuationConfig,
) -> Result<(Branch, HopfCurveSystem<'a, F>), BifError> {
    let (sys, u0) = HopfCurveSystem::at_point(family, x, p, omega)?;
    let branch = continue_branch(&sys, &u0, cfg)?;
    Ok((branch, sys))
}

/// Approximate null vector of `J - lambda I` by shifted inverse iteration.
pub(crate) fn complex_null_vector(
    j: &DMatrix<f64>,
    lambda: Complex64,
) -> Option<DVector<Complex64>> {
    let n = j.nrows();
    let jc: DMatrix<Complex64> = j.map(|v| Complex::new(v, 0.0));
    let shift = lambda + Complex::new(j.norm() * 1e-9 + 1e-300, 0.0);
    let lu = (&jc - DMatrix::from_diagonal_element(n, n, shift)).lu();
    let mut v = DVector::from_fn(n, |i, _| Complex::new(1.0 + 0.61 * i as f64, -0.2));
    for _ in 0..4 {
        let w = lu.solve(&v)?;
        let norm = w.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return None;
        }
        v = w / Complex::new(norm, 0.0);
    }
    Some(v)
}
