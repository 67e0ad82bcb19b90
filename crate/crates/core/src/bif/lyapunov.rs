//! First Lyapunov coefficient at Hopf points via the projection method, with
//! the multilinear forms built from directional finite differences.
//!
//! All computations run in similarity-scaled state coordinates, so the
//! coefficient's magnitude depends on the scaling but its sign (the part that
//! classifies the Hopf as super- or subcritical) does not.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;

use super::family::OdeFamily;
use super::systems::complex_null_vector;
use super::BifError;

/// Vector field in scaled coordinates centered on `x0`:
/// `g(y) = D^-1 f(x0 + D y, p)` with `D` the state scales.
fn g_eval<F: OdeFamily>(
    fam: &F,
    x0: &DVector<f64>,
    p: &DVector<f64>,
    y: &DVector<f64>,
) -> DVector<f64> {
    let d = fam.state_scales();
    let x = DVector::from_fn(x0.len(), |i, _| x0[i] + d[i] * y[i]);
    fam.f(&x, p).component_div(&d)
}

const H2: f64 = 1e-4;
const H3: f64 = 1e-3;

/// Quadratic directional difference `B(v, v)` of the scaled field.
fn b_diag<F: OdeFamily>(
    fam: &F,
    x0: &DVector<f64>,
    p: &DVector<f64>,
    g0: &DVector<f64>,
    v: &DVector<f64>,
) -> DVector<f64> {
    let plus = g_eval(fam, x0, p, &(H2 * v));
    let minus = g_eval(fam, x0, p, &(-H2 * v));
    (plus + minus - 2.0 * g0) / (H2 * H2)
}

/// Symmetric bilinear form `B(a, b)` by polarization.
pub(crate) fn bilinear<F: OdeFamily>(
    fam: &F,
    x0: &DVector<f64>,
    p: &DVector<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> DVector<f64> {
    let g0 = g_eval(fam, x0, p, &DVector::zeros(x0.len()));
    (b_diag(fam, x0, p, &g0, &(a + b)) - b_diag(fam, x0, p, &g0, &(a - b))) / 4.0
}

/// Cubic directional difference `C(v, v, v)` at step `h`, second order.
fn c_diag_at<F: OdeFamily>(
    fam: &F,
    x0: &DVector<f64>,
    p: &DVector<f64>,
    v: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let p2 = g_eval(fam, x0, p, &(2.0 * h * v));
    let p1 = g_eval(fam, x0, p, &(h * v));
    let m1 = g_eval(fam, x0, p, &(-h * v));
    let m2 = g_eval(fam, x0, p, &(-2.0 * h * v));
    (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h)
}

/// Cubic directional difference `C(v, v, v)`, Richardson-extrapolated to
/// fourth order so quintic terms of the field do not bias the coefficient.
fn c_diag<F: OdeFamily>(
    fam: &F,
    x0: &DVector<f64>,
    p: &DVector<f64>,
    v: &DVector<f64>,
) -> DVector<f64> {
    let coarse = c_diag_at(fam, x0, p, v, H3);
    let fine = c_diag_at(fam, x0, p, v, 0.5 * H3);
    (fine * 4.0 - coarse) / 3.0
}

/// Symmetric trilinear form `C(a, a, b)`.
fn trilinear_aab<F: OdeFamily>(
    fam: &F,
    x0: &DVector<f64>,
    p: &DVector<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> DVector<f64> {
    (c_diag(fam, x0, p, &(a + b)) - c_diag(fam, x0, p, &(a - b)) - 2.0 * c_diag(fam, x0, p, b))
        / 6.0
}

/// First Lyapunov coefficient of the Hopf point at `(x, p)` with angular
/// frequency `omega`, in scaled coordinates. Negative means supercritical
/// (stable cycle born), positive subcritical.
pub fn first_lyapunov_coeff<F: OdeFamily>(
    fam: &F,
    x: &DVector<f64>,
    p: &DVector<f64>,
    omega: f64,
) -> Result<f64, BifError> {
    let n = fam.dim();
    let a = fam.jac_x_scaled(x, p);

    let mut q = complex_null_vector(&a, Complex::new(0.0, omega)).ok_or(BifError::IllConditioned)?;
    let qn = q.norm();
    if !(qn.is_finite() && qn > 0.0) {
        return Err(BifError::IllConditioned);
    }
    q /= Complex::new(qn, 0.0);
    let mut pl = complex_null_vector(&a.transpose(), Complex::new(0.0, -omega))
        .ok_or(BifError::IllConditioned)?;
    let ip = pl.dotc(&q);
    if ip.norm() < 1e-12 {
        return Err(BifError::IllConditioned);
    }
    pl /= ip.conj();

    let u: DVector<f64> = q.map(|z| z.re);
    let v: DVector<f64> = q.map(|z| z.im);

    // Real expansions of the complex multilinear forms.
    let b_uu = bilinear(fam, x, p, &u, &u);
    let b_vv = bilinear(fam, x, p, &v, &v);
    let b_uv = bilinear(fam, x, p, &u, &v);
    let b_qq: DVector<Complex64> =
        DVector::from_fn(n, |i, _| Complex::new(b_uu[i] - b_vv[i], 2.0 * b_uv[i]));
    let b_qqbar = &b_uu + &b_vv;

    let c_uuu = trilinear_aab(fam, x, p, &u, &u);
    let c_vvu = trilinear_aab(fam, x, p, &v, &u);
    let c_uuv = trilinear_aab(fam, x, p, &u, &v);
    let c_vvv = trilinear_aab(fam, x, p, &v, &v);
    let c_qqqbar: DVector<Complex64> =
        DVector::from_fn(n, |i, _| Complex::new(c_uuu[i] + c_vvu[i], c_uuv[i] + c_vvv[i]));

    // s = A^-1 B(q, qbar)  (real solve; A is nonsingular away from folds).
    let s = a
        .clone()
        .lu()
        .solve(&b_qqbar)
        .ok_or(BifError::IllConditioned)?;
    let b_us = bilinear(fam, x, p, &u, &s);
    let b_vs = bilinear(fam, x, p, &v, &s);
    let b_q_s: DVector<Complex64> = DVector::from_fn(n, |i, _| Complex::new(b_us[i], b_vs[i]));

    // r = (2 i omega I - A)^-1 B(q, q)  (complex solve).
    let ac: DMatrix<Complex64> = a.map(|x| Complex::new(x, 0.0));
    let shift = DMatrix::from_diagonal_element(n, n, Complex::new(0.0, 2.0 * omega));
    let r = (shift - ac)
        .lu()
        .solve(&b_qq)
        .ok_or(BifError::IllConditioned)?;
    // B(qbar, r) with qbar = u - i v and complex r, by bilinearity.
    let r_re: DVector<f64> = r.map(|z| z.re);
    let r_im: DVector<f64> = r.map(|z| z.im);
    let b_u_rre = bilinear(fam, x, p, &u, &r_re);
    let b_u_rim = bilinear(fam, x, p, &u, &r_im);
    let b_v_rre = bilinear(fam, x, p, &v, &r_re);
    let b_v_rim = bilinear(fam, x, p, &v, &r_im);
    let b_qbar_r: DVector<Complex64> = DVector::from_fn(n, |i, _| {
        Complex::new(b_u_rre[i] + b_v_rim[i], b_u_rim[i] - b_v_rre[i])
    });

    let t1 = pl.dotc(&c_qqqbar);
    let t2 = pl.dotc(&b_q_s) * Complex::new(2.0, 0.0);
    let t3 = pl.dotc(&b_qbar_r);
    Ok((t1 - t2 + t3).re / (2.0 * omega))
}
