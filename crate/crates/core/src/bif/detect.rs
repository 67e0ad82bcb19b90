//! Event detection along continuation branches: scalar test functions are
//! sampled at accepted points, sign changes are bracketed, and each bracket
//! is bisected with corrector steps constrained to the secant hyperplane so
//! the refined point stays on the curve even across folds.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::solver::{
    eigen_spectrum, refine_between, Branch, BranchEvent, ContinuationConfig, ExtendedSystem,
};

use super::family::OdeFamily;
use super::lyapunov::{bilinear, first_lyapunov_coeff};
use super::systems::{split_u, EquilibriumSystem, FoldCurveSystem, HopfCurveSystem};
use super::{BifurcationKind, BifurcationPoint};

/// Parameter tolerance for refined event locations.
const PARAM_TOL: f64 = 1e-8;

/// Largest |Re| the critical eigenvalue of the scaled Jacobian may have at a
/// refined event. Rank-based test functions jump when a complex pair merges
/// onto the real axis (or splits off it); bisection then converges onto the
/// jump instead of a zero, and this cap rejects such spurious events. Genuine
/// crossings land well below it even when the crossing is steep (bisection
/// stops on parameter width, not on the eigenvalue itself), while ordering
/// jumps leave the eigenvalue at the merge value, which is O(10) and up for
/// the scaled Jacobian.
const CRITICAL_EIG_TOL: f64 = 1.0;

/// Indices `i` such that `values[i]` and `values[i + 1]` are finite and have
/// strictly opposite signs.
pub fn locate_sign_changes(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..values.len().saturating_sub(1) {
        let (a, b) = (values[i], values[i + 1]);
        if a.is_finite() && b.is_finite() && a * b < 0.0 {
            out.push(i);
        }
    }
    out
}

/// Split a spectrum into real eigenvalues (their real parts, descending) and
/// complex upper-half-plane representatives (descending by real part).
fn split_spectrum(eigs: &[Complex64]) -> (Vec<f64>, Vec<Complex64>) {
    let mut reals = Vec::new();
    let mut pairs = Vec::new();
    for &l in eigs {
        if l.im.abs() <= 1e-6 * (1.0 + l.norm()) {
            reals.push(l.re);
        } else if l.im > 0.0 {
            pairs.push(l);
        }
    }
    reals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    pairs.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    (reals, pairs)
}

/// Bisect a sign change of `test` between branch points `a` and `b`,
/// re-correcting interpolants onto the curve. `tol_cols` lists unknown
/// indices (with their scales) whose bracket width must shrink below the
/// parameter tolerance.
fn bisect_event<S: ExtendedSystem + ?Sized>(
    sys: &S,
    a: &DVector<f64>,
    b: &DVector<f64>,
    va: f64,
    test: &mut dyn FnMut(&DVector<f64>) -> Option<f64>,
    tol_cols: &[(usize, f64)],
    cfg: &ContinuationConfig,
) -> Option<DVector<f64>> {
    let mut t_lo = 0.0;
    let mut t_hi = 1.0;
    let mut u_lo = a.clone();
    let mut u_hi = b.clone();
    let mut best: Option<DVector<f64>> = None;
    for _ in 0..80 {
        let converged = tol_cols
            .iter()
            .all(|&(c, s)| (u_hi[c] - u_lo[c]).abs() <= PARAM_TOL * s.max(1e-12));
        if converged && best.is_some() {
            break;
        }
        let t_mid = 0.5 * (t_lo + t_hi);
        let u_mid = refine_between(sys, a, b, t_mid, cfg)?;
        let v_mid = test(&u_mid).filter(|v| v.is_finite())?;
        best = Some(u_mid.clone());
        if v_mid == 0.0 {
            break;
        }
        if (v_mid > 0.0) == (va > 0.0) {
            t_lo = t_mid;
            u_lo = u_mid;
        } else {
            t_hi = t_mid;
            u_hi = u_mid;
        }
    }
    best
}

fn push_unique(
    out: &mut Vec<BifurcationPoint>,
    events: &mut Vec<BranchEvent>,
    pt: BifurcationPoint,
    scales: &[f64],
) {
    let dup = out.iter().any(|q| {
        q.kind == pt.kind
            && q.location
                .iter()
                .zip(pt.location.iter())
                .zip(scales.iter())
                .all(|((a, b), s)| (a - b).abs() <= 1e-6 * s.max(1e-12))
    });
    if !dup {
        events.push(BranchEvent {
            index: pt.branch_index,
            kind: pt.kind.label().to_string(),
        });
        out.push(pt);
    }
}

/// Saddle-node and Hopf events along a one-parameter equilibrium branch.
///
/// Test functions are eigenvalue-rank based: the `j`-th largest real
/// eigenvalue crossing zero marks a fold, the `j`-th complex pair's real part
/// crossing zero marks a Hopf. Refined points are appended to
/// `branch.events` and returned with their normal-form diagnostics.
pub fn detect_codim1<F: OdeFamily>(
    family: &F,
    branch: &mut Branch,
    cfg: &ContinuationConfig,
) -> Vec<BifurcationPoint> {
    assert_eq!(family.n_params(), 1, "codim-1 scan needs one axis");
    let sys = EquilibriumSystem::new(family);
    let n = family.dim();
    let p_scale = family.param_scales()[0];
    let mut out = Vec::new();
    let mut events = Vec::new();

    let spectrum = |u: &DVector<f64>| -> Option<Vec<Complex64>> {
        let (x, p) = split_u(u, n);
        eigen_spectrum(&family.jac_x_scaled(&x, &p)).ok()
    };

    for i in 0..branch.points.len().saturating_sub(1) {
        let (ea, eb) = match (&branch.points[i].eigenvalues, &branch.points[i + 1].eigenvalues) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => continue,
        };
        let (ra, pa) = split_spectrum(&ea);
        let (rb, pb) = split_spectrum(&eb);
        let (ua, ub) = (&branch.points[i].u, &branch.points[i + 1].u);

        for j in 0..ra.len().min(rb.len()) {
            if ra[j] * rb[j] < 0.0 {
                let mut test = |u: &DVector<f64>| -> Option<f64> {
                    let (r, _) = split_spectrum(&spectrum(u)?);
                    r.get(j).copied()
                };
                if let Some(u) = bisect_event(&sys, ua, ub, ra[j], &mut test, &[(n, p_scale)], cfg)
                {
                    let (x, p) = split_u(&u, n);
                    let eigs = spectrum(&u).unwrap_or_default();
                    let crit = eigs
                        .iter()
                        .filter(|l| l.im.abs() <= 1e-6 * (1.0 + l.norm()))
                        .min_by(|a, b| a.re.abs().partial_cmp(&b.re.abs()).unwrap())
                        .copied();
                    if !crit.is_some_and(|l| l.re.abs() <= CRITICAL_EIG_TOL) {
                        continue;
                    }
                    push_unique(
                        &mut out,
                        &mut events,
                        BifurcationPoint {
                            kind: BifurcationKind::SaddleNode,
                            location: p.iter().copied().collect(),
                            state: x.iter().copied().collect(),
                            critical_eigenvalues: crit.into_iter().collect(),
                            hopf_frequency: None,
                            l1: None,
                            branch_index: i,
                        },
                        &[p_scale],
                    );
                }
            }
        }

        for j in 0..pa.len().min(pb.len()) {
            if pa[j].re * pb[j].re < 0.0 {
                let mut test = |u: &DVector<f64>| -> Option<f64> {
                    let (_, pr) = split_spectrum(&spectrum(u)?);
                    pr.get(j).map(|l| l.re)
                };
                if let Some(u) =
                    bisect_event(&sys, ua, ub, pa[j].re, &mut test, &[(n, p_scale)], cfg)
                {
                    let (x, p) = split_u(&u, n);
                    let eigs = spectrum(&u).unwrap_or_default();
                    let crit = eigs
                        .iter()
                        .filter(|l| l.im > 0.0)
                        .min_by(|a, b| a.re.abs().partial_cmp(&b.re.abs()).unwrap())
                        .copied();
                    if !crit.is_some_and(|l| l.re.abs() <= CRITICAL_EIG_TOL) {
                        continue;
                    }
                    let omega = crit.map(|l| l.im);
                    let l1 = omega
                        .and_then(|w| first_lyapunov_coeff(family, &x, &p, w).ok());
                    let crit_pair: Vec<Complex64> = crit
                        .into_iter()
                        .flat_map(|l| [l, l.conj()])
                        .collect();
                    push_unique(
                        &mut out,
                        &mut events,
                        BifurcationPoint {
                            kind: BifurcationKind::Hopf,
                            location: p.iter().copied().collect(),
                            state: x.iter().copied().collect(),
                            critical_eigenvalues: crit_pair,
                            hopf_frequency: omega,
                            l1,
                            branch_index: i,
                        },
                        &[p_scale],
                    );
                }
            }
        }
    }

    branch.events.extend(events);
    out.sort_by(|a, b| a.branch_index.cmp(&b.branch_index));
    out
}

/// Unit right and left null vectors of the scaled state Jacobian, from its
/// smallest singular triple.
fn null_vectors<F: OdeFamily>(
    fam: &F,
    x: &DVector<f64>,
    p: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let j = fam.jac_x_scaled(x, p);
    let svd = j.svd(true, true);
    let idx = svd.singular_values.imin();
    let right = svd.v_t.as_ref()?.row(idx).transpose();
    let left = svd.u.as_ref()?.column(idx).into_owned();
    Some((right, left))
}

/// Quadratic normal-form test on a fold curve: `<p, B(q, q)>` with `q`, `p`
/// the right and left null vectors normalized to `|q| = 1`, `<p, q> = 1`.
/// The value is odd in `q`, whose sign the SVD picks arbitrarily, so the
/// caller supplies the previous `q` along the curve and this function keeps
/// the orientation consistent with it. Returns the test value together with
/// the oriented `q` to thread into the next evaluation.
fn cusp_value<F: OdeFamily>(
    fam: &F,
    u: &DVector<f64>,
    ref_q: Option<&DVector<f64>>,
) -> Option<(f64, DVector<f64>)> {
    let n = fam.dim();
    let (x, p) = split_u(u, n);
    let (mut q, left) = null_vectors(fam, &x, &p)?;
    if let Some(r) = ref_q {
        if q.dot(r) < 0.0 {
            q = -q;
        }
    }
    let pq = left.dot(&q);
    if pq.abs() < 1e-10 {
        return None;
    }
    let pl = left / pq;
    let bqq = bilinear(fam, &x, &p, &q, &q);
    Some((pl.dot(&bqq), q))
}

fn fold_point_diag<F: OdeFamily>(
    fam: &F,
    u: &DVector<f64>,
    kind: BifurcationKind,
    branch_index: usize,
) -> BifurcationPoint {
    let n = fam.dim();
    let (x, p) = split_u(u, n);
    let eigs = eigen_spectrum(&fam.jac_x_scaled(&x, &p)).unwrap_or_default();
    let mut sorted = eigs.clone();
    sorted.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    let crit: Vec<Complex64> = sorted.into_iter().take(2).collect();
    BifurcationPoint {
        kind,
        location: p.iter().copied().collect(),
        state: x.iter().copied().collect(),
        critical_eigenvalues: crit,
        hopf_frequency: None,
        l1: None,
        branch_index,
    }
}

/// Cusp points along a two-parameter fold curve.
pub fn detect_cusp<F: OdeFamily>(
    sys: &FoldCurveSystem<'_, F>,
    branch: &mut Branch,
    cfg: &ContinuationConfig,
) -> Vec<BifurcationPoint> {
    let fam = sys.family;
    let n = fam.dim();
    let p_scales = fam.param_scales();
    let tol_cols = [(n, p_scales[0]), (n + 1, p_scales[1])];
    let mut values = Vec::with_capacity(branch.points.len());
    let mut oriented: Vec<Option<DVector<f64>>> = Vec::with_capacity(branch.points.len());
    let mut prev_q: Option<DVector<f64>> = None;
    for pt in &branch.points {
        match cusp_value(fam, &pt.u, prev_q.as_ref()) {
            Some((v, q)) => {
                values.push(v);
                prev_q = Some(q.clone());
                oriented.push(Some(q));
            }
            None => {
                values.push(f64::NAN);
                oriented.push(None);
            }
        }
    }

    let mut out = Vec::new();
    let mut events = Vec::new();
    for i in locate_sign_changes(&values) {
        let ref_q = oriented[i].clone();
        let mut test =
            |u: &DVector<f64>| cusp_value(fam, u, ref_q.as_ref()).map(|(v, _)| v);
        if let Some(u) = bisect_event(
            sys,
            &branch.points[i].u,
            &branch.points[i + 1].u,
            values[i],
            &mut test,
            &tol_cols,
            cfg,
        ) {
            push_unique(
                &mut out,
                &mut events,
                fold_point_diag(fam, &u, BifurcationKind::Cusp, i),
                p_scales.as_slice(),
            );
        }
    }
    branch.events.extend(events);
    out
}

/// Real eigenvalues with the near-zero fold eigenvalue removed, descending.
fn reals_excluding_fold(eigs: &[Complex64]) -> Vec<f64> {
    let (mut reals, _) = split_spectrum(eigs);
    if let Some(idx) = reals
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
        .map(|(i, _)| i)
    {
        reals.remove(idx);
    }
    reals
}

/// Bogdanov-Takens points along a fold curve: a second real eigenvalue joins
/// the fold eigenvalue at zero.
pub fn detect_bt<F: OdeFamily>(
    sys: &FoldCurveSystem<'_, F>,
    branch: &mut Branch,
    cfg: &ContinuationConfig,
) -> Vec<BifurcationPoint> {
    let fam = sys.family;
    let n = fam.dim();
    let p_scales = fam.param_scales();
    let tol_cols = [(n, p_scales[0]), (n + 1, p_scales[1])];
    let mut out = Vec::new();
    let mut events = Vec::new();

    let spectrum = |u: &DVector<f64>| -> Option<Vec<Complex64>> {
        let (x, p) = split_u(u, n);
        eigen_spectrum(&fam.jac_x_scaled(&x, &p)).ok()
    };

    for i in 0..branch.points.len().saturating_sub(1) {
        let (ea, eb) = match (&branch.points[i].eigenvalues, &branch.points[i + 1].eigenvalues) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => continue,
        };
        let ra = reals_excluding_fold(&ea);
        let rb = reals_excluding_fold(&eb);
        for j in 0..ra.len().min(rb.len()) {
            if ra[j] * rb[j] < 0.0 {
                let mut test = |u: &DVector<f64>| -> Option<f64> {
                    reals_excluding_fold(&spectrum(u)?).get(j).copied()
                };
                if let Some(u) = bisect_event(
                    sys,
                    &branch.points[i].u,
                    &branch.points[i + 1].u,
                    ra[j],
                    &mut test,
                    &tol_cols,
                    cfg,
                ) {
                    let genuine = spectrum(&u).is_some_and(|eigs| {
                        reals_excluding_fold(&eigs)
                            .iter()
                            .any(|r| r.abs() <= CRITICAL_EIG_TOL)
                    });
                    if !genuine {
                        continue;
                    }
                    push_unique(
                        &mut out,
                        &mut events,
                        fold_point_diag(fam, &u, BifurcationKind::BogdanovTakens, i),
                        p_scales.as_slice(),
                    );
                }
            }
        }
    }
    branch.events.extend(events);
    out
}

/// Bogdanov-Takens points along a Hopf curve: the tracked `kappa = omega^2`
/// crosses zero.
pub fn detect_bt_on_hopf<F: OdeFamily>(
    sys: &HopfCurveSystem<'_, F>,
    branch: &mut Branch,
    cfg: &ContinuationConfig,
) -> Vec<BifurcationPoint> {
    let fam = sys.family;
    let n = fam.dim();
    let p_scales = fam.param_scales();
    let tol_cols = [(2 * n + 1, p_scales[0]), (2 * n + 2, p_scales[1])];
    let values: Vec<f64> = branch.points.iter().map(|pt| sys.kappa(&pt.u)).collect();

    let mut out = Vec::new();
    let mut events = Vec::new();
    for i in locate_sign_changes(&values) {
        let mut test = |u: &DVector<f64>| Some(sys.kappa(u));
        if let Some(u) = bisect_event(
            sys,
            &branch.points[i].u,
            &branch.points[i + 1].u,
            values[i],
            &mut test,
            &tol_cols,
            cfg,
        ) {
            let (x, _, _, p) = sys.unpack(&u);
            let eigs = eigen_spectrum(&fam.jac_x_scaled(&x, &p)).unwrap_or_default();
            let mut sorted = eigs;
            sorted.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
            push_unique(
                &mut out,
                &mut events,
                BifurcationPoint {
                    kind: BifurcationKind::BogdanovTakens,
                    location: p.iter().copied().collect(),
                    state: x.iter().copied().collect(),
                    critical_eigenvalues: sorted.into_iter().take(2).collect(),
                    hopf_frequency: Some(0.0),
                    l1: None,
                    branch_index: i,
                },
                p_scales.as_slice(),
            );
        }
    }
    branch.events.extend(events);
    out
}

/// Fold-Hopf points along a Hopf curve: the state Jacobian's determinant
/// changes sign while the critical pair stays imaginary. Brackets where
/// `kappa` also crosses zero are Bogdanov-Takens points and are skipped
/// (the critical pair's product contributes exactly `kappa` to the
/// determinant, so the determinant flips there too).
pub fn detect_fold_hopf<F: OdeFamily>(
    sys: &HopfCurveSystem<'_, F>,
    branch: &mut Branch,
    cfg: &ContinuationConfig,
) -> Vec<BifurcationPoint> {
    let fam = sys.family;
    let n = fam.dim();
    let p_scales = fam.param_scales();
    let tol_cols = [(2 * n + 1, p_scales[0]), (2 * n + 2, p_scales[1])];

    let det = |u: &DVector<f64>| -> Option<f64> {
        let (x, _, _, p) = sys.unpack(u);
        let d = fam.jac_x_scaled(&x, &p).determinant();
        d.is_finite().then_some(d)
    };
    let values: Vec<f64> = branch
        .points
        .iter()
        .map(|pt| det(&pt.u).unwrap_or(f64::NAN))
        .collect();
    let kappas: Vec<f64> = branch.points.iter().map(|pt| sys.kappa(&pt.u)).collect();

    let mut out = Vec::new();
    let mut events = Vec::new();
    for i in locate_sign_changes(&values) {
        if kappas[i] * kappas[i + 1] < 0.0 {
            continue;
        }
        let mut test = |u: &DVector<f64>| det(u);
        if let Some(u) = bisect_event(
            sys,
            &branch.points[i].u,
            &branch.points[i + 1].u,
            values[i],
            &mut test,
            &tol_cols,
            cfg,
        ) {
            let (x, _, kappa, p) = sys.unpack(&u);
            let omega = kappa.max(0.0).sqrt();
            let eigs = eigen_spectrum(&fam.jac_x_scaled(&x, &p)).unwrap_or_default();
            let mut crit: Vec<Complex64> = eigs
                .iter()
                .filter(|l| l.im.abs() <= 1e-6 * (1.0 + l.norm()))
                .min_by(|a, b| a.re.abs().partial_cmp(&b.re.abs()).unwrap())
                .into_iter()
                .copied()
                .collect();
            if let Some(pair) = eigs
                .iter()
                .filter(|l| l.im > 0.0)
                .min_by(|a, b| a.re.abs().partial_cmp(&b.re.abs()).unwrap())
            {
                crit.push(*pair);
                crit.push(pair.conj());
            }
            push_unique(
                &mut out,
                &mut events,
                BifurcationPoint {
                    kind: BifurcationKind::FoldHopf,
                    location: p.iter().copied().collect(),
                    state: x.iter().copied().collect(),
                    critical_eigenvalues: crit,
                    hopf_frequency: Some(omega),
                    l1: None,
                    branch_index: i,
                },
                p_scales.as_slice(),
            );
        }
    }
    branch.events.extend(events);
    out
}

/// Generalized Hopf (Bautin) points along a Hopf curve: the first Lyapunov
/// coefficient changes sign on the oscillatory part of the curve.
pub fn detect_gh<F: OdeFamily>(
    sys: &HopfCurveSystem<'_, F>,
    branch: &mut Branch,
    cfg: &ContinuationConfig,
) -> Vec<BifurcationPoint> {
    let fam = sys.family;
    let n = fam.dim();
    let p_scales = fam.param_scales();
    let tol_cols = [(2 * n + 1, p_scales[0]), (2 * n + 2, p_scales[1])];

    let l1_at = |u: &DVector<f64>| -> Option<f64> {
        let (x, _, kappa, p) = sys.unpack(u);
        if kappa <= 0.0 {
            return None;
        }
        first_lyapunov_coeff(fam, &x, &p, kappa.sqrt()).ok()
    };
    let values: Vec<f64> = branch
        .points
        .iter()
        .map(|pt| l1_at(&pt.u).unwrap_or(f64::NAN))
        .collect();

    let mut out = Vec::new();
    let mut events = Vec::new();
    for i in locate_sign_changes(&values) {
        let mut test = |u: &DVector<f64>| l1_at(u);
        if let Some(u) = bisect_event(
            sys,
            &branch.points[i].u,
            &branch.points[i + 1].u,
            values[i],
            &mut test,
            &tol_cols,
            cfg,
        ) {
            let (x, _, kappa, p) = sys.unpack(&u);
            let omega = kappa.max(0.0).sqrt();
            let crit = vec![
                Complex64::new(0.0, omega),
                Complex64::new(0.0, -omega),
            ];
            push_unique(
                &mut out,
                &mut events,
                BifurcationPoint {
                    kind: BifurcationKind::GeneralizedHopf,
                    location: p.iter().copied().collect(),
                    state: x.iter().copied().collect(),
                    critical_eigenvalues: crit,
                    hopf_frequency: Some(omega),
                    l1: l1_at(&u),
                    branch_index: i,
                },
                p_scales.as_slice(),
            );
        }
    }
    branch.events.extend(events);
    out
}
