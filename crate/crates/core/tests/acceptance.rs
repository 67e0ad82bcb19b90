//! End-to-end acceptance gate. Each test covers one release criterion and
//! prints a single pass/fail line (run with `--nocapture` to see them).

use std::sync::Mutex;
use std::time::Instant;

use mfm_core::atlas::{
    batch_classify, metamorphosis_sweep, ClassifyConfig, FamilyLabel, SweepAxis,
};
use mfm_core::bif::{
    continue_equilibrium_branch, continue_fold_curve, continue_hopf_curve,
    continue_periodic_orbit, detect_bt, detect_codim1, detect_cusp, detect_fold_hopf, detect_gh,
    Axis, BifurcationKind, LileyFamily, OdeFamily, ShootingConfig,
};
use mfm_core::model::{
    sample_parameters, state_scales, Modulation, ParameterSet, PlausibilityFilter, StateVector,
};
use mfm_core::solver::{
    eigen_spectrum, equilibria_scan, rk4_step, solve_equilibrium, ContinuationConfig,
};
use mfm_core::spectra::{
    linearize, output_variance, power_ratio, power_spectrum, simulate_stochastic, welch_psd,
    AnestheticTransform, BIPHASIC_THRESHOLD,
};
use mfm_core::stats::{
    information_radius_distance, pca, Histogram, GAMMA_II_BIN_CAP, HISTOGRAM_BINS,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = StateVector::DIM;

/// Serializes the compute-heavy criteria so their wall-clock budgets are
/// measured without contention from sibling tests.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_lock() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the per-criterion verdict even when an assertion unwinds.
struct Criterion {
    name: &'static str,
    start: Instant,
    passed: bool,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion {
            name,
            start: Instant::now(),
            passed: false,
        }
    }

    fn pass(mut self, budget: f64) {
        let elapsed = self.start.elapsed().as_secs_f64();
        self.passed = true;
        println!("criterion {}: PASS ({elapsed:.1} s)", self.name);
        assert!(
            elapsed < budget,
            "criterion {} exceeded its {budget} s budget: {elapsed:.1} s",
            self.name
        );
    }
}

impl Drop for Criterion {
    fn drop(&mut self) {
        if !self.passed {
            println!(
                "criterion {}: FAIL ({:.1} s)",
                self.name,
                self.start.elapsed().as_secs_f64()
            );
        }
    }
}

// Polynomial test systems with closed-form bifurcation sets.

/// `x' = a - x^2`: fold at the origin.
struct FoldNf;

impl OdeFamily for FoldNf {
    fn dim(&self) -> usize {
        1
    }
    fn n_params(&self) -> usize {
        1
    }
    fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, p[0] - x[0] * x[0])
    }
    fn param_window(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0)]
    }
}

/// Planar Hopf normal form `z' = (a + i omega) z + sigma z |z|^2`.
struct HopfNf {
    omega: f64,
    sigma: f64,
}

impl OdeFamily for HopfNf {
    fn dim(&self) -> usize {
        2
    }
    fn n_params(&self) -> usize {
        1
    }
    fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let (a, s, w) = (p[0], self.sigma, self.omega);
        let r2 = x[0] * x[0] + x[1] * x[1];
        DVector::from_row_slice(&[
            a * x[0] - w * x[1] + s * x[0] * r2,
            w * x[0] + a * x[1] + s * x[1] * r2,
        ])
    }
    fn param_window(&self) -> Vec<(f64, f64)> {
        vec![(-0.5, 0.5)]
    }
}

/// `x' = b1 + b2 x - x^3`: cusp at the origin of the fold curve.
struct CuspNf;

impl OdeFamily for CuspNf {
    fn dim(&self) -> usize {
        1
    }
    fn n_params(&self) -> usize {
        2
    }
    fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, p[0] + p[1] * x[0] - x[0] * x[0] * x[0])
    }
    fn param_window(&self) -> Vec<(f64, f64)> {
        vec![(-4.0, 4.0), (-4.0, 4.0)]
    }
}

/// Bogdanov-Takens normal form with the BT point at the origin.
struct BtNf;

impl OdeFamily for BtNf {
    fn dim(&self) -> usize {
        2
    }
    fn n_params(&self) -> usize {
        2
    }
    fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_row_slice(&[
            x[1],
            p[0] + p[1] * x[0] + x[0] * x[0] - x[0] * x[1],
        ])
    }
    fn param_window(&self) -> Vec<(f64, f64)> {
        vec![(-4.0, 4.0), (-4.0, 4.0)]
    }
}

/// Bautin normal form with a generalized Hopf point at the origin.
struct BautinNf {
    omega: f64,
}

impl OdeFamily for BautinNf {
    fn dim(&self) -> usize {
        2
    }
    fn n_params(&self) -> usize {
        2
    }
    fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let w = self.omega;
        let r2 = x[0] * x[0] + x[1] * x[1];
        let gain = p[0] + p[1] * r2 - r2 * r2;
        DVector::from_row_slice(&[gain * x[0] - w * x[1], w * x[0] + gain * x[1]])
    }
    fn param_window(&self) -> Vec<(f64, f64)> {
        vec![(-2.0, 2.0), (-2.0, 2.0)]
    }
}

/// Truncated fold-Hopf normal form with the codim-2 point at the origin.
struct FoldHopfNf {
    omega: f64,
}

impl OdeFamily for FoldHopfNf {
    fn dim(&self) -> usize {
        3
    }
    fn n_params(&self) -> usize {
        2
    }
    fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let w = self.omega;
        let gain = p[1] + x[0];
        DVector::from_row_slice(&[
            p[0] + x[0] * x[0] + x[1] * x[1] + x[2] * x[2],
            gain * x[1] - w * x[2],
            w * x[1] + gain * x[2],
        ])
    }
    fn param_window(&self) -> Vec<(f64, f64)> {
        vec![(-4.0, 4.0), (-4.0, 4.0)]
    }
}

fn slice_family(p: ParameterSet, window: (f64, f64)) -> LileyFamily {
    LileyFamily::new(p, vec![Axis::R], vec![window])
}

fn slice_detections(
    p: &ParameterSet,
    window: (f64, f64),
    cfg: &ContinuationConfig,
) -> Option<(LileyFamily, mfm_core::solver::Branch, Vec<mfm_core::bif::BifurcationPoint>)> {
    let fam = slice_family(*p, window);
    let eq = solve_equilibrium(p, Modulation::IDENTITY, &StateVector::rest_guess()).ok()?;
    let mut branch = continue_equilibrium_branch(&fam, &eq.to_dvector(), 1.0, cfg).ok()?;
    let det = detect_codim1(&fam, &mut branch, cfg);
    Some((fam, branch, det))
}

#[test]
fn criterion_1_normal_form_gallery() {
    let c = Criterion::new("1 (normal-form gallery)");
    let cfg = ContinuationConfig::default();

    // Fold.
    let fam = FoldNf;
    let x0 = DVector::from_element(1, 0.5f64.sqrt());
    let mut branch = continue_equilibrium_branch(&fam, &x0, 0.5, &cfg).unwrap();
    let folds = detect_codim1(&fam, &mut branch, &cfg);
    let sn = folds
        .iter()
        .find(|p| p.kind == BifurcationKind::SaddleNode)
        .expect("fold not detected");
    assert!(sn.location[0].abs() <= 1e-6, "fold at {}", sn.location[0]);

    // Hopf with frequency.
    let fam = HopfNf {
        omega: 2.0,
        sigma: -1.0,
    };
    let mut branch =
        continue_equilibrium_branch(&fam, &DVector::zeros(2), -0.4, &cfg).unwrap();
    let hopfs = detect_codim1(&fam, &mut branch, &cfg);
    let hb = hopfs
        .iter()
        .find(|p| p.kind == BifurcationKind::Hopf)
        .expect("Hopf not detected");
    assert!(hb.location[0].abs() <= 1e-6);
    assert!((hb.hopf_frequency.unwrap() - 2.0).abs() <= 1e-6);

    // Cusp.
    let fam = CuspNf;
    let (mut branch, sys) = continue_fold_curve(
        &fam,
        &DVector::from_element(1, 1.0),
        &DVector::from_row_slice(&[-2.0, 3.0]),
        &cfg,
    )
    .unwrap();
    let cusps = detect_cusp(&sys, &mut branch, &cfg);
    assert_eq!(cusps.len(), 1);
    assert!(cusps[0].location[0].abs() <= 1e-6);
    assert!(cusps[0].location[1].abs() <= 1e-6);

    // Bogdanov-Takens on the fold curve.
    let fam = BtNf;
    let (mut branch, sys) = continue_fold_curve(
        &fam,
        &DVector::from_row_slice(&[1.0, 0.0]),
        &DVector::from_row_slice(&[1.0, -2.0]),
        &cfg,
    )
    .unwrap();
    let bts = detect_bt(&sys, &mut branch, &cfg);
    assert_eq!(bts.len(), 1);
    assert!(bts[0].location[0].abs() <= 1e-6);
    assert!(bts[0].location[1].abs() <= 1e-6);

    // Generalized Hopf.
    let fam = BautinNf { omega: 1.0 };
    let (mut branch, sys) = continue_hopf_curve(
        &fam,
        &DVector::zeros(2),
        &DVector::from_row_slice(&[0.0, -1.0]),
        1.0,
        &cfg,
    )
    .unwrap();
    let ghs = detect_gh(&sys, &mut branch, &cfg);
    assert_eq!(ghs.len(), 1);
    assert!(ghs[0].location[0].abs() <= 1e-6);
    assert!(ghs[0].location[1].abs() <= 1e-6);

    // Fold-Hopf.
    let fam = FoldHopfNf { omega: 1.0 };
    let (mut branch, sys) = continue_hopf_curve(
        &fam,
        &DVector::from_row_slice(&[-1.0, 0.0, 0.0]),
        &DVector::from_row_slice(&[-1.0, 1.0]),
        1.0,
        &cfg,
    )
    .unwrap();
    let fhs = detect_fold_hopf(&sys, &mut branch, &cfg);
    assert_eq!(fhs.len(), 1);
    assert!(fhs[0].location[0].abs() <= 1e-6);
    assert!(fhs[0].location[1].abs() <= 1e-6);

    c.pass(10.0);
}

#[test]
fn criterion_2_oracle_equivalence() {
    let _guard = heavy_lock();
    let c = Criterion::new("2 (oracle equivalence)");
    let cfg = ContinuationConfig::default();
    let (sets, _) = sample_parameters(7, 8, &PlausibilityFilter::default()).unwrap();

    // Analytic Jacobian vs finite differences at 20 random states.
    {
        let p = sets[0];
        let m = Modulation::IDENTITY;
        let scales = state_scales(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let mut x = StateVector::zeros();
            x[0] = rng.gen_range(-90.0..-30.0);
            x[1] = rng.gen_range(-90.0..-30.0);
            for i in 2..DIM {
                x[i] = rng.gen_range(-1.0..1.0) * scales[i];
            }
            let mut dir = DVector::from_fn(DIM, |_, _| rng.gen_range(-1.0..1.0f64));
            dir /= dir.norm();
            let j = mfm_core::model::jacobian(&x, &p, m);
            let scaled_dir = DVector::from_fn(DIM, |i, _| dir[i] * scales[i]);
            let analytic =
                DVector::from_fn(DIM, |i, _| (&j * &scaled_dir)[i] / scales[i]);
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            for i in 0..DIM {
                xp[i] += h * dir[i] * scales[i];
                xm[i] -= h * dir[i] * scales[i];
            }
            let fp = mfm_core::model::rhs(&xp, &p, m).to_dvector();
            let fm = mfm_core::model::rhs(&xm, &p, m).to_dvector();
            let fd = DVector::from_fn(DIM, |i, _| (fp[i] - fm[i]) / (2.0 * h * scales[i]));
            let rel = (&analytic - &fd).norm() / analytic.norm();
            assert!(rel <= 1e-6, "Jacobian mismatch {rel:.3e}");
        }
    }

    // Codim-1 detections vs a dense eigenvalue scan along the branch.
    {
        let mut events = 0;
        for p in sets.iter().take(4) {
            let Some((fam, branch, det)) = slice_detections(p, (0.05, 4.0), &cfg) else {
                continue;
            };
            let n_seg = branch.points.len() - 1;
            let per_seg = (10_000 / n_seg.max(1)).max(2);
            let mut samples: Vec<(f64, usize)> = Vec::new();
            for seg in branch.points.windows(2) {
                for s in 0..per_seg {
                    let t = s as f64 / per_seg as f64;
                    let u = &seg[0].u * (1.0 - t) + &seg[1].u * t;
                    let j = fam.jac_x_scaled(
                        &u.rows(0, DIM).into_owned(),
                        &DVector::from_element(1, u[DIM]),
                    );
                    if let Ok(eigs) = eigen_spectrum(&j) {
                        samples.push((u[DIM], eigs.iter().filter(|l| l.re > 0.0).count()));
                    }
                }
            }
            let mut crossings: Vec<(f64, f64, i64)> = Vec::new();
            for w in samples.windows(2) {
                let delta = w[1].1 as i64 - w[0].1 as i64;
                if delta != 0 {
                    crossings.push((w[0].0.min(w[1].0), w[0].0.max(w[1].0), delta));
                }
            }
            // Cancel tangential grazes the detector rightly ignores.
            let mut i = 0;
            while i + 1 < crossings.len() {
                let (a, b) = (crossings[i], crossings[i + 1]);
                if a.2 == -b.2 && (b.0 - a.1).abs() <= 1e-2 {
                    crossings.drain(i..i + 2);
                    i = i.saturating_sub(1);
                } else {
                    i += 1;
                }
            }
            assert_eq!(det.len(), crossings.len(), "scan mismatch");
            for d in &det {
                let r = d.location[0];
                let hit = crossings
                    .iter()
                    .find(|(lo, hi, _)| {
                        let pad = 1e-6 + 2.0 * (hi - lo);
                        r >= lo - pad && r <= hi + pad
                    })
                    .expect("detection outside every scan bracket");
                let expected = match d.kind {
                    BifurcationKind::SaddleNode => 1,
                    BifurcationKind::Hopf => 2,
                    other => panic!("unexpected codim-1 kind {other:?}"),
                };
                assert_eq!(hit.2.abs(), expected);
            }
            events += det.len();
        }
        assert!(events >= 2, "scan exercised too few events");
    }

    // Fold and Hopf curve points against direct spectral re-evaluation.
    {
        let mut fold_done = false;
        let mut hopf_done = false;
        for p in &sets {
            if fold_done && hopf_done {
                break;
            }
            let Some((_, _, det)) = slice_detections(p, (0.05, 4.0), &cfg) else {
                continue;
            };
            let plane = LileyFamily::new(
                *p,
                vec![Axis::R, Axis::K],
                vec![(1e-3, 10.0), (1e-3, 10.0)],
            );
            for d in &det {
                match d.kind {
                    BifurcationKind::SaddleNode if !fold_done => {
                        let x = DVector::from_row_slice(&d.state);
                        let seed = DVector::from_row_slice(&[d.location[0], 1.0]);
                        let Ok((branch, _)) = continue_fold_curve(&plane, &x, &seed, &cfg)
                        else {
                            continue;
                        };
                        if branch.points.len() < 10 {
                            continue;
                        }
                        let stride = (branch.points.len() / 10).max(1);
                        for pt in branch.points.iter().step_by(stride) {
                            let x = pt.u.rows(0, DIM).into_owned();
                            let pa = pt.u.rows(pt.u.len() - 2, 2).into_owned();
                            let j = plane.jac_x_scaled(&x, &pa);
                            let eigs = eigen_spectrum(&j).unwrap();
                            let min_real = eigs
                                .iter()
                                .filter(|l| l.im.abs() <= 1e-6 * (1.0 + l.norm()))
                                .map(|l| l.re.abs())
                                .fold(f64::MAX, f64::min);
                            assert!(min_real <= 1e-6 * j.norm());
                        }
                        fold_done = true;
                    }
                    BifurcationKind::Hopf if !hopf_done => {
                        let x = DVector::from_row_slice(&d.state);
                        let seed = DVector::from_row_slice(&[d.location[0], 1.0]);
                        let omega = d.hopf_frequency.unwrap();
                        let Ok((branch, _)) =
                            continue_hopf_curve(&plane, &x, &seed, omega, &cfg)
                        else {
                            continue;
                        };
                        if branch.points.len() < 10 {
                            continue;
                        }
                        let stride = (branch.points.len() / 10).max(1);
                        for pt in branch.points.iter().step_by(stride) {
                            let kappa = pt.u[2 * DIM];
                            if kappa <= 0.0 {
                                continue;
                            }
                            let x = pt.u.rows(0, DIM).into_owned();
                            let pa = pt.u.rows(pt.u.len() - 2, 2).into_owned();
                            let j = plane.jac_x_scaled(&x, &pa);
                            let eigs = eigen_spectrum(&j).unwrap();
                            let target = Complex64::new(0.0, kappa.sqrt());
                            let nearest = eigs
                                .iter()
                                .map(|l| (l - target).norm())
                                .fold(f64::MAX, f64::min);
                            assert!(nearest <= 1e-6 * j.norm());
                        }
                        hopf_done = true;
                    }
                    _ => {}
                }
            }
        }
        assert!(fold_done && hopf_done, "missing curve coverage");
    }

    // Total power: frequency integration vs the Lyapunov variance.
    {
        let mut checked = 0;
        for p in &sets {
            if checked == 5 {
                break;
            }
            let eq = solve_equilibrium(p, Modulation::IDENTITY, &StateVector::rest_guess())
                .unwrap();
            let Ok(sys) = linearize(p, Modulation::IDENTITY, &eq) else {
                continue;
            };
            let integrated = power_spectrum(&sys, (0.0, 2000.0), 40_001, 1.0)
                .unwrap()
                .total_power;
            let var = output_variance(&sys, 1.0).unwrap();
            assert!((integrated - var).abs() / var <= 1e-2);
            checked += 1;
        }
        assert_eq!(checked, 5);
    }

    c.pass(240.0);
}

#[test]
fn criterion_3_three_equilibria_rule() {
    let _guard = heavy_lock();
    let c = Criterion::new("3 (three-equilibria rule)");
    let cfg = ContinuationConfig::default();
    let (sets, _) = sample_parameters(7, 40, &PlausibilityFilter::default()).unwrap();

    let mut verified = 0;
    for p in &sets {
        if verified == 5 {
            break;
        }
        let Some((_, _, det)) = slice_detections(p, (1e-3, 4.0), &cfg) else {
            continue;
        };
        let mut sn_rs: Vec<f64> = det
            .iter()
            .filter(|d| d.kind == BifurcationKind::SaddleNode)
            .map(|d| d.location[0])
            .collect();
        if sn_rs.len() != 2 {
            continue;
        }
        sn_rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (r_lo, r_hi) = (sn_rs[0], sn_rs[1]);

        let count_at = |r: f64| -> usize {
            equilibria_scan(p, Modulation::new(r, 1.0).unwrap(), 16).len()
        };
        let inside = count_at(0.5 * (r_lo + r_hi));
        assert_eq!(inside, 3, "expected 3 equilibria between the folds");
        let above = count_at(r_hi * 1.5);
        assert_eq!(above, 1, "expected 1 equilibrium above the fold band");
        if r_lo * 0.5 > 1e-3 {
            let below = count_at(r_lo * 0.5);
            assert_eq!(below, 1, "expected 1 equilibrium below the fold band");
        }
        verified += 1;
    }
    assert_eq!(verified, 5, "too few two-fold sets in the sample");

    c.pass(300.0);
}

#[test]
fn criterion_4_family_pipeline() {
    let _guard = heavy_lock();
    let c = Criterion::new("4 (family pipeline)");
    let (sets, _) = sample_parameters(3, 50, &PlausibilityFilter::default()).unwrap();
    let cfg = ClassifyConfig::default();

    let (reports, summary) = batch_classify(&sets, 4, &cfg);
    assert_eq!(reports.len(), 50);
    assert!(
        summary.mean_wall_time <= 9.0,
        "mean {:.2} s/set",
        summary.mean_wall_time
    );

    let labels: Vec<FamilyLabel> = reports.iter().map(|r| r.label).collect();
    let censuses: Vec<Vec<usize>> = reports.iter().map(|r| r.cusp_census.clone()).collect();

    // Deterministic and invariant under worker count: a serial rerun must
    // reproduce every label and census.
    let (serial, _) = batch_classify(&sets, 1, &cfg);
    assert_eq!(labels, serial.iter().map(|r| r.label).collect::<Vec<_>>());
    assert_eq!(
        censuses,
        serial.iter().map(|r| r.cusp_census.clone()).collect::<Vec<_>>()
    );

    // Invariant under tolerance halving.
    let mut tight = cfg.clone();
    tight.continuation.newton_tol /= 2.0;
    let (tighter, _) = batch_classify(&sets, 4, &tight);
    assert_eq!(labels, tighter.iter().map(|r| r.label).collect::<Vec<_>>());

    c.pass(600.0);
}

#[test]
fn criterion_5_metamorphosis_direction() {
    let _guard = heavy_lock();
    let c = Criterion::new("5 (metamorphosis direction)");
    let (sets, _) = sample_parameters(3, 20, &PlausibilityFilter::default()).unwrap();
    let mut cfg = ClassifyConfig::default();
    cfg.folds_only = true;

    let mut pei_transitions = 0;
    for p in &sets {
        let scan = metamorphosis_sweep(p, SweepAxis::Pei, (0.0, 26_000.0), 7, 200.0, &cfg);
        assert!(scan.transitions.len() <= 1, "multiple boundaries on p_ei");
        for t in &scan.transitions {
            // Ascending p_ei leaves family 2 for family 1, which is the
            // paper's direction read with p_ei decreasing.
            assert_eq!(t.from, FamilyLabel::F2);
            assert_eq!(t.to, FamilyLabel::F1);
            assert!(t.lo < t.hi && t.hi - t.lo <= 200.0);
            pei_transitions += 1;
        }
    }

    let mut pee_transitions = 0;
    for p in sets.iter().take(8) {
        let scan = metamorphosis_sweep(p, SweepAxis::Pee, (0.0, 26_000.0), 7, 200.0, &cfg);
        assert!(scan.transitions.len() <= 1, "multiple boundaries on p_ee");
        for t in &scan.transitions {
            // Mirrored: ascending p_ee leaves family 1 for family 2.
            assert_eq!(t.from, FamilyLabel::F1);
            assert_eq!(t.to, FamilyLabel::F2);
            assert!(t.lo < t.hi && t.hi - t.lo <= 200.0);
            pee_transitions += 1;
        }
    }

    assert!(
        pei_transitions + pee_transitions >= 1,
        "no metamorphosis observed in the batch"
    );
    println!(
        "  (p_ei transitions: {pei_transitions}, p_ee transitions: {pee_transitions})"
    );

    c.pass(1800.0);
}

/// Simulate the radial convergence of a planar normal-form system and report
/// the final orbit radius from a start at `r0`.
fn settle_radius<F: OdeFamily>(fam: &F, p: f64, r0: f64, t_end: f64) -> f64 {
    let pv = DVector::from_element(1, p);
    let f = |x: &DVector<f64>| fam.f(x, &pv);
    let mut x = DVector::from_row_slice(&[r0, 0.0]);
    let dt = 1e-3;
    let steps = (t_end / dt) as usize;
    for _ in 0..steps {
        x = rk4_step(&f, &x, dt);
    }
    (x[0] * x[0] + x[1] * x[1]).sqrt()
}

#[test]
fn criterion_6_cycle_branch() {
    let c = Criterion::new("6 (cycle branch)");
    let mut ccfg = ContinuationConfig::default();
    ccfg.max_points = 200;
    let scfg = ShootingConfig::default();

    // Amplitude law and the trivial multiplier on the supercritical branch.
    let fam = HopfNf {
        omega: 2.0,
        sigma: -1.0,
    };
    let branch =
        continue_periodic_orbit(&fam, &DVector::zeros(2), 0.0, 2.0, &scfg, &ccfg).unwrap();
    assert!(branch.points.len() > 10);
    let mut checked = 0;
    for pt in &branch.points {
        let trivial = pt
            .floquet
            .iter()
            .map(|m| (m - Complex64::new(1.0, 0.0)).norm())
            .fold(f64::MAX, f64::min);
        assert!(trivial <= 1e-4, "trivial multiplier off by {trivial:.2e}");
        if pt.param > 0.01 {
            let r = pt.param.sqrt();
            assert!((pt.peak - r).abs() <= 0.02 * r, "amplitude law violated");
            checked += 1;
        }
    }
    assert!(checked > 0);

    // Stability flags vs direct simulation at 5 sampled points: the
    // supercritical cycles attract, so a perturbed start settles onto the
    // branch radius exactly when the nontrivial multiplier is inside the
    // unit circle.
    let stride = (branch.points.len() / 5).max(1);
    let mut simulated = 0;
    for pt in branch.points.iter().step_by(stride) {
        if pt.param <= 0.02 || simulated == 5 {
            continue;
        }
        let nontrivial = pt
            .floquet
            .iter()
            .map(|m| m.norm())
            .filter(|n| (n - 1.0).abs() > 1e-3)
            .fold(0.0f64, f64::max);
        let stable = nontrivial < 1.0;
        let settled = settle_radius(&fam, pt.param, 1.2 * pt.peak, 60.0);
        let converged = (settled - pt.peak).abs() <= 0.02 * pt.peak;
        assert_eq!(stable, converged, "stability flag disagrees at a = {}", pt.param);
        simulated += 1;
    }
    assert!(simulated >= 3);

    // Alpha-band flagging: an orbit family at 10 Hz sits inside the band,
    // one at 30 Hz does not.
    let alpha_band = 1.0 / 13.0..=1.0 / 8.0;
    let alpha = HopfNf {
        omega: 2.0 * std::f64::consts::PI * 10.0,
        sigma: -1.0,
    };
    let branch =
        continue_periodic_orbit(&alpha, &DVector::zeros(2), 0.0, alpha.omega, &scfg, &ccfg)
            .unwrap();
    let flagged = branch
        .points
        .iter()
        .filter(|pt| alpha_band.contains(&pt.period))
        .count();
    assert_eq!(flagged, branch.points.len(), "10 Hz orbits must all be flagged");
    for pt in &branch.points {
        assert!(alpha_band.contains(&pt.period));
    }

    let beta = HopfNf {
        omega: 2.0 * std::f64::consts::PI * 30.0,
        sigma: -1.0,
    };
    let branch =
        continue_periodic_orbit(&beta, &DVector::zeros(2), 0.0, beta.omega, &scfg, &ccfg)
            .unwrap();
    assert!(branch
        .points
        .iter()
        .all(|pt| !alpha_band.contains(&pt.period)));

    c.pass(300.0);
}

#[test]
fn criterion_7_statistics_layer() {
    let c = Criterion::new("7 (statistics layer)");

    let hist = |freq: Vec<f64>| -> Histogram {
        let bins = freq.len();
        Histogram {
            edges: (0..=bins).map(|i| i as f64).collect(),
            freq,
            clamped: false,
        }
    };

    // Distance endpoints exact.
    let a = hist(vec![0.5, 0.5]);
    assert_eq!(information_radius_distance(&a, &a).unwrap(), 0.0);
    let b = hist(vec![1.0, 0.0]);
    let d = hist(vec![0.0, 1.0]);
    assert_eq!(information_radius_distance(&b, &d).unwrap(), 1.0);

    // Metric properties on 100 random triples.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut dist = |bins: usize| -> Histogram {
        let raw: Vec<f64> = (0..bins).map(|_| rng.gen_range(0.001..1.0)).collect();
        let total: f64 = raw.iter().sum();
        hist(raw.into_iter().map(|v| v / total).collect())
    };
    for _ in 0..100 {
        let (x, y, z) = (dist(HISTOGRAM_BINS), dist(HISTOGRAM_BINS), dist(HISTOGRAM_BINS));
        let xy = information_radius_distance(&x, &y).unwrap();
        let yx = information_radius_distance(&y, &x).unwrap();
        let yz = information_radius_distance(&y, &z).unwrap();
        let xz = information_radius_distance(&x, &z).unwrap();
        assert!((xy - yx).abs() <= 1e-14);
        assert!((0.0..=1.0).contains(&xy));
        assert!(xz <= xy + yz + 1e-12);
    }

    // Histogram caps.
    let g = Histogram::for_parameter(&[15.0, 500.0], 15).unwrap();
    assert_eq!(*g.edges.last().unwrap(), GAMMA_II_BIN_CAP);
    assert!(g.clamped);
    assert_eq!(g.freq[HISTOGRAM_BINS - 1], 0.5);
    let h = Histogram::for_parameter(&[-80.0], 6).unwrap();
    assert_eq!(*h.edges.last().unwrap(), -65.0);

    // PCA fractions vs an independent correlation eigendecomposition.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (n, dcols) = (200, 6);
    let data = DMatrix::from_fn(n, dcols, |_, _| rng.gen_range(-1.0..1.0));
    let result = pca(&data).unwrap();
    let mut std_cols = DMatrix::zeros(n, dcols);
    for col in 0..dcols {
        let view = data.column(col);
        let mean = view.mean();
        let var = view.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        for row in 0..n {
            std_cols[(row, col)] = (data[(row, col)] - mean) / var.sqrt();
        }
    }
    let corr = (std_cols.transpose() * &std_cols) / (n as f64 - 1.0);
    let mut eigs: Vec<f64> = corr.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = eigs.iter().sum();
    for (f, e) in result.fractions.iter().zip(eigs.iter()) {
        assert!((f - e / total).abs() <= 1e-10);
    }

    c.pass(30.0);
}

#[test]
fn criterion_8_power_ratio_contract() {
    let _guard = heavy_lock();
    let c = Criterion::new("8 (power-ratio contract)");
    let (sets, _) = sample_parameters(7, 8, &PlausibilityFilter::default()).unwrap();
    let band = (1.0, 60.0);

    // Identity transform: ratio exactly one, never biphasic.
    let p = sets[0];
    let eq = solve_equilibrium(&p, Modulation::IDENTITY, &StateVector::rest_guess()).unwrap();
    let r = power_ratio(
        &p,
        Modulation::IDENTITY,
        &AnestheticTransform::IDENTITY,
        &eq,
        &eq,
        band,
        512,
    )
    .unwrap();
    assert_eq!(r.ratio, 1.0);
    assert!(!r.biphasic);

    // Biphasic flag is exactly equivalent to the threshold comparison.
    let transform = AnestheticTransform::default();
    let mut evaluated = 0;
    for p in &sets {
        let Ok(eq) = solve_equilibrium(p, Modulation::IDENTITY, &StateVector::rest_guess())
        else {
            continue;
        };
        let mapped = transform.apply(p);
        let Ok(eq2) = solve_equilibrium(&mapped, Modulation::IDENTITY, &eq) else {
            continue;
        };
        let Ok(r) = power_ratio(p, Modulation::IDENTITY, &transform, &eq, &eq2, band, 512)
        else {
            continue;
        };
        assert_eq!(r.biphasic, r.ratio > BIPHASIC_THRESHOLD);
        assert!((r.ratio - r.transformed_power / r.baseline_power).abs() <= 1e-12 * r.ratio);
        evaluated += 1;
    }
    assert!(evaluated >= 3, "too few ratio evaluations");

    // Linearized band power vs the Welch estimate on 3 sets.
    let mut compared = 0;
    for (i, p) in sets.iter().enumerate() {
        if compared == 3 {
            break;
        }
        let eq = solve_equilibrium(p, Modulation::IDENTITY, &StateVector::rest_guess()).unwrap();
        let Ok(sys) = linearize(p, Modulation::IDENTITY, &eq) else {
            continue;
        };
        let dt = 5e-5;
        let noise = 1e-3;
        let series = simulate_stochastic(
            p,
            Modulation::IDENTITY,
            &eq,
            noise,
            30.0,
            dt,
            100 + i as u64,
        )
        .unwrap();
        let (freqs, density) = welch_psd(&series, dt, 16_384);
        let sub_band = (2.0, 40.0);
        let mut welch_power = 0.0;
        for j in 1..freqs.len() {
            if freqs[j - 1] >= sub_band.0 && freqs[j] <= sub_band.1 {
                welch_power += 0.5 * (density[j - 1] + density[j]) * (freqs[j] - freqs[j - 1]);
            }
        }
        welch_power *= 2.0;
        let linear = power_spectrum(&sys, sub_band, 2_001, noise).unwrap().total_power;
        let rel = (welch_power - linear).abs() / linear;
        assert!(rel <= 0.25, "set {i}: welch off by {rel:.3}");
        compared += 1;
    }
    assert_eq!(compared, 3);

    c.pass(600.0);
}
