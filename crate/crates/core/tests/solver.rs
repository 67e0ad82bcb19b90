//! Solver-layer checks: equilibrium root finding, the eigenvalue backend,
//! and the arclength continuation core on problems with known answers.

use mfm_core::bif::{continue_equilibrium_branch, Axis, LileyFamily, OdeFamily};
use mfm_core::model::{
    sample_parameters, state_scales, Modulation, PlausibilityFilter, StateVector,
};
use mfm_core::solver::{
    eigen_residual, eigen_spectrum, equilibria_scan, solve_equilibrium, ContinuationConfig,
    Termination, EQUILIBRIUM_TOL,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_set() -> mfm_core::model::ParameterSet {
    let (sets, _) = sample_parameters(11, 1, &PlausibilityFilter::default()).unwrap();
    sets[0]
}

fn scaled_rhs_norm(
    params: &mfm_core::model::ParameterSet,
    m: Modulation,
    x: &StateVector,
) -> f64 {
    let scales = mfm_core::solver::rhs_row_scales(params);
    mfm_core::model::rhs(x, params, m)
        .to_dvector()
        .iter()
        .zip(scales.iter())
        .map(|(v, s)| (v / s).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn equilibrium_solver_meets_its_postcondition() {
    let p = reference_set();
    let m = Modulation::IDENTITY;
    let eq = solve_equilibrium(&p, m, &StateVector::rest_guess()).unwrap();
    assert!(scaled_rhs_norm(&p, m, &eq) <= 10.0 * EQUILIBRIUM_TOL);
}

#[test]
fn restarting_from_a_solution_converges_immediately() {
    let p = reference_set();
    let m = Modulation::IDENTITY;
    let eq = solve_equilibrium(&p, m, &StateVector::rest_guess()).unwrap();
    let again = solve_equilibrium(&p, m, &eq).unwrap();
    let scales = state_scales(&p);
    for i in 0..StateVector::DIM {
        assert!((again[i] - eq[i]).abs() <= 1e-9 * scales[i]);
    }
}

#[test]
fn distant_guesses_reach_the_same_equilibrium() {
    let p = reference_set();
    let m = Modulation::IDENTITY;
    let direct = solve_equilibrium(&p, m, &StateVector::rest_guess()).unwrap();
    // A cold start far from rest exercises the integration fallback.
    let mut cold = StateVector::zeros();
    cold[0] = -30.0;
    cold[1] = -30.0;
    let reached = solve_equilibrium(&p, m, &cold).unwrap();
    // Both must be genuine equilibria; when the set is monostable they agree.
    assert!(scaled_rhs_norm(&p, m, &reached) <= 10.0 * EQUILIBRIUM_TOL);
    let all = equilibria_scan(&p, m, 12);
    if all.len() == 1 {
        assert!((reached.h_e() - direct.h_e()).abs() <= 1e-7 * 50.0);
    }
}

#[test]
fn equilibria_scan_residuals_and_ordering() {
    let p = reference_set();
    let m = Modulation::IDENTITY;
    let eqs = equilibria_scan(&p, m, 12);
    assert!(!eqs.is_empty());
    let mut prev = f64::NEG_INFINITY;
    for eq in &eqs {
        assert!(scaled_rhs_norm(&p, m, eq) <= 10.0 * EQUILIBRIUM_TOL);
        assert!(eq.h_e() > prev);
        prev = eq.h_e();
    }
}

#[test]
fn eigenvalues_of_a_diagonal_matrix_are_its_entries() {
    let d = DMatrix::from_diagonal(&DVector::from_row_slice(&[3.0, -1.0, 0.5, -7.25]));
    let mut eigs = eigen_spectrum(&d).unwrap();
    eigs.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    let expected = [3.0, 0.5, -1.0, -7.25];
    for (e, x) in eigs.iter().zip(expected.iter()) {
        assert!((e.re - x).abs() <= 1e-12 && e.im.abs() <= 1e-12);
    }
}

#[test]
fn eigenvalues_of_a_rotation_companion_matrix_are_imaginary() {
    // Companion matrix of lambda^2 + 1.
    let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let eigs = eigen_spectrum(&a).unwrap();
    assert_eq!(eigs.len(), 2);
    for e in &eigs {
        assert!(e.re.abs() <= 1e-12 && (e.im.abs() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn eigenvalues_satisfy_the_characteristic_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let a = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let eigs = eigen_spectrum(&a).unwrap();
        assert_eq!(eigs.len(), 5);
        // Sum of eigenvalues equals the trace, product equals the determinant.
        let trace: f64 = (0..5).map(|i| a[(i, i)]).sum();
        let sum: num_complex::Complex64 = eigs.iter().sum();
        assert!((sum.re - trace).abs() <= 1e-9 && sum.im.abs() <= 1e-9);
        let det = a.determinant();
        let prod: num_complex::Complex64 = eigs.iter().product();
        assert!((prod.re - det).abs() <= 1e-8 * det.abs().max(1.0));
        assert!(prod.im.abs() <= 1e-8 * det.abs().max(1.0));
        for e in &eigs {
            assert!(eigen_residual(&a, *e) <= 1e-8 * a.norm());
        }
    }
}

#[test]
fn model_jacobian_spectrum_meets_the_residual_contract() {
    let p = reference_set();
    let m = Modulation::IDENTITY;
    let eq = solve_equilibrium(&p, m, &StateVector::rest_guess()).unwrap();
    let j = mfm_core::model::jacobian(&eq, &p, m);
    let eigs = eigen_spectrum(&j).unwrap();
    assert_eq!(eigs.len(), StateVector::DIM);
    for e in &eigs {
        assert!(eigen_residual(&j, *e) <= 1e-8 * j.norm());
    }
}

/// `x' = a - x^2`: equilibria form a parabola with a fold at the origin.
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

/// `x' = x^2 + a^2 - 1`: the equilibrium set is the unit circle, so the
/// continuation must close on itself.
struct CircleNf;

impl OdeFamily for CircleNf {
    fn dim(&self) -> usize {
        1
    }
    fn n_params(&self) -> usize {
        1
    }
    fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x[0] * x[0] + p[0] * p[0] - 1.0)
    }
    fn param_window(&self) -> Vec<(f64, f64)> {
        vec![(-2.0, 2.0)]
    }
}

#[test]
fn fold_branch_traverses_the_turning_point() {
    let fam = FoldNf;
    let x0 = DVector::from_element(1, 0.9);
    let branch =
        continue_equilibrium_branch(&fam, &x0, 0.81, &ContinuationConfig::default()).unwrap();
    // Points on both sheets of the parabola: x of both signs.
    let has_upper = branch.points.iter().any(|pt| pt.u[0] > 0.5);
    let has_lower = branch.points.iter().any(|pt| pt.u[0] < -0.5);
    assert!(has_upper && has_lower);
    // Every accepted point satisfies x^2 = a.
    for pt in &branch.points {
        let a = pt.u[1];
        assert!((pt.u[0] * pt.u[0] - a).abs() <= 1e-8);
    }
}

#[test]
fn closed_equilibrium_loop_terminates_as_closed() {
    let fam = CircleNf;
    let x0 = DVector::from_element(1, 1.0);
    let branch =
        continue_equilibrium_branch(&fam, &x0, 0.0, &ContinuationConfig::default()).unwrap();
    let (t0, t1) = &branch.termination;
    assert!(
        matches!(t0, Termination::ClosedLoop) || matches!(t1, Termination::ClosedLoop),
        "terminations {t0:?} / {t1:?}"
    );
    for pt in &branch.points {
        let r2 = pt.u[0] * pt.u[0] + pt.u[1] * pt.u[1];
        assert!((r2 - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn window_exit_reported_when_the_branch_leaves_the_box() {
    struct LineNf;
    impl OdeFamily for LineNf {
        fn dim(&self) -> usize {
            1
        }
        fn n_params(&self) -> usize {
            1
        }
        fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, x[0] - p[0])
        }
        fn param_window(&self) -> Vec<(f64, f64)> {
            vec![(-1.0, 1.0)]
        }
    }
    let fam = LineNf;
    let x0 = DVector::from_element(1, 0.0);
    let branch =
        continue_equilibrium_branch(&fam, &x0, 0.0, &ContinuationConfig::default()).unwrap();
    let (t0, t1) = &branch.termination;
    assert!(matches!(t0, Termination::WindowExit));
    assert!(matches!(t1, Termination::WindowExit));
}

#[test]
fn arclength_is_strictly_increasing_and_tangents_stay_coherent() {
    let fam = FoldNf;
    let x0 = DVector::from_element(1, 0.9);
    let branch =
        continue_equilibrium_branch(&fam, &x0, 0.81, &ContinuationConfig::default()).unwrap();
    assert!(branch.points.len() > 10);
    for pair in branch.points.windows(2) {
        assert!(pair[1].arclength > pair[0].arclength);
        // Consecutive unit tangents never flip sign.
        let dot = pair[0].tangent.dot(&pair[1].tangent);
        assert!(dot > 0.0, "tangent reversal, dot = {dot}");
    }
}

#[test]
fn halving_the_step_does_not_move_the_detected_fold()
{
    use mfm_core::bif::{detect_codim1, BifurcationKind};
    let fam = FoldNf;
    let x0 = DVector::from_element(1, 0.9);
    let coarse_cfg = ContinuationConfig::default();
    let mut fine_cfg = ContinuationConfig::default();
    fine_cfg.max_step /= 2.0;
    fine_cfg.initial_step /= 2.0;

    let mut locations = Vec::new();
    for cfg in [&coarse_cfg, &fine_cfg] {
        let mut branch = continue_equilibrium_branch(&fam, &x0, 0.81, cfg).unwrap();
        let points = detect_codim1(&fam, &mut branch, cfg);
        let folds: Vec<_> = points
            .iter()
            .filter(|p| p.kind == BifurcationKind::SaddleNode)
            .collect();
        assert_eq!(folds.len(), 1);
        locations.push(folds[0].location[0]);
    }
    assert!((locations[0] - locations[1]).abs() <= 1e-7);
}

#[test]
fn continuation_points_resolve_against_the_equilibrium_solver() {
    let p = reference_set();
    let fam = LileyFamily::new(p, vec![Axis::R], vec![(0.25, 4.0)]);
    let eq = solve_equilibrium(&p, Modulation::IDENTITY, &StateVector::rest_guess()).unwrap();
    let branch = continue_equilibrium_branch(
        &fam,
        &eq.to_dvector(),
        1.0,
        &ContinuationConfig::default(),
    )
    .unwrap();
    assert!(branch.points.len() > 10);
    let stride = (branch.points.len() / 10).max(1);
    let scales = state_scales(&p);
    for pt in branch.points.iter().step_by(stride) {
        let r = pt.u[StateVector::DIM];
        let m = Modulation::new(r, 1.0).unwrap();
        let guess = StateVector::from_slice(&pt.u.as_slice()[..StateVector::DIM]);
        let resolved = solve_equilibrium(&p, m, &guess).unwrap();
        for i in 0..StateVector::DIM {
            assert!(
                (resolved[i] - pt.u[i]).abs() <= 1e-6 * scales[i],
                "component {i} drifted at R = {r}"
            );
        }
    }
}
