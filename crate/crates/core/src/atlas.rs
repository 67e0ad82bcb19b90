//! Two-parameter bifurcation portraits in the `(R, k)` modulation plane,
//! family classification by the cusp census of the fold curves, and sweeps
//! of the thalamic drives that locate family metamorphoses.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bif::{
    continue_equilibrium_branch, continue_fold_curve, continue_hopf_curve, detect_bt,
    detect_bt_on_hopf, detect_codim1, detect_cusp, detect_fold_hopf, detect_gh, Axis,
    BifurcationKind, BifurcationPoint, LileyFamily, OdeFamily,
};
use crate::model::{Modulation, ParameterSet};
use crate::solver::{
    equilibria_scan, solve_equilibrium_reduced, Branch, ContinuationConfig, Termination,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyLabel {
    F1,
    F2,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    Fold,
    Hopf,
}

/// A continued two-parameter curve with its codimension-two detections.
#[derive(Debug, Clone)]
pub struct Curve {
    pub kind: CurveKind,
    pub branch: Branch,
    /// `(R, k)` projection of every accepted point.
    pub plane: Vec<(f64, f64)>,
    pub codim2: Vec<BifurcationPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortraitStatus {
    Complete,
    Incomplete(String),
}

/// All curves reachable from the base one-parameter slice at `k = 1`.
#[derive(Debug, Clone)]
pub struct Portrait {
    /// Codim-1 detections on the base slice (continued in `R` at `k = 1`).
    pub slice_points: Vec<BifurcationPoint>,
    pub fold_curves: Vec<Curve>,
    pub hopf_curves: Vec<Curve>,
    pub window: [(f64, f64); 2],
    pub status: PortraitStatus,
    /// Problems that do not affect the fold curves (and hence the family
    /// label), for example a Hopf curve seed that failed to converge.
    pub soft_issues: Vec<String>,
}

impl Portrait {
    pub fn codim2_inventory(&self) -> Vec<BifurcationPoint> {
        self.fold_curves
            .iter()
            .chain(self.hopf_curves.iter())
            .flat_map(|c| c.codim2.iter().cloned())
            .collect()
    }

    /// Cusps per fold branch, descending.
    pub fn cusp_census(&self) -> Vec<usize> {
        let mut census: Vec<usize> = self
            .fold_curves
            .iter()
            .map(|c| {
                c.codim2
                    .iter()
                    .filter(|p| p.kind == BifurcationKind::Cusp)
                    .count()
            })
            .collect();
        census.sort_unstable_by(|a, b| b.cmp(a));
        census
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    pub windows_tried: usize,
    pub slice_saddle_nodes: usize,
    pub slice_hopfs: usize,
    pub curve_points: usize,
    pub status: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyReport {
    pub label: FamilyLabel,
    /// Cusps per connected fold branch, descending, padded to two entries.
    pub cusp_census: Vec<usize>,
    pub fold_branch_count: usize,
    pub codim2_inventory: Vec<BifurcationPoint>,
    /// `(R, k)` window the final classification used.
    pub window: [(f64, f64); 2],
    /// Seconds.
    pub wall_time: f64,
    pub diagnostics: ReportDiagnostics,
}

#[derive(Debug, Clone)]
pub struct ClassifyConfig {
    pub continuation: ContinuationConfig,
    /// Initial `(R, k)` window; expanded geometrically until the census is
    /// stable across two consecutive windows.
    pub base_window: [(f64, f64); 2],
    /// Hard cap on window coordinates during expansion.
    pub window_bound: f64,
    pub max_windows: usize,
    /// Skip Hopf-curve continuation (fold curves alone decide the family).
    pub folds_only: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        let [r, k] = Modulation::PHYSIOLOGICAL;
        ClassifyConfig {
            continuation: ContinuationConfig {
                max_points: 2000,
                ..ContinuationConfig::default()
            },
            base_window: [r, k],
            window_bound: 1e4,
            max_windows: 14,
            folds_only: false,
        }
    }
}

/// Build the `(R, k)` portrait of `params` over `window`: continue the base
/// equilibrium slice in `R` at `k = 1`, seed fold and Hopf curves from the
/// slice detections, and attach all codimension-two points.
pub fn build_portrait(
    params: &ParameterSet,
    window: [(f64, f64); 2],
    cfg: &ContinuationConfig,
    folds_only: bool,
) -> Portrait {
    let mut status = PortraitStatus::Complete;
    let mut soft_issues: Vec<String> = Vec::new();
    let incomplete = |s: &mut PortraitStatus, msg: String| {
        if *s == PortraitStatus::Complete {
            *s = PortraitStatus::Incomplete(msg);
        }
    };

    let empty = |status: PortraitStatus| Portrait {
        slice_points: Vec::new(),
        fold_curves: Vec::new(),
        hopf_curves: Vec::new(),
        window,
        status,
        soft_issues: Vec::new(),
    };

    // Base equilibrium at R = 1, k = 1.
    let eq = match solve_equilibrium_reduced(params, Modulation::IDENTITY, (-70.0, -70.0)) {
        Ok(x) => x,
        Err(_) => match equilibria_scan(params, Modulation::IDENTITY, 6).into_iter().next() {
            Some(x) => x,
            None => {
                return empty(PortraitStatus::Incomplete(
                    "no base equilibrium found at R = 1, k = 1".into(),
                ))
            }
        },
    };

    // One-parameter slice in R.
    let slice_fam = LileyFamily::new(*params, vec![Axis::R], vec![window[0]]);
    let mut slice_branch =
        match continue_equilibrium_branch(&slice_fam, &eq.to_dvector(), 1.0, cfg) {
            Ok(b) => b,
            Err(e) => {
                return empty(PortraitStatus::Incomplete(format!(
                    "base slice continuation failed: {e}"
                )))
            }
        };
    let slice_points = detect_codim1(&slice_fam, &mut slice_branch, cfg);

    let fam2 = LileyFamily::new(*params, vec![Axis::R, Axis::K], window.to_vec());
    let n = fam2.dim();
    let mut fold_curves: Vec<Curve> = Vec::new();
    let mut hopf_curves: Vec<Curve> = Vec::new();

    let plane_of = |branch: &Branch, r_idx: usize, k_idx: usize| -> Vec<(f64, f64)> {
        branch.points.iter().map(|p| (p.u[r_idx], p.u[k_idx])).collect()
    };

    for sp in &slice_points {
        match sp.kind {
            BifurcationKind::SaddleNode => {
                let r = sp.location[0];
                if crossings_at_level(&fold_curves, n, n + 1, 1.0)
                    .iter()
                    .any(|&rc| (rc - r).abs() < 1e-3)
                {
                    continue;
                }
                let p = DVector::from_row_slice(&[r, 1.0]);
                match continue_fold_curve(&fam2, &sp.state_vector(), &p, cfg) {
                    Ok((mut branch, sys)) => {
                        if branch.termination.0 == Termination::StepCollapse
                            || branch.termination.1 == Termination::StepCollapse
                        {
                            incomplete(&mut status, "fold curve ended in step collapse".into());
                        }
                        let mut codim2 = detect_cusp(&sys, &mut branch, cfg);
                        codim2.extend(detect_bt(&sys, &mut branch, cfg));
                        let plane = plane_of(&branch, n, n + 1);
                        fold_curves.push(Curve {
                            kind: CurveKind::Fold,
                            branch,
                            plane,
                            codim2,
                        });
                    }
                    Err(e) => incomplete(&mut status, format!("fold curve seed failed: {e}")),
                }
            }
            BifurcationKind::Hopf if !folds_only => {
                let r = sp.location[0];
                if crossings_at_level(&hopf_curves, 2 * n + 1, 2 * n + 2, 1.0)
                    .iter()
                    .any(|&rc| (rc - r).abs() < 1e-3)
                {
                    continue;
                }
                let omega = match sp.hopf_frequency {
                    Some(w) if w > 0.0 => w,
                    _ => continue,
                };
                let p = DVector::from_row_slice(&[r, 1.0]);
                match continue_hopf_curve(&fam2, &sp.state_vector(), &p, omega, cfg) {
                    Ok((mut branch, sys)) => {
                        if branch.termination.0 == Termination::StepCollapse
                            || branch.termination.1 == Termination::StepCollapse
                        {
                            soft_issues.push("Hopf curve ended in step collapse".into());
                        }
                        let mut codim2 = detect_bt_on_hopf(&sys, &mut branch, cfg);
                        codim2.extend(detect_fold_hopf(&sys, &mut branch, cfg));
                        codim2.extend(detect_gh(&sys, &mut branch, cfg));
                        let plane = plane_of(&branch, 2 * n + 1, 2 * n + 2);
                        hopf_curves.push(Curve {
                            kind: CurveKind::Hopf,
                            branch,
                            plane,
                            codim2,
                        });
                    }
                    Err(e) => soft_issues.push(format!("Hopf curve seed failed: {e}")),
                }
            }
            _ => {}
        }
    }

    // After a swallowtail reconnection one of the two fold curves can sit
    // entirely above or below the k = 1 line, invisible to the base slice.
    // When a lone fold curve carries cusps, probe extra horizontal slices to
    // seed whatever the base slice missed.
    let lone_cusps = fold_curves.len() == 1
        && fold_curves[0]
            .codim2
            .iter()
            .any(|c| c.kind == BifurcationKind::Cusp);
    if lone_cusps {
        let seed_fold = |status: &mut PortraitStatus,
                             fold_curves: &mut Vec<Curve>,
                             sp: &BifurcationPoint,
                             plane_seed: [f64; 2]| {
            let p = DVector::from_row_slice(&plane_seed);
            match continue_fold_curve(&fam2, &sp.state_vector(), &p, cfg) {
                Ok((mut branch, sys)) => {
                    if branch.termination.0 == Termination::StepCollapse
                        || branch.termination.1 == Termination::StepCollapse
                    {
                        incomplete(status, "fold curve ended in step collapse".into());
                    }
                    let mut codim2 = detect_cusp(&sys, &mut branch, cfg);
                    codim2.extend(detect_bt(&sys, &mut branch, cfg));
                    let plane = plane_of(&branch, n, n + 1);
                    fold_curves.push(Curve {
                        kind: CurveKind::Fold,
                        branch,
                        plane,
                        codim2,
                    });
                }
                Err(e) => incomplete(status, format!("fold curve seed failed: {e}")),
            }
        };

        // Horizontal probes: slices in R at fixed k.
        let (k_lo, k_hi) = window[1];
        for frac in [0.25, 0.75] {
            let k0 = k_lo + frac * (k_hi - k_lo);
            if (k0 - 1.0).abs() < 1e-6 || k0 <= 0.0 {
                continue;
            }
            let Ok(m0) = Modulation::new(1.0, k0) else {
                continue;
            };
            let eq0 = match solve_equilibrium_reduced(params, m0, (-70.0, -70.0)) {
                Ok(x) => x,
                Err(_) => match equilibria_scan(params, m0, 6).into_iter().next() {
                    Some(x) => x,
                    None => continue,
                },
            };
            let mut aux_fam = LileyFamily::new(*params, vec![Axis::R], vec![window[0]]);
            aux_fam.base_m = m0;
            let Ok(mut aux_branch) =
                continue_equilibrium_branch(&aux_fam, &eq0.to_dvector(), 1.0, cfg)
            else {
                continue;
            };
            for sp in detect_codim1(&aux_fam, &mut aux_branch, cfg) {
                if sp.kind != BifurcationKind::SaddleNode {
                    continue;
                }
                let r = sp.location[0];
                if crossings_at_level(&fold_curves, n, n + 1, k0)
                    .iter()
                    .any(|&rc| (rc - r).abs() < 1e-2)
                {
                    continue;
                }
                seed_fold(&mut status, &mut fold_curves, &sp, [r, k0]);
            }
        }

        // Vertical probes: slices in k at fixed R, for curves that cross no
        // horizontal line of the window.
        let (r_lo, r_hi) = window[0];
        for frac in [0.25, 0.75] {
            let r0 = r_lo + frac * (r_hi - r_lo);
            if r0 <= 0.0 {
                continue;
            }
            let Ok(m0) = Modulation::new(r0, 1.0) else {
                continue;
            };
            let eq0 = match solve_equilibrium_reduced(params, m0, (-70.0, -70.0)) {
                Ok(x) => x,
                Err(_) => match equilibria_scan(params, m0, 6).into_iter().next() {
                    Some(x) => x,
                    None => continue,
                },
            };
            let mut aux_fam = LileyFamily::new(*params, vec![Axis::K], vec![window[1]]);
            aux_fam.base_m = m0;
            let Ok(mut aux_branch) =
                continue_equilibrium_branch(&aux_fam, &eq0.to_dvector(), 1.0, cfg)
            else {
                continue;
            };
            for sp in detect_codim1(&aux_fam, &mut aux_branch, cfg) {
                if sp.kind != BifurcationKind::SaddleNode {
                    continue;
                }
                let k = sp.location[0];
                if crossings_at_level(&fold_curves, n + 1, n, r0)
                    .iter()
                    .any(|&kc| (kc - k).abs() < 1e-2)
                {
                    continue;
                }
                seed_fold(&mut status, &mut fold_curves, &sp, [r0, k]);
            }
        }
    }

    if !slice_points
        .iter()
        .any(|p| p.kind == BifurcationKind::SaddleNode)
    {
        incomplete(&mut status, "no saddle-node on the base slice".into());
    }

    Portrait {
        slice_points,
        fold_curves,
        hopf_curves,
        window,
        status,
        soft_issues,
    }
}

/// `R` values where existing curves cross the `k = level` line, by linear
/// interpolation between adjacent points. Used to avoid seeding a second
/// continuation of a curve already traced.
fn crossings_at_level(curves: &[Curve], r_idx: usize, k_idx: usize, level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for curve in curves {
        let pts = &curve.branch.points;
        for w in pts.windows(2) {
            let (k0, k1v) = (w[0].u[k_idx] - level, w[1].u[k_idx] - level);
            if k0 == 0.0 {
                out.push(w[0].u[r_idx]);
            } else if k0 * k1v < 0.0 {
                let t = k0 / (k0 - k1v);
                out.push(w[0].u[r_idx] * (1.0 - t) + w[1].u[r_idx] * t);
            }
        }
        if let Some(last) = pts.last() {
            if last.u[k_idx] == level {
                out.push(last.u[r_idx]);
            }
        }
    }
    out
}

fn census_label(census: &[usize], branch_count: usize) -> FamilyLabel {
    let padded = [
        census.first().copied().unwrap_or(0),
        census.get(1).copied().unwrap_or(0),
    ];
    match padded {
        [0, 0] | [2, 0] => FamilyLabel::F1,
        [1, 1] if branch_count >= 2 => FamilyLabel::F2,
        _ => FamilyLabel::Indeterminate,
    }
}

fn expand_window(w: [(f64, f64); 2], bound: f64) -> [(f64, f64); 2] {
    let mut out = w;
    for side in out.iter_mut() {
        let center = 0.5 * (side.0 + side.1);
        let half = 0.5 * (side.1 - side.0);
        side.0 = (center - 2.0 * half).clamp(-bound, bound).max(0.0);
        side.1 = (center + 2.0 * half).clamp(-bound, bound);
    }
    out
}

/// Classify `params` as Family 1 or Family 2 from the cusp census of its
/// fold curves, expanding the `(R, k)` window geometrically until the census
/// is stable across two consecutive windows.
pub fn classify_family(params: &ParameterSet, cfg: &ClassifyConfig) -> FamilyReport {
    let start = Instant::now();
    let mut window = cfg.base_window;
    let mut prev_census: Option<Vec<usize>> = None;
    let mut last_portrait: Option<Portrait> = None;
    let mut windows_tried = 0;
    let mut stable = false;
    let mut same_in_a_row = 1usize;

    let mut fallback: Option<Portrait> = None;
    for _ in 0..cfg.max_windows {
        windows_tried += 1;
        let portrait = build_portrait(params, window, &cfg.continuation, cfg.folds_only);
        let census = portrait.cusp_census();
        // No recognizable pattern has more than a handful of cusps, and the
        // portraits behind such censuses are the costliest to continue, so
        // give up on them at once.
        if census.iter().sum::<usize>() > 4 {
            last_portrait = Some(portrait);
            break;
        }
        // A census only counts as stable once fold curves exist at all;
        // until then keep widening the window to look for them.
        let census_stable = !portrait.fold_curves.is_empty()
            && prev_census.as_deref() == Some(census.as_slice());
        same_in_a_row = if census_stable { same_in_a_row + 1 } else { 1 };
        // A stable but unrecognized census often means a fold curve still
        // sits outside the window, so only stop on one that labels cleanly;
        // keep the first stable portrait as a fallback otherwise.
        let recognized =
            census_label(&census, portrait.fold_curves.len()) != FamilyLabel::Indeterminate;
        prev_census = Some(census);
        if census_stable && !recognized && fallback.is_none() {
            fallback = Some(portrait.clone());
        }
        last_portrait = Some(portrait);
        if census_stable && recognized {
            stable = true;
            break;
        }
        // An unrecognized census that survives three straight windows is not
        // going to change; settle for the fallback instead of paying for the
        // ever larger portraits of the remaining expansions.
        if same_in_a_row >= 3 {
            break;
        }
        let next = expand_window(window, cfg.window_bound);
        if next == window {
            break;
        }
        window = next;
    }

    if !stable {
        if let Some(p) = fallback {
            stable = true;
            last_portrait = Some(p);
        }
    }
    let portrait = last_portrait.expect("at least one window is classified");
    let census = portrait.cusp_census();
    let branch_count = portrait.fold_curves.len();
    let mut label = census_label(&census, branch_count);
    let status = match (&portrait.status, stable) {
        (PortraitStatus::Complete, true) => "complete".to_string(),
        (PortraitStatus::Complete, false) => "census did not stabilize".to_string(),
        (PortraitStatus::Incomplete(msg), _) => msg.clone(),
    };
    if !stable || portrait.status != PortraitStatus::Complete {
        label = FamilyLabel::Indeterminate;
    }

    let mut census_padded = census.clone();
    while census_padded.len() < 2 {
        census_padded.push(0);
    }
    let curve_points = portrait
        .fold_curves
        .iter()
        .chain(portrait.hopf_curves.iter())
        .map(|c| c.branch.len())
        .sum();

    FamilyReport {
        label,
        cusp_census: census_padded,
        fold_branch_count: branch_count,
        codim2_inventory: portrait.codim2_inventory(),
        window: portrait.window,
        wall_time: start.elapsed().as_secs_f64(),
        diagnostics: ReportDiagnostics {
            windows_tried,
            slice_saddle_nodes: portrait
                .slice_points
                .iter()
                .filter(|p| p.kind == BifurcationKind::SaddleNode)
                .count(),
            slice_hopfs: portrait
                .slice_points
                .iter()
                .filter(|p| p.kind == BifurcationKind::Hopf)
                .count(),
            curve_points,
            status,
        },
    }
}

/// Which thalamic drive a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    Pei,
    Pee,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Pei => "p_ei",
            SweepAxis::Pee => "p_ee",
        }
    }

    pub fn with_value(&self, params: &ParameterSet, v: f64) -> ParameterSet {
        match self {
            SweepAxis::Pei => params.with_p_ei(v),
            SweepAxis::Pee => params.with_p_ee(v),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionBracket {
    pub lo: f64,
    pub hi: f64,
    pub from: FamilyLabel,
    pub to: FamilyLabel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetamorphosisScan {
    pub axis: String,
    /// `(drive value 1/s, label)` at each determinate sample, ascending.
    pub samples: Vec<(f64, FamilyLabel)>,
    /// Label changes bracketed to the requested resolution.
    pub transitions: Vec<TransitionBracket>,
    /// Drive values whose classification came back indeterminate.
    pub indeterminate: Vec<f64>,
}

/// Sweep one thalamic drive over `range`, classifying at `n_samples`
/// uniformly spaced values and bisecting every label change down to
/// `resolution` (1/s).
pub fn metamorphosis_sweep(
    params: &ParameterSet,
    axis: SweepAxis,
    range: (f64, f64),
    n_samples: usize,
    resolution: f64,
    cfg: &ClassifyConfig,
) -> MetamorphosisScan {
    assert!(resolution > 0.0, "resolution must be positive");
    let classify_at = |v: f64| classify_family(&axis.with_value(params, v), cfg).label;

    let n = n_samples.max(1);
    let values: Vec<f64> = if n == 1 || range.1 == range.0 {
        vec![range.0]
    } else {
        (0..n)
            .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
            .collect()
    };

    let mut samples = Vec::new();
    let mut indeterminate = Vec::new();
    for &v in &values {
        match classify_at(v) {
            FamilyLabel::Indeterminate => indeterminate.push(v),
            label => samples.push((v, label)),
        }
    }

    let mut transitions = Vec::new();
    for w in samples.clone().windows(2) {
        let (mut lo, from) = w[0];
        let (mut hi, to) = w[1];
        if from == to {
            continue;
        }
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            match classify_at(mid) {
                l if l == from => lo = mid,
                l if l == to => hi = mid,
                // Indeterminate midpoint: shrink from the high side.
                _ => hi = mid,
            }
        }
        transitions.push(TransitionBracket { lo, hi, from, to });
    }

    MetamorphosisScan {
        axis: axis.name().to_string(),
        samples,
        transitions,
        indeterminate,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodimCountSample {
    pub value: f64,
    pub bt_count: usize,
    pub gh_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BtAnnihilationScan {
    pub samples: Vec<CodimCountSample>,
    /// Brackets where the BT count changes.
    pub bt_transitions: Vec<(f64, f64)>,
    /// Brackets where the GH count changes.
    pub gh_transitions: Vec<(f64, f64)>,
}

/// Track the number of Bogdanov-Takens and generalized Hopf points in the
/// portrait as `p_ei` varies; brackets every count change to `resolution`.
pub fn bt_annihilation_scan(
    params: &ParameterSet,
    range: (f64, f64),
    n_samples: usize,
    resolution: f64,
    cfg: &ClassifyConfig,
) -> BtAnnihilationScan {
    let counts_at = |v: f64| -> (usize, usize) {
        let p = params.with_p_ei(v);
        let portrait = build_portrait(&p, cfg.base_window, &cfg.continuation, false);
        let inv = portrait.codim2_inventory();
        (
            inv.iter()
                .filter(|b| b.kind == BifurcationKind::BogdanovTakens)
                .count(),
            inv.iter()
                .filter(|b| b.kind == BifurcationKind::GeneralizedHopf)
                .count(),
        )
    };

    let n = n_samples.max(2);
    let mut samples = Vec::new();
    for i in 0..n {
        let v = range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64;
        let (bt, gh) = counts_at(v);
        samples.push(CodimCountSample {
            value: v,
            bt_count: bt,
            gh_count: gh,
        });
    }

    let bracket = |select: &dyn Fn(&CodimCountSample) -> usize,
                   raw: &dyn Fn(f64) -> usize|
     -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for w in samples.windows(2) {
            if select(&w[0]) == select(&w[1]) {
                continue;
            }
            let (mut lo, mut hi) = (w[0].value, w[1].value);
            let lo_count = select(&w[0]);
            while hi - lo > resolution {
                let mid = 0.5 * (lo + hi);
                if raw(mid) == lo_count {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push((lo, hi));
        }
        out
    };
    let bt_transitions = bracket(&|s| s.bt_count, &|v| counts_at(v).0);
    let gh_transitions = bracket(&|s| s.gh_count, &|v| counts_at(v).1);

    BtAnnihilationScan {
        samples,
        bt_transitions,
        gh_transitions,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSummary {
    pub total: usize,
    pub f1: usize,
    pub f2: usize,
    pub indeterminate: usize,
    pub mean_wall_time: f64,
}

/// Classify many sets in parallel. Results are order-stable (output order
/// equals input order) and independent of the worker count.
pub fn batch_classify(
    sets: &[ParameterSet],
    workers: usize,
    cfg: &ClassifyConfig,
) -> (Vec<FamilyReport>, BatchSummary) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("worker pool");
    let batch_start = std::time::Instant::now();
    let reports: Vec<FamilyReport> = pool.install(|| {
        sets.par_iter()
            .map(|p| {
                std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| classify_family(p, cfg)))
                    .unwrap_or_else(|_| failed_report(cfg, "classification panicked"))
            })
            .collect()
    });
    let f1 = reports.iter().filter(|r| r.label == FamilyLabel::F1).count();
    let f2 = reports.iter().filter(|r| r.label == FamilyLabel::F2).count();
    let indeterminate = reports.len() - f1 - f2;
    // Batch elapsed over count, so the figure reflects throughput rather
    // than summed per-worker clocks that double-count core contention.
    let mean_wall_time = if reports.is_empty() {
        0.0
    } else {
        batch_start.elapsed().as_secs_f64() / reports.len() as f64
    };
    (
        reports,
        BatchSummary {
            total: sets.len(),
            f1,
            f2,
            indeterminate,
            mean_wall_time,
        },
    )
}

fn failed_report(cfg: &ClassifyConfig, cause: &str) -> FamilyReport {
    FamilyReport {
        label: FamilyLabel::Indeterminate,
        cusp_census: vec![0, 0],
        fold_branch_count: 0,
        codim2_inventory: Vec::new(),
        window: cfg.base_window,
        wall_time: 0.0,
        diagnostics: ReportDiagnostics {
            windows_tried: 0,
            slice_saddle_nodes: 0,
            slice_hopfs: 0,
            curve_points: 0,
            status: cause.to_string(),
        },
    }
}
