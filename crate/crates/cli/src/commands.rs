//! Subcommand implementations. Every command resolves its configuration,
//! does the work, then writes outputs atomically together with a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use mfm_core::atlas::{
    batch_classify, build_portrait, classify_family, metamorphosis_sweep, ClassifyConfig,
    FamilyLabel, MetamorphosisScan, SweepAxis,
};
use mfm_core::bif::{
    continue_equilibrium_branch, continue_periodic_orbit, detect_codim1, Axis, BifurcationKind,
    LileyFamily, OdeFamily, ShootingConfig,
};
use mfm_core::model::{
    sample_parameters, Modulation, ParameterSet, PlausibilityFilter, StateVector, PARAM_RANGES,
};
use mfm_core::solver::{eigen_spectrum, solve_equilibrium};
use mfm_core::spectra::{linearize, power_ratio, power_spectrum, AnestheticTransform};
use mfm_core::stats::{
    information_radius_distance, pca, tail_probability, Histogram, TailSide, GAMMA_II_BIN_CAP,
};

use crate::ioutil::{atomic_write, read_params_csv};
use crate::manifest::RunManifest;
use crate::{AxisArg, CommonOpts, DiagramMode, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Optional overrides loaded from a `key = value` config file.
#[derive(Default, Clone)]
struct FileConfig {
    workers: Option<usize>,
    newton_tol: Option<f64>,
    max_points: Option<usize>,
    max_windows: Option<usize>,
}

impl FileConfig {
    fn load(common: &CommonOpts) -> Result<Self> {
        let mut cfg = FileConfig::default();
        let Some(path) = &common.config else {
            return Ok(cfg);
        };
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    lineno + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = || {
                usage(format!(
                    "{}:{}: bad value for {key}",
                    path.display(),
                    lineno + 1
                ))
            };
            match key {
                "workers" => cfg.workers = Some(value.parse().map_err(|_| bad())?),
                "newton_tol" => cfg.newton_tol = Some(value.parse().map_err(|_| bad())?),
                "max_points" => cfg.max_points = Some(value.parse().map_err(|_| bad())?),
                "max_windows" => cfg.max_windows = Some(value.parse().map_err(|_| bad())?),
                _ => {
                    return Err(usage(format!(
                        "{}:{}: unknown key {key:?}",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

/// Flag beats config file beats `MFM_WORKERS` beats single-threaded.
fn resolve_workers(common: &CommonOpts, file: &FileConfig) -> usize {
    common
        .workers
        .or(file.workers)
        .or_else(|| {
            std::env::var("MFM_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1)
}

fn classify_config(file: &FileConfig) -> ClassifyConfig {
    let mut cfg = ClassifyConfig::default();
    if let Some(tol) = file.newton_tol {
        cfg.continuation.newton_tol = tol;
    }
    if let Some(mp) = file.max_points {
        cfg.continuation.max_points = mp;
    }
    if let Some(mw) = file.max_windows {
        cfg.max_windows = mw;
    }
    cfg
}

fn classify_config_json(cfg: &ClassifyConfig, workers: usize) -> serde_json::Value {
    json!({
        "workers": workers,
        "newton_tol": cfg.continuation.newton_tol,
        "max_points": cfg.continuation.max_points,
        "max_windows": cfg.max_windows,
        "base_window": cfg.base_window,
        "window_bound": cfg.window_bound,
        "folds_only": cfg.folds_only,
    })
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(usage(format!("{what}: expected two comma-separated numbers")));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|_| usage(format!("{what}: bad number {:?}", parts[0])))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|_| usage(format!("{what}: bad number {:?}", parts[1])))?;
    Ok((a, b))
}

fn jsonl(lines: &[String]) -> String {
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

pub fn sample(seed: u64, count: usize, out: &Path, common: &CommonOpts) -> Result<u8> {
    let _ = FileConfig::load(common)?;
    if count == 0 {
        return Err(usage("--count must be positive"));
    }
    let mut manifest = RunManifest::new("sample", json!({ "seed": seed, "count": count }));
    let (sets, stats) = manifest.time("sample", || {
        sample_parameters(seed, count, &PlausibilityFilter::default())
    })?;

    let mut csv = String::new();
    csv.push_str(&ParameterSet::csv_header());
    csv.push('\n');
    for p in &sets {
        csv.push_str(&p.to_csv_row());
        csv.push('\n');
    }
    atomic_write(out, &csv)?;
    manifest.output(out);
    manifest.notes.push(format!(
        "drawn {} accepted of {} candidates",
        stats.accepted, stats.tried
    ));
    manifest.write(out)?;
    Ok(0)
}

/// Deterministic per-set classification record: everything in the family
/// report except wall time, which varies run to run.
#[derive(Serialize)]
struct ClassifyRecord {
    index: usize,
    label: FamilyLabel,
    cusp_census: Vec<usize>,
    fold_branch_count: usize,
    window: [(f64, f64); 2],
    codim2: Vec<(String, Vec<f64>)>,
    windows_tried: usize,
    status: String,
}

pub fn classify(
    input: &Path,
    out: &Path,
    emit_curves: Option<&Path>,
    common: &CommonOpts,
) -> Result<u8> {
    let file = FileConfig::load(common)?;
    let workers = resolve_workers(common, &file);
    let cfg = classify_config(&file);
    let mut manifest = RunManifest::new("classify", classify_config_json(&cfg, workers));
    manifest.input(input);

    let sets = read_params_csv(input)?;
    let (reports, summary) = manifest.time("classify", || batch_classify(&sets, workers, &cfg));

    let mut lines = Vec::with_capacity(reports.len());
    for (index, r) in reports.iter().enumerate() {
        let record = ClassifyRecord {
            index,
            label: r.label,
            cusp_census: r.cusp_census.clone(),
            fold_branch_count: r.fold_branch_count,
            window: r.window,
            codim2: r
                .codim2_inventory
                .iter()
                .map(|b| (b.kind.label().to_string(), b.location.clone()))
                .collect(),
            windows_tried: r.diagnostics.windows_tried,
            status: r.diagnostics.status.clone(),
        };
        lines.push(serde_json::to_string(&record)?);
    }
    atomic_write(out, &jsonl(&lines))?;
    manifest.output(out);

    let summary_path = sibling(out, ".summary.json");
    let summary_json = json!({
        "format_version": crate::manifest::FORMAT_VERSION,
        "total": summary.total,
        "f1": summary.f1,
        "f2": summary.f2,
        "indeterminate": summary.indeterminate,
        "mean_wall_time": summary.mean_wall_time,
        "manifest": crate::manifest::manifest_path(out).display().to_string(),
    });
    atomic_write(
        &summary_path,
        &format!("{}\n", serde_json::to_string_pretty(&summary_json)?),
    )?;
    manifest.output(&summary_path);

    if let Some(dir) = emit_curves {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        manifest.time("emit_curves", || -> Result<()> {
            for (index, r) in reports.iter().enumerate() {
                let portrait =
                    build_portrait(&sets[index], r.window, &cfg.continuation, cfg.folds_only);
                let mut csv = String::from("kind,branch,R,k\n");
                for (kind, curves) in
                    [("sn", &portrait.fold_curves), ("hb", &portrait.hopf_curves)]
                {
                    for (bi, curve) in curves.iter().enumerate() {
                        for (r_val, k_val) in &curve.plane {
                            csv.push_str(&format!("{kind},{bi},{r_val},{k_val}\n"));
                        }
                    }
                }
                let path = dir.join(format!("set_{index:05}.csv"));
                atomic_write(&path, &csv)?;
            }
            Ok(())
        })?;
        manifest.output(dir);
    }

    manifest.write(out)?;
    Ok(0)
}

#[derive(Serialize)]
struct SweepRecord {
    index: usize,
    scan: MetamorphosisScan,
}

pub fn sweep(
    input: &Path,
    axis: AxisArg,
    range: &str,
    samples: usize,
    resolution: f64,
    out: &Path,
    common: &CommonOpts,
) -> Result<u8> {
    let file = FileConfig::load(common)?;
    let workers = resolve_workers(common, &file);
    let cfg = classify_config(&file);
    let range = parse_pair(range, "--range")?;
    if !(range.0 >= 0.0 && range.1 > range.0) {
        return Err(usage("--range must satisfy 0 <= lo < hi"));
    }
    if samples < 2 {
        return Err(usage("--samples must be at least 2"));
    }
    if !(resolution > 0.0) {
        return Err(usage("--resolution must be positive"));
    }
    let sweep_axis = match axis {
        AxisArg::Pei => SweepAxis::Pei,
        AxisArg::Pee => SweepAxis::Pee,
    };

    let mut config = classify_config_json(&cfg, workers);
    config["axis"] = json!(sweep_axis.name());
    config["range"] = json!(range);
    config["samples"] = json!(samples);
    config["resolution"] = json!(resolution);
    let mut manifest = RunManifest::new("sweep", config);
    manifest.input(input);

    let sets = read_params_csv(input)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;
    let scans: Vec<MetamorphosisScan> = manifest.time("sweep", || {
        pool.install(|| {
            use rayon::prelude::*;
            sets.par_iter()
                .map(|p| metamorphosis_sweep(p, sweep_axis, range, samples, resolution, &cfg))
                .collect()
        })
    });

    let mut lines = Vec::with_capacity(scans.len());
    let mut transitioned = 0usize;
    for (index, scan) in scans.into_iter().enumerate() {
        if !scan.transitions.is_empty() {
            transitioned += 1;
        }
        lines.push(serde_json::to_string(&SweepRecord { index, scan })?);
    }
    atomic_write(out, &jsonl(&lines))?;
    manifest.output(out);

    let summary_path = sibling(out, ".summary.json");
    let total = sets.len();
    let summary_json = json!({
        "format_version": crate::manifest::FORMAT_VERSION,
        "axis": sweep_axis.name(),
        "total": total,
        "transitioned": transitioned,
        "incidence": transitioned as f64 / total as f64,
        "manifest": crate::manifest::manifest_path(out).display().to_string(),
    });
    atomic_write(
        &summary_path,
        &format!("{}\n", serde_json::to_string_pretty(&summary_json)?),
    )?;
    manifest.output(&summary_path);
    manifest.write(out)?;
    Ok(0)
}

#[derive(Serialize)]
#[serde(untagged)]
enum SpectrumRecord {
    Ok {
        index: usize,
        ratio: f64,
        biphasic: bool,
        baseline_power: f64,
        transformed_power: f64,
    },
    Failed {
        index: usize,
        error: String,
    },
}

#[allow(clippy::too_many_arguments)]
pub fn spectrum(
    input: &Path,
    transform: &str,
    band: &str,
    n_freq: usize,
    out: &Path,
    fig6: Option<&Path>,
    spectra_dir: Option<&Path>,
    common: &CommonOpts,
) -> Result<u8> {
    let _ = FileConfig::load(common)?;
    let (a, b) = parse_pair(transform, "--transform")?;
    if !(a > 0.0 && b > 0.0) {
        return Err(usage("--transform scales must be positive"));
    }
    let band = parse_pair(band, "--band")?;
    if !(band.0 >= 0.0 && band.1 > band.0) {
        return Err(usage("--band must satisfy 0 <= lo < hi"));
    }
    if n_freq < 2 {
        return Err(usage("--n-freq must be at least 2"));
    }
    let transform = AnestheticTransform { a, b };

    let mut manifest = RunManifest::new(
        "spectrum",
        json!({ "transform": [a, b], "band": band, "n_freq": n_freq }),
    );
    manifest.input(input);
    let sets = read_params_csv(input)?;

    if let Some(dir) = spectra_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let mut lines = Vec::with_capacity(sets.len());
    let mut ratios = Vec::new();
    let mut failures = 0usize;
    manifest.time("spectrum", || -> Result<()> {
        for (index, p) in sets.iter().enumerate() {
            let record = match set_ratio(p, &transform, band, n_freq) {
                Ok(r) => {
                    ratios.push(r.0);
                    if let Some(dir) = spectra_dir {
                        let eq =
                            solve_equilibrium(p, Modulation::IDENTITY, &StateVector::rest_guess())?;
                        let spec =
                            power_spectrum(&linearize(p, Modulation::IDENTITY, &eq)?, band, n_freq, 1.0)?;
                        let mut csv = String::from("freq_hz,density\n");
                        for (f, d) in spec.freqs.iter().zip(spec.density.iter()) {
                            csv.push_str(&format!("{f},{d}\n"));
                        }
                        atomic_write(&dir.join(format!("set_{index:05}.csv")), &csv)?;
                    }
                    SpectrumRecord::Ok {
                        index,
                        ratio: r.0,
                        biphasic: r.1,
                        baseline_power: r.2,
                        transformed_power: r.3,
                    }
                }
                Err(e) => {
                    failures += 1;
                    SpectrumRecord::Failed {
                        index,
                        error: format!("{e:#}"),
                    }
                }
            };
            lines.push(serde_json::to_string(&record)?);
        }
        Ok(())
    })?;

    atomic_write(out, &jsonl(&lines))?;
    manifest.output(out);

    if let Some(path) = fig6 {
        let hist = Histogram::new(&ratios, 0.0, 4.0, 250)
            .map_err(|e| anyhow::anyhow!("ratio histogram: {e}"))?;
        let mut csv = String::from("bin_lo,bin_hi,freq\n");
        for (i, f) in hist.freq.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", hist.edges[i], hist.edges[i + 1], f));
        }
        atomic_write(path, &csv)?;
        manifest.output(path);
    }
    if let Some(dir) = spectra_dir {
        manifest.output(dir);
    }
    manifest
        .notes
        .push(format!("{failures} of {} sets failed", sets.len()));
    manifest.write(out)?;

    if failures == sets.len() {
        Ok(3)
    } else if failures > 0 {
        Ok(2)
    } else {
        Ok(0)
    }
}

fn set_ratio(
    p: &ParameterSet,
    transform: &AnestheticTransform,
    band: (f64, f64),
    n_freq: usize,
) -> Result<(f64, bool, f64, f64)> {
    let eq = solve_equilibrium(p, Modulation::IDENTITY, &StateVector::rest_guess())?;
    let mapped = transform.apply(p);
    let eq2 = solve_equilibrium(&mapped, Modulation::IDENTITY, &eq)?;
    let r = power_ratio(p, Modulation::IDENTITY, transform, &eq, &eq2, band, n_freq)?;
    Ok((r.ratio, r.biphasic, r.baseline_power, r.transformed_power))
}

pub fn stats(reports: &Path, params: &Path, out_dir: &Path, common: &CommonOpts) -> Result<u8> {
    let _ = FileConfig::load(common)?;
    let mut manifest = RunManifest::new("stats", json!({}));
    manifest.input(reports);
    manifest.input(params);
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let sets = read_params_csv(params)?;
    let labels = read_labels(reports, sets.len())?;

    // Column-major parameter values split by family.
    let mut by_family: BTreeMap<&'static str, Vec<Vec<f64>>> = BTreeMap::new();
    for (p, label) in sets.iter().zip(labels.iter()) {
        let family = match label {
            FamilyLabel::F1 => "F1",
            FamilyLabel::F2 => "F2",
            FamilyLabel::Indeterminate => continue,
        };
        let cols = by_family
            .entry(family)
            .or_insert_with(|| vec![Vec::new(); 32]);
        for (i, v) in p.as_array().iter().enumerate() {
            cols[i].push(*v);
        }
    }

    // Distance table between family-wise distributions, sorted descending.
    let mut dir_csv = String::from("parameter,distance\n");
    if let (Some(f1), Some(f2)) = (by_family.get("F1"), by_family.get("F2")) {
        let mut rows: Vec<(String, f64)> = Vec::new();
        for i in 0..32 {
            let h1 = Histogram::for_parameter(&f1[i], i)
                .map_err(|e| anyhow::anyhow!("histogram {}: {e}", PARAM_RANGES[i].name))?;
            let h2 = Histogram::for_parameter(&f2[i], i)
                .map_err(|e| anyhow::anyhow!("histogram {}: {e}", PARAM_RANGES[i].name))?;
            let d = information_radius_distance(&h1, &h2)
                .map_err(|e| anyhow::anyhow!("distance {}: {e}", PARAM_RANGES[i].name))?;
            rows.push((PARAM_RANGES[i].name.to_string(), d));
        }
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (name, d) in rows {
            dir_csv.push_str(&format!("{name},{d}\n"));
        }
    } else {
        manifest
            .notes
            .push("one family absent; distance table empty".into());
    }
    let dir_path = out_dir.join("d_ir.csv");
    atomic_write(&dir_path, &dir_csv)?;
    manifest.output(&dir_path);

    // Normalized per-family histograms.
    let mut hist_csv = String::from("family,parameter,bin_lo,bin_hi,freq\n");
    for (family, cols) in &by_family {
        for i in 0..32 {
            let h = Histogram::for_parameter(&cols[i], i)
                .map_err(|e| anyhow::anyhow!("histogram {}: {e}", PARAM_RANGES[i].name))?;
            for (bi, f) in h.freq.iter().enumerate() {
                hist_csv.push_str(&format!(
                    "{family},{},{},{},{f}\n",
                    PARAM_RANGES[i].name,
                    h.edges[bi],
                    h.edges[bi + 1]
                ));
            }
        }
    }
    let hist_path = out_dir.join("histograms.csv");
    atomic_write(&hist_path, &hist_csv)?;
    manifest.output(&hist_path);

    // Variance fractions of the correlation-matrix principal components over
    // the full batch.
    let data = DMatrix::from_fn(sets.len(), 32, |r, c| sets[r].as_array()[c]);
    let result = pca(&data).map_err(|e| anyhow::anyhow!("pca: {e}"))?;
    let mut pca_csv = String::from("component,fraction\n");
    for (i, f) in result.fractions.iter().enumerate() {
        pca_csv.push_str(&format!("{},{f}\n", i + 1));
    }
    let pca_path = out_dir.join("pca.csv");
    atomic_write(&pca_path, &pca_csv)?;
    manifest.output(&pca_path);
    if !result.dropped_columns.is_empty() {
        manifest.notes.push(format!(
            "pca dropped constant columns: {:?}",
            result.dropped_columns
        ));
    }

    // Tail probabilities at the capped histogram edges.
    let mut tail_csv = String::from("family,parameter,threshold,side,probability\n");
    let tails: [(usize, f64, TailSide, &str); 3] = [
        (15, GAMMA_II_BIN_CAP, TailSide::Ge, "ge"),
        (6, -65.0, TailSide::Ge, "ge"),
        (7, -65.0, TailSide::Ge, "ge"),
    ];
    for (family, cols) in &by_family {
        for (i, threshold, side, side_name) in tails {
            let p = tail_probability(&cols[i], threshold, side)
                .map_err(|e| anyhow::anyhow!("tail {}: {e}", PARAM_RANGES[i].name))?;
            tail_csv.push_str(&format!(
                "{family},{},{threshold},{side_name},{p}\n",
                PARAM_RANGES[i].name
            ));
        }
    }
    let tail_path = out_dir.join("tails.csv");
    atomic_write(&tail_path, &tail_csv)?;
    manifest.output(&tail_path);

    manifest.write(&out_dir.join("stats"))?;
    Ok(0)
}

fn read_labels(path: &Path, n_sets: usize) -> Result<Vec<FamilyLabel>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut labels = vec![FamilyLabel::Indeterminate; n_sets];
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: bad JSON", path.display(), lineno + 1))?;
        let index = v["index"]
            .as_u64()
            .with_context(|| format!("{}:{}: missing index", path.display(), lineno + 1))?
            as usize;
        if index >= n_sets {
            anyhow::bail!(
                "{}:{}: index {index} out of range for {n_sets} sets",
                path.display(),
                lineno + 1
            );
        }
        labels[index] = match v["label"].as_str() {
            Some("F1") => FamilyLabel::F1,
            Some("F2") => FamilyLabel::F2,
            _ => FamilyLabel::Indeterminate,
        };
    }
    Ok(labels)
}

#[allow(clippy::too_many_arguments)]
pub fn diagram(
    input: &Path,
    set: usize,
    mode: DiagramMode,
    k: f64,
    out: &Path,
    svg: Option<&Path>,
    skip_cycles: bool,
    common: &CommonOpts,
) -> Result<u8> {
    let file = FileConfig::load(common)?;
    let cfg = classify_config(&file);
    if !(k > 0.0) {
        return Err(usage("--k must be positive"));
    }
    let sets = read_params_csv(input)?;
    let Some(params) = sets.get(set).copied() else {
        return Err(usage(format!(
            "--set {set} out of range: input has {} sets",
            sets.len()
        )));
    };

    let mut manifest = RunManifest::new(
        "diagram",
        json!({
            "set": set,
            "mode": match mode { DiagramMode::OnePar => "1par", DiagramMode::TwoPar => "2par" },
            "k": k,
        }),
    );
    manifest.input(input);

    match mode {
        DiagramMode::OnePar => {
            diagram_1par(&params, k, out, svg, skip_cycles, &cfg, &mut manifest)?
        }
        DiagramMode::TwoPar => diagram_2par(&params, out, svg, &cfg, &mut manifest)?,
    }
    manifest.output(out);
    if let Some(p) = svg {
        manifest.output(p);
    }
    manifest.write(out)?;
    Ok(0)
}

fn diagram_1par(
    params: &ParameterSet,
    k: f64,
    out: &Path,
    svg: Option<&Path>,
    skip_cycles: bool,
    cfg: &ClassifyConfig,
    manifest: &mut RunManifest,
) -> Result<()> {
    let m0 = Modulation::new(1.0, k).map_err(|e| usage(format!("--k: {e}")))?;
    let mut fam = LileyFamily::new(*params, vec![Axis::R], vec![(1e-3, 4.0)]);
    fam.base_m = m0;
    let dim = fam.dim();

    let eq = solve_equilibrium(params, m0, &StateVector::rest_guess())?;
    let mut branch = continue_equilibrium_branch(&fam, &eq.to_dvector(), 1.0, &cfg.continuation)?;
    let detections = detect_codim1(&fam, &mut branch, &cfg.continuation);

    let mut csv = String::from("kind,R,h_e,stable,period\n");
    let mut eq_line: Vec<(f64, f64, bool)> = Vec::new();
    for pt in &branch.points {
        let x = pt.u.rows(0, dim).into_owned();
        let p = nalgebra::DVector::from_element(1, pt.u[dim]);
        let stable = eigen_spectrum(&fam.jac_x_scaled(&x, &p))
            .map(|eigs| eigs.iter().all(|l| l.re < 0.0))
            .unwrap_or(false);
        csv.push_str(&format!(
            "eq,{},{},{},\n",
            pt.u[dim],
            pt.u[0],
            u8::from(stable)
        ));
        eq_line.push((pt.u[dim], pt.u[0], stable));
    }

    let mut markers: Vec<(String, f64, f64)> = Vec::new();
    for d in &detections {
        csv.push_str(&format!(
            "{},{},{},,\n",
            d.kind.label(),
            d.location[0],
            d.state[0]
        ));
        markers.push((d.kind.label().to_string(), d.location[0], d.state[0]));
    }

    let mut cycle_pts: Vec<(f64, f64, bool, f64)> = Vec::new();
    if !skip_cycles {
        let mut ccfg = cfg.continuation.clone();
        ccfg.max_points = 150;
        for d in &detections {
            if d.kind != BifurcationKind::Hopf {
                continue;
            }
            let Some(omega) = d.hopf_frequency else {
                continue;
            };
            let x = nalgebra::DVector::from_row_slice(&d.state);
            match continue_periodic_orbit(
                &fam,
                &x,
                d.location[0],
                omega,
                &ShootingConfig::default(),
                &ccfg,
            ) {
                Ok(cycles) => {
                    for pt in &cycles.points {
                        let nontrivial = pt
                            .floquet
                            .iter()
                            .map(|mu| mu.norm())
                            .filter(|n| (n - 1.0).abs() > 1e-3)
                            .fold(0.0f64, f64::max);
                        let stable = nontrivial < 1.0;
                        csv.push_str(&format!(
                            "cycle,{},{},{},{}\n",
                            pt.param,
                            pt.peak,
                            u8::from(stable),
                            pt.period
                        ));
                        cycle_pts.push((pt.param, pt.peak, stable, pt.period));
                    }
                }
                Err(e) => manifest
                    .notes
                    .push(format!("cycle branch from R = {}: {e}", d.location[0])),
            }
        }
    }
    atomic_write(out, &csv)?;

    if let Some(path) = svg {
        let mut shapes = SvgScene::default();
        // Equilibria in green, stable cycles blue, unstable red.
        shapes.polyline(
            "#2ca02c",
            eq_line.iter().map(|(r, h, _)| (*r, *h)).collect(),
        );
        for (r, peak, stable, _) in &cycle_pts {
            shapes.circle(if *stable { "#1f77b4" } else { "#d62728" }, (*r, *peak), 2.0);
        }
        for (_, r, h) in &markers {
            shapes.circle("#000000", (*r, *h), 4.0);
        }
        atomic_write(path, &shapes.render())?;
    }
    Ok(())
}

fn diagram_2par(
    params: &ParameterSet,
    out: &Path,
    svg: Option<&Path>,
    cfg: &ClassifyConfig,
    manifest: &mut RunManifest,
) -> Result<()> {
    let report = classify_family(params, cfg);
    manifest
        .notes
        .push(format!("family label: {:?}", report.label));
    let portrait = build_portrait(params, report.window, &cfg.continuation, false);

    let mut csv = String::from("kind,R,k\n");
    let mut scene = SvgScene::default();
    for (kind, color, curves) in [
        ("sn", "#000000", &portrait.fold_curves),
        ("hb", "#7f7f7f", &portrait.hopf_curves),
    ] {
        for curve in curves {
            for (r, kk) in &curve.plane {
                csv.push_str(&format!("{kind},{r},{kk}\n"));
            }
            scene.polyline(color, curve.plane.clone());
            for b in &curve.codim2 {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    b.kind.label(),
                    b.location[0],
                    b.location[1]
                ));
                scene.circle("#d62728", (b.location[0], b.location[1]), 4.0);
            }
        }
    }
    let [(r_lo, r_hi), (k_lo, k_hi)] = Modulation::PHYSIOLOGICAL;
    for corner in [
        (r_lo, k_lo),
        (r_hi, k_lo),
        (r_hi, k_hi),
        (r_lo, k_hi),
        (r_lo, k_lo),
    ] {
        csv.push_str(&format!("rect,{},{}\n", corner.0, corner.1));
    }
    scene.polyline(
        "#2ca02c",
        vec![
            (r_lo, k_lo),
            (r_hi, k_lo),
            (r_hi, k_hi),
            (r_lo, k_hi),
            (r_lo, k_lo),
        ],
    );
    atomic_write(out, &csv)?;
    if let Some(path) = svg {
        atomic_write(path, &scene.render())?;
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

/// Minimal deterministic SVG writer with a fixed viewport.
#[derive(Default)]
struct SvgScene {
    polylines: Vec<(&'static str, Vec<(f64, f64)>)>,
    circles: Vec<(&'static str, (f64, f64), f64)>,
}

impl SvgScene {
    fn polyline(&mut self, color: &'static str, pts: Vec<(f64, f64)>) {
        if !pts.is_empty() {
            self.polylines.push((color, pts));
        }
    }

    fn circle(&mut self, color: &'static str, at: (f64, f64), r: f64) {
        self.circles.push((color, at, r));
    }

    fn render(&self) -> String {
        const W: f64 = 800.0;
        const H: f64 = 600.0;
        const PAD: f64 = 40.0;
        let all: Vec<(f64, f64)> = self
            .polylines
            .iter()
            .flat_map(|(_, pts)| pts.iter().copied())
            .chain(self.circles.iter().map(|(_, at, _)| *at))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (x, y) in &all {
            x0 = x0.min(*x);
            x1 = x1.max(*x);
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        if all.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let sx = (W - 2.0 * PAD) / (x1 - x0).max(1e-12);
        let sy = (H - 2.0 * PAD) / (y1 - y0).max(1e-12);
        let map = |(x, y): (f64, f64)| -> (f64, f64) {
            (PAD + (x - x0) * sx, H - PAD - (y - y0) * sy)
        };

        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
        );
        s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        for (color, pts) in &self.polylines {
            let coords: Vec<String> = pts
                .iter()
                .map(|&p| {
                    let (x, y) = map(p);
                    format!("{x:.4},{y:.4}")
                })
                .collect();
            s.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                coords.join(" ")
            ));
        }
        for (color, at, r) in &self.circles {
            let (x, y) = map(*at);
            s.push_str(&format!(
                "<circle cx=\"{x:.4}\" cy=\"{y:.4}\" r=\"{r}\" fill=\"{color}\"/>\n"
            ));
        }
        s.push_str("</svg>\n");
        s
    }
}
