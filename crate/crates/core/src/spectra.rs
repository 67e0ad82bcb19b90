//! Noise-driven power spectra around stable equilibria: the linearized
//! transfer-function route, a Lyapunov-equation variance cross-check, power
//! ratios under a parameter transform, and a stochastic simulator.
//!
//! Noise enters through the thalamic drive `p_ee`, which forces the two
//! excitatory input channels; the observable is the excitatory soma
//! potential `h_e`.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{jacobian, rhs, state_index, Modulation, ParameterSet, StateVector};
use crate::solver::eigen_spectrum;

const E: f64 = std::f64::consts::E;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("equilibrium is not stable (leading eigenvalue real part {0:.3e})")]
    UnstableEquilibrium(f64),
    #[error("state diverged at t = {0:.3} s")]
    BlowUp(f64),
    #[error("eigenvalue computation failed")]
    EigenFailure,
    #[error("singular linear solve in spectrum computation")]
    Singular,
}

/// Linearization of the model around a stable equilibrium, as an
/// input-output system from `p_ee` fluctuations to `h_e`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    /// Input column: unit `p_ee` perturbation enters the second-order
    /// synaptic input equations of both excitatory channels.
    pub b: DVector<f64>,
    /// Output row selecting `h_e`.
    pub c: DVector<f64>,
}

/// Input column of a unit `p_ee` perturbation.
pub fn input_column(params: &ParameterSet) -> DVector<f64> {
    let mut b = DVector::zeros(StateVector::DIM);
    b[state_index::D_EE] = params.Gamma_ee * params.gamma_ee * E;
    b[state_index::D_EI] = params.Gamma_ei * params.gamma_ei * E;
    b
}

/// Linearize around `equilibrium`; fails if the equilibrium is unstable.
pub fn linearize(
    params: &ParameterSet,
    m: Modulation,
    equilibrium: &StateVector,
) -> Result<LinearSystem, SpectraError> {
    let a = jacobian(equilibrium, params, m);
    let eigs = eigen_spectrum(&a).map_err(|_| SpectraError::EigenFailure)?;
    let leading = eigs.first().map(|l| l.re).unwrap_or(f64::NAN);
    if !(leading < 0.0) {
        return Err(SpectraError::UnstableEquilibrium(leading));
    }
    let mut c = DVector::zeros(StateVector::DIM);
    c[state_index::H_E] = 1.0;
    Ok(LinearSystem {
        a,
        b: input_column(params),
        c,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerResult {
    /// Sample frequencies in Hz.
    pub freqs: Vec<f64>,
    /// Two-sided spectral density `|C (2 pi i f I - A)^-1 B|^2 S` sampled at
    /// nonnegative frequencies (the density is symmetric in `f`).
    pub density: Vec<f64>,
    /// Total power: the density integrated over both frequency half-axes.
    pub total_power: f64,
    pub band: (f64, f64),
}

/// Density of the output under white input noise of (two-sided) spectral
/// density `noise_density`, at frequency `f` in Hz.
pub fn density_at(sys: &LinearSystem, f: f64, noise_density: f64) -> f64 {
    let n = sys.a.nrows();
    let ac: DMatrix<Complex64> = sys.a.map(|v| Complex::new(v, 0.0));
    let m = DMatrix::from_diagonal_element(n, n, Complex::new(0.0, 2.0 * std::f64::consts::PI * f))
        - ac;
    let bc: DVector<Complex64> = sys.b.map(|v| Complex::new(v, 0.0));
    match m.lu().solve(&bc) {
        Some(x) => {
            let out: Complex64 = sys
                .c
                .iter()
                .zip(x.iter())
                .map(|(ci, xi)| Complex::new(*ci, 0.0) * xi)
                .sum();
            out.norm_sqr() * noise_density
        }
        None => f64::NAN,
    }
}

/// Linearized power spectrum over `band` with `n_freq` uniform samples.
///
/// `total_power` accounts for the mirrored negative-frequency half, so for a
/// band starting at zero it equals the output variance contributed by the
/// band (cross-checkable against [`output_variance`]).
pub fn power_spectrum(
    sys: &LinearSystem,
    band: (f64, f64),
    n_freq: usize,
    noise_density: f64,
) -> Result<PowerResult, SpectraError> {
    assert!(band.1 > band.0 && n_freq >= 2, "invalid band");
    let freqs: Vec<f64> = (0..n_freq)
        .map(|i| band.0 + (band.1 - band.0) * i as f64 / (n_freq - 1) as f64)
        .collect();
    let density: Vec<f64> = freqs
        .iter()
        .map(|&f| density_at(sys, f, noise_density))
        .collect();
    if density.iter().any(|d| !d.is_finite()) {
        return Err(SpectraError::Singular);
    }
    let mut total = 0.0;
    for i in 0..n_freq - 1 {
        total += 0.5 * (density[i] + density[i + 1]) * (freqs[i + 1] - freqs[i]);
    }
    Ok(PowerResult {
        freqs,
        density,
        total_power: 2.0 * total,
        band,
    })
}

/// Output variance by the Lyapunov-equation route: solve
/// `A X + X A^T + S B B^T = 0` and return `C X C^T`. Equals the density
/// integrated over the whole frequency axis.
pub fn output_variance(sys: &LinearSystem, noise_density: f64) -> Result<f64, SpectraError> {
    let n = sys.a.nrows();
    // vec(AX + XA^T) = (I kron A + A kron I) vec(X).
    let mut k = DMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                // (I kron A): block diagonal copies of A.
                k[(j * n + i, j * n + l)] += sys.a[(i, l)];
                // (A kron I): scalar A[j, l] times identity blocks.
                k[(j * n + i, l * n + i)] += sys.a[(j, l)];
            }
        }
    }
    let mut q = DVector::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            q[j * n + i] = -noise_density * sys.b[i] * sys.b[j];
        }
    }
    let x = k.lu().solve(&q).ok_or(SpectraError::Singular)?;
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            var += sys.c[i] * x[j * n + i] * sys.c[j];
        }
    }
    Ok(var)
}

/// Parameter map emulating anesthetic action on inhibition: IPSP amplitudes
/// scaled by `a`, IPSP rate constants divided by `b` (prolongation).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnestheticTransform {
    pub a: f64,
    pub b: f64,
}

impl Default for AnestheticTransform {
    fn default() -> Self {
        AnestheticTransform { a: 1.0, b: 1.5 }
    }
}

impl AnestheticTransform {
    pub const IDENTITY: AnestheticTransform = AnestheticTransform { a: 1.0, b: 1.0 };

    pub fn apply(&self, params: &ParameterSet) -> ParameterSet {
        let mut p = *params;
        p.Gamma_ie *= self.a;
        p.Gamma_ii *= self.a;
        p.gamma_ie /= self.b;
        p.gamma_ii /= self.b;
        p
    }
}

/// Threshold on the power ratio above which the response counts as biphasic.
pub const BIPHASIC_THRESHOLD: f64 = 1.4;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerRatio {
    pub baseline_power: f64,
    pub transformed_power: f64,
    pub ratio: f64,
    pub biphasic: bool,
}

/// Ratio of total linearized power after and before the transform, around
/// the equilibria continued from the given starting guesses.
pub fn power_ratio(
    params: &ParameterSet,
    m: Modulation,
    transform: &AnestheticTransform,
    equilibrium: &StateVector,
    transformed_equilibrium: &StateVector,
    band: (f64, f64),
    n_freq: usize,
) -> Result<PowerRatio, SpectraError> {
    let base = power_spectrum(&linearize(params, m, equilibrium)?, band, n_freq, 1.0)?;
    let mapped = transform.apply(params);
    let trans = power_spectrum(
        &linearize(&mapped, m, transformed_equilibrium)?,
        band,
        n_freq,
        1.0,
    )?;
    let ratio = trans.total_power / base.total_power;
    Ok(PowerRatio {
        baseline_power: base.total_power,
        transformed_power: trans.total_power,
        ratio,
        biphasic: ratio > BIPHASIC_THRESHOLD,
    })
}

/// Euler-Maruyama simulation of the full nonlinear system with white noise
/// of two-sided density `noise_density` on the `p_ee` channel. Returns the
/// `h_e` series sampled every step. Deterministic per seed.
pub fn simulate_stochastic(
    params: &ParameterSet,
    m: Modulation,
    start: &StateVector,
    noise_density: f64,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>, SpectraError> {
    assert!(dt > 0.0 && duration > 0.0, "invalid time grid");
    let b = input_column(params);
    let sigma = noise_density.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = (duration / dt).round() as usize;
    let mut x = start.to_dvector();
    let mut series = Vec::with_capacity(steps + 1);
    series.push(x[state_index::H_E]);
    for step in 0..steps {
        let drift = rhs(&StateVector::from_slice(x.as_slice()), params, m).to_dvector();
        let noise: f64 = standard_normal(&mut rng) * sigma * dt.sqrt();
        x += dt * drift + noise * &b;
        let h_e = x[state_index::H_E];
        if !h_e.is_finite() || h_e.abs() > 1e4 {
            return Err(SpectraError::BlowUp(step as f64 * dt));
        }
        series.push(h_e);
    }
    Ok(series)
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller on open-interval uniforms.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Welch spectral estimate of a uniformly sampled series: Hann window,
/// 50% overlap. Returns `(frequencies Hz, two-sided density)` up to the
/// Nyquist frequency, in the same normalization as [`power_spectrum`].
pub fn welch_psd(series: &[f64], dt: f64, segment_len: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(segment_len >= 8 && series.len() >= segment_len);
    let nseg = segment_len;
    let hop = nseg / 2;
    let window: Vec<f64> = (0..nseg)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / nseg as f64;
            t.sin() * t.sin()
        })
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();

    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nseg);
    let mut acc = vec![0.0f64; nseg / 2 + 1];
    let mut count = 0usize;
    let mut start = 0usize;
    while start + nseg <= series.len() {
        let mut buf: Vec<rustfft::num_complex::Complex<f64>> = (0..nseg)
            .map(|i| rustfft::num_complex::Complex::new((series[start + i] - mean) * window[i], 0.0))
            .collect();
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        count += 1;
        start += hop;
    }
    // Two-sided PSD normalization: |X_k|^2 * dt / sum(w^2).
    let scale = dt / (win_power * count.max(1) as f64);
    let freqs: Vec<f64> = (0..acc.len())
        .map(|k| k as f64 / (nseg as f64 * dt))
        .collect();
    let density: Vec<f64> = acc.iter().map(|a| a * scale).collect();
    (freqs, density)
}
