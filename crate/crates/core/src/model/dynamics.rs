//! Right-hand side, analytic Jacobian, and the two-variable equilibrium
//! reduction of the mean-field equations.

use nalgebra::{DMatrix, DVector};

use super::params::{apply_modulation, Modulation, ParameterSet};
use super::state::*;

/// Euler's number, the normalization of the critically damped PSP kernel.
const E: f64 = std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    Excitatory,
    Inhibitory,
}

/// Mean firing rate `S_k(h) = S_max / (1 + exp(-sqrt(2) (h - mu)/sigma))`.
pub fn sigmoid_rate(h: f64, pop: Population, params: &ParameterSet) -> f64 {
    let (s_max, mu, sigma) = match pop {
        Population::Excitatory => (params.S_max_e, params.mu_e, params.sigma_e),
        Population::Inhibitory => (params.S_max_i, params.mu_i, params.sigma_i),
    };
    s_max / (1.0 + (-std::f64::consts::SQRT_2 * (h - mu) / sigma).exp())
}

/// Derivative of the sigmoid with respect to `h`.
fn sigmoid_slope(h: f64, pop: Population, params: &ParameterSet) -> f64 {
    let (s_max, sigma) = match pop {
        Population::Excitatory => (params.S_max_e, params.sigma_e),
        Population::Inhibitory => (params.S_max_i, params.sigma_i),
    };
    let s = sigmoid_rate(h, pop, params);
    std::f64::consts::SQRT_2 / sigma * s * (1.0 - s / s_max)
}

/// Voltage-weighting factors of the soma equations. Denominators are taken
/// at the resting potential of the target population and are guaranteed
/// >= 1 mV by `ParameterSet::validate`.
struct Weights {
    d_ee: f64,
    d_ie: f64,
    d_ei: f64,
    d_ii: f64,
}

impl Weights {
    fn new(q: &ParameterSet) -> Self {
        Weights {
            d_ee: (q.h_eq_ee - q.h_r_e).abs(),
            d_ie: (q.h_eq_ie - q.h_r_e).abs(),
            d_ei: (q.h_eq_ei - q.h_r_i).abs(),
            d_ii: (q.h_eq_ii - q.h_r_i).abs(),
        }
    }
}

/// Time derivative of the full 14-variable state.
pub fn rhs(x: &StateVector, params: &ParameterSet, m: Modulation) -> StateVector {
    let q = apply_modulation(params, m);
    let w = Weights::new(&q);
    let omega = q.omega();

    let h_e = x[H_E];
    let h_i = x[H_I];
    let s_e = sigmoid_rate(h_e, Population::Excitatory, &q);
    let s_i = sigmoid_rate(h_i, Population::Inhibitory, &q);

    let mut f = StateVector::zeros();

    f[H_E] = (q.h_r_e - h_e
        + (q.h_eq_ee - h_e) / w.d_ee * x[I_EE]
        + (q.h_eq_ie - h_e) / w.d_ie * x[I_IE])
        / q.tau_e;
    f[H_I] = (q.h_r_i - h_i
        + (q.h_eq_ei - h_i) / w.d_ei * x[I_EI]
        + (q.h_eq_ii - h_i) / w.d_ii * x[I_II])
        / q.tau_i;

    // Critically damped synaptic kernels, second order written as pairs.
    f[I_EE] = x[D_EE];
    f[D_EE] = -2.0 * q.gamma_ee * x[D_EE] - q.gamma_ee * q.gamma_ee * x[I_EE]
        + q.Gamma_ee * q.gamma_ee * E * (q.N_beta_ee * s_e + q.p_ee + x[PHI_EE]);
    f[I_EI] = x[D_EI];
    f[D_EI] = -2.0 * q.gamma_ei * x[D_EI] - q.gamma_ei * q.gamma_ei * x[I_EI]
        + q.Gamma_ei * q.gamma_ei * E * (q.N_beta_ei * s_e + q.p_ei + x[PHI_EI]);
    f[I_IE] = x[D_IE];
    f[D_IE] = -2.0 * q.gamma_ie * x[D_IE] - q.gamma_ie * q.gamma_ie * x[I_IE]
        + q.Gamma_ie * q.gamma_ie * E * (q.N_beta_ie * s_i);
    f[I_II] = x[D_II];
    f[D_II] = -2.0 * q.gamma_ii * x[D_II] - q.gamma_ii * q.gamma_ii * x[I_II]
        + q.Gamma_ii * q.gamma_ii * E * (q.N_beta_ii * s_i);

    // Bulk long-range propagation, damped-oscillator form.
    f[PHI_EE] = x[DPHI_EE];
    f[DPHI_EE] =
        -2.0 * omega * x[DPHI_EE] - omega * omega * x[PHI_EE] + q.N_alpha_ee * omega * omega * s_e;
    f[PHI_EI] = x[DPHI_EI];
    f[DPHI_EI] =
        -2.0 * omega * x[DPHI_EI] - omega * omega * x[PHI_EI] + q.N_alpha_ei * omega * omega * s_e;

    f
}

/// Analytic 14x14 Jacobian of [`rhs`] at `x`.
pub fn jacobian(x: &StateVector, params: &ParameterSet, m: Modulation) -> DMatrix<f64> {
    let q = apply_modulation(params, m);
    let w = Weights::new(&q);
    let omega = q.omega();

    let h_e = x[H_E];
    let h_i = x[H_I];
    let ds_e = sigmoid_slope(h_e, Population::Excitatory, &q);
    let ds_i = sigmoid_slope(h_i, Population::Inhibitory, &q);

    let mut j = DMatrix::zeros(DIM, DIM);

    j[(H_E, H_E)] = (-1.0 - x[I_EE] / w.d_ee - x[I_IE] / w.d_ie) / q.tau_e;
    j[(H_E, I_EE)] = (q.h_eq_ee - h_e) / w.d_ee / q.tau_e;
    j[(H_E, I_IE)] = (q.h_eq_ie - h_e) / w.d_ie / q.tau_e;

    j[(H_I, H_I)] = (-1.0 - x[I_EI] / w.d_ei - x[I_II] / w.d_ii) / q.tau_i;
    j[(H_I, I_EI)] = (q.h_eq_ei - h_i) / w.d_ei / q.tau_i;
    j[(H_I, I_II)] = (q.h_eq_ii - h_i) / w.d_ii / q.tau_i;

    j[(I_EE, D_EE)] = 1.0;
    j[(D_EE, H_E)] = q.Gamma_ee * q.gamma_ee * E * q.N_beta_ee * ds_e;
    j[(D_EE, I_EE)] = -q.gamma_ee * q.gamma_ee;
    j[(D_EE, D_EE)] = -2.0 * q.gamma_ee;
    j[(D_EE, PHI_EE)] = q.Gamma_ee * q.gamma_ee * E;

    j[(I_EI, D_EI)] = 1.0;
    j[(D_EI, H_E)] = q.Gamma_ei * q.gamma_ei * E * q.N_beta_ei * ds_e;
    j[(D_EI, I_EI)] = -q.gamma_ei * q.gamma_ei;
    j[(D_EI, D_EI)] = -2.0 * q.gamma_ei;
    j[(D_EI, PHI_EI)] = q.Gamma_ei * q.gamma_ei * E;

    j[(I_IE, D_IE)] = 1.0;
    j[(D_IE, H_I)] = q.Gamma_ie * q.gamma_ie * E * q.N_beta_ie * ds_i;
    j[(D_IE, I_IE)] = -q.gamma_ie * q.gamma_ie;
    j[(D_IE, D_IE)] = -2.0 * q.gamma_ie;

    j[(I_II, D_II)] = 1.0;
    j[(D_II, H_I)] = q.Gamma_ii * q.gamma_ii * E * q.N_beta_ii * ds_i;
    j[(D_II, I_II)] = -q.gamma_ii * q.gamma_ii;
    j[(D_II, D_II)] = -2.0 * q.gamma_ii;

    j[(PHI_EE, DPHI_EE)] = 1.0;
    j[(DPHI_EE, H_E)] = q.N_alpha_ee * omega * omega * ds_e;
    j[(DPHI_EE, PHI_EE)] = -omega * omega;
    j[(DPHI_EE, DPHI_EE)] = -2.0 * omega;

    j[(PHI_EI, DPHI_EI)] = 1.0;
    j[(DPHI_EI, H_E)] = q.N_alpha_ei * omega * omega * ds_e;
    j[(DPHI_EI, PHI_EI)] = -omega * omega;
    j[(DPHI_EI, DPHI_EI)] = -2.0 * omega;

    j
}

/// Residual of the equilibrium system reduced to `(h_e, h_i)`.
///
/// At a fixed point every synaptic input and long-range rate is an explicit
/// function of the soma potentials, which collapses the 14 equations to two.
pub fn reduced_residual(h_e: f64, h_i: f64, params: &ParameterSet, m: Modulation) -> [f64; 2] {
    let x = lift_reduced(h_e, h_i, params, m);
    let q = apply_modulation(params, m);
    let w = Weights::new(&q);
    [
        q.h_r_e - h_e
            + (q.h_eq_ee - h_e) / w.d_ee * x[I_EE]
            + (q.h_eq_ie - h_e) / w.d_ie * x[I_IE],
        q.h_r_i - h_i
            + (q.h_eq_ei - h_i) / w.d_ei * x[I_EI]
            + (q.h_eq_ii - h_i) / w.d_ii * x[I_II],
    ]
}

/// Full state whose synaptic and long-range variables sit at their steady
/// values for the given soma potentials.
pub fn lift_reduced(h_e: f64, h_i: f64, params: &ParameterSet, m: Modulation) -> StateVector {
    let q = apply_modulation(params, m);
    let s_e = sigmoid_rate(h_e, Population::Excitatory, &q);
    let s_i = sigmoid_rate(h_i, Population::Inhibitory, &q);

    let phi_ee = q.N_alpha_ee * s_e;
    let phi_ei = q.N_alpha_ei * s_e;

    let mut x = StateVector::zeros();
    x[H_E] = h_e;
    x[H_I] = h_i;
    x[I_EE] = q.Gamma_ee * E * (q.N_beta_ee * s_e + q.p_ee + phi_ee) / q.gamma_ee;
    x[I_EI] = q.Gamma_ei * E * (q.N_beta_ei * s_e + q.p_ei + phi_ei) / q.gamma_ei;
    x[I_IE] = q.Gamma_ie * E * q.N_beta_ie * s_i / q.gamma_ie;
    x[I_II] = q.Gamma_ii * E * q.N_beta_ii * s_i / q.gamma_ii;
    x[PHI_EE] = phi_ee;
    x[PHI_EI] = phi_ei;
    x
}

/// Typical magnitude of each state component, used to weight norms so that
/// mixed units (mV, mV/s, 1/s, 1/s^2) contribute comparably.
pub fn state_scales(params: &ParameterSet) -> DVector<f64> {
    let q = params;
    let mut s = DVector::from_element(DIM, 1.0);
    s[H_E] = 50.0;
    s[H_I] = 50.0;
    for (i_idx, gamma) in [
        (I_EE, q.gamma_ee),
        (I_EI, q.gamma_ei),
        (I_IE, q.gamma_ie),
        (I_II, q.gamma_ii),
    ] {
        s[i_idx] = 10.0;
        s[i_idx + 1] = 10.0 * gamma;
    }
    let omega = q.omega();
    s[PHI_EE] = q.N_alpha_ee * q.S_max_e;
    s[DPHI_EE] = s[PHI_EE] * omega;
    s[PHI_EI] = q.N_alpha_ei * q.S_max_e;
    s[DPHI_EI] = s[PHI_EI] * omega;
    s
}
