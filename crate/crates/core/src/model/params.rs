use serde::{Deserialize, Serialize};

use super::ModelError;

/// The 32 physiological parameters of the mean-field cortex.
///
/// Field names follow the conventional symbols: `Gamma_*` are PSP peak
/// amplitudes (mV), `gamma_*` PSP rate constants (1/s), `N_alpha_*` and
/// `N_beta_*` cortico-cortical and intracortical synapse counts. Double
/// subscripts read source-then-target. Conduction velocity `v` (cm/s) and
/// connectivity decay `Lambda` (1/cm) enter the dynamics only through the
/// product `omega = v * Lambda`, and `Gamma_i*`/`N_beta_ii` only jointly with
/// the inhibitory modulation, so the space is effectively 29-dimensional.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub h_r_e: f64,
    pub h_r_i: f64,
    pub tau_e: f64,
    pub tau_i: f64,
    pub h_eq_ee: f64,
    pub h_eq_ei: f64,
    pub h_eq_ie: f64,
    pub h_eq_ii: f64,
    pub Gamma_ee: f64,
    pub Gamma_ei: f64,
    pub Gamma_ie: f64,
    pub Gamma_ii: f64,
    pub gamma_ee: f64,
    pub gamma_ei: f64,
    pub gamma_ie: f64,
    pub gamma_ii: f64,
    pub N_alpha_ee: f64,
    pub N_alpha_ei: f64,
    pub N_beta_ee: f64,
    pub N_beta_ei: f64,
    pub N_beta_ie: f64,
    pub N_beta_ii: f64,
    pub v: f64,
    pub Lambda: f64,
    pub S_max_e: f64,
    pub S_max_i: f64,
    pub mu_e: f64,
    pub mu_i: f64,
    pub sigma_e: f64,
    pub sigma_i: f64,
    pub p_ee: f64,
    pub p_ei: f64,
}

/// Fixed bounds for one parameter, in the internal units (mV, 1/s, s, cm).
#[derive(Debug, Clone, Copy)]
pub struct ParamRange {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
}

const fn range(name: &'static str, min: f64, max: f64) -> ParamRange {
    ParamRange { name, min, max }
}

/// Physiological ranges for all 32 parameters.
///
/// The inhibitory reversal potentials carry a flexible upper limit
/// (`h^r - 5 mV`); the value listed here is the loosest possible one
/// (-65 mV), which is also the histogram bin cap used in `stats`.
pub const PARAM_RANGES: [ParamRange; 32] = [
    range("h_r_e", -80.0, -60.0),
    range("h_r_i", -80.0, -60.0),
    range("tau_e", 0.005, 0.150),
    range("tau_i", 0.005, 0.150),
    range("h_eq_ee", -20.0, 10.0),
    range("h_eq_ei", -20.0, 10.0),
    range("h_eq_ie", -90.0, -65.0),
    range("h_eq_ii", -90.0, -65.0),
    range("Gamma_ee", 0.1, 2.0),
    range("Gamma_ei", 0.1, 2.0),
    range("Gamma_ie", 0.1, 2.0),
    range("Gamma_ii", 0.1, 2.0),
    range("gamma_ee", 100.0, 1000.0),
    range("gamma_ei", 100.0, 1000.0),
    range("gamma_ie", 10.0, 500.0),
    range("gamma_ii", 10.0, 500.0),
    range("N_alpha_ee", 2000.0, 5000.0),
    range("N_alpha_ei", 1000.0, 3000.0),
    range("N_beta_ee", 2000.0, 5000.0),
    range("N_beta_ei", 2000.0, 5000.0),
    range("N_beta_ie", 100.0, 1000.0),
    range("N_beta_ii", 100.0, 1000.0),
    range("v", 100.0, 1000.0),
    range("Lambda", 0.1, 1.0),
    range("S_max_e", 50.0, 500.0),
    range("S_max_i", 50.0, 500.0),
    range("mu_e", -55.0, -40.0),
    range("mu_i", -55.0, -40.0),
    range("sigma_e", 2.0, 7.0),
    range("sigma_i", 2.0, 7.0),
    range("p_ee", 0.0, 10_000.0),
    range("p_ei", 0.0, 10_000.0),
];

impl ParameterSet {
    /// Field values in the order of [`PARAM_RANGES`].
    pub fn as_array(&self) -> [f64; 32] {
        [
            self.h_r_e,
            self.h_r_i,
            self.tau_e,
            self.tau_i,
            self.h_eq_ee,
            self.h_eq_ei,
            self.h_eq_ie,
            self.h_eq_ii,
            self.Gamma_ee,
            self.Gamma_ei,
            self.Gamma_ie,
            self.Gamma_ii,
            self.gamma_ee,
            self.gamma_ei,
            self.gamma_ie,
            self.gamma_ii,
            self.N_alpha_ee,
            self.N_alpha_ei,
            self.N_beta_ee,
            self.N_beta_ei,
            self.N_beta_ie,
            self.N_beta_ii,
            self.v,
            self.Lambda,
            self.S_max_e,
            self.S_max_i,
            self.mu_e,
            self.mu_i,
            self.sigma_e,
            self.sigma_i,
            self.p_ee,
            self.p_ei,
        ]
    }

    pub fn from_array(vals: &[f64; 32]) -> Self {
        Self {
            h_r_e: vals[0],
            h_r_i: vals[1],
            tau_e: vals[2],
            tau_i: vals[3],
            h_eq_ee: vals[4],
            h_eq_ei: vals[5],
            h_eq_ie: vals[6],
            h_eq_ii: vals[7],
            Gamma_ee: vals[8],
            Gamma_ei: vals[9],
            Gamma_ie: vals[10],
            Gamma_ii: vals[11],
            gamma_ee: vals[12],
            gamma_ei: vals[13],
            gamma_ie: vals[14],
            gamma_ii: vals[15],
            N_alpha_ee: vals[16],
            N_alpha_ei: vals[17],
            N_beta_ee: vals[18],
            N_beta_ei: vals[19],
            N_beta_ie: vals[20],
            N_beta_ii: vals[21],
            v: vals[22],
            Lambda: vals[23],
            S_max_e: vals[24],
            S_max_i: vals[25],
            mu_e: vals[26],
            mu_i: vals[27],
            sigma_e: vals[28],
            sigma_i: vals[29],
            p_ee: vals[30],
            p_ei: vals[31],
        }
    }

    /// Check all range constraints, the `h^eq_i* <= h^r - 5 mV` rule, and that
    /// every voltage-weighting denominator of the soma equations stays >= 1 mV.
    pub fn validate(&self) -> Result<(), ModelError> {
        let vals = self.as_array();
        for (r, &value) in PARAM_RANGES.iter().zip(vals.iter()) {
            if !(value >= r.min && value <= r.max) || !value.is_finite() {
                return Err(ModelError::OutOfRange {
                    name: r.name,
                    value,
                    min: r.min,
                    max: r.max,
                });
            }
        }
        if self.h_eq_ie > self.h_r_e - 5.0 {
            return Err(ModelError::ReversalAboveRest {
                name: "h_eq_ie",
                value: self.h_eq_ie,
                limit: self.h_r_e - 5.0,
            });
        }
        if self.h_eq_ii > self.h_r_i - 5.0 {
            return Err(ModelError::ReversalAboveRest {
                name: "h_eq_ii",
                value: self.h_eq_ii,
                limit: self.h_r_i - 5.0,
            });
        }
        for (name, num) in [
            ("h_eq_ee - h_r_e", self.h_eq_ee - self.h_r_e),
            ("h_eq_ie - h_r_e", self.h_eq_ie - self.h_r_e),
            ("h_eq_ei - h_r_i", self.h_eq_ei - self.h_r_i),
            ("h_eq_ii - h_r_i", self.h_eq_ii - self.h_r_i),
        ] {
            if num.abs() < 1.0 {
                return Err(ModelError::DegenerateDenominator {
                    name,
                    value: num.abs(),
                });
            }
        }
        Ok(())
    }

    /// Effective long-range rate constant `omega = v * Lambda` (1/s).
    pub fn omega(&self) -> f64 {
        self.v * self.Lambda
    }

    /// Copy with a different thalamic drive to inhibitory neurons.
    ///
    /// Sweeps deliberately exceed the physiological cap (up to 26,000/s), so
    /// no range check is applied beyond non-negativity.
    pub fn with_p_ei(&self, p_ei: f64) -> Self {
        debug_assert!(p_ei >= 0.0);
        Self { p_ei, ..*self }
    }

    /// Copy with a different thalamic drive to excitatory neurons.
    pub fn with_p_ee(&self, p_ee: f64) -> Self {
        debug_assert!(p_ee >= 0.0);
        Self { p_ee, ..*self }
    }

    /// CSV header naming all 32 fields in canonical order.
    pub fn csv_header() -> String {
        PARAM_RANGES
            .iter()
            .map(|r| r.name)
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.as_array()
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Inhibitory modulation: `R` scales both inhibitory PSP amplitudes
/// (`Gamma_ie`, `Gamma_ii`), `k` scales the inhibitory-inhibitory
/// connectivity `N_beta_ii`. The physiological window is
/// `[0.75, 2.00] x [0.75, 1.25]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub r: f64,
    pub k: f64,
}

impl Modulation {
    pub const IDENTITY: Modulation = Modulation { r: 1.0, k: 1.0 };

    /// Physiological rectangle in the `(R, k)` plane.
    pub const PHYSIOLOGICAL: [(f64, f64); 2] = [(0.75, 2.00), (0.75, 1.25)];

    pub fn new(r: f64, k: f64) -> Result<Self, ModelError> {
        if r > 0.0 && k > 0.0 && r.is_finite() && k.is_finite() {
            Ok(Self { r, k })
        } else {
            Err(ModelError::NonPositiveModulation { r, k })
        }
    }
}

/// Apply the `(R, k)` modulation, returning the scaled parameter set.
///
/// Exactly three fields change; the composite inhibitory drive on the
/// inhibitory population scales with `R * k`.
pub fn apply_modulation(params: &ParameterSet, m: Modulation) -> ParameterSet {
    ParameterSet {
        Gamma_ie: m.r * params.Gamma_ie,
        Gamma_ii: m.r * params.Gamma_ii,
        N_beta_ii: m.k * params.N_beta_ii,
        ..*params
    }
}

impl ParameterSet {
    /// Shorthand for [`apply_modulation`].
    pub fn modulated(&self, m: Modulation) -> ParameterSet {
        apply_modulation(self, m)
    }
}
