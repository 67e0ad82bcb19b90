//! The Liley mean-field model: parameters, state, right-hand side, Jacobian,
//! and plausibility-filtered parameter sampling.
//!
//! Internal unit convention is fixed once: potentials in mV, rates and firing
//! rates in 1/s, time in s, lengths in cm.

mod dynamics;
mod params;
mod sample;
pub mod state;

pub use dynamics::{
    jacobian, lift_reduced, reduced_residual, rhs, sigmoid_rate, state_scales, Population,
};
pub use params::{apply_modulation, Modulation, ParamRange, ParameterSet, PARAM_RANGES};
pub use sample::{draw_candidate, sample_parameters, PlausibilityFilter, SampleError, SampleStats};
pub use state::{self as state_index, StateVector};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter `{name}` = {value} outside range [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("inhibitory reversal potential {name} = {value} must be <= {limit} (resting potential - 5 mV)")]
    ReversalAboveRest {
        name: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("voltage-weighting denominator |{name}| = {value} below 1 mV")]
    DegenerateDenominator { name: &'static str, value: f64 },
    #[error("modulation must be positive, got R = {r}, k = {k}")]
    NonPositiveModulation { r: f64, k: f64 },
}
