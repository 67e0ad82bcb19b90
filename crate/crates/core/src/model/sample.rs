//! Range-constrained parameter sampling with a plausibility filter.
//!
//! The original physiological selection pipeline behind the published
//! parameter collection is not reproducible, so sampling draws uniformly
//! within the table ranges and keeps only sets that admit a stable resting
//! equilibrium with moderate firing rates at `R = k = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::dynamics::{jacobian, sigmoid_rate, Population};
use super::params::{Modulation, ParameterSet};
use crate::solver::{eigen_spectrum, solve_equilibrium_reduced};

/// Acceptance thresholds for sampled sets. These are configuration values,
/// not physiological constants.
#[derive(Debug, Clone, Copy)]
pub struct PlausibilityFilter {
    /// Lower bound on both population firing rates at equilibrium (1/s).
    pub rate_min: f64,
    /// Upper bound on both population firing rates at equilibrium (1/s).
    pub rate_max: f64,
    /// Require all eigenvalues of the equilibrium Jacobian in the left
    /// half-plane.
    pub require_stability: bool,
}

impl Default for PlausibilityFilter {
    fn default() -> Self {
        PlausibilityFilter {
            rate_min: 0.1,
            rate_max: 20.0,
            require_stability: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SampleStats {
    pub tried: u64,
    pub accepted: u64,
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("acceptance rate {accepted}/{tried} fell below 0.1% — plausibility filter looks broken")]
    AcceptanceTooLow { tried: u64, accepted: u64 },
}

/// Draw `count` parameter sets satisfying all range invariants and the
/// plausibility filter. Deterministic per seed: trial `t` uses its own
/// stream keyed by `seed + t`, so shards `[seed, seed + n)` can be produced
/// independently and concatenated.
pub fn sample_parameters(
    seed: u64,
    count: usize,
    filter: &PlausibilityFilter,
) -> Result<(Vec<ParameterSet>, SampleStats), SampleError> {
    let mut out = Vec::with_capacity(count);
    let mut stats = SampleStats::default();
    let mut trial: u64 = 0;
    while out.len() < count {
        let candidate = draw_candidate(seed, trial);
        trial += 1;
        stats.tried += 1;
        if passes_filter(&candidate, filter) {
            stats.accepted += 1;
            out.push(candidate);
        }
        if stats.tried >= 1_000_000 && (stats.accepted as f64) < 0.001 * stats.tried as f64 {
            return Err(SampleError::AcceptanceTooLow {
                tried: stats.tried,
                accepted: stats.accepted,
            });
        }
    }
    Ok((out, stats))
}

/// One uniform draw over the table ranges. The inhibitory reversal
/// potentials use their flexible upper limits `h^r - 5 mV`.
pub fn draw_candidate(seed: u64, trial: u64) -> ParameterSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    let mut u = |lo: f64, hi: f64| rng.gen_range(lo..=hi);

    let h_r_e = u(-80.0, -60.0);
    let h_r_i = u(-80.0, -60.0);
    let p = ParameterSet {
        h_r_e,
        h_r_i,
        tau_e: u(0.005, 0.150),
        tau_i: u(0.005, 0.150),
        h_eq_ee: u(-20.0, 10.0),
        h_eq_ei: u(-20.0, 10.0),
        h_eq_ie: u(-90.0, h_r_e - 5.0),
        h_eq_ii: u(-90.0, h_r_i - 5.0),
        Gamma_ee: u(0.1, 2.0),
        Gamma_ei: u(0.1, 2.0),
        Gamma_ie: u(0.1, 2.0),
        Gamma_ii: u(0.1, 2.0),
        gamma_ee: u(100.0, 1000.0),
        gamma_ei: u(100.0, 1000.0),
        gamma_ie: u(10.0, 500.0),
        gamma_ii: u(10.0, 500.0),
        N_alpha_ee: u(2000.0, 5000.0),
        N_alpha_ei: u(1000.0, 3000.0),
        N_beta_ee: u(2000.0, 5000.0),
        N_beta_ei: u(2000.0, 5000.0),
        N_beta_ie: u(100.0, 1000.0),
        N_beta_ii: u(100.0, 1000.0),
        v: u(100.0, 1000.0),
        Lambda: u(0.1, 1.0),
        S_max_e: u(50.0, 500.0),
        S_max_i: u(50.0, 500.0),
        mu_e: u(-55.0, -40.0),
        mu_i: u(-55.0, -40.0),
        sigma_e: u(2.0, 7.0),
        sigma_i: u(2.0, 7.0),
        p_ee: u(0.0, 10_000.0),
        p_ei: u(0.0, 10_000.0),
    };
    debug_assert!(p.validate().is_ok());
    p
}

fn passes_filter(params: &ParameterSet, filter: &PlausibilityFilter) -> bool {
    let m = Modulation::IDENTITY;
    let Ok(eq) = solve_equilibrium_reduced(params, m, (-70.0, -70.0)) else {
        return false;
    };
    let s_e = sigmoid_rate(eq.h_e(), Population::Excitatory, params);
    let s_i = sigmoid_rate(eq.h_i(), Population::Inhibitory, params);
    if !(s_e > filter.rate_min && s_e < filter.rate_max) {
        return false;
    }
    if !(s_i > filter.rate_min && s_i < filter.rate_max) {
        return false;
    }
    if filter.require_stability {
        let j = jacobian(&eq, params, m);
        match eigen_spectrum(&j) {
            Ok(eigs) => eigs.iter().all(|l| l.re < 0.0),
            Err(_) => false,
        }
    } else {
        true
    }
}
