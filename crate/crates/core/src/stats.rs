//! Descriptive statistics over parameter batches: fixed-range histograms,
//! the information-radius distance between distributions, correlation-matrix
//! PCA, and empirical tail probabilities.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::PARAM_RANGES;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("histograms have different bin edges")]
    BinMismatch,
    #[error("data matrix is degenerate: {0}")]
    DegenerateData(String),
}

/// Default bin count for parameter histograms.
pub const HISTOGRAM_BINS: usize = 20;

/// Upper bin limit applied to `gamma_ii`, values beyond it are counted in
/// the highest bin.
pub const GAMMA_II_BIN_CAP: f64 = 120.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    /// Ascending bin edges, length `freq.len() + 1`.
    pub edges: Vec<f64>,
    /// Normalized frequencies.
    pub freq: Vec<f64>,
    /// Whether out-of-range values were clamped into the boundary bins.
    pub clamped: bool,
}

impl Histogram {
    /// Histogram of `values` over `[lo, hi]` with `bins` equal-width bins.
    /// Values outside the range are clamped into the boundary bins.
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptyInput);
        }
        assert!(bins >= 1 && hi > lo, "invalid histogram range");
        let mut counts = vec![0u64; bins];
        let mut clamped = false;
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let raw = ((v - lo) / width).floor();
            let idx = if raw < 0.0 {
                clamped = true;
                0
            } else if raw >= bins as f64 {
                if v > hi {
                    clamped = true;
                }
                bins - 1
            } else {
                raw as usize
            };
            counts[idx] += 1;
        }
        let n = values.len() as f64;
        Ok(Histogram {
            edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
            freq: counts.iter().map(|&c| c as f64 / n).collect(),
            clamped,
        })
    }

    /// Histogram for the parameter at `param_index` (ordering of
    /// [`PARAM_RANGES`]) over its tabulated range, with the `gamma_ii` upper
    /// limit capped at 120/s and out-of-range values counted in the boundary
    /// bins.
    pub fn for_parameter(values: &[f64], param_index: usize) -> Result<Self, StatsError> {
        let r = &PARAM_RANGES[param_index];
        let hi = if r.name == "gamma_ii" {
            GAMMA_II_BIN_CAP
        } else {
            r.max
        };
        Histogram::new(values, r.min, hi, HISTOGRAM_BINS)
    }

    /// Merge with another histogram over the same edges, weighting by the
    /// underlying sample counts.
    pub fn merge(&self, other: &Histogram, n_self: usize, n_other: usize) -> Result<Histogram, StatsError> {
        if self.edges != other.edges {
            return Err(StatsError::BinMismatch);
        }
        let total = (n_self + n_other) as f64;
        let freq = self
            .freq
            .iter()
            .zip(other.freq.iter())
            .map(|(a, b)| (a * n_self as f64 + b * n_other as f64) / total)
            .collect();
        Ok(Histogram {
            edges: self.edges.clone(),
            freq,
            clamped: self.clamped || other.clamped,
        })
    }
}

fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Information-radius distance between two distributions over the same bins:
/// the square root of the Jensen-Shannon divergence (base-2 logarithms).
/// Ranges over `[0, 1]`; zero for identical distributions, one for
/// distributions with disjoint support.
pub fn information_radius_distance(g: &Histogram, h: &Histogram) -> Result<f64, StatsError> {
    if g.edges != h.edges {
        return Err(StatsError::BinMismatch);
    }
    let mut js = 0.0;
    for (&gi, &hi) in g.freq.iter().zip(h.freq.iter()) {
        let ai = 0.5 * (gi + hi);
        js += 0.5 * (xlog2x(gi) + xlog2x(hi)) - xlog2x(ai);
    }
    // Clamp tiny negative round-off before the square root.
    Ok(js.max(0.0).sqrt().min(1.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pca {
    /// Fraction of total variance per component, nonincreasing, sums to 1.
    pub fractions: Vec<f64>,
    /// Orthonormal component rows (loadings), matching `fractions`.
    pub components: Vec<Vec<f64>>,
    /// Indices of input columns dropped for having zero variance.
    pub dropped_columns: Vec<usize>,
}

/// Correlation-matrix PCA: columns are standardized to zero mean and unit
/// variance before the eigendecomposition, so parameters with different
/// units contribute comparably.
pub fn pca(data: &DMatrix<f64>) -> Result<Pca, StatsError> {
    let (rows, cols) = data.shape();
    if rows < 2 {
        return Err(StatsError::DegenerateData("need at least two rows".into()));
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut standardized_cols: Vec<DMatrix<f64>> = Vec::new();
    for c in 0..cols {
        let col = data.column(c);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (rows as f64 - 1.0);
        if var <= 0.0 {
            dropped.push(c);
            continue;
        }
        let sd = var.sqrt();
        kept.push(c);
        standardized_cols.push(DMatrix::from_fn(rows, 1, |r, _| (data[(r, c)] - mean) / sd));
    }
    if kept.is_empty() {
        return Err(StatsError::DegenerateData(
            "all columns have zero variance".into(),
        ));
    }
    let k = kept.len();
    let mut z = DMatrix::zeros(rows, k);
    for (i, col) in standardized_cols.iter().enumerate() {
        z.set_column(i, &col.column(0));
    }
    let corr = (z.transpose() * &z) / (rows as f64 - 1.0);
    let eig = SymmetricEigen::new(corr);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let fractions: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0) / total)
        .collect();
    let components: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    Ok(Pca {
        fractions,
        components,
        dropped_columns: dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailSide {
    Le,
    Ge,
}

/// Empirical probability of `value <= threshold` (or `>=`).
pub fn tail_probability(values: &[f64], threshold: f64, side: TailSide) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let count = values
        .iter()
        .filter(|&&v| match side {
            TailSide::Le => v <= threshold,
            TailSide::Ge => v >= threshold,
        })
        .count();
    Ok(count as f64 / values.len() as f64)
}
