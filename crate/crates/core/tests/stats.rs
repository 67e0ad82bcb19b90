//! Histograms, the information-radius distance, correlation PCA, and tail
//! probabilities checked against closed forms and independent computations.

use mfm_core::stats::{
    information_radius_distance, pca, tail_probability, Histogram, TailSide, GAMMA_II_BIN_CAP,
    HISTOGRAM_BINS,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA_II_INDEX: usize = 15;
const H_EQ_IE_INDEX: usize = 6;

fn uniform_histogram(freq: Vec<f64>) -> Histogram {
    let bins = freq.len();
    Histogram {
        edges: (0..=bins).map(|i| i as f64).collect(),
        freq,
        clamped: false,
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, bins: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..bins).map(|_| rng.gen_range(0.0..1.0f64)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

#[test]
fn identical_values_fill_a_single_bin() {
    let h = Histogram::new(&[5.0; 17], 0.0, 10.0, HISTOGRAM_BINS).unwrap();
    assert_eq!(h.freq.len(), HISTOGRAM_BINS);
    let total: f64 = h.freq.iter().sum();
    assert!((total - 1.0).abs() <= 1e-12);
    assert_eq!(h.freq.iter().filter(|&&f| f > 0.0).count(), 1);
    assert_eq!(h.freq[10], 1.0);
    assert!(!h.clamped);
}

#[test]
fn gamma_ii_histogram_is_capped_with_overflow_in_the_top_bin() {
    let h = Histogram::for_parameter(&[15.0, 500.0, 118.0], GAMMA_II_INDEX).unwrap();
    assert_eq!(*h.edges.last().unwrap(), GAMMA_II_BIN_CAP);
    assert!(h.clamped);
    // 500 lands in the top bin together with 118.
    assert!((h.freq[HISTOGRAM_BINS - 1] - 2.0 / 3.0).abs() <= 1e-12);
    let total: f64 = h.freq.iter().sum();
    assert!((total - 1.0).abs() <= 1e-12);
}

#[test]
fn inhibitory_reversal_histograms_end_at_the_tabulated_cap() {
    let h = Histogram::for_parameter(&[-80.0, -70.0], H_EQ_IE_INDEX).unwrap();
    assert_eq!(*h.edges.last().unwrap(), -65.0);
    assert_eq!(h.edges[0], -90.0);
    assert!(!h.clamped);
}

#[test]
fn large_uniform_samples_fill_bins_evenly() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let values: Vec<f64> = (0..1_000_000).map(|_| rng.gen_range(0.0..1.0)).collect();
    let h = Histogram::new(&values, 0.0, 1.0, HISTOGRAM_BINS).unwrap();
    for f in &h.freq {
        assert!((f - 0.05).abs() <= 1e-3, "bin frequency {f}");
    }
}

#[test]
fn distance_endpoints_are_exact() {
    let a = uniform_histogram(vec![0.5, 0.5]);
    assert_eq!(information_radius_distance(&a, &a).unwrap(), 0.0);

    let b = uniform_histogram(vec![1.0, 0.0]);
    let c = uniform_histogram(vec![0.0, 1.0]);
    assert_eq!(information_radius_distance(&b, &c).unwrap(), 1.0);
}

#[test]
fn distance_matches_an_independent_evaluation() {
    let p = uniform_histogram(vec![1.0, 0.0]);
    let q = uniform_histogram(vec![0.5, 0.5]);
    // Jensen-Shannon divergence in bits, written out term by term.
    let xlog2x = |x: f64| if x > 0.0 { x * x.log2() } else { 0.0 };
    let mut js = 0.0;
    for (gi, hi) in [(1.0, 0.5), (0.0, 0.5)] {
        js += 0.5 * (xlog2x(gi) + xlog2x(hi)) - xlog2x(0.5 * (gi + hi));
    }
    let expected = js.sqrt();
    let got = information_radius_distance(&p, &q).unwrap();
    assert!((got - expected).abs() <= 1e-14);
}

#[test]
fn distance_is_a_metric_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let a = uniform_histogram(random_distribution(&mut rng, HISTOGRAM_BINS));
        let b = uniform_histogram(random_distribution(&mut rng, HISTOGRAM_BINS));
        let c = uniform_histogram(random_distribution(&mut rng, HISTOGRAM_BINS));
        let ab = information_radius_distance(&a, &b).unwrap();
        let ba = information_radius_distance(&b, &a).unwrap();
        let bc = information_radius_distance(&b, &c).unwrap();
        let ac = information_radius_distance(&a, &c).unwrap();
        assert!((ab - ba).abs() <= 1e-14, "symmetry violated");
        assert!((0.0..=1.0).contains(&ab));
        assert!(ac <= ab + bc + 1e-12, "triangle inequality violated");
    }
}

#[test]
fn merge_weights_by_sample_count_and_stays_normalized() {
    let a = uniform_histogram(vec![1.0, 0.0]);
    let b = uniform_histogram(vec![0.0, 1.0]);
    let merged = a.merge(&b, 30, 10).unwrap();
    assert!((merged.freq[0] - 0.75).abs() <= 1e-12);
    assert!((merged.freq[1] - 0.25).abs() <= 1e-12);
    let total: f64 = merged.freq.iter().sum();
    assert!((total - 1.0).abs() <= 1e-12);
}

#[test]
fn rank_one_data_loads_on_a_single_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // Three perfectly correlated columns.
    let data = DMatrix::from_fn(50, 3, |r, c| t[r] * (c as f64 + 1.0));
    let result = pca(&data).unwrap();
    assert!((result.fractions[0] - 1.0).abs() <= 1e-10);
    let sum: f64 = result.fractions.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-10);
}

#[test]
fn variance_fractions_match_a_direct_correlation_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 200;
    let d = 6;
    let data = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
    let result = pca(&data).unwrap();

    // Build the correlation matrix by hand and take its eigenvalues.
    let mut std_cols = DMatrix::zeros(n, d);
    for c in 0..d {
        let col = data.column(c);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        for r in 0..n {
            std_cols[(r, c)] = (data[(r, c)] - mean) / var.sqrt();
        }
    }
    let corr = (std_cols.transpose() * &std_cols) / (n as f64 - 1.0);
    let mut eigs: Vec<f64> = corr.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = eigs.iter().sum();

    assert_eq!(result.fractions.len(), d);
    for (f, e) in result.fractions.iter().zip(eigs.iter()) {
        assert!((f - e / total).abs() <= 1e-10, "fraction {f} vs {e}");
    }
    // Components are orthonormal.
    for i in 0..d {
        for j in 0..d {
            let dot: f64 = result.components[i]
                .iter()
                .zip(result.components[j].iter())
                .map(|(a, b)| a * b)
                .sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((dot - expected).abs() <= 1e-9);
        }
    }
}

#[test]
fn constant_columns_are_dropped() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data = DMatrix::from_fn(40, 3, |_, c| {
        if c == 1 {
            3.5
        } else {
            rng.gen_range(-1.0..1.0)
        }
    });
    let result = pca(&data).unwrap();
    assert_eq!(result.dropped_columns, vec![1]);
    assert_eq!(result.fractions.len(), 2);
}

#[test]
fn tail_probabilities_count_inclusively() {
    let values = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(tail_probability(&values, 10.0, TailSide::Le).unwrap(), 1.0);
    assert_eq!(tail_probability(&values, 2.0, TailSide::Le).unwrap(), 0.5);
    assert_eq!(tail_probability(&values, 2.0, TailSide::Ge).unwrap(), 0.75);
    assert_eq!(tail_probability(&values, -1.0, TailSide::Ge).unwrap(), 1.0);
}
