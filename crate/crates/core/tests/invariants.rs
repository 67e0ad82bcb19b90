//! Property tests for structural invariants of the model and statistics
//! layers.

use mfm_core::model::{
    apply_modulation, draw_candidate, rhs, sigmoid_rate, Modulation, Population, StateVector,
};
use mfm_core::stats::{information_radius_distance, Histogram};
use proptest::prelude::*;

fn histogram_from(freq: Vec<f64>) -> Histogram {
    let bins = freq.len();
    Histogram {
        edges: (0..=bins).map(|i| i as f64).collect(),
        freq,
        clamped: false,
    }
}

fn distribution(bins: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.001..1.0f64, bins).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    })
}

proptest! {
    #[test]
    fn sigmoid_is_bounded_and_increasing(
        seed in 0u64..5000,
        h in -200.0..100.0f64,
        dh in 1e-6..30.0f64,
    ) {
        let p = draw_candidate(31, seed);
        for pop in [Population::Excitatory, Population::Inhibitory] {
            let s_max = match pop {
                Population::Excitatory => p.S_max_e,
                Population::Inhibitory => p.S_max_i,
            };
            let lo = sigmoid_rate(h, pop, &p);
            let hi = sigmoid_rate(h + dh, pop, &p);
            prop_assert!(lo > 0.0 && lo <= s_max);
            prop_assert!(hi >= lo);
        }
    }

    #[test]
    fn modulation_touches_only_inhibitory_gain_fields(
        seed in 0u64..5000,
        r in 0.05..5.0f64,
        k in 0.05..5.0f64,
    ) {
        let p = draw_candidate(77, seed);
        let m = Modulation::new(r, k).unwrap();
        let modulated = apply_modulation(&p, m);
        let a = p.as_array();
        let b = modulated.as_array();
        // Gamma_ie, Gamma_ii, and N_beta_ii may change; nothing else does.
        for (i, (x, y)) in a.iter().zip(b.iter()).enumerate() {
            if matches!(i, 10 | 11 | 21) {
                continue;
            }
            prop_assert_eq!(x, y, "field {} changed", i);
        }
        prop_assert!((b[10] - r * a[10]).abs() <= 1e-12 * a[10].abs());
        prop_assert!((b[11] - r * a[11]).abs() <= 1e-12 * a[11].abs());
        prop_assert!((b[21] - k * a[21]).abs() <= 1e-12 * a[21].abs());
    }

    #[test]
    fn dynamics_depend_on_the_conduction_product_only(
        seed in 0u64..5000,
        factor in 0.2..5.0f64,
        h_e in -90.0..-30.0f64,
        h_i in -90.0..-30.0f64,
    ) {
        let p = draw_candidate(13, seed);
        let mut q = p;
        q.v *= factor;
        q.Lambda /= factor;
        let mut x = StateVector::rest_guess();
        x[0] = h_e;
        x[1] = h_i;
        let a = rhs(&x, &p, Modulation::IDENTITY).to_dvector();
        let b = rhs(&x, &q, Modulation::IDENTITY).to_dvector();
        // The rescaled product picks up one rounding error per factor, so
        // demand agreement to machine precision rather than bit equality.
        let diff = (&a - &b).norm();
        prop_assert!(diff <= 1e-12 * a.norm(), "diff {}", diff);
    }

    #[test]
    fn histograms_are_normalized_with_monotone_edges(
        values in proptest::collection::vec(-50.0..50.0f64, 1..400),
        bins in 1usize..40,
    ) {
        let h = Histogram::new(&values, -30.0, 30.0, bins).unwrap();
        prop_assert_eq!(h.freq.len(), bins);
        prop_assert_eq!(h.edges.len(), bins + 1);
        let total: f64 = h.freq.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        for w in h.edges.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        prop_assert!(h.freq.iter().all(|&f| (0.0..=1.0).contains(&f)));
    }

    #[test]
    fn information_radius_is_a_bounded_metric(
        a in distribution(12),
        b in distribution(12),
        c in distribution(12),
    ) {
        let (ha, hb, hc) = (histogram_from(a), histogram_from(b), histogram_from(c));
        let ab = information_radius_distance(&ha, &hb).unwrap();
        let ba = information_radius_distance(&hb, &ha).unwrap();
        let ac = information_radius_distance(&ha, &hc).unwrap();
        let bc = information_radius_distance(&hb, &hc).unwrap();
        let aa = information_radius_distance(&ha, &ha).unwrap();
        prop_assert_eq!(aa, 0.0);
        prop_assert!((ab - ba).abs() <= 1e-14);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(ac <= ab + bc + 1e-12);
    }
}
