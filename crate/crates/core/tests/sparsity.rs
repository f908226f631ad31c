use genfield::sparsity::{histogram20, mean_histogram, normalize_abs, reuse_rates, topk_set};
use genfield::style::ControlSignal;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 1..300)
}

/// Sparse synthetic control signal: a shared core of strong dimensions plus
/// per-test noise.
fn synthetic(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.05..0.05)).collect();
    for d in (0..dim).step_by(97) {
        v[d] = rng.random_range(0.5..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    for _ in 0..20 {
        let d = rng.random_range(0..dim);
        v[d] = rng.random_range(-0.9..0.9);
    }
    v
}

#[test]
fn union_bounds_on_ten_tests() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sets: Vec<_> = (0..10)
        .map(|_| topk_set(&synthetic(&mut rng, 4928), 50).unwrap())
        .collect();
    let table = reuse_rates(&sets).unwrap();
    let n = table.union_dims.len();
    assert!((50..=500).contains(&n), "{n}");
    for r in table.rates.values() {
        assert!((0.1..=1.0).contains(r));
    }
}

#[test]
fn report_on_synthetic_tests() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tests: Vec<ControlSignal> = (0..10).map(|_| ControlSignal(synthetic(&mut rng, 4928))).collect();
    let r = mean_histogram(&tests, 20).unwrap();
    assert!((r.bins_mean.iter().sum::<f64>() - 4928.0).abs() < 1e-9);
    assert!(r.high_functional_count < 100.0);
    assert!(r.bins_mean[0] > r.bins_mean[19]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn scale_invariance(v in signal(), c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        let a = normalize_abs(&v);
        let b = normalize_abs(&scaled);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn histogram_counts_sum_to_dimension(v in signal()) {
        let h = histogram20(&normalize_abs(&v)).unwrap();
        prop_assert_eq!(h.iter().sum::<usize>(), v.len());
    }

    #[test]
    fn topk_invariant_to_scaling_and_sign(v in signal(), k in 1usize..60, c in 1e-3f64..1e3) {
        let base = topk_set(&v, k).unwrap();
        prop_assert_eq!(base.dims.len(), k.min(v.len()));
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        let flipped: Vec<f64> = v.iter().map(|x| -x).collect();
        // scaling may reorder exact ties only through rounding; compare magnitudes
        let mags = |s: &std::collections::BTreeSet<usize>| {
            let mut m: Vec<f64> = s.iter().map(|&d| v[d].abs()).collect();
            m.sort_by(f64::total_cmp);
            m
        };
        prop_assert_eq!(mags(&topk_set(&scaled, k).unwrap().dims), mags(&base.dims));
        prop_assert_eq!(topk_set(&flipped, k).unwrap(), base);
    }

    #[test]
    fn reuse_rate_bounds(seed in any::<u64>(), n in 1usize..12, k in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets: Vec<_> = (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
                topk_set(&v, k).unwrap()
            })
            .collect();
        let t = reuse_rates(&sets).unwrap();
        for r in t.rates.values() {
            prop_assert!(*r >= 1.0 / n as f64 - 1e-15 && *r <= 1.0);
        }
        prop_assert!(t.union_dims.len() >= k && t.union_dims.len() <= n * k);
        prop_assert!(t.union_dims.windows(2).all(|w| w[0] < w[1]));
    }
}
