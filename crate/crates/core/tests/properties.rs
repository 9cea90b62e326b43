use proptest::collection::vec;
use proptest::prelude::*;

use skipfree::combinatorics::{
    ballot_probability, first_passage_pmf_dp, kemperman_first_passage_pmf, qualifying_rotations,
};
use skipfree::oracle::{oracle_ballot, oracle_first_passage};
use skipfree::pmf::Pmf;

/// Random finite PMF on `lo..=hi` with at least one positive weight.
fn arb_pmf(lo: i64, hi: i64) -> impl Strategy<Value = Pmf> {
    let n = (hi - lo + 1) as usize;
    vec(0u32..10, n)
        .prop_filter("needs mass", |w| w.iter().any(|&x| x > 0))
        .prop_map(move |w| {
            let total: u32 = w.iter().sum();
            Pmf::new(
                w.iter()
                    .enumerate()
                    .map(|(i, &x)| (lo + i as i64, x as f64 / total as f64)),
            )
            .unwrap()
        })
}

fn max_entry_diff(a: &Pmf, b: &Pmf) -> f64 {
    let lo = a.min_value().min(b.min_value());
    let hi = a.max_value().max(b.max_value());
    (lo..=hi)
        .map(|v| (a.prob(v) - b.prob(v)).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn convolve_commutes_and_associates(a in arb_pmf(-2, 3), b in arb_pmf(0, 4), c in arb_pmf(-1, 1)) {
        prop_assert!(max_entry_diff(&a.convolve(&b), &b.convolve(&a)) <= 1e-12);
        let left = a.convolve(&b).convolve(&c);
        let right = a.convolve(&b.convolve(&c));
        prop_assert!(max_entry_diff(&left, &right) <= 1e-12);
    }

    #[test]
    fn expectation_is_additive(a in arb_pmf(-3, 3), b in arb_pmf(0, 5)) {
        let sum = a.convolve(&b).expectation();
        prop_assert!((sum - a.expectation() - b.expectation()).abs() <= 1e-10);
    }

    #[test]
    fn power_convolve_splits(p in arb_pmf(-1, 2), m in 0u32..8, n in 0u32..8) {
        let whole = p.power_convolve(m + n);
        let split = p.power_convolve(m).convolve(&p.power_convolve(n));
        prop_assert!(max_entry_diff(&whole, &split) <= 1e-10);
        prop_assert!(whole.validate().is_ok());
    }

    #[test]
    fn kemperman_matches_dp(p in arb_pmf(-3, 1), k in 1i64..=5) {
        let kem = kemperman_first_passage_pmf(&p, k, 50).unwrap();
        let dp = first_passage_pmf_dp(&p, k, 50).unwrap();
        for n in 1..=50 {
            prop_assert!((kem[&n] - dp[&n]).abs() <= 1e-12, "n={}", n);
        }
        let mut acc = 0.0;
        for v in dp.values() {
            acc += v;
            prop_assert!(acc <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rotation_count_equals_deficit(seq in vec(prop_oneof![3 => Just(-1i64), 1 => 0i64..=2], 1..=12)) {
        let total: i64 = seq.iter().sum();
        prop_assume!(total < 0);
        let cert = qualifying_rotations(&seq).unwrap();
        prop_assert_eq!(cert.qualifying_offsets.len() as i64, -total);
        prop_assert!(cert.verify());
    }

    #[test]
    fn enumerated_ballot_is_k_over_n(p in arb_pmf(-2, 1), n in 1u64..=7) {
        for k in -2 * n as i64..=n as i64 {
            if let Some(cond) = oracle_ballot(&p, n, k).unwrap() {
                let expected = ballot_probability::<f64>(n, k).unwrap();
                prop_assert!((cond - expected).abs() <= 1e-9, "n={} k={}", n, k);
            }
        }
    }
}

#[test]
fn three_routes_to_first_passage() {
    let corpus = [
        Pmf::new([(-1, 0.5), (1, 0.5)]).unwrap(),
        Pmf::new([(-1, 0.3), (0, 0.3), (1, 0.4)]).unwrap(),
        Pmf::new([(-2, 0.25), (0, 0.25), (1, 0.5)]).unwrap(),
    ];
    for p in &corpus {
        for k in 1..=3 {
            let enumerated: Vec<f64> = oracle_first_passage(p, k, 9).unwrap();
            let kem = kemperman_first_passage_pmf(p, k, 9).unwrap();
            let dp = first_passage_pmf_dp(p, k, 9).unwrap();
            for (i, e) in enumerated.iter().enumerate() {
                let n = i as u64 + 1;
                assert!((e - kem[&n]).abs() <= 1e-12);
                assert!((e - dp[&n]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn ballot_in_single_precision() {
    let p = Pmf::<f32>::new([(-1, 0.3f32), (0, 0.3), (1, 0.4)]).unwrap();
    let cond = oracle_ballot(&p, 6, 2).unwrap().unwrap();
    assert!((cond - 1.0 / 3.0).abs() < 1e-5);
    let kem = kemperman_first_passage_pmf(&p, 2, 20).unwrap();
    let dp = first_passage_pmf_dp(&p, 2, 20).unwrap();
    for n in 1..=20 {
        assert!((kem[&n] - dp[&n]).abs() < 1e-6);
    }
}
