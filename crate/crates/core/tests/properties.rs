use proptest::prelude::*;

use xprecode::baselines::{gaussian_waterfill, mercury_waterfill, waterfill};
use xprecode::channel::{random_mimo, svd, PairChannel};
use xprecode::constellation::{make_qam, product, QamOrder};
use xprecode::linalg::frobenius;
use xprecode::mi::{pair_mi, scalar_mi, MiBudget, PairParams};
use xprecode::pair::{build_table, LookupTable};
use xprecode::pairing::{conjectured_pairing, enumerate_pairings, random_pairings, x_pairing, Pairing};
use xprecode::precoder::{build_generator, build_precoder};

fn is_perfect_matching(p: &Pairing) -> bool {
    let mut seen = vec![0; p.n()];
    for &(i, j) in p.pairs() {
        if i >= j {
            return false;
        }
        seen[i] += 1;
        seen[j] += 1;
    }
    seen.iter().all(|&c| c == 1)
}

fn double_factorial(n: usize) -> usize {
    (1..n).step_by(2).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairings_are_perfect_matchings(half in 1usize..=12, seed in any::<u64>()) {
        let n = 2 * half;
        prop_assert!(is_perfect_matching(&x_pairing(n).unwrap()));
        prop_assert!(is_perfect_matching(&conjectured_pairing(n).unwrap()));
        for p in random_pairings(n, 5, seed).unwrap() {
            prop_assert!(is_perfect_matching(&p));
        }
    }

    #[test]
    fn generator_is_orthogonal(half in 1usize..=8, seed in any::<u64>(), angles in prop::collection::vec(-3.2f64..3.2, 8)) {
        let n = 2 * half;
        let p = random_pairings(n, 1, seed).unwrap().remove(0);
        let g = build_generator(&p, &angles[..half]).unwrap();
        let e = g.matrix().transpose() * g.matrix() - nalgebra::DMatrix::<f64>::identity(n, n);
        prop_assert!(e.abs().max() < 1e-12);
    }

    #[test]
    fn precoder_invariants(
        half in 1usize..=4,
        extra in 0usize..3,
        seed in any::<u64>(),
        raw in prop::collection::vec((0.0f64..1.6, 0.0f64..=1.0, 0.01f64..1.0), 4),
    ) {
        let n = 2 * half;
        let h = random_mimo(n + extra, n, seed);
        let dec = svd(&h).unwrap();
        let p = random_pairings(n, 1, seed ^ 1).unwrap().remove(0);
        let total: f64 = raw[..half].iter().map(|r| r.2).sum();
        let params: Vec<PairParams> = raw[..half].iter().map(|&(theta, f, w)| PairParams { theta, f, pbar2: w / total }).collect();
        let t = build_precoder(&dec, &p, &params).unwrap();
        prop_assert!((frobenius(t.matrix()) - 1.0).abs() < 1e-12);
        prop_assert!(t.diagonalization_error(&dec, &h) < 1e-9);
        prop_assert!((t.powers().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn waterfilling_is_on_the_simplex(gains in prop::collection::vec(0.05f64..3.0, 1..10), db in -10.0f64..40.0) {
        let p_t = 10f64.powf(db / 10.0);
        let (p, mu) = waterfill(&gains, p_t).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        // Active channels share the water level.
        for (x, g) in p.iter().zip(&gains) {
            let floor = 1.0 / (g * p_t);
            if *x > 0.0 {
                prop_assert!((x + floor - mu).abs() < 1e-9 * mu.max(1.0));
            } else {
                prop_assert!(floor >= mu - 1e-12);
            }
        }
    }

    #[test]
    fn pair_mi_is_bounded(beta in 1.0f64..10.0, db in -10.0f64..35.0, f in 0.0f64..=1.0, theta in 0.0f64..1.6) {
        let q = make_qam(4).unwrap();
        let pc = PairChannel::from_beta(beta, 1.0).unwrap();
        let v = pair_mi(&pc, 10f64.powf(db / 10.0), 1.0, f, theta, &product(&q, &q), &MiBudget::default()).unwrap();
        prop_assert!(v.value >= -1e-4 && v.value <= 4.0 + 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mercury_stays_between_bounds(g1 in 0.3f64..1.5, ratio in 1.0f64..6.0, db in -5.0f64..25.0) {
        let gains = [g1, g1 / ratio];
        let p_t = 10f64.powf(db / 10.0);
        let q = make_qam(4).unwrap();
        let (alloc, mi) = mercury_waterfill(&gains, p_t, &q).unwrap();
        prop_assert!((alloc.powers.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let (_, cap) = gaussian_waterfill(&gains, p_t).unwrap();
        prop_assert!(mi.value <= cap + 1e-6);
        let b = MiBudget::default();
        let uniform: f64 = gains.iter().map(|g| scalar_mi(&q, g * g * p_t / 2.0, &b).unwrap().value).sum();
        prop_assert!(mi.value >= uniform - 1e-6);
    }
}

#[test]
fn enumeration_matches_double_factorial() {
    for half in 1..=5 {
        let n = 2 * half;
        let all = enumerate_pairings(n).unwrap();
        assert_eq!(all.len(), double_factorial(n));
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), all.len());
        assert!(all.iter().all(is_perfect_matching));
    }
}

#[test]
fn table_round_trips_bit_exactly() {
    let t = build_table(&[1.0, 4.0], &[0.0, 10.0], QamOrder::new(4).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(t.file_name());
    t.save(&path).unwrap();
    let back = LookupTable::load(&path).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_json().unwrap(), t.to_json().unwrap());
    let again = build_table(&[1.0, 4.0], &[0.0, 10.0], QamOrder::new(4).unwrap()).unwrap();
    assert_eq!(again.to_json().unwrap(), t.to_json().unwrap());
}
