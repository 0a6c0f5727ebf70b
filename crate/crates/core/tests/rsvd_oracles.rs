mod common;

use common::*;
use faer::Mat;
use nirom::linalg::{economy_svd, frobenius, orthonormalize};
use nirom::rsvd::{full_svd_reference, randomized_svd};
use nirom::SketchConfig;
use proptest::prelude::*;

#[test]
fn planted_spectrum_recovered() {
    let a = planted_spectrum(300, 40, &[5.0, 3.0, 1.0], 21);
    let f = randomized_svd(a.as_ref(), &SketchConfig::new(3, 5)).unwrap();
    for (s, e) in f.sigma.iter().zip([5.0, 3.0, 1.0]) {
        assert!((s - e).abs() < 1e-12 * e, "{s} vs {e}");
    }
    let err = frobenius((&a - f.reconstruct()).as_ref());
    assert!(err < 1e-12 * frobenius(a.as_ref()));
}

#[test]
fn matches_reference_on_planted_rank() {
    let sigma: Vec<f64> = (0..12).map(|i| 10.0 * 0.7f64.powi(i)).collect();
    let a = planted_spectrum(1000, 120, &sigma, 22);
    let k = 12;
    let r = randomized_svd(a.as_ref(), &SketchConfig::new(k, 1)).unwrap();
    let e = full_svd_reference(a.as_ref(), k).unwrap();
    for (x, y) in r.sigma.iter().zip(&e.sigma) {
        assert!((x - y).abs() <= 1e-8 * y);
    }
}

#[test]
fn frobenius_equals_singular_value_norm() {
    let a = uniform_matrix(30, 12, 23);
    let f = economy_svd(a.as_ref()).unwrap();
    let by_sigma = f.sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
    let by_entries = (0..30).flat_map(|i| (0..12).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum::<f64>().sqrt();
    assert!((frobenius(a.as_ref()) - by_sigma).abs() < 1e-12 * by_sigma);
    assert!((frobenius(a.as_ref()) - by_entries).abs() < 1e-14 * by_entries);
}

#[test]
fn orthonormalize_matches_gram_schmidt_projector() {
    let q = uniform_matrix(10, 4, 24);
    let ours = orthonormalize(q.as_ref());
    let oracle = gram_schmidt(&q);
    let p1 = &ours * ours.transpose();
    let p2 = &oracle * oracle.transpose();
    assert!(frobenius((&p1 - &p2).as_ref()) < 1e-12);
}

fn planted_case() -> impl Strategy<Value = (usize, usize, Vec<f64>, u64)> {
    (20usize..120, 4usize..20, any::<u64>()).prop_flat_map(|(m, n, seed)| {
        let n = n.min(m);
        (Just(m), Just(n), prop::collection::vec(0.1f64..10.0, 2..n.min(6)), Just(seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn randomized_values_never_exceed_exact((m, n, mut sigma, seed) in planted_case(), extra in 0.0f64..1e-3) {
        sigma.sort_by(|a, b| b.total_cmp(a));
        let mut a = planted_spectrum(m, n, &sigma, seed);
        let noise = uniform_matrix(m, n, seed ^ 0xABCD);
        a += Mat::from_fn(m, n, |i, j| extra * noise[(i, j)]);
        let k = (sigma.len()).clamp(2, n - 1);
        let r = randomized_svd(a.as_ref(), &SketchConfig::new(k, seed)).unwrap();
        let e = economy_svd(a.as_ref()).unwrap();
        for (x, y) in r.sigma.iter().zip(&e.sigma) {
            prop_assert!(*x <= y * (1.0 + 1e-12) + 1e-14);
        }
        let gram = r.u.transpose() * &r.u;
        prop_assert!(frobenius((&gram - Mat::<f64>::identity(k, k)).as_ref()) < 1e-10);
    }

    #[test]
    fn singular_values_ignore_row_order(m in 6usize..40, n in 2usize..6, seed in any::<u64>()) {
        let a = uniform_matrix(m, n, seed);
        let mut perm: Vec<usize> = (0..m).collect();
        perm.reverse();
        perm.rotate_left(seed as usize % m);
        let b = Mat::from_fn(m, n, |i, j| a[(perm[i], j)]);
        let sa = economy_svd(a.as_ref()).unwrap().sigma;
        let sb = economy_svd(b.as_ref()).unwrap().sigma;
        for (x, y) in sa.iter().zip(&sb) {
            prop_assert!((x - y).abs() <= 1e-12 * sa[0]);
        }
    }

    #[test]
    fn same_seed_same_factors(seed in any::<u64>()) {
        let a = uniform_matrix(40, 10, seed);
        let cfg = SketchConfig::new(4, seed).with_power_iterations(1);
        let f1 = randomized_svd(a.as_ref(), &cfg).unwrap();
        let f2 = randomized_svd(a.as_ref(), &cfg).unwrap();
        prop_assert_eq!(f1.sigma, f2.sigma);
        prop_assert!(f1.u == f2.u && f1.w == f2.w);
    }
}
