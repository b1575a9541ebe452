//! Randomized invariants: symmetries, linearity, exact identities.

use proptest::prelude::*;
use sarfield::asymptotics::{limit_law, rho_partial_sums};
use sarfield::coeffs::{binom_conv_pmf, tail_bound, TailSide};
use sarfield::covariance::{exact_cov, SitePair};
use sarfield::estimator::{accumulate, accumulate_with_noise, c_stat, lse};
use sarfield::linalg::{conjugate_diag3, sym_eigenvalues3};
use sarfield::params::{apply_flip, canonicalize, classify, flip_noise, Params, RegionTag, SignFlip, DEFAULT_TOL};
use sarfield::simulate::{draw_noise, simulate_recursion, NoiseKind, NoiseMatrix, NoiseSpec};

fn flip_strategy() -> impl Strategy<Value = SignFlip> {
    prop::sample::select(SignFlip::ALL.to_vec())
}

fn unit_open() -> impl Strategy<Value = f64> {
    -0.99f64..0.99
}

/// Points on every boundary stratum and in the open cube, before any flip.
fn param_strategy() -> impl Strategy<Value = Params> {
    prop_oneof![
        (unit_open(), unit_open(), unit_open()).prop_map(|(a, b, g)| Params { alpha: a, beta: b, gamma: g }),
        // positive face with nonnegative entries
        (0.0f64..1.0, 0.0f64..1.0).prop_filter_map("inside the simplex", |(a, b)| {
            (a + b < 1.0).then_some(Params { alpha: a, beta: b, gamma: 1.0 - a - b })
        }),
        // positive face with gamma < 0
        (0.0f64..0.99, 0.0f64..0.99).prop_filter_map("gamma below zero", |(a, b)| {
            (a + b > 1.0 && a + b < 1.99).then_some(Params { alpha: a, beta: b, gamma: 1.0 - a - b })
        }),
        // negative face |a| - |b| + |g| = 1 with b < 0 < a, g
        (0.01f64..0.99, 0.01f64..0.99).prop_filter_map("valid negative face", |(a, g)| {
            let b = 1.0 - a - g;
            (b < 0.0 && b > -0.99).then_some(Params { alpha: a, beta: b, gamma: g })
        }),
        unit_open().prop_map(|b| Params { alpha: 1.0, beta: b, gamma: -b }),
        unit_open().prop_map(|a| Params { alpha: a, beta: 1.0, gamma: -a }),
        unit_open().prop_map(|a| Params { alpha: a, beta: -a, gamma: 1.0 }),
        prop::sample::select(vec![0usize, 1, 2, 3]).prop_map(|i| {
            let v = sarfield::params::VERTICES[i];
            Params { alpha: v[0], beta: v[1], gamma: v[2] }
        }),
    ]
}

fn noise(seed: u64, n: usize, m: usize) -> NoiseMatrix {
    draw_noise(&NoiseSpec { kind: NoiseKind::Gaussian, seed }, n, m)
}

proptest! {
    #[test]
    fn classification_survives_canonicalization(p in param_strategy(), flip in flip_strategy()) {
        let q = flip.apply_params(&p);
        let (canon, back) = canonicalize(&q);
        prop_assert_eq!(classify(&q, DEFAULT_TOL).tag, classify(&canon, DEFAULT_TOL).tag);
        prop_assert_eq!(classify(&q, DEFAULT_TOL).tag, classify(&p, DEFAULT_TOL).tag);
        prop_assert_eq!(back.apply_params(&canon), q);
        prop_assert!(canon.alpha >= 0.0 && canon.beta >= 0.0);
    }

    #[test]
    fn flipping_twice_is_identity(seed in any::<u64>(), flip in flip_strategy(), n in 1usize..12, m in 1usize..12) {
        let f = simulate_recursion(&Params { alpha: 0.3, beta: 0.2, gamma: 0.1 }, &noise(seed, n, m));
        prop_assert_eq!(apply_flip(&apply_flip(&f, flip), flip), f);
    }

    #[test]
    fn recursion_commutes_with_flips(p in param_strategy(), flip in flip_strategy(), seed in any::<u64>()) {
        let eps = noise(seed, 9, 7);
        let flipped = simulate_recursion(&flip.apply_params(&p), &flip_noise(&eps, flip));
        prop_assert_eq!(flipped, apply_flip(&simulate_recursion(&p, &eps), flip));
    }

    #[test]
    fn recursion_is_linear(p in param_strategy(), s1 in any::<u64>(), s2 in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (e1, e2) = (noise(s1, 10, 10), noise(s2, 10, 10));
        let combo = NoiseMatrix::from_fn(10, 10, |k, l| a * e1.get(k, l) + b * e2.get(k, l));
        let (f1, f2, f) = (simulate_recursion(&p, &e1), simulate_recursion(&p, &e2), simulate_recursion(&p, &combo));
        for k in 0..=10 {
            for l in 0..=10 {
                let want = a * f1.get(k, l) + b * f2.get(k, l);
                let scale = (a.abs() * f1.get(k, l).abs() + b.abs() * f2.get(k, l).abs()).max(1.0);
                prop_assert!((f.get(k, l) - want).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn statistics_transform_under_flips(p in param_strategy(), flip in flip_strategy(), seed in any::<u64>()) {
        let eps = noise(seed, 8, 9);
        let f = simulate_recursion(&p, &eps);
        let acc = accumulate_with_noise(&f, &eps, 8, 9).unwrap();
        let g = apply_flip(&f, flip);
        let acc_f = accumulate_with_noise(&g, &flip_noise(&eps, flip), 8, 9).unwrap();
        let d = flip.signs();
        prop_assert_eq!(acc_f.b, conjugate_diag3(&acc.b, &d));
        let a = acc.a.unwrap();
        prop_assert_eq!(acc_f.a.unwrap(), [d[0] * a[0], d[1] * a[1], d[2] * a[2]]);
    }

    #[test]
    fn estimator_is_flip_equivariant(p in param_strategy(), flip in flip_strategy(), seed in any::<u64>()) {
        let f = simulate_recursion(&p, &noise(seed, 10, 10));
        let acc = accumulate(&f, 10, 10).unwrap();
        if let Ok(est) = lse(&acc, &f) {
            let g = apply_flip(&f, flip);
            let est_f = lse(&accumulate(&g, 10, 10).unwrap(), &g).unwrap();
            let d = flip.signs();
            prop_assert_eq!(est_f.theta_hat, [d[0] * est.theta_hat[0], d[1] * est.theta_hat[1], d[2] * est.theta_hat[2]]);
        }
    }

    #[test]
    fn c_stat_is_linear_in_the_innovations(seed1 in any::<u64>(), seed2 in any::<u64>(), a in -3.0f64..3.0) {
        let f = simulate_recursion(&Params { alpha: 0.3, beta: 0.5, gamma: 0.2 }, &noise(seed1, 8, 8));
        let e1 = noise(seed1, 8, 8);
        let e2 = noise(seed2, 8, 8);
        let combo = NoiseMatrix::from_fn(8, 8, |k, l| e1.get(k, l) + a * e2.get(k, l));
        let c1 = c_stat(&accumulate_with_noise(&f, &e1, 8, 8).unwrap()).unwrap();
        let c2 = c_stat(&accumulate_with_noise(&f, &e2, 8, 8).unwrap()).unwrap();
        let c = c_stat(&accumulate_with_noise(&f, &combo, 8, 8).unwrap()).unwrap();
        for i in 0..2 {
            let scale = c1[i].abs() + a.abs() * c2[i].abs() + 1.0;
            prop_assert!((c[i] - c1[i] - a * c2[i]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn exact_cov_is_symmetric(p in param_strategy(), k1 in 1usize..10, l1 in 1usize..10, k2 in 1usize..10, l2 in 1usize..10) {
        let pair = SitePair::new(k1, l1, k2, l2);
        prop_assert_eq!(exact_cov(&p, pair).unwrap(), exact_cov(&p, pair.swapped()).unwrap());
    }

    #[test]
    fn pmf_is_normalized(k in 0usize..80, l in 0usize..80, nu in 0.0f64..=1.0, mu in 0.0f64..=1.0) {
        let law = binom_conv_pmf(k, nu, l, mu).unwrap();
        prop_assert_eq!(law.pmf.len(), k + l + 1);
        prop_assert!(law.pmf.iter().all(|x| *x >= 0.0));
        prop_assert!((law.pmf.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn hoeffding_bound_dominates(k in 0usize..60, l in 0usize..60, nu in 0.01f64..0.99, mu in 0.01f64..0.99, x in 0.0f64..=1.0) {
        prop_assume!(k + l > 0);
        let theta = (nu * k as f64 + mu * l as f64) / (k + l) as f64;
        let law = binom_conv_pmf(k, nu, l, mu).unwrap();
        let side = if x > theta { TailSide::Upper } else if x < theta { TailSide::Lower } else { return Ok(()) };
        prop_assert!(tail_bound(k, l, nu, mu, x, side).unwrap() >= law.tail(x, side));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn face_laws_are_rank_two_and_equivariant(a in 0.1f64..0.8, b in 0.1f64..0.8, flip in flip_strategy()) {
        let base = Params { alpha: a, beta: b, gamma: 1.0 - a - b };
        prop_assert_eq!(classify(&base, DEFAULT_TOL).tag, RegionTag::FacePlus);
        let law = limit_law(&base, 1e-6).unwrap();
        let e = sym_eigenvalues3(&law.covariance);
        prop_assert!(e[0] >= -1e-10);
        prop_assert!(e[0].abs() <= 1e-10 * e[2]);
        prop_assert!(e[1] > 1e-6 * e[2]);
        let flipped = limit_law(&flip.apply_params(&base), 1e-6).unwrap();
        prop_assert_eq!(flipped.covariance, conjugate_diag3(&law.covariance, &flip.signs()));
    }

    #[test]
    fn squared_series_partial_sums_grow(a in 0.05f64..0.9, b in 0.05f64..0.9, k in 1usize..60) {
        let small = rho_partial_sums(a, b, k).unwrap();
        let large = rho_partial_sums(a, b, k + 1).unwrap();
        prop_assert!(large[0] >= small[0] && large[1] >= small[1]);
    }

    #[test]
    fn edge_and_vertex_laws_are_psd(p in param_strategy()) {
        let law = limit_law(&p, 1e-6);
        if let Ok(law) = law {
            if law.supported {
                prop_assert!(sym_eigenvalues3(&law.covariance)[0] >= -1e-10);
                prop_assert!(sarfield::linalg::is_symmetric3(&law.covariance, 0.0));
            }
        }
    }
}
