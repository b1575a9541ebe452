//! Statistical and closed-form cross-checks against independent routes.

use sarfield::covariance::{cov_closed, exact_cov, SitePair};
use sarfield::estimator::{accumulate, lse};
use sarfield::montecarlo::{compare_cov, replicate_seed, wiener_functionals};
use sarfield::params::{classify, Params, RegionTag, DEFAULT_TOL};
use sarfield::simulate::{draw_noise, simulate_recursion, NoiseKind, NoiseSpec};
use sarfield::stats::{cov3, mean, variance};

fn normals(seed: u64, n: usize, m: usize) -> sarfield::simulate::NoiseMatrix {
    draw_noise(&NoiseSpec { kind: NoiseKind::Gaussian, seed }, n, m)
}

fn tagged_points() -> Vec<(RegionTag, Params)> {
    let p = |alpha, beta, gamma| Params { alpha, beta, gamma };
    vec![
        (RegionTag::Stable, p(0.2, -0.3, 0.1)),
        (RegionTag::FacePlus, p(0.3, 0.5, 0.2)),
        (RegionTag::FaceMinus, p(0.6, -0.2, 0.6)),
        (RegionTag::Edge1, p(1.0, 0.4, -0.4)),
        (RegionTag::Edge2, p(-0.3, 1.0, 0.3)),
        (RegionTag::Edge3, p(0.5, -0.5, 1.0)),
        (RegionTag::Vertex, p(-1.0, 1.0, 1.0)),
        (RegionTag::Outside, p(0.6, 0.6, 0.0)),
    ]
}

#[test]
fn exact_covariance_matches_simulation_in_every_region() {
    let reps = 20_000;
    let pair = SitePair::new(6, 5, 4, 7);
    for (tag, p) in tagged_points() {
        assert_eq!(classify(&p, DEFAULT_TOL).tag, tag);
        let products: Vec<f64> = (0..reps)
            .map(|r| {
                let f = simulate_recursion(&p, &normals(replicate_seed(3, tag as usize, r), 6, 7));
                f.get(6, 5) * f.get(4, 7)
            })
            .collect();
        let se = (variance(&products) / reps as f64).sqrt();
        let want = exact_cov(&p, pair).unwrap();
        let z = (mean(&products) - want) / se;
        assert!(z.abs() < 5.0, "{tag:?}: empirical {} vs exact {want}, z = {z}", mean(&products));
    }
}

#[test]
fn closed_forms_match_exact_covariance_on_the_window() {
    for (tag, p) in tagged_points() {
        if !matches!(tag, RegionTag::Edge1 | RegionTag::Edge2 | RegionTag::Vertex) {
            assert!(cov_closed(&p, SitePair::new(1, 1, 1, 1)).is_err());
            continue;
        }
        for k1 in 1..=15 {
            for l1 in 1..=15 {
                for (k2, l2) in [(15, 15), (k1, 15), (15, l1), (1 + k1 / 2, 1 + l1 / 3)] {
                    let pair = SitePair::new(k1, l1, k2, l2);
                    let (c, e) = (cov_closed(&p, pair).unwrap(), exact_cov(&p, pair).unwrap());
                    assert!((c - e).abs() <= 1e-10 * e.abs().max(1.0), "{tag:?} {pair:?}: {c} vs {e}");
                }
            }
        }
    }
}

#[test]
fn stable_estimates_concentrate() {
    let p = Params { alpha: 0.2, beta: 0.2, gamma: 0.2 };
    let n = 100;
    let close = (0..200)
        .filter(|&r| {
            let f = simulate_recursion(&p, &normals(replicate_seed(5, 0, r), n, n));
            let est = lse(&accumulate(&f, n, n).unwrap(), &f).unwrap();
            est.theta_hat.iter().zip(p.as_array()).all(|(h, t)| (h - t).abs() < 0.05)
        })
        .count();
    assert!(close >= 190, "only {close} of 200 within 0.05");
}

#[test]
fn classification_of_constructed_points() {
    let u = normals(17, 1000, 3);
    for i in 1..=1000 {
        // uniform-ish point strictly inside the octahedron
        let v = [u.get(i, 1), u.get(i, 2), u.get(i, 3)];
        let s = v.iter().map(|x| x.abs()).sum::<f64>();
        let shrink = 0.98 * (1.0 - (-s).exp());
        let p = Params { alpha: shrink * v[0] / s, beta: shrink * v[1] / s, gamma: shrink * v[2] / s };
        assert_eq!(classify(&p, DEFAULT_TOL).tag, RegionTag::Stable, "{p:?}");
    }
    for i in 0..100 {
        let t = -0.98 + 1.96 * i as f64 / 99.0;
        let tag = |alpha, beta, gamma| classify(&Params { alpha, beta, gamma }, DEFAULT_TOL).tag;
        assert_eq!(tag(1.0, t, -t), RegionTag::Edge1);
        assert_eq!(tag(-1.0, t, t), RegionTag::Edge1);
        assert_eq!(tag(t, 1.0, -t), RegionTag::Edge2);
        assert_eq!(tag(t, -1.0, t), RegionTag::Edge2);
        assert_eq!(tag(t, -t, 1.0), RegionTag::Edge3);
        assert_eq!(tag(t, t, -1.0), RegionTag::Edge3);
        let a = 0.01 + 0.98 * i as f64 / 99.0;
        let b = (1.0 - a) * 0.37;
        assert_eq!(tag(a, b, 1.0 - a - b), RegionTag::FacePlus);
        assert_eq!(tag(-a, -b, 1.0 - a - b), RegionTag::FacePlus);
        assert_eq!(tag(a, -0.5 * a, 1.0 - 0.5 * a), RegionTag::FaceMinus, "{a}");
    }
}

#[test]
fn covariance_comparison_has_unit_z_scale_under_the_null() {
    let target: [[f64; 3]; 3] = [[2.0, 0.5, 0.3], [0.5, 1.0, 0.2], [0.3, 0.2, 1.5]];
    // lower Cholesky factor of the target
    let l00 = target[0][0].sqrt();
    let l10 = target[1][0] / l00;
    let l20 = target[2][0] / l00;
    let l11 = (target[1][1] - l10 * l10).sqrt();
    let l21 = (target[2][1] - l20 * l10) / l11;
    let l22 = (target[2][2] - l20 * l20 - l21 * l21).sqrt();
    let n_eff = 500;
    let mut z2 = Vec::new();
    for seed in 0..200 {
        let z = normals(1000 + seed, n_eff, 3);
        let xs: Vec<[f64; 3]> = (1..=n_eff)
            .map(|i| {
                let (a, b, c) = (z.get(i, 1), z.get(i, 2), z.get(i, 3));
                [l00 * a, l10 * a + l11 * b, l20 * a + l21 * b + l22 * c]
            })
            .collect();
        let cmp = compare_cov(&cov3(&xs), &target, n_eff);
        for i in 0..3 {
            for j in i..3 {
                z2.push(cmp.z_scores[i][j].unwrap().powi(2));
            }
        }
    }
    let m = mean(&z2);
    assert!((m - 1.0).abs() < 0.1, "mean squared z-score {m}");
}

#[test]
fn wiener_functionals_have_their_discrete_moments() {
    for grid in [20, 40] {
        let samples = 8000;
        let w = wiener_functionals(grid, samples, 99).unwrap();
        let se = (variance(&w.w2) / samples as f64).sqrt();
        assert!((mean(&w.w2) - 0.25).abs() < 4.0 * se, "grid {grid}: {}", mean(&w.w2));
        // E[(sum W dW)^2] = sum over cells of E[W(lower-left)^2] h^2
        let g = grid as f64;
        let second = ((g - 1.0) / (2.0 * g)).powi(2);
        let sq: Vec<f64> = w.wdw.iter().map(|x| x * x).collect();
        let se2 = (variance(&sq) / samples as f64).sqrt();
        assert!((mean(&sq) - second).abs() < 4.0 * se2, "grid {grid}: {} vs {second}", mean(&sq));
        assert!(mean(&w.wdw).abs() < 4.0 * (second / samples as f64).sqrt());
    }
}
