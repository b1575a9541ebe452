//! Sample moments, Kolmogorov-Smirnov p-values and power-law extrapolation.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::linalg::{det3, Mat3, Vec3};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; NaN for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean3(xs: &[Vec3]) -> Vec3 {
    let mut s = [0.0; 3];
    for x in xs {
        for i in 0..3 {
            s[i] += x[i];
        }
    }
    s.map(|v| v / xs.len() as f64)
}

/// Unbiased sample covariance, symmetric by construction.
pub fn cov3(xs: &[Vec3]) -> Mat3 {
    let mu = mean3(xs);
    let mut c = [[0.0; 3]; 3];
    for x in xs {
        for i in 0..3 {
            for j in i..3 {
                c[i][j] += (x[i] - mu[i]) * (x[j] - mu[j]);
            }
        }
    }
    let denom = xs.len() as f64 - 1.0;
    for i in 0..3 {
        for j in i..3 {
            c[i][j] /= denom;
            c[j][i] = c[i][j];
        }
    }
    c
}

/// Kolmogorov limiting survival function `Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // dual theta-function form, fast for small lambda:
        // 1 - Q = sqrt(2 pi) / lambda * sum exp(-(2j-1)^2 pi^2 / (8 lambda^2))
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for j in 1..=50 {
            let odd = (2 * j - 1) as f64;
            let term = (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp();
            cdf += term;
            if term < 1e-17 * cdf.max(1e-300) {
                break;
            }
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = sign * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value with the small-sample correction `(sqrt(ne) + 0.12 + 0.11/sqrt(ne)) D`.
fn ks_pvalue(d: f64, ne: f64) -> f64 {
    let root = ne.sqrt();
    kolmogorov_q((root + 0.12 + 0.11 / root) * d)
}

/// One-sample test against the standard normal: `(D, p)`.
pub fn ks_normal(xs: &[f64]) -> (f64, f64) {
    let normal = Normal::standard();
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = normal.cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    (d, ks_pvalue(d, n))
}

/// Two-sample test: `(D, p)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    (d, ks_pvalue(d, n1 * n2 / (n1 + n2)))
}

/// Limit `L` of `v(x) = L + a x^-p + b x^-q` through three points.
pub fn extrapolate_limit(xs: [f64; 3], values: [f64; 3], powers: [f64; 2]) -> f64 {
    let rows: Mat3 = xs.map(|x| [1.0, x.powf(-powers[0]), x.powf(-powers[1])]);
    let mut num = rows;
    for i in 0..3 {
        num[i][0] = values[i];
    }
    det3(&num) / det3(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(median(&xs), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert!(variance(&[1.0]).is_nan());
    }

    #[test]
    fn cov3_matches_componentwise_variance() {
        let xs = [[1.0, 0.0, 2.0], [2.0, 1.0, 0.0], [4.0, -1.0, 1.0]];
        let c = cov3(&xs);
        for i in 0..3 {
            let col: Vec<f64> = xs.iter().map(|x| x[i]).collect();
            assert!((c[i][i] - variance(&col)).abs() < 1e-15);
        }
        assert!(crate::linalg::is_symmetric3(&c, 0.0));
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1) and Q(1.358) from the series, independently summed
        let q1: f64 = 2.0 * (1..50).map(|j: i32| (-1f64).powi(j - 1) * (-2.0 * (j * j) as f64).exp()).sum::<f64>();
        assert!((kolmogorov_q(1.0) - q1).abs() < 1e-15);
        // both forms agree just below the switch
        let q = 2.0 * (1..200).map(|j: i32| (-1f64).powi(j - 1) * (-2.0 * (j * j) as f64 * 0.99 * 0.99).exp()).sum::<f64>();
        assert!((kolmogorov_q(0.99) - q).abs() < 1e-14);
        assert!(kolmogorov_q(0.3) > 0.9999);
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(5.0) < 1e-20);
    }

    #[test]
    fn ks_on_quantiles_is_accepting() {
        let normal = Normal::standard();
        let xs: Vec<f64> = (0..500).map(|i| normal.inverse_cdf((i as f64 + 0.5) / 500.0)).collect();
        let (d, p) = ks_normal(&xs);
        // the quantile inversion is accurate to about 1e-10
        assert!(d <= 0.001 + 1e-9 && p > 0.99, "{d} {p}");
        let shifted: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        assert!(ks_normal(&shifted).1 < 1e-6);
        let (d2, p2) = ks_two_sample(&xs, &xs);
        assert_eq!(d2, 0.0);
        assert_eq!(p2, 1.0);
        assert!(ks_two_sample(&xs, &shifted).1 < 1e-6);
    }

    #[test]
    fn two_sample_statistic_by_hand() {
        // ecdf gap is largest at 2: F_a = 2/3, F_b = 0
        let (d, _) = ks_two_sample(&[1.0, 2.0, 3.0], &[2.5, 3.5]);
        assert!((d - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn extrapolation_is_exact_on_the_model() {
        let f = |x: f64| 2.0 + 3.0 / x.sqrt() - 5.0 / x;
        let xs = [50.0, 100.0, 200.0];
        let l = extrapolate_limit(xs, xs.map(f), [0.5, 1.0]);
        assert!((l - 2.0).abs() < 1e-12);
    }
}
