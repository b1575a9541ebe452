//! Sufficient statistics of a field and the least-squares estimator.
//!
//! For each site `(k, l)` of the rectangle `1..=n x 1..=m` the regressors are
//! `a = X[k-1][l]`, `b = X[k][l-1]`, `c = X[k-1][l-1]`. With `u = b - c` and
//! `v = a - c` the quadratic forms are `s1 = sum u^2`, `s2 = sum v^2`,
//! `s3 = sum u c`, `s4 = sum v c`, `s5 = sum u v` and `t = sum c^2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{adjugate3, det3, frobenius3, matvec3, Mat3, Vec3};
use crate::simulate::{Field, NoiseMatrix};

/// Relative singularity threshold: `|det B| <= SINGULAR_REL * |B|_F^3`.
pub const SINGULAR_REL: f64 = 1e-12;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accumulators {
    pub n: usize,
    pub m: usize,
    /// `sum eps * (a, b, c)`, present only when the innovations were supplied.
    pub a: Option<Vec3>,
    /// `sum (a, b, c)^T (a, b, c)`.
    pub b: Mat3,
    pub s: [f64; 5],
    pub t: f64,
    /// `sum X[k][l] * (a, b, c)`.
    pub xy: Vec3,
}

impl Accumulators {
    pub fn s1(&self) -> f64 {
        self.s[0]
    }
    pub fn s2(&self) -> f64 {
        self.s[1]
    }
    pub fn s3(&self) -> f64 {
        self.s[2]
    }
    pub fn s4(&self) -> f64 {
        self.s[3]
    }
    pub fn s5(&self) -> f64 {
        self.s[4]
    }

    /// Sum of two partial accumulators over disjoint site sets.
    pub fn merge(&self, other: &Accumulators) -> Accumulators {
        let mut out = self.clone();
        out.a = match (self.a, other.a) {
            (Some(x), Some(y)) => Some([x[0] + y[0], x[1] + y[1], x[2] + y[2]]),
            _ => None,
        };
        for i in 0..3 {
            for j in 0..3 {
                out.b[i][j] += other.b[i][j];
            }
            out.xy[i] += other.xy[i];
        }
        for i in 0..5 {
            out.s[i] += other.s[i];
        }
        out.t += other.t;
        out
    }
}

fn check_rect(field: &Field, n: usize, m: usize) -> Result<()> {
    if n > field.n || m > field.m {
        return Err(Error::Dimension(format!(
            "rectangle {n}x{m} exceeds field {}x{}",
            field.n, field.m
        )));
    }
    Ok(())
}

fn accumulate_impl(field: &Field, eps: Option<&NoiseMatrix>, n: usize, m: usize) -> Accumulators {
    let mut b = [[Compensated::default(); 3]; 3];
    let mut s = [Compensated::default(); 5];
    let mut t = Compensated::default();
    let mut xy = [Compensated::default(); 3];
    let mut a = [Compensated::default(); 3];
    for k in 1..=n {
        for l in 1..=m {
            let r = [field.get(k - 1, l), field.get(k, l - 1), field.get(k - 1, l - 1)];
            let y = field.get(k, l);
            for i in 0..3 {
                for j in i..3 {
                    b[i][j].add(r[i] * r[j]);
                }
                xy[i].add(y * r[i]);
            }
            let c = r[2];
            let u = r[1] - c;
            let v = r[0] - c;
            s[0].add(u * u);
            s[1].add(v * v);
            s[2].add(u * c);
            s[3].add(v * c);
            s[4].add(u * v);
            t.add(c * c);
            if let Some(e) = eps {
                let e = e.get(k, l);
                for i in 0..3 {
                    a[i].add(e * r[i]);
                }
            }
        }
    }
    let mut bm = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            bm[i][j] = b[i][j].value();
            bm[j][i] = bm[i][j];
        }
    }
    Accumulators {
        n,
        m,
        a: eps.map(|_| [a[0].value(), a[1].value(), a[2].value()]),
        b: bm,
        s: s.map(|x| x.value()),
        t: t.value(),
        xy: xy.map(|x| x.value()),
    }
}

/// Single pass over the rectangle `1..=n x 1..=m`.
pub fn accumulate(field: &Field, n: usize, m: usize) -> Result<Accumulators> {
    check_rect(field, n, m)?;
    Ok(accumulate_impl(field, None, n, m))
}

/// As [`accumulate`], also forming the innovation-weighted regressor sum.
pub fn accumulate_with_noise(field: &Field, eps: &NoiseMatrix, n: usize, m: usize) -> Result<Accumulators> {
    check_rect(field, n, m)?;
    if n > eps.n || m > eps.m {
        return Err(Error::Dimension(format!(
            "rectangle {n}x{m} exceeds noise {}x{}",
            eps.n, eps.m
        )));
    }
    Ok(accumulate_impl(field, Some(eps), n, m))
}

/// `(A1 - A3, A2 - A3)`.
pub fn c_stat(acc: &Accumulators) -> Result<[f64; 2]> {
    let a = acc.a.ok_or(Error::MissingNoise)?;
    Ok([a[0] - a[2], a[1] - a[2]])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub theta_hat: Vec3,
    pub det_b: f64,
    #[serde(skip)]
    pub adj_b: Mat3,
    #[serde(skip)]
    pub residual_ss: f64,
    pub n: usize,
    pub m: usize,
}

/// Least squares `theta = adj(B) xy / det(B)`; `response` supplies the residuals.
pub fn lse(acc: &Accumulators, response: &Field) -> Result<Estimate> {
    check_rect(response, acc.n, acc.m)?;
    let det_b = det3(&acc.b);
    let threshold = SINGULAR_REL * frobenius3(&acc.b).powi(3);
    if !(det_b.abs() > threshold) {
        return Err(Error::SingularMatrix { det: det_b, threshold });
    }
    let adj_b = adjugate3(&acc.b);
    let num = matvec3(&adj_b, &acc.xy);
    let theta_hat = [num[0] / det_b, num[1] / det_b, num[2] / det_b];
    let mut rss = Compensated::default();
    for k in 1..=acc.n {
        for l in 1..=acc.m {
            let fit = theta_hat[0] * response.get(k - 1, l)
                + theta_hat[1] * response.get(k, l - 1)
                + theta_hat[2] * response.get(k - 1, l - 1);
            let e = response.get(k, l) - fit;
            rss.add(e * e);
        }
    }
    Ok(Estimate {
        theta_hat,
        det_b,
        adj_b,
        residual_ss: rss.value(),
        n: acc.n,
        m: acc.m,
    })
}

/// `det B` computed directly, and from the quadratic forms as
/// `s1 s2 t + 2 s3 s4 s5 - s5^2 t - s1 s4^2 - s2 s3^2`.
pub fn det_identity(acc: &Accumulators) -> (f64, f64) {
    let [s1, s2, s3, s4, s5] = acc.s;
    let t = acc.t;
    let rhs = s1 * s2 * t + 2.0 * s5 * s3 * s4 - s5 * s5 * t - s1 * s4 * s4 - s2 * s3 * s3;
    (det3(&acc.b), rhs)
}
