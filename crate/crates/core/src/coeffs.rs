//! Moving-average coefficients `G(m, n)` and the binomial-convolution law.
//!
//! `G(m, n)` is the response at lag `(m, n)` to a unit innovation, so it obeys
//! the model recursion with `G(0, 0) = 1`. Three further routes exist for
//! cross-checking: the factorial sum, a terminating hypergeometric series,
//! and, on the face `alpha + beta + gamma = 1` with `alpha, beta >= 0`, a point
//! probability of a sum of two independent binomials.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{domain, Error, Result};
use crate::params::Params;

/// Default cap on the number of entries of a [`GTable`].
pub const DEFAULT_G_TABLE_CAP: u128 = 64 * 1024 * 1024;

/// Largest `m + n` accepted by the factorial route.
pub const CLOSED_FORM_MAX_ORDER: usize = 60;

/// Tolerance on `alpha + beta + gamma = 1` for the binomial route.
pub const BINOMIAL_ROUTE_TOL: f64 = 1e-9;

/// Dense table of `G(m, n)` for `0 <= m <= M`, `0 <= n <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GTable {
    pub params: Params,
    cols: usize,
    values: Vec<f64>,
}

impl GTable {
    pub fn max_m(&self) -> usize {
        self.values.len() / self.cols - 1
    }

    pub fn max_n(&self) -> usize {
        self.cols - 1
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.values[m * self.cols + n]
    }

    /// Row `m` as a slice over `n`.
    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m * self.cols..(m + 1) * self.cols]
    }
}

/// Builds the table by the model recursion, row-major, with the default cap.
pub fn g_table(p: &Params, max_m: usize, max_n: usize) -> Result<GTable> {
    g_table_with_cap(p, max_m, max_n, DEFAULT_G_TABLE_CAP)
}

pub fn g_table_with_cap(p: &Params, max_m: usize, max_n: usize, cap: u128) -> Result<GTable> {
    let requested = (max_m as u128 + 1) * (max_n as u128 + 1);
    if requested > cap {
        return Err(Error::Capacity {
            what: "g_table",
            requested,
            cap,
        });
    }
    let cols = max_n + 1;
    let mut values = vec![0.0; (max_m + 1) * cols];
    for m in 0..=max_m {
        for n in 0..=max_n {
            values[m * cols + n] = if m == 0 && n == 0 {
                1.0
            } else {
                let up = if m > 0 { values[(m - 1) * cols + n] } else { 0.0 };
                let left = if n > 0 { values[m * cols + n - 1] } else { 0.0 };
                let diag = if m > 0 && n > 0 { values[(m - 1) * cols + n - 1] } else { 0.0 };
                recursion_step(p, up, left, diag)
            };
        }
    }
    Ok(GTable {
        params: *p,
        cols,
        values,
    })
}

/// One step of the model recursion in its fixed evaluation order.
#[inline]
pub(crate) fn recursion_step(p: &Params, up: f64, left: f64, diag: f64) -> f64 {
    p.alpha * up + p.beta * left + p.gamma * diag
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GMethod {
    ClosedForm,
    Hypergeometric,
    Binomial,
}

/// Evaluates a single coefficient by one of the non-recursive routes.
pub fn g_value(m: usize, n: usize, p: &Params, method: GMethod) -> Result<f64> {
    match method {
        GMethod::ClosedForm => g_closed_form(m, n, p),
        GMethod::Hypergeometric => g_hypergeometric(m, n, p),
        GMethod::Binomial => g_binomial(m, n, p),
    }
}

fn g_closed_form(m: usize, n: usize, p: &Params) -> Result<f64> {
    if m + n > CLOSED_FORM_MAX_ORDER {
        return domain(
            "g_value(ClosedForm)",
            format!("m + n = {} exceeds {}", m + n, CLOSED_FORM_MAX_ORDER),
        );
    }
    // coefficient (m+n-r)! / ((m-r)! (n-r)! r!) updated by its term ratio
    let mut coef = 1.0;
    for i in 1..=n {
        coef *= (m + i) as f64 / i as f64;
    }
    let mut sum = 0.0;
    for r in 0..=m.min(n) {
        let term = coef
            * p.alpha.powi((m - r) as i32)
            * p.beta.powi((n - r) as i32)
            * p.gamma.powi(r as i32);
        sum += term;
        coef *= ((m - r) * (n - r)) as f64 / (((m + n - r) * (r + 1)) as f64);
    }
    Ok(sum)
}

/// Value of a terminating series `2F1(-n, b; c; z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeometricSum {
    pub value: f64,
    /// False when `(c)_r` vanished before the series terminated; the value
    /// then holds the partial sum up to the last valid term.
    pub reliable: bool,
}

/// `sum_{r=0}^{n} (-n)_r (b)_r / ((c)_r r!) z^r`, evaluated term by term.
pub fn terminating_hyp2f1(n: usize, b: f64, c: f64, z: f64) -> HypergeometricSum {
    let mut term = 1.0;
    let mut value = 1.0;
    for r in 0..n {
        let rf = r as f64;
        let denom = (c + rf) * (rf + 1.0);
        if c + rf == 0.0 {
            return HypergeometricSum {
                value,
                reliable: false,
            };
        }
        term *= (rf - n as f64) * (b + rf) / denom * z;
        value += term;
    }
    HypergeometricSum {
        value,
        reliable: true,
    }
}

fn g_hypergeometric(m: usize, n: usize, p: &Params) -> Result<f64> {
    if p.alpha * p.beta == 0.0 {
        return domain("g_value(Hypergeometric)", "requires alpha * beta != 0");
    }
    let z = -p.gamma / (p.alpha * p.beta);
    let series = terminating_hyp2f1(m, -(n as f64), -((m + n) as f64), z);
    if !series.reliable {
        return domain("g_value(Hypergeometric)", "series hit a zero Pochhammer denominator");
    }
    let mut binom = 1.0;
    for i in 1..=n {
        binom *= (m + i) as f64 / i as f64;
    }
    Ok(binom * p.alpha.powi(m as i32) * p.beta.powi(n as i32) * series.value)
}

/// True when `p` lies on the face `alpha + beta + gamma = 1` with
/// `0 <= alpha, beta < 1`, where `G` is a probability.
pub fn on_positive_face(p: &Params, tol: f64) -> bool {
    (0.0..1.0).contains(&p.alpha)
        && (0.0..1.0).contains(&p.beta)
        && (p.alpha + p.beta + p.gamma - 1.0).abs() <= tol
}

fn g_binomial(m: usize, n: usize, p: &Params) -> Result<f64> {
    if !on_positive_face(p, BINOMIAL_ROUTE_TOL) {
        return domain(
            "g_value(Binomial)",
            "requires 0 <= alpha, beta < 1 and alpha + beta + gamma = 1",
        );
    }
    let law = binom_conv_pmf(m, p.alpha, n, 1.0 - p.beta)?;
    Ok(law.pmf[m])
}

/// Law of `Bin(k, nu) + Bin(l, mu)` with independent summands.
#[derive(Debug, Clone, PartialEq)]
pub struct BinConvLaw {
    pub k: usize,
    pub nu: f64,
    pub l: usize,
    pub mu: f64,
    pub pmf: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailSide {
    Upper,
    Lower,
}

impl BinConvLaw {
    pub fn mean(&self) -> f64 {
        self.nu * self.k as f64 + self.mu * self.l as f64
    }

    /// `P(S >= (k+l) x)` for `Upper`, `P(S <= (k+l) x)` for `Lower`.
    ///
    /// Lattice points within rounding of the threshold are counted as inside.
    pub fn tail(&self, x: f64, side: TailSide) -> f64 {
        let total = (self.k + self.l) as f64;
        let cut = total * x;
        let slack = 1e-9 * total.max(1.0);
        self.pmf
            .iter()
            .enumerate()
            .filter(|(j, _)| match side {
                TailSide::Upper => *j as f64 >= cut - slack,
                TailSide::Lower => *j as f64 <= cut + slack,
            })
            .map(|(_, p)| p)
            .sum()
    }
}

/// Orders above which pmfs switch to log-space evaluation.
const LOG_SPACE_ORDER: usize = 500;

fn binomial_pmf(n: usize, p: f64, log_space: bool) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    if p == 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p == 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    let q = 1.0 - p;
    let start = q.powi(n as i32);
    if !log_space && start > 1e-280 {
        let ratio = p / q;
        pmf[0] = start;
        for i in 0..n {
            pmf[i + 1] = pmf[i] * ((n - i) as f64 / (i + 1) as f64) * ratio;
        }
    } else {
        let (lp, lq) = (p.ln(), q.ln());
        for (i, out) in pmf.iter_mut().enumerate() {
            *out = (ln_binomial(n as u64, i as u64) + i as f64 * lp + (n - i) as f64 * lq).exp();
        }
    }
    pmf
}

/// Exact pmf of `Bin(k, nu) + Bin(l, mu)` by direct convolution.
pub fn binom_conv_pmf(k: usize, nu: f64, l: usize, mu: f64) -> Result<BinConvLaw> {
    if !(0.0..=1.0).contains(&nu) || !(0.0..=1.0).contains(&mu) {
        return domain("binom_conv_pmf", format!("success probabilities ({nu}, {mu}) outside [0, 1]"));
    }
    let log_space = k + l > LOG_SPACE_ORDER;
    let a = binomial_pmf(k, nu, log_space);
    let b = binomial_pmf(l, mu, log_space);
    let mut pmf = vec![0.0; k + l + 1];
    for (i, &pa) in a.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (j, &pb) in b.iter().enumerate() {
            pmf[i + j] += pa * pb;
        }
    }
    Ok(BinConvLaw { k, nu, l, mu, pmf })
}

/// Centering and scaling of the local limit theorem for `Bin(k, nu) + Bin(l, mu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCltFrame {
    pub m_kl: f64,
    pub b_kl: f64,
}

impl LocalCltFrame {
    pub fn new(k: usize, nu: f64, l: usize, mu: f64) -> Self {
        let (k, l) = (k as f64, l as f64);
        LocalCltFrame {
            m_kl: nu * k + mu * l,
            b_kl: nu * (1.0 - nu) * k + mu * (1.0 - mu) * l,
        }
    }

    /// Standardized lattice point `(j - m) / sqrt(b)`.
    pub fn x(&self, j: i64) -> f64 {
        (j as f64 - self.m_kl) / self.b_kl.sqrt()
    }
}

/// Gaussian surrogate `(2 pi b)^(-1/2) exp(-x^2 / 2)` for `P(S = j)`.
pub fn local_clt_approx(frame: &LocalCltFrame, j: i64) -> Result<f64> {
    if !(frame.b_kl > 0.0) {
        return domain("local_clt_approx", format!("variance {} is not positive", frame.b_kl));
    }
    let x = frame.x(j);
    Ok((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI * frame.b_kl).sqrt())
}

/// Hoeffding rate `x log(x/theta) + (1-x) log((1-x)/(1-theta))`, infinite off `[0, 1]`.
pub fn rate_function(theta: f64, x: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return domain("rate_function", format!("theta = {theta} outside (0, 1)"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Ok(f64::INFINITY);
    }
    let xlogx = |u: f64, v: f64| if u == 0.0 { 0.0 } else { u * (u / v).ln() };
    Ok(xlogx(x, theta) + xlogx(1.0 - x, 1.0 - theta))
}

/// Hoeffding bound `exp(-(k+l) I_theta(x))` on the tail of `S / (k+l)`,
/// with `theta = (nu k + mu l) / (k + l)`.
pub fn tail_bound(k: usize, l: usize, nu: f64, mu: f64, x: f64, side: TailSide) -> Result<f64> {
    if k + l == 0 {
        return domain("tail_bound", "k + l must be at least 1");
    }
    let total = (k + l) as f64;
    let theta = (nu * k as f64 + mu * l as f64) / total;
    let ok = match side {
        TailSide::Upper => x > theta,
        TailSide::Lower => x < theta,
    };
    if !ok {
        return domain("tail_bound", format!("{side:?} tail needs x on the other side of theta = {theta}"));
    }
    Ok((-total * rate_function(theta, x)?).exp())
}
