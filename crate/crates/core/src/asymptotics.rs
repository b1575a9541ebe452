//! Limit objects of the scaled least-squares error on the boundary strata.
//!
//! Faces scale by `(nm)^(1/2)` with covariance `H^T K^-1 H`, edges by
//! `(nm)^(1/2)` with the rank-one adjugate of `Sigma`, and vertices by
//! `(nm)^(3/4)` with `Theta`. `K` is built from three series over the
//! binomial-convolution law; they are summed over square blocks `[0, K]^2`
//! using differences of the coefficient table, and the slowly decaying tail
//! is removed analytically before a Richardson step over doubling `K`.

use serde::{Deserialize, Serialize};

use crate::coeffs::binom_conv_pmf;
use crate::error::{domain, Error, Result};
use crate::linalg::{
    adjugate3, conjugate_diag3, inverse2, sym_eigenvalues3, Mat2, Mat3,
};
use crate::stats::extrapolate_limit;
use crate::params::{canonicalize, classify, Params, RegionClass, RegionTag, DEFAULT_TOL};

/// Default largest block size tried by [`rho_pair`].
pub const DEFAULT_RHO_CAP: usize = 8192;

/// Default tolerance of the series.
pub const DEFAULT_RHO_TOL: f64 = 1e-6;

const RHO_BASE: usize = 16;

fn unit(x: f64) -> bool {
    (x.abs() - 1.0).abs() <= DEFAULT_TOL
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Closed-form variance constant of the face regime, symmetric in its arguments.
pub fn sigma_sq(alpha: f64, beta: f64) -> Result<f64> {
    let (a, b) = (alpha.abs(), beta.abs());
    if !(a < 1.0 && b < 1.0) {
        return domain("sigma_sq", "needs |alpha|, |beta| < 1");
    }
    if a + b == 0.0 {
        return domain("sigma_sq", "undefined at alpha = beta = 0");
    }
    let root = ((1.0 - a.max(b)) / (std::f64::consts::PI * (a + b))).sqrt();
    let bracket = 1.0 / ((1.0 - a) * (1.0 - b)) - 1.0 / (5.0 * (1.0 - a.min(b)).powi(2));
    Ok(2.0 / 3.0 * root * bracket)
}

/// The same constant as a double integral over the unit square,
/// `int int min(sqrt((1-a)s), sqrt((1-b)t)) ds dt / (sqrt(pi(a+b)) (1-a)(1-b))`,
/// by Gauss-Legendre on pieces split at the kink of the minimum.
pub fn sigma_sq_quadrature(alpha: f64, beta: f64) -> Result<f64> {
    let (a, b) = (alpha.abs(), beta.abs());
    if !(a < 1.0 && b < 1.0) || a + b == 0.0 {
        return domain("sigma_sq_quadrature", "needs |alpha|, |beta| < 1, not both zero");
    }
    let (ca, cb) = (1.0 - a, 1.0 - b);
    let rule = GaussLegendre::new(24);
    let integrand = |s: f64, t: f64| (ca * s).sqrt().min((cb * t).sqrt());
    let inner = |s: f64| {
        let kink = (ca * s / cb).min(1.0);
        // t = v^2 removes the square-root endpoint behaviour below the kink
        let below = rule.integrate(0.0, kink.sqrt(), |v| 2.0 * v * integrand(s, v * v));
        let above = rule.integrate(kink, 1.0, |t| integrand(s, t));
        below + above
    };
    let split = (cb / ca).min(1.0);
    let outer = rule.integrate(0.0, split.sqrt(), |u| 2.0 * u * inner(u * u)) + rule.integrate(split, 1.0, inner);
    Ok(outer / ((std::f64::consts::PI * (a + b)).sqrt() * ca * cb))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }

    fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sign pattern `[[1, s(ab), s(b)], [s(ab), 1, s(a)], [s(b), s(a), 1]]`.
pub fn psi_matrix(alpha: f64, beta: f64) -> Mat3 {
    let (sa, sb) = (sign(alpha), sign(beta));
    [[1.0, sa * sb, sb], [sa * sb, 1.0, sa], [sb, sa, 1.0]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitAxis {
    /// `|alpha| = 1`
    AlphaUnit,
    /// `|beta| = 1`
    BetaUnit,
}

/// Limit of `B / n^3` on an edge, up to the factor `1 / (2 (1 - gamma^2))`:
/// `[[1, ab, b], [ab, 1, a], [b, a, 1]]` with the unit coordinate carrying its sign.
pub fn sigma_matrix(alpha: f64, beta: f64, which: UnitAxis) -> Result<Mat3> {
    let (unit_ok, other) = match which {
        UnitAxis::AlphaUnit => (unit(alpha), beta),
        UnitAxis::BetaUnit => (unit(beta), alpha),
    };
    if !unit_ok || !(other.abs() < 1.0) {
        return domain("sigma_matrix", format!("({alpha}, {beta}) is not on the {which:?} edge"));
    }
    let (a, b) = match which {
        UnitAxis::AlphaUnit => (sign(alpha), beta),
        UnitAxis::BetaUnit => (alpha, sign(beta)),
    };
    Ok([[1.0, a * b, b], [a * b, 1.0, a], [b, a, 1.0]])
}

/// `2 [[1, 0, -b], [0, 1, -a], [-b, -a, 2]]` at a vertex.
pub fn theta_matrix(alpha: f64, beta: f64) -> Result<Mat3> {
    if !(unit(alpha) && unit(beta)) {
        return domain("theta_matrix", format!("({alpha}, {beta}) is not a vertex"));
    }
    let (a, b) = (sign(alpha), sign(beta));
    Ok([[2.0, 0.0, -2.0 * b], [0.0, 2.0, -2.0 * a], [-2.0 * b, -2.0 * a, 4.0]])
}

/// The three series entering `K`, with truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoPair {
    pub rho1_ab: f64,
    pub rho1_ba: f64,
    pub rho2: f64,
    /// Largest shell `m + n <= K` of the partial sums behind the reported values.
    pub truncation_k: usize,
    /// Analytic leading tail beyond `truncation_k`, added back to the squared series.
    pub tail_estimate: f64,
    /// Change of the extrapolated values between the last two block sizes.
    pub error_estimate: f64,
}

fn check_rho_domain(op: &'static str, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let (a, b) = (alpha.abs(), beta.abs());
    if !(a < 1.0 && b < 1.0) || a + b == 0.0 {
        return domain(op, format!("needs |alpha|, |beta| < 1, not both zero; got ({alpha}, {beta})"));
    }
    Ok((a, b))
}

/// How the quarter plane is cut into nested truncation regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shell {
    /// `max(m, n) <= K`.
    Square,
    /// `m + n <= K`. The coefficient ridge crosses these lines transversally for
    /// every `(alpha, beta)`, whereas it runs into the corner of a square when
    /// `alpha` and `beta` are close, which spoils the tail expansion.
    AntiDiagonal,
}

/// Partial sums `P[K']` for every `K' <= k_max`, by shell.
///
/// Index 0 holds `rho1_ab`, 1 holds `rho1_ba`, 2 holds `rho2`. The summands
/// are `d1 = (G(a+1,b) - G(a,b)) / (1-alpha)` and `d2 = (G(a,b+1) - G(a,b)) / (1-beta)`
/// over the positive-face coefficients with `gamma = 1 - alpha - beta`.
fn block_partial_sums(a: f64, b: f64, k_max: usize, shell: Shell) -> [Vec<f64>; 3] {
    let g = 1.0 - a - b;
    let width = k_max + 2;
    let mut shells = [vec![0.0; k_max + 1], vec![0.0; k_max + 1], vec![0.0; k_max + 1]];
    let next_row = |prev: Option<&[f64]>, out: &mut [f64]| {
        for n in 0..width {
            out[n] = match prev {
                None if n == 0 => 1.0,
                None => b * out[n - 1],
                Some(p) if n == 0 => a * p[0],
                Some(p) => a * p[n] + b * out[n - 1] + g * p[n - 1],
            };
        }
    };
    let mut cur = vec![0.0; width];
    let mut nxt = vec![0.0; width];
    next_row(None, &mut cur);
    for m in 0..=k_max {
        next_row(Some(&cur), &mut nxt);
        let n_max = match shell {
            Shell::Square => k_max,
            Shell::AntiDiagonal => k_max - m,
        };
        for n in 0..=n_max {
            let d1 = (nxt[n] - cur[n]) / (1.0 - a);
            let d2 = (cur[n + 1] - cur[n]) / (1.0 - b);
            let s = match shell {
                Shell::Square => m.max(n),
                Shell::AntiDiagonal => m + n,
            };
            shells[0][s] += d1 * d1;
            shells[1][s] += d2 * d2;
            shells[2][s] += d1 * d2;
        }
        std::mem::swap(&mut cur, &mut nxt);
    }
    for sh in shells.iter_mut() {
        for i in 1..sh.len() {
            sh[i] += sh[i - 1];
        }
    }
    shells
}

/// Square-block partial sums over `[0, k]^2`, from coefficient differences.
pub fn rho_partial_sums(alpha: f64, beta: f64, k: usize) -> Result<[f64; 3]> {
    let (a, b) = check_rho_domain("rho_partial_sums", alpha, beta)?;
    let p = block_partial_sums(a, b, k, Shell::Square);
    Ok([p[0][k], p[1][k], p[2][k]])
}

/// The same partial sums from point probabilities of the binomial-convolution laws.
pub fn rho_partial_sums_binomial(alpha: f64, beta: f64, k: usize) -> Result<[f64; 3]> {
    let (a, b) = check_rho_domain("rho_partial_sums_binomial", alpha, beta)?;
    let step = |pmf: &[f64], at: usize| pmf.get(at + 1).copied().unwrap_or(0.0) - pmf[at];
    let mut out = [0.0; 3];
    for i in 0..=k {
        for j in 0..=k {
            let first = binom_conv_pmf(i, a, j, 1.0 - b)?;
            let second = binom_conv_pmf(j, b, i, 1.0 - a)?;
            let d1 = step(&first.pmf, i);
            let d2 = step(&second.pmf, j);
            out[0] += d1 * d1;
            out[1] += d2 * d2;
            out[2] += d1 * d2;
        }
    }
    Ok(out)
}

/// Coefficient `c` of the leading tail `c K^(-1/2)` of the squared series
/// (the cross series has tail `-c K^(-1/2)`), from the local limit theorem.
pub fn rho_tail_coefficient(alpha: f64, beta: f64) -> Result<f64> {
    let (a, b) = check_rho_domain("rho_tail_coefficient", alpha, beta)?;
    let root_pi = std::f64::consts::PI.sqrt();
    Ok(if a >= b {
        1.0 / (2.0 * root_pi * (1.0 - b) * ((1.0 - a) * (a + b)).powf(1.5))
    } else {
        1.0 / (2.0 * root_pi * (1.0 - a) * ((1.0 - b) * (a + b)).powf(1.5))
    })
}

/// Leading tail coefficient for antidiagonal shells `m + n <= K`: the ridge
/// `m (1-alpha) = n (1-beta)` crosses the shell at `m = K (1-beta) / (2-alpha-beta)`.
fn antidiagonal_tail_coefficient(a: f64, b: f64) -> Result<f64> {
    let square = rho_tail_coefficient(a, b)?;
    // the square coefficient is quoted per unit of the exit coordinate
    let exit_share = if a >= b { (1.0 - b) / (2.0 - a - b) } else { (1.0 - a) / (2.0 - a - b) };
    Ok(square / exit_share.sqrt())
}

/// Evaluates the three series to tolerance `tol` with the default cap.
pub fn rho_pair(alpha: f64, beta: f64, tol: f64) -> Result<RhoPair> {
    rho_pair_with_cap(alpha, beta, tol, DEFAULT_RHO_CAP)
}

/// Doubling shell sizes `16, 32, ...` up to `cap` over antidiagonal shells; stops at the first size whose
/// extrapolated values moved by less than `tol` since the previous size.
pub fn rho_pair_with_cap(alpha: f64, beta: f64, tol: f64, cap: usize) -> Result<RhoPair> {
    let (a, b) = check_rho_domain("rho_pair", alpha, beta)?;
    if !(tol > 0.0) {
        return domain("rho_pair", "tolerance must be positive");
    }
    let c1 = antidiagonal_tail_coefficient(a, b)?;
    let signs = [1.0, 1.0, -1.0];
    let mut ladder = vec![RHO_BASE];
    while ladder.last().unwrap() * 2 <= cap {
        ladder.push(ladder.last().unwrap() * 2);
    }
    if ladder.len() < 4 {
        return domain("rho_pair", format!("cap {cap} leaves fewer than four block sizes"));
    }
    let mut best_err = f64::INFINITY;
    let mut computed_to = 0;
    let mut partial: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut prev: Option<[f64; 3]> = None;
    for (idx, &k) in ladder.iter().enumerate() {
        if k > computed_to {
            // one pass yields every smaller block; grow the pass fourfold at a time
            computed_to = (k * 4).min(*ladder.last().unwrap()).max(k);
            partial = block_partial_sums(a, b, computed_to, Shell::AntiDiagonal);
        }
        if idx < 2 {
            continue;
        }
        let ks = [ladder[idx - 2], ladder[idx - 1], k];
        let mut est = [0.0; 3];
        for s in 0..3 {
            let q = ks.map(|kk| partial[s][kk] + signs[s] * c1 / (kk as f64).sqrt());
            // the tail is removed already; strip K^-1 and K^-3/2 next
            est[s] = extrapolate_limit(ks.map(|kk| kk as f64), q, [1.0, 1.5]);
        }
        if let Some(p) = prev {
            let err = (0..3).map(|s| (est[s] - p[s]).abs()).fold(0.0, f64::max);
            best_err = best_err.min(err);
            if err < tol {
                return Ok(RhoPair {
                    rho1_ab: est[0],
                    rho1_ba: est[1],
                    rho2: est[2],
                    truncation_k: k,
                    tail_estimate: c1 / (k as f64).sqrt(),
                    error_estimate: err,
                });
            }
        }
        prev = Some(est);
    }
    Err(Error::NonConvergence {
        k: *ladder.last().unwrap(),
        error_estimate: best_err,
        tol,
    })
}

/// `K = [[kappa1_ba, kappa2], [kappa2, kappa1_ab]]` and the series behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMatrix {
    pub k: Mat2,
    pub rho: RhoPair,
}

/// `kappa1_ab = 1/(1-b^2) + (1-a)^2 rho1_ab`, `kappa1_ba = 1/(1-a^2) + (1-b)^2 rho1_ba`,
/// `kappa2 = (1-a)(1-b) rho2`, for the canonical `(|alpha|, |beta|)`.
pub fn k_matrix(alpha: f64, beta: f64, tol: f64) -> Result<KMatrix> {
    let rho = rho_pair(alpha, beta, tol)?;
    Ok(k_matrix_from_rho(alpha.abs(), beta.abs(), rho))
}

fn k_matrix_from_rho(a: f64, b: f64, rho: RhoPair) -> KMatrix {
    let kappa1_ab = 1.0 / (1.0 - b * b) + (1.0 - a).powi(2) * rho.rho1_ab;
    let kappa1_ba = 1.0 / (1.0 - a * a) + (1.0 - b).powi(2) * rho.rho1_ba;
    let kappa2 = (1.0 - a) * (1.0 - b) * rho.rho2;
    KMatrix {
        k: [[kappa1_ba, kappa2], [kappa2, kappa1_ab]],
        rho,
    }
}

/// `H^T M H` with `H = [[1, 0, -1], [0, 1, -1]]`.
pub fn lift_difference_form(m: &Mat2) -> Mat3 {
    let h = [[1.0, 0.0, -1.0], [0.0, 1.0, -1.0]];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for r in 0..2 {
                for c in 0..2 {
                    s += h[r][i] * m[r][c] * h[c][j];
                }
            }
            out[i][j] = s;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLaw {
    pub region: RegionClass,
    /// Exponent `e` of the normalization `(nm)^e`.
    pub rate_exponent: f64,
    pub covariance: Mat3,
    pub supported: bool,
    /// Series behind `K` on faces.
    pub rho: Option<RhoPair>,
}

impl AsymptoticLaw {
    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        sym_eigenvalues3(&self.covariance)[0]
    }
}

/// Limit law of `(nm)^e (theta_hat - theta)` at `p`.
pub fn limit_law(p: &Params, tol: f64) -> Result<AsymptoticLaw> {
    let region = classify(p, DEFAULT_TOL);
    let unsupported = || AsymptoticLaw {
        region,
        rate_exponent: 0.0,
        covariance: [[0.0; 3]; 3],
        supported: false,
        rho: None,
    };
    let law = match region.tag {
        RegionTag::FacePlus => {
            let (canon, flip) = canonicalize(p);
            let km = k_matrix(canon.alpha, canon.beta, tol)?;
            let inv = inverse2(&km.k).ok_or_else(|| Error::SingularMatrix {
                det: crate::linalg::det2(&km.k),
                threshold: 0.0,
            })?;
            let cov = lift_difference_form(&inv);
            AsymptoticLaw {
                region,
                rate_exponent: 0.5,
                covariance: conjugate_diag3(&cov, &flip.signs()),
                supported: true,
                rho: Some(km.rho),
            }
        }
        RegionTag::Edge1 | RegionTag::Edge2 => {
            let which = if region.tag == RegionTag::Edge1 {
                UnitAxis::AlphaUnit
            } else {
                UnitAxis::BetaUnit
            };
            let sigma = sigma_matrix(p.alpha, p.beta, which)?;
            AsymptoticLaw {
                region,
                rate_exponent: 0.5,
                covariance: adjugate3(&sigma),
                supported: true,
                rho: None,
            }
        }
        RegionTag::Vertex => AsymptoticLaw {
            region,
            rate_exponent: 0.75,
            covariance: theta_matrix(p.alpha, p.beta)?,
            supported: true,
            rho: None,
        },
        _ => unsupported(),
    };
    Ok(law)
}
