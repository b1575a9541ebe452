//! Replicated simulate-then-estimate experiments and their comparison with
//! the limit laws.
//!
//! Replicate `r` of size index `s` draws its innovations from a seed hashed
//! from `(base_seed, s, r)`, so results do not depend on how replicates are
//! spread over worker threads. Parallel maps collect in index order and all
//! reductions run sequentially afterwards.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{limit_law, AsymptoticLaw, DEFAULT_RHO_TOL};
use crate::error::{domain, Error, Result};
use crate::estimator::{accumulate, lse, Estimate};
use crate::linalg::{frobenius3, Mat3, Vec3};
use crate::params::{classify, Params, RegionClass, DEFAULT_TOL};
use crate::simulate::{draw_noise, simulate_recursion, NoiseKind, NoiseSpec};
use crate::stats::{cov3, ks_normal, mean3, median};

/// Environment variable read for the worker count when the config leaves it open.
pub const THREADS_ENV: &str = "SARFIELD_THREADS";

/// Largest tolerated share of singular replicates.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

fn default_noise() -> NoiseKind {
    NoiseKind::Gaussian
}

fn default_rho_tol() -> f64 {
    DEFAULT_RHO_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCConfig {
    pub params: Params,
    /// `(n, m)` pairs sharing one aspect ratio.
    pub sizes: Vec<(usize, usize)>,
    pub replicates: usize,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    #[serde(default = "default_rho_tol")]
    pub rho_tol: f64,
    pub base_seed: u64,
    /// Report unscaled errors even where no limit law is available.
    #[serde(default)]
    pub raw_only: bool,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub checks: Option<CovChecks>,
}

/// Pass criteria applied to every size of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovChecks {
    /// Relative tolerance for entries with `|theory| > magnitude_floor`.
    pub rel_tol: f64,
    /// Absolute tolerance for the remaining entries.
    pub abs_tol: f64,
    pub magnitude_floor: f64,
    #[serde(default)]
    pub ks_min_pvalue: Option<f64>,
    #[serde(default)]
    pub rate_interval: Option<(f64, f64)>,
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.replicates < 2 {
            return Err(Error::Config(format!("replicates must be at least 2, got {}", self.replicates)));
        }
        let Some(&(n0, m0)) = self.sizes.first() else {
            return Err(Error::Config("sizes must not be empty".into()));
        };
        for &(n, m) in &self.sizes {
            if n < 2 || m < 2 {
                return Err(Error::Config(format!("size ({n}, {m}) is below 2x2")));
            }
            if n * m0 != m * n0 {
                return Err(Error::Config(format!(
                    "size ({n}, {m}) does not share the aspect ratio of ({n0}, {m0})"
                )));
            }
        }
        if !(self.rho_tol > 0.0) {
            return Err(Error::Config("rho_tol must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r` at size index `size_index`.
pub fn replicate_seed(base_seed: u64, size_index: usize, r: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ size_index as u64) ^ r as u64)
}

/// Worker count from the argument, else from [`THREADS_ENV`], else rayon's default.
pub fn resolve_threads(threads: Option<usize>) -> Result<Option<usize>> {
    if threads.is_some() {
        return Ok(threads);
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(Error::Config(format!("{THREADS_ENV}={s:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// `f(0), ..., f(count - 1)` evaluated in parallel, returned in index order.
pub fn map_replicates<T, F>(count: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()))
        }
        None => Ok((0..count).into_par_iter().map(&f).collect()),
    }
}

/// One replicate: innovations from `seed`, recursion, least squares on the full rectangle.
pub fn run_replicate(p: &Params, n: usize, m: usize, noise: NoiseKind, seed: u64) -> Result<Estimate> {
    let eps = draw_noise(&NoiseSpec { kind: noise, seed }, n, m);
    let field = simulate_recursion(p, &eps);
    let acc = accumulate(&field, n, m)?;
    lse(&acc, &field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub size: usize,
    pub replicate: usize,
    pub theta_hat: Vec3,
    pub det_b: f64,
}

/// Writes `size,replicate,alpha_hat,beta_hat,gamma_hat,detB`, `size` being `n`.
pub fn write_raw_csv<W: Write>(records: &[ReplicateRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["size", "replicate", "alpha_hat", "beta_hat", "gamma_hat", "detB"])?;
    for r in records {
        wtr.serialize((r.size, r.replicate, r.theta_hat[0], r.theta_hat[1], r.theta_hat[2], r.det_b))?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovComparison {
    pub max_abs_entry_gap: f64,
    /// Over entries with nonzero theoretical value.
    pub max_rel_entry_gap: f64,
    /// `|E - T|_F / |T|_F`, or `|E|_F` when `T = 0`.
    pub frobenius_rel: f64,
    /// `None` where the theoretical sampling variance vanishes.
    pub z_scores: [[Option<f64>; 3]; 3],
    pub max_abs_z: Option<f64>,
}

/// Entrywise comparison; z-scores use the Gaussian sampling variance
/// `(T_ii T_jj + T_ij^2) / n_eff` of a covariance estimate.
pub fn compare_cov(empirical: &Mat3, theoretical: &Mat3, n_eff: usize) -> CovComparison {
    let scale = theoretical.iter().flatten().fold(1.0_f64, |a, x| a.max(x.abs()));
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut z_scores = [[None; 3]; 3];
    let mut max_z: Option<f64> = None;
    let mut diff = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (e, t) = (empirical[i][j], theoretical[i][j]);
            let gap = (e - t).abs();
            diff[i][j] = e - t;
            max_abs = max_abs.max(gap);
            if t.abs() > 1e-12 * scale {
                max_rel = max_rel.max(gap / t.abs());
            }
            let var = (theoretical[i][i] * theoretical[j][j] + t * t) / n_eff as f64;
            if var > 1e-12 * scale * scale / n_eff as f64 {
                let z = (e - t) / var.sqrt();
                z_scores[i][j] = Some(z);
                max_z = Some(max_z.unwrap_or(0.0).max(z.abs()));
            }
        }
    }
    let t_norm = frobenius3(theoretical);
    let frobenius_rel = if t_norm > 0.0 {
        frobenius3(&diff) / t_norm
    } else {
        frobenius3(empirical)
    };
    CovComparison {
        max_abs_entry_gap: max_abs,
        max_rel_entry_gap: max_rel,
        frobenius_rel,
        z_scores,
        max_abs_z: max_z,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Least-squares line through `(log n, log error)`.
pub fn rate_fit(sizes: &[usize], median_abs_errors: &[f64]) -> Result<RateFit> {
    if sizes.len() < 3 || sizes.len() != median_abs_errors.len() {
        return domain("rate_fit", "needs at least three sizes with one error each");
    }
    if sizes.iter().any(|&n| n == 0) || median_abs_errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return domain("rate_fit", "sizes and errors must be positive");
    }
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = median_abs_errors.iter().map(|e| e.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return domain("rate_fit", "sizes must not all be equal");
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (rss / (k - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, stderr, intercept })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub n: usize,
    pub m: usize,
    /// Factor `(nm)^e` applied to `theta_hat - theta`.
    pub scale: f64,
    pub replicates: usize,
    pub excluded: usize,
    pub n_eff: usize,
    pub empirical_mean: Vec3,
    pub empirical_cov: Mat3,
    /// Marginals studentized by the theoretical standard deviation; `None` when it is zero.
    pub ks_pvalues: [Option<f64>; 3],
    pub median_abs_error: f64,
    pub comparison: Option<CovComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub params: Params,
    pub region: RegionClass,
    pub law: AsymptoticLaw,
    pub sizes: Vec<SizeReport>,
    pub rate: Option<RateFit>,
    pub checks: Option<CheckOutcome>,
    #[serde(skip)]
    pub raw: Vec<ReplicateRecord>,
}

pub fn run_experiment(cfg: &MCConfig) -> Result<MCReport> {
    cfg.validate()?;
    let p = cfg.params;
    let region = classify(&p, DEFAULT_TOL);
    let law = limit_law(&p, cfg.rho_tol)?;
    if !law.supported && !cfg.raw_only {
        return domain(
            "run_experiment",
            format!("no limit law for region {}; set raw_only for unscaled output", region.tag),
        );
    }
    let exponent = if law.supported { law.rate_exponent } else { 0.0 };
    let threads = resolve_threads(cfg.threads)?;
    let theta = p.as_array();

    let mut sizes = Vec::with_capacity(cfg.sizes.len());
    let mut raw = Vec::new();
    for (si, &(n, m)) in cfg.sizes.iter().enumerate() {
        let outcomes = map_replicates(cfg.replicates, threads, |r| {
            run_replicate(&p, n, m, cfg.noise, replicate_seed(cfg.base_seed, si, r))
        })?;
        let scale = ((n * m) as f64).powf(exponent);
        let mut scaled = Vec::with_capacity(outcomes.len());
        let mut abs_err = Vec::with_capacity(outcomes.len());
        let mut excluded = 0;
        for (r, out) in outcomes.into_iter().enumerate() {
            match out {
                Ok(est) => {
                    let e: Vec3 = [0, 1, 2].map(|i| est.theta_hat[i] - theta[i]);
                    abs_err.push(e.iter().map(|v| v * v).sum::<f64>().sqrt());
                    scaled.push(e.map(|v| v * scale));
                    raw.push(ReplicateRecord {
                        size: n,
                        replicate: r,
                        theta_hat: est.theta_hat,
                        det_b: est.det_b,
                    });
                }
                Err(Error::SingularMatrix { .. }) => excluded += 1,
                Err(e) => return Err(e),
            }
        }
        if excluded as f64 > MAX_EXCLUDED_FRACTION * cfg.replicates as f64 {
            return Err(Error::TooManyExcluded {
                excluded,
                total: cfg.replicates,
            });
        }
        let empirical_cov = cov3(&scaled);
        let mut ks_pvalues = [None; 3];
        let mut comparison = None;
        if law.supported {
            for i in 0..3 {
                let var = law.covariance[i][i];
                if var > 1e-12 {
                    let z: Vec<f64> = scaled.iter().map(|v| v[i] / var.sqrt()).collect();
                    ks_pvalues[i] = Some(ks_normal(&z).1);
                }
            }
            comparison = Some(compare_cov(&empirical_cov, &law.covariance, scaled.len()));
        }
        sizes.push(SizeReport {
            n,
            m,
            scale,
            replicates: cfg.replicates,
            excluded,
            n_eff: scaled.len(),
            empirical_mean: mean3(&scaled),
            empirical_cov,
            ks_pvalues,
            median_abs_error: median(&abs_err),
            comparison,
        });
    }

    let rate = if sizes.len() >= 3 {
        let ns: Vec<usize> = sizes.iter().map(|s| s.n).collect();
        let med: Vec<f64> = sizes.iter().map(|s| s.median_abs_error).collect();
        rate_fit(&ns, &med).ok()
    } else {
        None
    };
    let checks = cfg.checks.map(|c| evaluate_checks(&c, &law, &sizes, rate.as_ref()));
    Ok(MCReport {
        params: p,
        region,
        law,
        sizes,
        rate,
        checks,
        raw,
    })
}

fn evaluate_checks(c: &CovChecks, law: &AsymptoticLaw, sizes: &[SizeReport], rate: Option<&RateFit>) -> CheckOutcome {
    let mut failures = Vec::new();
    if !law.supported {
        failures.push("no limit law to compare against".to_string());
    }
    for s in sizes.iter().filter(|_| law.supported) {
        for i in 0..3 {
            for j in i..3 {
                let (e, t) = (s.empirical_cov[i][j], law.covariance[i][j]);
                let gap = (e - t).abs();
                let ok = if t.abs() > c.magnitude_floor {
                    gap <= c.rel_tol * t.abs()
                } else {
                    gap <= c.abs_tol
                };
                if !ok {
                    failures.push(format!("n={} entry ({},{}): empirical {e:.4} vs {t:.4}", s.n, i + 1, j + 1));
                }
            }
        }
        if let Some(min_p) = c.ks_min_pvalue {
            for (i, pv) in s.ks_pvalues.iter().enumerate() {
                if let Some(pv) = pv.filter(|pv| *pv <= min_p) {
                    failures.push(format!("n={} component {}: KS p = {pv:.4}", s.n, i + 1));
                }
            }
        }
    }
    if let Some((lo, hi)) = c.rate_interval {
        match rate {
            Some(r) if r.slope >= lo && r.slope <= hi => {}
            Some(r) => failures.push(format!("rate slope {:.3} outside [{lo}, {hi}]", r.slope)),
            None => failures.push("rate interval set but fewer than three sizes".to_string()),
        }
    }
    CheckOutcome {
        passed: failures.is_empty(),
        failures,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerSamples {
    /// Approximations of the integral of `W^2` over the unit square.
    pub w2: Vec<f64>,
    /// Approximations of the integral of `W` against its own increments.
    pub wdw: Vec<f64>,
}

/// Wiener sheets on a `grid x grid` lattice from i.i.d. normal cell increments
/// of variance `1 / grid^2`. The square integral averages the four cell corners,
/// which keeps its mean at exactly `1/4`; the stochastic integral evaluates `W`
/// at the lower-left corner of each increment.
pub fn wiener_functionals(grid: usize, samples: usize, seed: u64) -> Result<WienerSamples> {
    if grid < 10 {
        return domain("wiener_functionals", format!("grid must be at least 10, got {grid}"));
    }
    let g = grid;
    let h = 1.0 / g as f64;
    let pairs = map_replicates(samples, None, |s| {
        let xi = draw_noise(
            &NoiseSpec {
                kind: NoiseKind::Gaussian,
                seed: replicate_seed(seed, 0, s),
            },
            g,
            g,
        );
        // w[i][j] = W(i/g, j/g), with a zero first row and column
        let mut w = vec![0.0; (g + 1) * (g + 1)];
        let idx = |i: usize, j: usize| i * (g + 1) + j;
        let mut wdw = 0.0;
        for i in 1..=g {
            for j in 1..=g {
                let d = xi.get(i, j) * h;
                wdw += w[idx(i - 1, j - 1)] * d;
                w[idx(i, j)] = w[idx(i - 1, j)] + w[idx(i, j - 1)] - w[idx(i - 1, j - 1)] + d;
            }
        }
        let mut w2 = 0.0;
        for i in 1..=g {
            for j in 1..=g {
                let corners = w[idx(i - 1, j - 1)].powi(2)
                    + w[idx(i - 1, j)].powi(2)
                    + w[idx(i, j - 1)].powi(2)
                    + w[idx(i, j)].powi(2);
                w2 += 0.25 * corners;
            }
        }
        (w2 * h * h, wdw)
    })?;
    let (w2, wdw) = pairs.into_iter().unzip();
    Ok(WienerSamples { w2, wdw })
}
