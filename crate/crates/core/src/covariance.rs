//! Exact second moments of the field and their large-lattice limits.

use serde::{Deserialize, Serialize};

use crate::coeffs::{g_table, GTable};
use crate::error::{domain, Error, Result};
use crate::params::{classify, Params, RegionTag, DEFAULT_TOL};

/// Two lattice sites `(k1, l1)` and `(k2, l2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SitePair {
    pub k1: usize,
    pub l1: usize,
    pub k2: usize,
    pub l2: usize,
}

impl SitePair {
    pub fn new(k1: usize, l1: usize, k2: usize, l2: usize) -> Self {
        SitePair { k1, l1, k2, l2 }
    }

    pub fn swapped(self) -> Self {
        SitePair::new(self.k2, self.l2, self.k1, self.l1)
    }
}

/// Covariances from one shared coefficient table.
#[derive(Debug, Clone)]
pub struct CovarianceTable {
    table: GTable,
}

impl CovarianceTable {
    /// Table covering every pair with `k <= max_k` and `l <= max_l`.
    pub fn new(p: &Params, max_k: usize, max_l: usize) -> Result<Self> {
        Ok(CovarianceTable {
            table: g_table(p, max_k.saturating_sub(1), max_l.saturating_sub(1))?,
        })
    }

    pub fn params(&self) -> &Params {
        &self.table.params
    }

    /// `sum_{i <= k1^k2, j <= l1^l2} G(k1-i, l1-j) G(k2-i, l2-j)`.
    pub fn cov(&self, pair: SitePair) -> Result<f64> {
        let SitePair { k1, l1, k2, l2 } = pair;
        let (kk, ll) = (k1.min(k2), l1.min(l2));
        if kk == 0 || ll == 0 {
            return Ok(0.0);
        }
        if k1.max(k2) > self.table.max_m() + 1 || l1.max(l2) > self.table.max_n() + 1 {
            return Err(Error::Dimension(format!(
                "pair {pair:?} exceeds covariance table {}x{}",
                self.table.max_m() + 1,
                self.table.max_n() + 1
            )));
        }
        let mut s = 0.0;
        for i in 1..=kk {
            let r1 = self.table.row(k1 - i);
            let r2 = self.table.row(k2 - i);
            for j in 1..=ll {
                s += r1[l1 - j] * r2[l2 - j];
            }
        }
        Ok(s)
    }
}

/// Exact covariance of `X[k1][l1]` and `X[k2][l2]`.
pub fn exact_cov(p: &Params, pair: SitePair) -> Result<f64> {
    CovarianceTable::new(p, pair.k1.max(pair.k2), pair.l1.max(pair.l2))?.cov(pair)
}

/// Closed forms on edges and vertices, any sign pattern.
///
/// Edge1 (`|alpha| = 1`): `(k1^k2) alpha^|dk| beta^|dl| (1 - beta^(2 (l1^l2))) / (1 - beta^2)`;
/// Edge2 mirrors it; vertices give `(k1^k2)(l1^l2) alpha^|dk| beta^|dl|`.
pub fn cov_closed(p: &Params, pair: SitePair) -> Result<f64> {
    let SitePair { k1, l1, k2, l2 } = pair;
    let (kk, ll) = (k1.min(k2) as i32, l1.min(l2) as i32);
    let dk = k1.abs_diff(k2) as i32;
    let dl = l1.abs_diff(l2) as i32;
    let (a, b) = (p.alpha, p.beta);
    match classify(p, DEFAULT_TOL).tag {
        RegionTag::Vertex => Ok((kk * ll) as f64 * a.powi(dk) * b.powi(dl)),
        RegionTag::Edge1 => {
            Ok(kk as f64 * a.powi(dk) * b.powi(dl) * (1.0 - b.powi(2 * ll)) / (1.0 - b * b))
        }
        RegionTag::Edge2 => {
            Ok(ll as f64 * a.powi(dk) * b.powi(dl) * (1.0 - a.powi(2 * kk)) / (1.0 - a * a))
        }
        tag => domain("cov_closed", format!("no closed form on {tag}")),
    }
}

/// Covariance envelope: `c sqrt(k1+l1+k2+l2)` on the positive face, and
/// `(k1^k2) |gamma|^|dl| / (1 - gamma^2)` (mirrored for Edge2) on edges.
pub fn cov_bound(p: &Params, pair: SitePair, c: f64) -> Result<f64> {
    let SitePair { k1, l1, k2, l2 } = pair;
    let g = p.gamma.abs();
    match classify(p, DEFAULT_TOL).tag {
        RegionTag::FacePlus => {
            if !(c > 0.0) {
                return domain("cov_bound", "face envelope needs a positive constant");
            }
            Ok(c * ((k1 + l1 + k2 + l2) as f64).sqrt())
        }
        RegionTag::Edge1 => Ok(k1.min(k2) as f64 * g.powi(l1.abs_diff(l2) as i32) / (1.0 - g * g)),
        RegionTag::Edge2 => Ok(l1.min(l2) as f64 * g.powi(k1.abs_diff(k2) as i32) / (1.0 - g * g)),
        tag => domain("cov_bound", format!("no envelope on {tag}")),
    }
}

/// Unit lag attached to a macroscopic site: `Y_q(s, t) = X[[ns] + q1][[nt] + q2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LagOffset {
    Zero,
    /// `(1, 0)`
    Row,
    /// `(0, 1)`
    Col,
}

impl LagOffset {
    pub fn components(self) -> (usize, usize) {
        match self {
            LagOffset::Zero => (0, 0),
            LagOffset::Row => (1, 0),
            LagOffset::Col => (0, 1),
        }
    }
}

/// Two macroscopic sites with their lag offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovLimitQuery {
    pub s1: f64,
    pub t1: f64,
    pub s2: f64,
    pub t2: f64,
    pub q: LagOffset,
    pub r: LagOffset,
}

/// Limit of `Cov(Y_q(s1,t1), Y_r(s2,t2)) / n^kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovLimit {
    pub value: f64,
    pub kappa: f64,
}

impl CovLimitQuery {
    /// Lattice sites of the query at scale `n`.
    pub fn sites(&self, n: usize) -> SitePair {
        let at = |x: f64| (n as f64 * x).floor() as usize;
        let (q1, q2) = self.q.components();
        let (r1, r2) = self.r.components();
        SitePair::new(at(self.s1) + q1, at(self.t1) + q2, at(self.s2) + r1, at(self.t2) + r2)
    }
}

/// Normalized covariance limit for canonical (`alpha, beta >= 0`) boundary points.
///
/// Non-canonical points are refused: their covariances carry site phases that
/// oscillate with `n`.
pub fn variance_growth_limit(p: &Params, query: &CovLimitQuery) -> Result<CovLimit> {
    let CovLimitQuery { s1, t1, s2, t2, q, r } = *query;
    if !(s1 > 0.0 && t1 > 0.0 && s2 > 0.0 && t2 > 0.0) {
        return domain("variance_growth_limit", "macroscopic coordinates must be positive");
    }
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    if a < 0.0 || b < 0.0 {
        return domain("variance_growth_limit", "parameters are not in canonical sign form");
    }
    match classify(p, DEFAULT_TOL).tag {
        RegionTag::FacePlus => {
            if s1 == s2 && t1 == t2 {
                let num = ((1.0 - a) * s1).sqrt().min(((1.0 - b) * t1).sqrt());
                let den = (std::f64::consts::PI * (a + b)).sqrt() * (1.0 - a) * (1.0 - b);
                Ok(CovLimit { value: num / den, kappa: 0.5 })
            } else if (1.0 - a) * (s1 - s2) != (1.0 - b) * (t1 - t2) {
                Ok(CovLimit { value: 0.0, kappa: 0.5 })
            } else {
                domain("variance_growth_limit", "distinct face sites on the diffusion ridge have no stated limit")
            }
        }
        RegionTag::Edge1 => {
            let value = if t1 == t2 {
                let lag = q.components().1.abs_diff(r.components().1) as i32;
                s1.min(s2) * b.powi(lag) / (1.0 - g * g)
            } else {
                0.0
            };
            Ok(CovLimit { value, kappa: 1.0 })
        }
        RegionTag::Edge2 => {
            let value = if s1 == s2 {
                let lag = q.components().0.abs_diff(r.components().0) as i32;
                t1.min(t2) * a.powi(lag) / (1.0 - g * g)
            } else {
                0.0
            };
            Ok(CovLimit { value, kappa: 1.0 })
        }
        RegionTag::Vertex => Ok(CovLimit {
            value: s1.min(s2) * t1.min(t2),
            kappa: 2.0,
        }),
        tag => domain("variance_growth_limit", format!("no covariance limit on {tag}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64, b: f64, g: f64) -> Params {
        Params::new(a, b, g).unwrap()
    }

    #[test]
    fn exact_cov_examples() {
        let face = p(0.3, 0.5, 0.2);
        assert_eq!(exact_cov(&face, SitePair::new(0, 3, 4, 4)).unwrap(), 0.0);
        assert_eq!(exact_cov(&face, SitePair::new(3, 3, 4, 0)).unwrap(), 0.0);
        assert_eq!(exact_cov(&face, SitePair::new(1, 1, 1, 1)).unwrap(), 1.0);
        let v = p(1.0, 1.0, -1.0);
        assert!((exact_cov(&v, SitePair::new(2, 3, 4, 1)).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_cov_symmetric_bitwise() {
        let q = p(0.3, 0.5, 0.2);
        let t = CovarianceTable::new(&q, 12, 12).unwrap();
        for pair in [SitePair::new(3, 9, 12, 4), SitePair::new(7, 7, 2, 11)] {
            assert_eq!(t.cov(pair).unwrap().to_bits(), t.cov(pair.swapped()).unwrap().to_bits());
        }
        assert!(t.cov(SitePair::new(13, 1, 1, 1)).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let e1 = p(1.0, 0.5, -0.5);
        assert!((cov_closed(&e1, SitePair::new(2, 1, 3, 2)).unwrap() - 1.0).abs() < 1e-12);
        let v = p(1.0, 1.0, -1.0);
        assert!((cov_closed(&v, SitePair::new(2, 3, 4, 1)).unwrap() - 2.0).abs() < 1e-12);
        assert!(cov_closed(&p(0.3, 0.5, 0.2), SitePair::new(1, 1, 1, 1)).is_err());
    }

    #[test]
    fn closed_form_matches_exact_on_edges_and_vertices() {
        let points = [
            p(1.0, 0.5, -0.5),
            p(1.0, -0.3, 0.3),
            p(-1.0, 0.4, 0.4),
            p(0.6, 1.0, -0.6),
            p(-0.2, -1.0, -0.2),
            p(1.0, 1.0, -1.0),
            p(1.0, -1.0, 1.0),
            p(-1.0, 1.0, 1.0),
            p(-1.0, -1.0, -1.0),
        ];
        for q in points {
            let t = CovarianceTable::new(&q, 15, 15).unwrap();
            for k1 in 0..=15 {
                for l1 in 0..=15 {
                    for (k2, l2) in [(15 - k1, l1), (k1, 15 - l1), (7, 9), (15, 15)] {
                        let pair = SitePair::new(k1, l1, k2, l2);
                        let a = t.cov(pair).unwrap();
                        let b = cov_closed(&q, pair).unwrap();
                        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{q:?} {pair:?}: {a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn edge_bound_example() {
        let e1 = p(1.0, 0.5, -0.5);
        let pair = SitePair::new(5, 2, 7, 6);
        let bound = cov_bound(&e1, pair, 1.0).unwrap();
        assert!((bound - 5.0 * 0.5f64.powi(4) / 0.75).abs() < 1e-15);
        assert!((bound - 0.41667).abs() < 1e-5);
        assert!(exact_cov(&e1, pair).unwrap().abs() <= bound);
        let edge_row = SitePair::new(0, 4, 3, 3);
        assert!(cov_bound(&e1, edge_row, 1.0).unwrap() >= exact_cov(&e1, edge_row).unwrap());
        assert!(cov_bound(&p(0.3, 0.5, 0.2), pair, 0.0).is_err());
        assert!(cov_bound(&p(0.1, 0.1, 0.1), pair, 1.0).is_err());
    }

    #[test]
    fn limit_examples() {
        let z = LagOffset::Zero;
        let unit = CovLimitQuery { s1: 1.0, t1: 1.0, s2: 1.0, t2: 1.0, q: z, r: z };
        let face = variance_growth_limit(&p(0.5, 0.5, 0.0), &unit).unwrap();
        assert!((face.value - 0.5f64.sqrt() / (std::f64::consts::PI.sqrt() * 0.25)).abs() < 1e-14);
        assert!((face.value - 1.595769).abs() < 1e-6);
        assert!((face.value - 1.59575).abs() < 3e-5);
        assert_eq!(face.kappa, 0.5);

        let q = CovLimitQuery { s1: 2.0, t1: 1.0, s2: 3.0, t2: 1.0, q: LagOffset::Col, r: z };
        let edge = variance_growth_limit(&p(1.0, 0.5, -0.5), &q).unwrap();
        assert!((edge.value - 2.0 * 0.5 / 0.75).abs() < 1e-14);
        assert_eq!(edge.kappa, 1.0);

        let v = variance_growth_limit(&p(1.0, 1.0, -1.0), &unit).unwrap();
        assert_eq!((v.value, v.kappa), (1.0, 2.0));
    }

    #[test]
    fn limit_domain_errors() {
        let z = LagOffset::Zero;
        let unit = CovLimitQuery { s1: 1.0, t1: 1.0, s2: 1.0, t2: 1.0, q: z, r: z };
        for q in [p(0.6, -0.2, 0.6), p(0.4, -0.4, 1.0), p(0.1, 0.1, 0.1), p(-0.3, -0.5, 0.2)] {
            assert!(variance_growth_limit(&q, &unit).is_err(), "{q:?}");
        }
        let ridge = CovLimitQuery { s1: 1.0, t1: 1.0, s2: 0.5, t2: 1.0 - 0.7 * 0.5 / 0.5, q: z, r: z };
        assert!(variance_growth_limit(&p(0.3, 0.5, 0.2), &ridge).is_err());
        let off = CovLimitQuery { s1: 1.0, t1: 1.0, s2: 0.5, t2: 0.5, q: z, r: z };
        assert_eq!(variance_growth_limit(&p(0.3, 0.5, 0.2), &off).unwrap().value, 0.0);
    }

    #[test]
    fn face_variance_approaches_limit() {
        let q = p(0.3, 0.5, 0.2);
        let z = LagOffset::Zero;
        let unit = CovLimitQuery { s1: 1.0, t1: 1.0, s2: 1.0, t2: 1.0, q: z, r: z };
        let lim = variance_growth_limit(&q, &unit).unwrap().value;
        let err = |n: usize| {
            let v = exact_cov(&q, SitePair::new(n, n, n, n)).unwrap();
            (v / (n as f64).sqrt() - lim).abs()
        };
        let (e20, e40, e80) = (err(20), err(40), err(80));
        assert!(e80 < e40 && e40 < e20, "{e20} {e40} {e80}");
    }
}
