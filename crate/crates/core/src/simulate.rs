//! Lattice fields driven by seeded innovations.
//!
//! Innovations are generated per row from a ChaCha stream keyed by the seed
//! with the row index as stream id, so entry `(k, l)` is a function of
//! `(seed, k, l)` alone and a larger lattice extends a smaller one.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coeffs::{g_table, recursion_step};
use crate::error::{Error, Result};
use crate::params::Params;

/// Largest `n * m` accepted by the moving-average route.
pub const MA_MAX_SITES: usize = 10_000;

/// Values on `{0..=n} x {0..=m}` with zero boundary row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub n: usize,
    pub m: usize,
    x: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize, m: usize) -> Self {
        Field {
            n,
            m,
            x: vec![0.0; (n + 1) * (m + 1)],
        }
    }

    /// Builds a field from row-major values on the full `(n+1) x (m+1)` grid.
    pub fn from_values(n: usize, m: usize, x: Vec<f64>) -> Result<Self> {
        if x.len() != (n + 1) * (m + 1) {
            return Err(Error::Dimension(format!(
                "{} values for a {}x{} lattice",
                x.len(),
                n + 1,
                m + 1
            )));
        }
        let f = Field { n, m, x };
        for k in 0..=n {
            for l in 0..=m {
                let v = f.get(k, l);
                if (k == 0 || l == 0) && v != 0.0 {
                    return Err(Error::Dimension(format!("nonzero boundary value at ({k}, {l})")));
                }
            }
        }
        Ok(f)
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.x[k * (self.m + 1) + l]
    }

    #[inline]
    pub(crate) fn set(&mut self, k: usize, l: usize, v: f64) {
        self.x[k * (self.m + 1) + l] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }

    /// Writes `k,l,x` rows for every site, boundary included.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "l", "x"])?;
        for k in 0..=self.n {
            for l in 0..=self.m {
                wtr.serialize((k, l, self.get(k, l)))?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let cells = read_cells(r, "x")?;
        let n = cells.iter().map(|c| c.0).max().unwrap_or(0);
        let m = cells.iter().map(|c| c.1).max().unwrap_or(0);
        let mut f = Field::zeros(n, m);
        let mut seen = vec![false; (n + 1) * (m + 1)];
        for (k, l, v) in cells {
            if !v.is_finite() {
                return Err(Error::Dimension(format!("non-finite value at ({k}, {l})")));
            }
            if (k == 0 || l == 0) && v != 0.0 {
                return Err(Error::Dimension(format!("nonzero boundary value at ({k}, {l})")));
            }
            seen[k * (m + 1) + l] = true;
            f.set(k, l, v);
        }
        // boundary sites may be omitted, interior ones may not
        for k in 1..=n {
            for l in 1..=m {
                if !seen[k * (m + 1) + l] {
                    return Err(Error::Dimension(format!("missing site ({k}, {l})")));
                }
            }
        }
        Ok(f)
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Field::read_csv(std::fs::File::open(path)?)
    }
}

fn read_cells<R: Read>(r: R, value_col: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let want = ["k", "l", value_col];
    if headers.len() != 3 || headers.iter().zip(want).any(|(h, w)| h.trim() != w) {
        return Err(Error::Dimension(format!(
            "expected header k,l,{value_col}, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Standard normal.
    Gaussian,
    /// `+1` or `-1` with equal probability.
    Rademacher,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

/// Innovations `eps[k][l]` for `1 <= k <= n`, `1 <= l <= m`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrix {
    pub n: usize,
    pub m: usize,
    eps: Vec<f64>,
}

impl NoiseMatrix {
    pub fn zeros(n: usize, m: usize) -> Self {
        NoiseMatrix {
            n,
            m,
            eps: vec![0.0; n * m],
        }
    }

    /// Unit innovation at `(i, j)`, zero elsewhere.
    pub fn impulse(n: usize, m: usize, i: usize, j: usize) -> Self {
        let mut e = NoiseMatrix::zeros(n, m);
        e.set(i, j, 1.0);
        e
    }

    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut e = NoiseMatrix::zeros(n, m);
        for k in 1..=n {
            for l in 1..=m {
                e.set(k, l, f(k, l));
            }
        }
        e
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.eps[(k - 1) * self.m + (l - 1)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, v: f64) {
        self.eps[(k - 1) * self.m + (l - 1)] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.eps
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "l", "eps"])?;
        for k in 1..=self.n {
            for l in 1..=self.m {
                wtr.serialize((k, l, self.get(k, l)))?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let cells = read_cells(r, "eps")?;
        let n = cells.iter().map(|c| c.0).max().unwrap_or(0);
        let m = cells.iter().map(|c| c.1).max().unwrap_or(0);
        if cells.len() != n * m || cells.iter().any(|c| c.0 == 0 || c.1 == 0) {
            return Err(Error::Dimension(format!(
                "noise table must list each of the {n}x{m} interior sites once"
            )));
        }
        let mut e = NoiseMatrix::zeros(n, m);
        for (k, l, v) in cells {
            e.set(k, l, v);
        }
        Ok(e)
    }
}

/// Counter-based innovations: row `k` is stream `k` of a ChaCha generator
/// keyed by the seed, consumed left to right.
pub fn draw_noise(spec: &NoiseSpec, n: usize, m: usize) -> NoiseMatrix {
    let mut e = NoiseMatrix::zeros(n, m);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half_width = 3f64.sqrt();
    for k in 1..=n {
        rng.set_stream(k as u64);
        rng.set_word_pos(0);
        for l in 1..=m {
            let v = match spec.kind {
                NoiseKind::Gaussian => rng.sample(StandardNormal),
                NoiseKind::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                NoiseKind::Uniform => rng.random_range(-half_width..=half_width),
            };
            e.set(k, l, v);
        }
    }
    e
}

/// Runs the model recursion row by row (k outer, l inner).
pub fn simulate_recursion(p: &Params, eps: &NoiseMatrix) -> Field {
    let (n, m) = (eps.n, eps.m);
    let mut f = Field::zeros(n, m);
    for k in 1..=n {
        for l in 1..=m {
            let v = recursion_step(p, f.get(k - 1, l), f.get(k, l - 1), f.get(k - 1, l - 1)) + eps.get(k, l);
            f.set(k, l, v);
        }
    }
    f
}

/// Convolves the innovations with the coefficient table.
pub fn simulate_ma(p: &Params, eps: &NoiseMatrix) -> Result<Field> {
    let (n, m) = (eps.n, eps.m);
    if n * m > MA_MAX_SITES {
        return Err(Error::Capacity {
            what: "simulate_ma",
            requested: (n * m) as u128,
            cap: MA_MAX_SITES as u128,
        });
    }
    let mut f = Field::zeros(n, m);
    if n == 0 || m == 0 {
        return Ok(f);
    }
    let g = g_table(p, n - 1, m - 1)?;
    for k in 1..=n {
        for l in 1..=m {
            let mut s = 0.0;
            for i in 1..=k {
                let row = g.row(k - i);
                for j in 1..=l {
                    s += row[l - j] * eps.get(i, j);
                }
            }
            f.set(k, l, s);
        }
    }
    Ok(f)
}
