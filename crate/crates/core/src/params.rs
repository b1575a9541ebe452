//! Parameter triples, their position relative to the stability tetrahedron,
//! and the three lattice sign flips that reduce every boundary point to one
//! with nonnegative `alpha` and `beta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::{Field, NoiseMatrix};

/// Default tolerance for boundary membership.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Coefficients of the lag-(1,0), lag-(0,1) and lag-(1,1) neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Params {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Params { alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("non-finite parameters {:?}", self)))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    Stable,
    FacePlus,
    FaceMinus,
    Edge1,
    Edge2,
    Edge3,
    Vertex,
    Outside,
}

impl RegionTag {
    pub fn name(self) -> &'static str {
        match self {
            RegionTag::Stable => "Stable",
            RegionTag::FacePlus => "FacePlus",
            RegionTag::FaceMinus => "FaceMinus",
            RegionTag::Edge1 => "Edge1",
            RegionTag::Edge2 => "Edge2",
            RegionTag::Edge3 => "Edge3",
            RegionTag::Vertex => "Vertex",
            RegionTag::Outside => "Outside",
        }
    }
}

impl std::fmt::Display for RegionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionClass {
    pub tag: RegionTag,
    pub tolerance: f64,
}

pub const VERTICES: [[f64; 3]; 4] = [
    [1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0],
    [-1.0, 1.0, 1.0],
    [-1.0, -1.0, -1.0],
];

fn near(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol
}

/// Classifies `p` against the closed tetrahedron and its boundary strata.
///
/// Tests run vertex, edges, faces, interior in that order, so the tags are
/// mutually exclusive for a fixed tolerance.
pub fn classify(p: &Params, tol: f64) -> RegionClass {
    let tol = tol.max(0.0);
    RegionClass {
        tag: classify_tag(p, tol),
        tolerance: tol,
    }
}

fn classify_tag(p: &Params, tol: f64) -> RegionTag {
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    if !(a.is_finite() && b.is_finite() && g.is_finite()) {
        return RegionTag::Outside;
    }
    if VERTICES
        .iter()
        .any(|v| near(a, v[0], tol) && near(b, v[1], tol) && near(g, v[2], tol))
    {
        return RegionTag::Vertex;
    }
    let open = |x: f64| x.abs() < 1.0 - tol;
    // E1: (1, b, -b) or (-1, b, b)
    if open(b) && ((near(a, 1.0, tol) && near(g, -b, tol)) || (near(a, -1.0, tol) && near(g, b, tol))) {
        return RegionTag::Edge1;
    }
    // E2: (a, 1, -a) or (a, -1, a)
    if open(a) && ((near(b, 1.0, tol) && near(g, -a, tol)) || (near(b, -1.0, tol) && near(g, a, tol))) {
        return RegionTag::Edge2;
    }
    // E3: (a, -a, 1) or (a, a, -1)
    if open(a) && ((near(g, 1.0, tol) && near(b, -a, tol)) || (near(g, -1.0, tol) && near(b, a, tol))) {
        return RegionTag::Edge3;
    }
    if !(open(a) && open(b) && open(g)) {
        return RegionTag::Outside;
    }
    let (aa, ab, ag) = (a.abs(), b.abs(), g.abs());
    let product = a * b * g;
    if product >= 0.0 {
        if near(aa + ab + ag, 1.0, tol) {
            return RegionTag::FacePlus;
        }
    } else {
        if near(aa + ab - ag, 1.0, tol) {
            return RegionTag::FacePlus;
        }
        if near(aa - ab + ag, 1.0, tol) || near(-aa + ab + ag, 1.0, tol) {
            return RegionTag::FaceMinus;
        }
    }
    let slack = 1.0 - tol;
    if a - b - g < slack && -a + b - g < slack && -a - b + g < slack && a + b + g < slack {
        RegionTag::Stable
    } else {
        RegionTag::Outside
    }
}

/// One of the three lattice sign flips, or the identity.
///
/// Multiplying the field by the site phase maps parameters `(a, b, g)` to
/// `(d1·a, d2·b, d3·g)` where `(d1, d2, d3)` are the lag signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignFlip {
    Identity,
    /// Phase `(-1)^(k+l)`.
    Checkerboard,
    /// Phase `(-1)^k`.
    RowFlip,
    /// Phase `(-1)^l`.
    ColFlip,
}

impl SignFlip {
    pub const ALL: [SignFlip; 4] = [
        SignFlip::Identity,
        SignFlip::Checkerboard,
        SignFlip::RowFlip,
        SignFlip::ColFlip,
    ];

    /// Signs `(d1, d2, d3)` attached to the lag-(1,0), lag-(0,1), lag-(1,1) axes.
    pub fn signs(self) -> [f64; 3] {
        match self {
            SignFlip::Identity => [1.0, 1.0, 1.0],
            SignFlip::Checkerboard => [-1.0, -1.0, 1.0],
            SignFlip::RowFlip => [-1.0, 1.0, -1.0],
            SignFlip::ColFlip => [1.0, -1.0, -1.0],
        }
    }

    pub fn site_phase(self, k: usize, l: usize) -> f64 {
        let odd = match self {
            SignFlip::Identity => false,
            SignFlip::Checkerboard => (k + l) % 2 == 1,
            SignFlip::RowFlip => k % 2 == 1,
            SignFlip::ColFlip => l % 2 == 1,
        };
        if odd {
            -1.0
        } else {
            1.0
        }
    }

    pub fn apply_params(self, p: &Params) -> Params {
        let d = self.signs();
        Params {
            alpha: d[0] * p.alpha,
            beta: d[1] * p.beta,
            gamma: d[2] * p.gamma,
        }
    }
}

/// Maps `p` to the representative with `alpha >= 0` and `beta >= 0`.
///
/// Returns the canonical parameters and the flip that carries them back to `p`
/// (every flip is an involution). When a coordinate is zero the remaining
/// freedom is used to make `gamma` nonnegative as well.
pub fn canonicalize(p: &Params) -> (Params, SignFlip) {
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    let neg = |x: f64| x.is_sign_negative() && x != 0.0;
    let flip = match (neg(a), neg(b)) {
        (false, false) => {
            if neg(g) && a == 0.0 {
                SignFlip::RowFlip
            } else if neg(g) && b == 0.0 {
                SignFlip::ColFlip
            } else {
                SignFlip::Identity
            }
        }
        (true, true) => SignFlip::Checkerboard,
        (true, false) => {
            if b == 0.0 && !neg(g) && g != 0.0 {
                // (-a, 0, g): RowFlip would make gamma negative, Checkerboard keeps it.
                SignFlip::Checkerboard
            } else {
                SignFlip::RowFlip
            }
        }
        (false, true) => {
            if a == 0.0 && !neg(g) && g != 0.0 {
                SignFlip::Checkerboard
            } else {
                SignFlip::ColFlip
            }
        }
    };
    (flip.apply_params(p), flip)
}

/// Multiplies entry `(k, l)` by the site phase of `flip`.
pub fn apply_flip(field: &Field, flip: SignFlip) -> Field {
    let mut out = field.clone();
    for k in 0..=field.n {
        for l in 0..=field.m {
            let v = out.get(k, l);
            out.set(k, l, flip.site_phase(k, l) * v);
        }
    }
    out
}

/// Phase-multiplied innovations: the noise that drives the flipped field.
pub fn flip_noise(eps: &NoiseMatrix, flip: SignFlip) -> NoiseMatrix {
    let mut out = eps.clone();
    for k in 1..=eps.n {
        for l in 1..=eps.m {
            out.set(k, l, flip.site_phase(k, l) * eps.get(k, l));
        }
    }
    out
}
