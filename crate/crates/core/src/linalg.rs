//! Fixed-size 3×3 and 2×2 helpers.
//!
//! The estimator and the limit laws only ever need three regressors, so the
//! algebra is written out by cofactors. Every routine evaluates its terms in a
//! fixed order, which keeps sign flips of rows and columns exact.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Determinant by cofactor expansion along the first row.
pub fn det3(m: &Mat3) -> f64 {
    let c = cofactor_row0(m);
    m[0][0] * c[0] + m[0][1] * c[1] + m[0][2] * c[2]
}

fn cofactor_row0(m: &Mat3) -> Vec3 {
    [
        m[1][1] * m[2][2] - m[1][2] * m[2][1],
        m[1][2] * m[2][0] - m[1][0] * m[2][2],
        m[1][0] * m[2][1] - m[1][1] * m[2][0],
    ]
}

/// Adjugate (transpose of the cofactor matrix): `m · adj(m) = det(m) · I`.
pub fn adjugate3(m: &Mat3) -> Mat3 {
    let mut adj = [[0.0; 3]; 3];
    for (i, row) in adj.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            // cofactor C[j][i] built from the rows/columns other than j and i
            let (r0, r1) = others(j);
            let (c0, c1) = others(i);
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            *out = if (i + j) % 2 == 0 { minor } else { -minor };
        }
    }
    adj
}

fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

pub fn matvec3(m: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    out
}

pub fn matmul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose3(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

pub fn outer3(u: &Vec3, v: &Vec3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = u[i] * v[j];
        }
    }
    out
}

pub fn scale3(m: &Mat3, s: f64) -> Mat3 {
    let mut out = *m;
    for row in out.iter_mut() {
        for x in row.iter_mut() {
            *x *= s;
        }
    }
    out
}

/// `diag(d) · m · diag(d)` for a sign vector `d`.
pub fn conjugate_diag3(m: &Mat3, d: &Vec3) -> Mat3 {
    let mut out = *m;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = d[i] * m[i][j] * d[j];
        }
    }
    out
}

pub fn frobenius3(m: &Mat3) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs3(m: &Mat3) -> f64 {
    m.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn is_symmetric3(m: &Mat3, tol: f64) -> bool {
    (0..3).all(|i| (0..3).all(|j| (m[i][j] - m[j][i]).abs() <= tol))
}

/// Eigenvalues of a symmetric 3×3 matrix in ascending order.
pub fn sym_eigenvalues3(m: &Mat3) -> Vec3 {
    let mat = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let mut e: Vec3 = mat.symmetric_eigenvalues().into();
    e.sort_by(f64::total_cmp);
    e
}

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Inverse of a 2×2 matrix, `None` when the determinant is exactly zero.
pub fn inverse2(m: &Mat2) -> Option<Mat2> {
    let d = det2(m);
    if d == 0.0 {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}
