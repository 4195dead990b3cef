//! Small dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::linalg::{Schur, SVD};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{FloquetError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Column-major matrix view of a flat state slice.
pub fn from_slice(rows: usize, cols: usize, data: &[C64]) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, &data[..rows * cols])
}

pub fn write_slice(m: &CMatrix, out: &mut [C64]) {
    out[..m.len()].copy_from_slice(m.as_slice());
}

/// Matrix inverse; closed form for 1x1 and 2x2, LU otherwise.
pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    match n {
        1 => {
            let a = m[(0, 0)];
            if a.norm() <= f64::EPSILON * scale {
                return Err(FloquetError::Singular("1x1 matrix is zero".into()));
            }
            Ok(CMatrix::from_element(1, 1, a.inv()))
        }
        2 => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let det = a * d - b * c;
            if det.norm() <= 1e3 * f64::EPSILON * scale * scale {
                return Err(FloquetError::Singular(format!("2x2 determinant {det}")));
            }
            let inv = det.inv();
            Ok(CMatrix::from_row_slice(2, 2, &[d * inv, -b * inv, -c * inv, a * inv]))
        }
        _ => m
            .clone()
            .try_inverse()
            .ok_or_else(|| FloquetError::Singular(format!("{n}x{n} matrix not invertible"))),
    }
}

pub fn determinant(m: &CMatrix) -> C64 {
    if m.nrows() == 2 {
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    } else {
        m.clone().determinant()
    }
}

/// 2-norm condition number via singular values.
pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenvalues and right eigenvectors (unit-norm columns) of a general complex
/// matrix. Eigenvectors come from back-substitution on the complex Schur form;
/// near-equal diagonal entries are perturbed to `smin` as in LAPACK `ztrevc`, so
/// a defective matrix yields a nearly singular eigenvector matrix instead of NaNs.
pub fn eigen(m: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    let n = m.nrows();
    if n == 0 || n != m.ncols() {
        return Err(FloquetError::InvalidArgument("eigen: matrix must be square and non-empty".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(FloquetError::InvalidArgument("eigen: non-finite matrix entries".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| FloquetError::Singular("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();

    let norm = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let smin = (f64::EPSILON * norm).max(f64::MIN_POSITIVE);
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for i in (j + 1)..=k {
                acc += t[(j, i)] * y[(i, k)];
            }
            let mut denom = t[(j, j)] - t[(k, k)];
            if denom.norm() < smin {
                denom = C64::new(smin, 0.0);
            }
            y[(j, k)] = -acc / denom;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= C64::new(nrm, 0.0);
        }
    }
    Ok((values, vectors))
}

/// Frobenius norm of `a - b` relative to the Frobenius norm of `b` (absolute when `b` is zero).
pub fn relative_difference(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Principal-branch complex logarithm with arg in (-pi, pi].
pub fn principal_log(z: C64) -> C64 {
    let mut arg = z.arg();
    if arg <= -std::f64::consts::PI {
        arg += 2.0 * std::f64::consts::PI;
    }
    C64::new(z.norm().ln(), arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigen_reconstructs_general_matrix() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[c(1.0, 0.2), c(2.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.5, 0.0), c(3.0, 0.0), c(0.0, 0.0), c(1.0, -1.0), c(2.0, 0.0)],
        );
        let (vals, vecs) = eigen(&m).unwrap();
        for (k, lambda) in vals.iter().enumerate() {
            let v = vecs.column(k).into_owned();
            let r = &m * &v - v.map(|z| z * lambda);
            assert!(r.norm() < 1e-12, "residual {}", r.norm());
        }
    }

    #[test]
    fn eigen_of_scalar_identity_is_orthonormal() {
        let m = identity(2) * c(0.25, 0.0);
        let (vals, vecs) = eigen(&m).unwrap();
        assert!(vals.iter().all(|v| (v - c(0.25, 0.0)).norm() < 1e-15));
        assert!(condition_number(&vecs) < 1.0 + 1e-12);
    }

    #[test]
    fn jordan_block_gives_huge_condition_number() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let (_, vecs) = eigen(&m).unwrap();
        assert!(condition_number(&vecs) > 1e8);
    }

    #[test]
    fn two_by_two_inverse() {
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0, 1.0), c(0.5, 0.0), c(-1.0, 0.0), c(3.0, -2.0)]);
        let inv = inverse(&m).unwrap();
        assert!(relative_difference(&(&m * &inv), &identity(2)) < 1e-15);
        let sing = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(inverse(&sing).is_err());
    }

    #[test]
    fn principal_log_branch() {
        let l = principal_log(c(-1.0, 0.0));
        assert!((l.im - std::f64::consts::PI).abs() < 1e-15);
        let l = principal_log(c(-1.0, -0.0));
        assert!((l.im - std::f64::consts::PI).abs() < 1e-15);
    }
}
