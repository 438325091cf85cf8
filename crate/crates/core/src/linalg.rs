//! Small dense linear algebra for chart dimensions (n ≤ 8).
//!
//! Matrices are row-major `&[f64]` slices of length `n * n`. The routines are
//! deterministic: fixed sweep and pivot order, no randomized choices.

use alloc::vec;
use alloc::vec::Vec;

use crate::float;

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` where `eigenvectors[k]` is the unit
/// eigenvector for `eigenvalues[k]`. Pairs are sorted by increasing absolute
/// eigenvalue; each vector is sign-normalized so its largest-magnitude entry
/// is positive.
pub fn sym_eigen(n: usize, matrix: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(matrix.len(), n * n, "matrix size mismatch");
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale: f64 = (0..n)
        .map(|i| float::abs(a[i * n + i]))
        .fold(0.0, f64::max)
        .max(off_diagonal_norm(n, &a));

    if scale > 0.0 {
        for _sweep in 0..64 {
            if off_diagonal_norm(n, &a) <= 1.0e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if float::abs(apq) <= 1.0e-18 * scale {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + float::hypot(theta, 1.0))
                    } else {
                        1.0 / (theta - float::hypot(theta, 1.0))
                    };
                    let c = 1.0 / float::hypot(t, 1.0);
                    let s = t * c;

                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        float::abs(a[i * n + i])
            .partial_cmp(&float::abs(a[j * n + j]))
            .expect("eigenvalues are finite")
            .then(i.cmp(&j))
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &k in &order {
        values.push(a[k * n + k]);
        let mut col: Vec<f64> = (0..n).map(|i| v[i * n + k]).collect();
        let mut lead = 0;
        for i in 1..n {
            if float::abs(col[i]) > float::abs(col[lead]) {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            for c in col.iter_mut() {
                *c = -*c;
            }
        }
        vectors.push(col);
    }
    (values, vectors)
}

fn off_diagonal_norm(n: usize, a: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    float::sqrt(sum)
}

/// The matrix handed to [`lu_factor`] or [`invert`] has no usable pivot.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("matrix is singular to working precision")]
pub struct SingularMatrix;

/// LU factorization with partial pivoting, reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

pub fn lu_factor(n: usize, matrix: &[f64]) -> Result<LuFactors, SingularMatrix> {
    assert_eq!(matrix.len(), n * n, "matrix size mismatch");
    let mut lu = matrix.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if float::abs(lu[row * n + col]) > float::abs(lu[pivot * n + col]) {
                pivot = row;
            }
        }
        if float::abs(lu[pivot * n + col]) == 0.0 {
            return Err(SingularMatrix);
        }
        if pivot != col {
            for k in 0..n {
                lu.swap(col * n + k, pivot * n + k);
            }
            perm.swap(col, pivot);
        }
        let diag = lu[col * n + col];
        for row in (col + 1)..n {
            let factor = lu[row * n + col] / diag;
            lu[row * n + col] = factor;
            for k in (col + 1)..n {
                lu[row * n + k] -= factor * lu[col * n + k];
            }
        }
    }
    Ok(LuFactors { n, lu, perm })
}

impl LuFactors {
    /// Solves `A x = b`, returning `x`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for k in 0..i {
                x[i] -= self.lu[i * n + k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.lu[i * n + k] * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

/// Matrix inverse through Gauss elimination on identity columns.
pub fn invert(n: usize, matrix: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
    let factors = lu_factor(n, matrix)?;
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let x = factors.solve(&e);
        e[col] = 0.0;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigen_diagonal_matrix() {
        let a = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let (values, vectors) = sym_eigen(3, &a);
        assert_abs_diff_eq!(values[0], 0.0);
        assert_abs_diff_eq!(values[1], 1.0);
        assert_abs_diff_eq!(values[2], 2.0);
        assert_abs_diff_eq!(vectors[0][0], 1.0);
        assert_abs_diff_eq!(vectors[0][1], 0.0);
        assert_abs_diff_eq!(vectors[0][2], 0.0);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = [2.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.5, -1.0, 1.5];
        let (values, vectors) = sym_eigen(3, &a);
        for i in 0..3 {
            for j in 0..3 {
                let mut sum = 0.0;
                for k in 0..3 {
                    sum += values[k] * vectors[k][i] * vectors[k][j];
                }
                assert_abs_diff_eq!(sum, a[i * 3 + j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let a = [4.0, 1.0, 1.0, 1.0, 2.0, 0.0, 1.0, 0.0, 3.0];
        let (_, vectors) = sym_eigen(3, &a);
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| vectors[i][k] * vectors[j][k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lu_solves_system() {
        let a = [2.0, 1.0, -1.0, -3.0, -1.0, 2.0, -2.0, 1.0, 2.0];
        let factors = lu_factor(3, &a).unwrap();
        let x = factors.solve(&[8.0, -11.0, -3.0]);
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[2], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn invert_roundtrip() {
        let a = [1.0, 0.0, 0.5, 0.0, 2.0, 0.0, 0.5, 0.0, 1.25];
        let inv = invert(3, &a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut sum = 0.0;
                for k in 0..3 {
                    sum += a[i * 3 + k] * inv[k * 3 + j];
                }
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(sum, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert_eq!(lu_factor(2, &a).unwrap_err(), SingularMatrix);
    }
}
