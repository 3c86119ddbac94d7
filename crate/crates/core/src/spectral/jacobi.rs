//! Cyclic Jacobi eigen-solver for dense real symmetric matrices.

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric row-major `n x n` matrix.
///
/// Returns `(eigenvalues, eigenvectors)` where `eigenvectors[k]` belongs to
/// `eigenvalues[k]`. The order is whatever the rotations produce; callers
/// sort. Iterates until the off-diagonal Frobenius norm drops below
/// `tol * ||A||_F`.
pub fn symmetric_eigen(matrix: &[f64], n: usize, tol: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    // v is stored column-major: column k is eigenvector k.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok((vec![0.0; n], columns(&v, n)));
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off(&a) <= tol * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
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
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off(&a) > tol * scale {
        return Err(Error::Numeric(format!(
            "Jacobi did not converge in {MAX_SWEEPS} sweeps"
        )));
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    Ok((values, columns(&v, n)))
}

fn columns(v: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| (0..n).map(|i| v[i * n + k]).collect())
        .collect()
}
