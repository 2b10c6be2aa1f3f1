//! Small dense kernels: complex Gaussian elimination and a cyclic Jacobi
//! eigen-solver for real symmetric matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solves `a x = b` in place for a row-major `dim × dim` complex matrix by
/// elimination with partial pivoting. Returns `SingularMatrix` when a pivot
/// falls below `rel_pivot_tol` times the largest entry of `a`.
pub fn solve_complex(
    a: &[Complex64],
    b: &[Complex64],
    rel_pivot_tol: f64,
) -> Result<Vec<Complex64>> {
    let dim = b.len();
    assert_eq!(a.len(), dim * dim, "matrix must be square and match rhs");
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let threshold = rel_pivot_tol * scale;

    for col in 0..dim {
        let (piv, piv_abs) =
            (col..dim)
                .map(|r| (r, m[r * dim + col].norm()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if piv_abs <= threshold || piv_abs == 0.0 {
            return Err(Error::SingularMatrix {
                pivot: piv_abs,
                column: col,
            });
        }
        if piv != col {
            for k in 0..dim {
                m.swap(col * dim + k, piv * dim + k);
            }
            x.swap(col, piv);
        }
        let inv = 1.0 / m[col * dim + col];
        for r in col + 1..dim {
            let factor = m[r * dim + col] * inv;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..dim {
                let v = m[col * dim + k];
                m[r * dim + k] -= factor * v;
            }
            let xc = x[col];
            x[r] -= factor * xc;
        }
    }
    for col in (0..dim).rev() {
        let mut acc = x[col];
        for k in col + 1..dim {
            acc -= m[col * dim + k] * x[k];
        }
        x[col] = acc / m[col * dim + col];
    }
    Ok(x)
}

/// `y = a x` for a row-major complex matrix.
pub fn mat_vec(a: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
    let dim = x.len();
    (0..dim)
        .map(|r| {
            (0..dim).fold(Complex64::new(0.0, 0.0), |acc, k| {
                acc + a[r * dim + k] * x[k]
            })
        })
        .collect()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues (ascending) of a real symmetric row-major matrix by cyclic
/// Jacobi rotations. Off-diagonal mass is driven below `tol` times the
/// Frobenius norm.
pub fn symmetric_eigenvalues(a: &[f64], dim: usize, tol: f64) -> Vec<f64> {
    assert_eq!(a.len(), dim * dim);
    let mut m = a.to_vec();
    let frob = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                if r != c {
                    s += m[r * dim + c] * m[r * dim + c];
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&m) <= tol * frob.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = m[p * dim + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * dim + p];
                let aqq = m[q * dim + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let mkp = m[k * dim + p];
                    let mkq = m[k * dim + q];
                    m[k * dim + p] = c * mkp - s * mkq;
                    m[k * dim + q] = s * mkp + c * mkq;
                }
                for k in 0..dim {
                    let mpk = m[p * dim + k];
                    let mqk = m[q * dim + k];
                    m[p * dim + k] = c * mpk - s * mqk;
                    m[q * dim + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..dim).map(|i| m[i * dim + i]).collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    eig
}
