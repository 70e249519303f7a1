//! Dense symmetric linear algebra: cyclic Jacobi eigendecomposition and a
//! Cholesky solver for positive definite systems. The matrices handled here
//! are small (at most `T x T` condition blocks), so simple dense routines are
//! adequate and keep the numerics fully deterministic.

use ndarray::{Array1, Array2};

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
/// Columns of `vectors` are the corresponding orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Converges to machine precision for any symmetric input; the off-diagonal
/// Frobenius mass shrinks quadratically per sweep.
pub fn sym_eigen(a: &Array2<f64>) -> SymEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        return sorted(m.diag().to_vec(), v);
    }

    let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * fro.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                // Rotation angle from the standard stable formulas.
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    sorted(m.diag().to_vec(), v)
}

fn sorted(values: Vec<f64>, vectors: Array2<f64>) -> SymEigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vals.push(values[src]);
        let mut col = vectors.column(src).to_owned();
        // Canonical sign: largest-magnitude entry positive.
        let mut pivot = 0usize;
        for k in 0..n {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        if col[pivot] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        vecs.column_mut(dst).assign(&col);
    }
    SymEigen {
        values: vals,
        vectors: vecs,
    }
}

/// Solves `a x = b` for symmetric positive definite `a` via Cholesky.
/// Returns `None` when a non-positive pivot is met.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for j in 0..i {
            sum -= l[i * n + j] * y[j];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for j in (i + 1)..n {
            sum -= l[j * n + i] * x[j];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(Array1::from(x))
}

/// Solves a symmetric system through the eigendecomposition, flooring small
/// eigenvalues out of the inverse: directions with `lambda <= floor_rel *
/// spectral_radius` (or non-positive) are dropped. Returns the solution and
/// whether any direction was dropped.
pub fn solve_sym_floored(a: &Array2<f64>, b: &Array1<f64>, floor_rel: f64) -> (Array1<f64>, bool) {
    let eig = sym_eigen(a);
    let radius = eig
        .values
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let floor = floor_rel * radius;
    let n = b.len();
    let mut x = Array1::<f64>::zeros(n);
    let mut dropped = false;
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam > floor && lam > 0.0 {
            let u = eig.vectors.column(k);
            let proj = u.dot(b);
            for r in 0..n {
                x[r] += u[r] * proj / lam;
            }
        } else {
            dropped = true;
        }
    }
    (x, dropped)
}
