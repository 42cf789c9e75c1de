//! Dense linear-algebra helpers: a cyclic Jacobi eigensolver for symmetric
//! matrices and a handful of small utilities shared across the crate.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tolerated |A - Aᵀ| entry for inputs of [`symmetric_eigen`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Off-diagonal Frobenius norm at which a Jacobi sweep sequence stops,
/// relative to `max(1, ‖A‖_F)`.
pub const JACOBI_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `M = V diag(λ) Vᵀ` of a symmetric matrix.
///
/// Eigenvalues are sorted in non-increasing order and every eigenvector has
/// its first entry of magnitude above `1e-10` positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Columns are eigenvectors.
    pub eigenvectors: Array2<f64>,
    pub eigenvalues: Array1<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The `k` leading eigenvectors as an `n × k` matrix.
    pub fn leading(&self, k: usize) -> Array2<f64> {
        self.eigenvectors.slice(ndarray::s![.., ..k]).to_owned()
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.eigenvectors * &self.eigenvalues.view().insert_axis(Axis(0));
        scaled.dot(&self.eigenvectors.t())
    }
}

pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Largest absolute difference between `m` and its transpose.
pub fn max_asymmetry(m: ArrayView2<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen(m: &Array2<f64>) -> Result<Spectrum> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let asym = max_asymmetry(m.view());
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }

    // Row-major working copy of the symmetrized input.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m[[i, j]] + m[[j, i]]);
        }
    }
    // Rows of `vt` are eigenvectors, so each rotation touches two contiguous rows.
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let mut row_p = vec![0.0; n];
    let mut row_q = vec![0.0; n];
    let mut converged = n <= 1;
    for sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off = off_diagonal_norm(&a, n);
        if off < JACOBI_TOL * scale {
            converged = true;
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[p * n + k];
                    let akq = a[q * n + k];
                    row_p[k] = c * akp - s * akq;
                    row_q[k] = s * akp + c * akq;
                }
                row_p[p] = app - t * apq;
                row_q[q] = aqq + t * apq;
                row_p[q] = 0.0;
                row_q[p] = 0.0;
                for k in 0..n {
                    a[p * n + k] = row_p[k];
                    a[q * n + k] = row_q[k];
                    a[k * n + p] = row_p[k];
                    a[k * n + q] = row_q[k];
                }

                let (head, tail) = vt.split_at_mut(q * n);
                let vp = &mut head[p * n..(p + 1) * n];
                let vq = &mut tail[..n];
                for k in 0..n {
                    let x = vp[k];
                    let y = vq[k];
                    vp[k] = c * x - s * y;
                    vq[k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged && off_diagonal_norm(&a, n) >= JACOBI_TOL * scale {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));

    let mut eigenvalues = Array1::zeros(n);
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &idx) in order.iter().enumerate() {
        eigenvalues[col] = a[idx * n + idx];
        let v = &vt[idx * n..(idx + 1) * n];
        let flip = v
            .iter()
            .find(|x| x.abs() > 1e-10)
            .is_some_and(|&x| x < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[[i, col]] = sign * v[i];
        }
    }
    Ok(Spectrum {
        eigenvectors,
        eigenvalues,
    })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[i * n + j] * a[i * n + j];
            }
        }
    }
    acc.sqrt()
}

/// Random `n × k` matrix with orthonormal columns (Gram-Schmidt on a
/// Gaussian draw).
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Array2<f64> {
    assert!(k <= n, "cannot draw {k} orthonormal columns in dimension {n}");
    loop {
        let g = Array2::from_shape_fn((n, k), |_| rng.sample::<f64, _>(StandardNormal));
        if let Some(q) = gram_schmidt(&g) {
            return q;
        }
    }
}

/// Orthonormalizes the columns of `m`; `None` if they are numerically
/// dependent.
pub fn gram_schmidt(m: &Array2<f64>) -> Option<Array2<f64>> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        // Two passes keep the basis orthogonal to machine precision.
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-proj, &qi);
            }
        }
        let nrm = q.column(j).dot(&q.column(j)).sqrt();
        if nrm < 1e-10 {
            return None;
        }
        q.column_mut(j).mapv_inplace(|x| x / nrm);
    }
    Some(q)
}
