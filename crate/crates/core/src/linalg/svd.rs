//! Truncated singular value decomposition by one-sided (Hestenes) Jacobi.
//!
//! The rotations act on the columns of whichever orientation of `A` has fewer
//! columns, which implicitly diagonalizes the smaller Gram matrix (`AᵀA` or
//! `AAᵀ`) without ever forming it. The other factor is recovered as `A·v / σ`.

use serde::{Deserialize, Serialize};

use super::matrix::dot;
use super::Matrix;

const MAX_SWEEPS: usize = 80;
const ROTATION_TOL: f64 = 1e-15;

/// `A ≈ u · diag(sigma) · vt`, with `u: m×k`, `vt: k×n`.
///
/// When `k` exceeds `min(m, n)` the trailing singular values are zero and the
/// matching columns of `u` and rows of `vt` are zero vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSvd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub vt: Matrix,
    pub k: usize,
}

impl TruncatedSvd {
    /// `u · diag(sigma) · vt`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.sigma.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.vt)
    }

    /// `u · diag(sigma)`, the `m×k` projection used by the feature compressor.
    pub fn u_sigma(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.sigma.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us
    }
}

/// Rank-`k` truncated SVD of `a`.
///
/// Singular values come out in descending order. Each left singular vector is
/// signed so its largest-magnitude entry is non-negative.
///
/// # Panics
/// If `k == 0`.
pub fn truncated_svd(a: &Matrix, k: usize) -> TruncatedSvd {
    assert!(k >= 1, "truncated_svd: k must be at least 1");
    let (m, n) = (a.rows(), a.cols());
    let r = m.min(n);
    let mut out = TruncatedSvd {
        u: Matrix::zeros(m, k),
        sigma: vec![0.0; k],
        vt: Matrix::zeros(k, n),
        k,
    };
    if r == 0 {
        return out;
    }

    // Work on the orientation with q = r columns of length p.
    let transposed = n > m;
    let (p, q) = if transposed { (n, m) } else { (m, n) };
    let mut w: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            if transposed {
                a.row(j).to_vec()
            } else {
                a.column(j)
            }
        })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            let mut e = vec![0.0; q];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut norms: Vec<f64> = w.iter().map(|c| dot(c, c)).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in i + 1..q {
                let (alpha, beta) = (norms[i], norms[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&w[i], &w[j]);
                if gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wi, wj) = pair_mut(&mut w, i, j);
                rotate(wi, wj, c, s);
                let (vi, vj) = pair_mut(&mut v, i, j);
                rotate(vi, vj, c, s);
                norms[i] = dot(&w[i], &w[i]);
                norms[j] = dot(&w[j], &w[j]);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..q).collect();
    let sig: Vec<f64> = norms.iter().map(|x| x.sqrt()).collect();
    order.sort_by(|&x, &y| sig[y].total_cmp(&sig[x]).then(x.cmp(&y)));
    let sigma_max = sig[order[0]];
    let tiny = (p.max(q) as f64) * f64::EPSILON * sigma_max;

    // Columns of the "computed" factor (length p) and the rotation factor (length q).
    let mut left_p: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut right_q: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut sigmas = Vec::with_capacity(q);
    let mut deficient = Vec::new();
    for (rank, &j) in order.iter().enumerate() {
        let s = sig[j];
        if s > tiny && s > 0.0 {
            left_p.push(w[j].iter().map(|x| x / s).collect());
            sigmas.push(s);
        } else {
            left_p.push(vec![0.0; p]);
            sigmas.push(0.0);
            deficient.push(rank);
        }
        right_q.push(v[j].clone());
    }
    complete_orthonormal(&mut left_p, &deficient);

    // Map back: W = L Σ Rᵀ. If not transposed, A = W; else A = Wᵀ = R Σ Lᵀ.
    let (left, right) = if transposed {
        (right_q, left_p)
    } else {
        (left_p, right_q)
    };
    let keep = k.min(r);
    for t in 0..keep {
        let mut lu = left[t].clone();
        let mut rv = right[t].clone();
        let lead = lu
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
            .0;
        if lu[lead] < 0.0 {
            lu.iter_mut().for_each(|x| *x = -*x);
            rv.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..m {
            out.u[(i, t)] = lu[i];
        }
        out.vt.row_mut(t).copy_from_slice(&rv);
        out.sigma[t] = sigmas[t];
    }
    out
}

fn pair_mut(cols: &mut [Vec<f64>], i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(i < j);
    let (lo, hi) = cols.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills the listed (zero) columns with unit vectors orthogonal to all others.
fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let p = cols[0].len();
    let mut candidate = 0;
    for &slot in missing {
        while candidate < p {
            let mut e = vec![0.0; p];
            e[candidate] = 1.0;
            candidate += 1;
            // Two passes of Gram-Schmidt.
            for _ in 0..2 {
                for (idx, c) in cols.iter().enumerate() {
                    if idx == slot {
                        continue;
                    }
                    let proj = dot(c, &e);
                    if proj != 0.0 {
                        e.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 0.5 {
                e.iter_mut().for_each(|x| *x /= norm);
                cols[slot] = e;
                break;
            }
        }
    }
}
