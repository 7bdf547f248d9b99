use super::{LinalgError, Matrix, SINGULAR_PIVOT};

/// LU factorization with partial pivoting, `P·A = L·U`, packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self, LinalgError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot < SINGULAR_PIVOT {
                return Err(LinalgError::SingularMatrix { column: k, pivot });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "Lu::solve: rhs length");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `Aᵀ y = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "Lu::solve_transpose: rhs length");
        // Uᵀ w = rhs
        let mut w = rhs.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * w[j];
            }
            w[i] = s / self.lu[(i, i)];
        }
        // Lᵀ v = w
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= self.lu[(j, i)] * w[j];
            }
            w[i] = s;
        }
        let mut y = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            y[p] = w[k];
        }
        y
    }
}

/// Solves the square system `a·x = rhs` by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            found: rhs.len(),
        });
    }
    Ok(Lu::factor(a)?.solve(rhs))
}

/// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(a: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let mut work = a.clone();
    let mut inv = Matrix::identity(n);
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, work[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot < SINGULAR_PIVOT {
            return Err(LinalgError::SingularMatrix { column: k, pivot });
        }
        if p != k {
            swap_rows(&mut work, p, k);
            swap_rows(&mut inv, p, k);
        }
        let d = 1.0 / work[(k, k)];
        work.row_mut(k).iter_mut().for_each(|x| *x *= d);
        inv.row_mut(k).iter_mut().for_each(|x| *x *= d);
        let pivot_work = work.row(k).to_vec();
        let pivot_inv = inv.row(k).to_vec();
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = work[(i, k)];
            if f == 0.0 {
                continue;
            }
            for (x, &y) in work.row_mut(i).iter_mut().zip(&pivot_work) {
                *x -= f * y;
            }
            for (x, &y) in inv.row_mut(i).iter_mut().zip(&pivot_inv) {
                *x -= f * y;
            }
        }
    }
    Ok(inv)
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    for j in 0..cols {
        data.swap(a * cols + j, b * cols + j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::max_abs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_well_conditioned(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        // Diagonally dominant, hence comfortably non-singular.
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.random_range(-1.0..1.0);
            }
            a[(i, i)] += n as f64 * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        a
    }

    #[test]
    fn identity_system() {
        let x = solve_linear(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_system() {
        let x = solve_linear(&Matrix::diagonal(&[2.0, 4.0]), &[2.0, 8.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn random_system_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_well_conditioned(5, &mut rng);
            let rhs: Vec<f64> = (0..5).map(|_| rng.random_range(-10.0..10.0)).collect();
            let x = solve_linear(&a, &rhs).unwrap();
            let r: Vec<f64> = a.matvec(&x).iter().zip(&rhs).map(|(p, q)| p - q).collect();
            assert!(max_abs(&r) <= 1e-8 * (1.0 + max_abs(&rhs)));
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(
            solve_linear(&a, &[1.0, 2.0]),
            Err(LinalgError::SingularMatrix { .. })
        ));
        assert!(invert(&a).is_err());
    }

    #[test]
    fn transpose_solve_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_well_conditioned(6, &mut rng);
        let lu = Lu::factor(&a).unwrap();
        let rhs: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let y = lu.solve_transpose(&rhs);
        let back = a.tr_matvec(&y);
        for (p, q) in back.iter().zip(&rhs) {
            assert!((p - q).abs() < 1e-10);
        }
        let inv = invert(&a).unwrap();
        let eye = a.matmul(&inv);
        assert!(eye.sub(&Matrix::identity(6)).frobenius_norm() < 1e-10);
    }
}
