use std::cmp::Ordering;

use crate::linalg::{invert, LinalgError, Matrix};

/// Entries of an entering column below this are not eligible ratio-test pivots.
pub const PIVOT_TOL: f64 = 1e-9;
/// Ratios within this (relative) distance of the minimum are ties.
const TIE_TOL: f64 = 1e-12;

/// Dense simplex tableau `T = B⁻¹A` for the columns of `a`, with the explicit
/// basis inverse, basic values and reduced costs for one cost vector.
#[derive(Debug, Clone)]
pub struct Tableau {
    a: Matrix,
    b: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    binv: Matrix,
    t: Matrix,
    x_b: Vec<f64>,
    z: Vec<f64>,
    eligible: Vec<bool>,
}

impl Tableau {
    /// Builds the tableau of `a x = b` for `basis`, priced with `cost`.
    pub fn new(a: Matrix, b: Vec<f64>, cost: Vec<f64>, basis: Vec<usize>) -> Result<Self, LinalgError> {
        let (m, n) = (a.rows(), a.cols());
        assert_eq!(b.len(), m);
        assert_eq!(cost.len(), n);
        assert_eq!(basis.len(), m);
        let mut position = vec![None; n];
        for (r, &j) in basis.iter().enumerate() {
            position[j] = Some(r);
        }
        let mut tab = Self {
            a,
            b,
            cost,
            basis,
            position,
            binv: Matrix::zeros(m, m),
            t: Matrix::zeros(m, n),
            x_b: vec![0.0; m],
            z: vec![0.0; n],
            eligible: vec![true; n],
        };
        tab.refactor()?;
        Ok(tab)
    }

    /// Recomputes `B⁻¹`, `T`, `x_B` and the reduced costs from scratch.
    pub fn refactor(&mut self) -> Result<(), LinalgError> {
        let b_mat = self.a.select_columns(&self.basis);
        self.binv = invert(&b_mat)?;
        self.t = self.binv.matmul(&self.a);
        self.x_b = self.binv.matvec(&self.b);
        // Basic columns of T are exact unit vectors by definition.
        for (r, &j) in self.basis.iter().enumerate() {
            for i in 0..self.t.rows() {
                self.t[(i, j)] = if i == r { 1.0 } else { 0.0 };
            }
        }
        self.recompute_reduced_costs();
        Ok(())
    }

    fn recompute_reduced_costs(&mut self) {
        let n = self.t.cols();
        let mut z = self.cost.clone();
        for (r, &j) in self.basis.iter().enumerate() {
            let cb = self.cost[j];
            if cb == 0.0 {
                continue;
            }
            for (zj, &tij) in z.iter_mut().zip(self.t.row(r)) {
                *zj -= cb * tij;
            }
        }
        for &j in &self.basis {
            z[j] = 0.0;
        }
        debug_assert_eq!(z.len(), n);
        self.z = z;
    }

    /// Replaces the cost vector (e.g. at the switch from phase I to phase II).
    pub fn set_cost(&mut self, cost: Vec<f64>) {
        assert_eq!(cost.len(), self.cost.len());
        self.cost = cost;
        self.recompute_reduced_costs();
    }

    pub fn set_eligible(&mut self, j: usize, eligible: bool) {
        self.eligible[j] = eligible;
    }

    pub fn m(&self) -> usize {
        self.t.rows()
    }

    pub fn n(&self) -> usize {
        self.t.cols()
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn is_basic(&self, j: usize) -> bool {
        self.position[j].is_some()
    }

    pub fn basic_values(&self) -> &[f64] {
        &self.x_b
    }

    pub fn reduced_costs(&self) -> &[f64] {
        &self.z
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.t[(row, col)]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        self.t.row(row)
    }

    /// Column `j` of `B⁻¹A`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.t.column(j)
    }

    /// Nonbasic, eligible columns with `z_j > tol`.
    pub fn improving(&self, tol: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| self.eligible[j] && self.position[j].is_none() && self.z[j] > tol)
    }

    /// Current value of the priced objective.
    pub fn objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.x_b)
            .map(|(&j, &x)| self.cost[j] * x)
            .sum()
    }

    /// Full primal vector over all columns.
    pub fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        for (&j, &v) in self.basis.iter().zip(&self.x_b) {
            x[j] = v;
        }
        x
    }

    /// Minimum-ratio step length for entering column `q`, or `None` if the
    /// column is unbounded. No tie-breaking; used for pricing.
    pub fn max_step(&self, q: usize) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.m() {
            let d = self.t[(i, q)];
            if d > PIVOT_TOL {
                let ratio = self.x_b[i].max(0.0) / d;
                best = Some(best.map_or(ratio, |b: f64| b.min(ratio)));
            }
        }
        best
    }

    /// Ratio test with lexicographic tie-breaking on the rows of `[x_B | B⁻¹]`.
    /// Returns `(row, step)` or `None` when column `q` is unbounded.
    pub fn ratio_test(&self, q: usize) -> Option<(usize, f64)> {
        let theta = self.max_step(q)?;
        let tie = TIE_TOL * theta.max(1.0);
        let mut ties: Vec<usize> = (0..self.m())
            .filter(|&i| {
                let d = self.t[(i, q)];
                d > PIVOT_TOL && self.x_b[i].max(0.0) / d - theta <= tie
            })
            .collect();
        if ties.len() > 1 {
            ties.sort_by(|&r1, &r2| self.lex_cmp(r1, r2, q));
        }
        let row = ties[0];
        Some((row, theta))
    }

    fn lex_cmp(&self, r1: usize, r2: usize, q: usize) -> Ordering {
        let (d1, d2) = (self.t[(r1, q)], self.t[(r2, q)]);
        for (a, b) in self.binv.row(r1).iter().zip(self.binv.row(r2)) {
            let (x, y) = (a / d1, b / d2);
            if (x - y).abs() > TIE_TOL * x.abs().max(y.abs()).max(1.0) {
                return x.total_cmp(&y);
            }
        }
        self.basis[r1].cmp(&self.basis[r2])
    }

    /// Exchanges the basic variable of `row` for column `q`.
    pub fn pivot(&mut self, row: usize, q: usize) {
        let (m, n) = (self.m(), self.n());
        let piv = self.t[(row, q)];
        debug_assert!(piv.abs() > 0.0);

        let inv = 1.0 / piv;
        self.t.row_mut(row).iter_mut().for_each(|x| *x *= inv);
        self.binv.row_mut(row).iter_mut().for_each(|x| *x *= inv);
        self.x_b[row] *= inv;
        self.t[(row, q)] = 1.0;

        let t_row = self.t.row(row).to_vec();
        let binv_row = self.binv.row(row).to_vec();
        let x_r = self.x_b[row];
        for i in 0..m {
            if i == row {
                continue;
            }
            let f = self.t[(i, q)];
            if f == 0.0 {
                continue;
            }
            for (x, &y) in self.t.row_mut(i).iter_mut().zip(&t_row) {
                *x -= f * y;
            }
            for (x, &y) in self.binv.row_mut(i).iter_mut().zip(&binv_row) {
                *x -= f * y;
            }
            self.x_b[i] -= f * x_r;
            self.t[(i, q)] = 0.0;
        }
        let zq = self.z[q];
        for j in 0..n {
            self.z[j] -= zq * t_row[j];
        }
        let leaving = self.basis[row];
        self.position[leaving] = None;
        self.position[q] = Some(row);
        self.basis[row] = q;
        self.z[q] = 0.0;
    }
}
