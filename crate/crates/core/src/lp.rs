//! Linear-program data types, standard-form conversion and basis quantities.
//!
//! Problems are always maximizations. An [`LpInstance`] is either in
//! inequality form (`Ax ≤ b, x ≥ 0`) or standard form (`Ax = b, x ≥ 0`).

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{LinalgError, Lu, Matrix};

/// Componentwise tolerance on `x ≥ 0` for basic solutions.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpForm {
    Inequality,
    Standard,
}

/// Hyperparameters and planted solution recorded by the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenMeta {
    pub seed: u64,
    pub index: u64,
    /// ER edge probability of the variable-constraint pattern.
    pub p: f64,
    pub mu_a: f64,
    pub sigma_a: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub beta_frac: f64,
    /// Planted primal optimum.
    pub alpha: Vec<f64>,
    /// Planted dual optimum.
    pub beta: Vec<f64>,
    /// `cᵀα`, the known optimal objective.
    pub planted_objective: f64,
    /// Empty rows/columns of the sparsity pattern that received a forced edge.
    #[serde(default)]
    pub repaired: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("inconsistent dimensions: {0}")]
    Dimensions(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("expected a {expected:?}-form instance")]
    WrongForm { expected: LpForm },
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("basis matrix is singular")]
    SingularBasis,
}

impl From<LinalgError> for LpError {
    fn from(_: LinalgError) -> Self {
        LpError::SingularBasis
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    pub id: String,
    pub form: LpForm,
    /// `m × n` constraint matrix.
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub gen_meta: Option<GenMeta>,
}

impl LpInstance {
    pub fn new(
        id: impl Into<String>,
        form: LpForm,
        a: Matrix,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self, LpError> {
        let lp = Self {
            id: id.into(),
            form,
            a,
            b,
            c,
            gen_meta: None,
        };
        lp.validate()?;
        Ok(lp)
    }

    /// Number of constraints.
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.b.len() != self.m() {
            return Err(LpError::Dimensions(format!(
                "b has length {}, A has {} rows",
                self.b.len(),
                self.m()
            )));
        }
        if self.c.len() != self.n() {
            return Err(LpError::Dimensions(format!(
                "c has length {}, A has {} columns",
                self.c.len(),
                self.n()
            )));
        }
        if !self.a.is_finite() {
            return Err(LpError::NonFinite("A"));
        }
        if !self.b.iter().all(|x| x.is_finite()) {
            return Err(LpError::NonFinite("b"));
        }
        if !self.c.iter().all(|x| x.is_finite()) {
            return Err(LpError::NonFinite("c"));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

/// Wire format: `{id, form, m, n, a (flat row-major), b, c, gen_meta}`.
#[derive(Serialize, Deserialize)]
struct LpWire {
    id: String,
    form: LpForm,
    m: usize,
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    gen_meta: Option<GenMeta>,
}

impl Serialize for LpInstance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LpWire {
            id: self.id.clone(),
            form: self.form,
            m: self.m(),
            n: self.n(),
            a: self.a.as_slice().to_vec(),
            b: self.b.clone(),
            c: self.c.clone(),
            gen_meta: self.gen_meta.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LpInstance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let w = LpWire::deserialize(d)?;
        let a = Matrix::from_vec(w.m, w.n, w.a).map_err(D::Error::custom)?;
        let lp = LpInstance {
            id: w.id,
            form: w.form,
            a,
            b: w.b,
            c: w.c,
            gen_meta: w.gen_meta,
        };
        lp.validate().map_err(D::Error::custom)?;
        Ok(lp)
    }
}

/// Appends one slack per row: `A' = [A | I]`, `c' = (c, 0)`, `b' = b`.
pub fn to_standard_form(lp: &LpInstance) -> Result<LpInstance, LpError> {
    if lp.form != LpForm::Inequality {
        return Err(LpError::WrongForm {
            expected: LpForm::Inequality,
        });
    }
    let (m, n) = (lp.m(), lp.n());
    let mut a = Matrix::zeros(m, n + m);
    for i in 0..m {
        a.row_mut(i)[..n].copy_from_slice(lp.a.row(i));
        a[(i, n + i)] = 1.0;
    }
    let mut c = lp.c.clone();
    c.resize(n + m, 0.0);
    Ok(LpInstance {
        id: lp.id.clone(),
        form: LpForm::Standard,
        a,
        b: lp.b.clone(),
        c,
        gen_meta: lp.gen_meta.clone(),
    })
}

/// An ordered set of `m` column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    indices: Vec<usize>,
}

impl Basis {
    /// Checks size, range and distinctness. Non-singularity is checked on use.
    pub fn new(indices: Vec<usize>, lp: &LpInstance) -> Result<Self, LpError> {
        if indices.len() != lp.m() {
            return Err(LpError::InvalidBasis(format!(
                "{} indices for {} constraints",
                indices.len(),
                lp.m()
            )));
        }
        let mut seen = vec![false; lp.n()];
        for &j in &indices {
            if j >= lp.n() {
                return Err(LpError::InvalidBasis(format!("column {j} out of range")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(LpError::InvalidBasis(format!("column {j} repeated")));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    fn factor(&self, lp: &LpInstance) -> Result<Lu, LpError> {
        Ok(Lu::factor(&lp.a.select_columns(&self.indices))?)
    }
}

/// `z_j = c_j − c_Bᵀ A_B⁻¹ A_j`; `z_j > 0` marks an improving column.
pub fn reduced_costs(lp: &LpInstance, basis: &Basis) -> Result<Vec<f64>, LpError> {
    if lp.form != LpForm::Standard {
        return Err(LpError::WrongForm {
            expected: LpForm::Standard,
        });
    }
    let lu = basis.factor(lp)?;
    let c_b: Vec<f64> = basis.indices.iter().map(|&j| lp.c[j]).collect();
    let y = lu.solve_transpose(&c_b);
    let ya = lp.a.tr_matvec(&y);
    Ok(lp.c.iter().zip(&ya).map(|(c, p)| c - p).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicSolution {
    pub x: Vec<f64>,
    pub feasible: bool,
}

/// The basic solution of `basis`: `x_B = A_B⁻¹ b`, zero elsewhere.
pub fn basic_solution(lp: &LpInstance, basis: &Basis) -> Result<BasicSolution, LpError> {
    if lp.form != LpForm::Standard {
        return Err(LpError::WrongForm {
            expected: LpForm::Standard,
        });
    }
    let x_b = basis.factor(lp)?.solve(&lp.b);
    let mut x = vec![0.0; lp.n()];
    for (&j, v) in basis.indices.iter().zip(x_b) {
        x[j] = v;
    }
    let feasible = x.iter().all(|&v| v >= -FEASIBILITY_TOL);
    Ok(BasicSolution { x, feasible })
}

/// The textbook example used throughout the docs:
/// `max 5x1 + 4x2 + 3x3` subject to three `≤` rows.
pub fn chvatal_example() -> LpInstance {
    let a = Matrix::from_rows(&[[2.0, 3.0, 1.0], [4.0, 1.0, 2.0], [3.0, 4.0, 2.0]])
        .expect("static matrix");
    LpInstance::new(
        "chvatal",
        LpForm::Inequality,
        a,
        vec![5.0, 11.0, 8.0],
        vec![5.0, 4.0, 3.0],
    )
    .expect("static instance")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_standard(m: usize, n: usize, seed: u64) -> LpInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..m * n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a = Matrix::from_vec(m, n, data).unwrap();
        let b = (0..m).map(|_| rng.random_range(0.0..5.0)).collect();
        let c = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        LpInstance::new("rand", LpForm::Standard, a, b, c).unwrap()
    }

    /// Gauss-Jordan reduction of the full tableau onto `basis`; returns the
    /// objective row `c − c_B · T` as an independent reduced-cost oracle.
    fn tableau_oracle(lp: &LpInstance, basis: &[usize]) -> Vec<f64> {
        let (m, n) = (lp.m(), lp.n());
        let mut t: Vec<Vec<f64>> = (0..m).map(|i| lp.a.row(i).to_vec()).collect();
        let mut obj = lp.c.clone();
        for (r, &col) in basis.iter().enumerate() {
            let p = (r..m)
                .max_by(|&x, &y| t[x][col].abs().total_cmp(&t[y][col].abs()))
                .unwrap();
            t.swap(r, p);
            let piv = t[r][col];
            t[r].iter_mut().for_each(|x| *x /= piv);
            for i in 0..m {
                if i != r {
                    let f = t[i][col];
                    let row_r = t[r].clone();
                    t[i].iter_mut().zip(&row_r).for_each(|(x, y)| *x -= f * y);
                }
            }
            let f = obj[col];
            obj.iter_mut().zip(&t[r]).for_each(|(x, y)| *x -= f * y);
        }
        assert_eq!(obj.len(), n);
        obj
    }

    #[test]
    fn single_slack() {
        let lp = LpInstance::new(
            "one",
            LpForm::Inequality,
            Matrix::from_rows(&[[3.0]]).unwrap(),
            vec![6.0],
            vec![2.0],
        )
        .unwrap();
        let s = to_standard_form(&lp).unwrap();
        assert_eq!(s.a, Matrix::from_rows(&[[3.0, 1.0]]).unwrap());
        assert_eq!(s.c, vec![2.0, 0.0]);
        assert_eq!(s.b, vec![6.0]);
        assert!(to_standard_form(&s).is_err());
    }

    #[test]
    fn example_standard_form_matches_tableau_rows() {
        let s = to_standard_form(&chvatal_example()).unwrap();
        assert_eq!(s.a.row(0), &[2.0, 3.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.a.row(1), &[4.0, 1.0, 2.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.a.row(2), &[3.0, 4.0, 2.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.b, vec![5.0, 11.0, 8.0]);
    }

    #[test]
    fn example_slack_basis_quantities() {
        let s = to_standard_form(&chvatal_example()).unwrap();
        let basis = Basis::new(vec![3, 4, 5], &s).unwrap();
        let z = reduced_costs(&s, &basis).unwrap();
        assert_eq!(z, vec![5.0, 4.0, 3.0, 0.0, 0.0, 0.0]);
        let sol = basic_solution(&s, &basis).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0, 0.0, 5.0, 11.0, 8.0]);
        assert!(sol.feasible);
    }

    #[test]
    fn identity_basis_with_zero_basic_costs() {
        let lp = LpInstance::new(
            "id",
            LpForm::Standard,
            Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]]).unwrap(),
            vec![3.0, 4.0],
            vec![0.0, 0.0, 7.0],
        )
        .unwrap();
        let basis = Basis::new(vec![0, 1], &lp).unwrap();
        assert_eq!(reduced_costs(&lp, &basis).unwrap(), vec![0.0, 0.0, 7.0]);
        assert_eq!(basic_solution(&lp, &basis).unwrap().x, vec![3.0, 4.0, 0.0]);
    }

    #[test]
    fn random_bases_match_tableau_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..30 {
            let lp = random_standard(4, 9, seed);
            let mut cols: Vec<usize> = (0..9).collect();
            for i in (1..cols.len()).rev() {
                cols.swap(i, rng.random_range(0..=i));
            }
            let basis = Basis::new(cols[..4].to_vec(), &lp).unwrap();
            let z = reduced_costs(&lp, &basis).unwrap();
            let oracle = tableau_oracle(&lp, basis.indices());
            for (a, b) in z.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
            for &j in basis.indices() {
                assert!(z[j].abs() < 1e-9);
            }
            let sol = basic_solution(&lp, &basis).unwrap();
            let r = lp.a.matvec(&sol.x);
            for (p, q) in r.iter().zip(&lp.b) {
                assert!((p - q).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn scaling_objective_scales_reduced_costs() {
        let lp = random_standard(3, 7, 4);
        let basis = Basis::new(vec![0, 2, 5], &lp).unwrap();
        let z = reduced_costs(&lp, &basis).unwrap();
        let mut scaled = lp.clone();
        scaled.c.iter_mut().for_each(|c| *c *= 2.5);
        let z2 = reduced_costs(&scaled, &basis).unwrap();
        for (a, b) in z.iter().zip(&z2) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_bases_are_rejected() {
        let lp = random_standard(2, 4, 1);
        assert!(Basis::new(vec![0], &lp).is_err());
        assert!(Basis::new(vec![0, 0], &lp).is_err());
        assert!(Basis::new(vec![0, 9], &lp).is_err());
        let dup = LpInstance::new(
            "dup",
            LpForm::Standard,
            Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap(),
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let b = Basis::new(vec![0, 1], &dup).unwrap();
        assert_eq!(reduced_costs(&dup, &b), Err(LpError::SingularBasis));
    }

    #[test]
    fn json_roundtrip_uses_flat_row_major_a() {
        let lp = chvatal_example();
        let s = serde_json::to_string(&lp).unwrap();
        assert!(s.contains("\"a\":[2.0,3.0,1.0,4.0,1.0,2.0,3.0,4.0,2.0]"));
        assert!(s.contains("\"form\":\"inequality\""));
        let back: LpInstance = serde_json::from_str(&s).unwrap();
        assert_eq!(back, lp);
    }
}
