//! Random LP instances with a planted optimal primal-dual pair.
//!
//! The sparsity pattern of `A` is an Erdős–Rényi bipartite graph between
//! constraints and variables. A primal point `α ≥ 0` and dual point `β ≥ 0`
//! are drawn with complementary supports, and `b`, `c` are chosen so that
//! both are feasible and complementary slackness holds:
//!
//! ```text
//! b = Aα + s,   s_i > 0 only where β_i = 0
//! c = Aᵀβ − t,  t_j > 0 only where α_j = 0
//! ```
//!
//! so `α` is optimal for `max cᵀx, Ax ≤ b, x ≥ 0` with value `cᵀα = bᵀβ`.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::lp::{GenMeta, LpForm, LpInstance};
use crate::rng::child_rng;
use crate::simplex::{run_portfolio, SimplexError, SimplexOptions, SolveRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpGenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// Generator hyperparameters. Per-instance values are drawn from these ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpGenConfig {
    pub seed: u64,
    pub m_range: [usize; 2],
    pub n_range: [usize; 2],
    pub p_range: [f64; 2],
    pub mu_a_mean: f64,
    pub mu_a_std: f64,
    pub sigma_a_range: [f64; 2],
    pub gamma_range: [f64; 2],
    pub lambda_mean: f64,
    pub lambda_std: f64,
    /// Shape `a` of the symmetric `Beta(a, a)` fractional part.
    pub beta_frac: f64,
}

impl Default for LpGenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            m_range: [120, 200],
            n_range: [50, 100],
            p_range: [0.2, 0.8],
            mu_a_mean: 0.0,
            mu_a_std: 1.0,
            sigma_a_range: [1.0, 10.0],
            gamma_range: [0.2, 0.8],
            lambda_mean: 0.0,
            lambda_std: 1.0,
            beta_frac: 0.5,
        }
    }
}

impl LpGenConfig {
    pub fn desk() -> Self {
        Self {
            m_range: [40, 120],
            n_range: [20, 60],
            ..Self::default()
        }
    }

    pub fn smoke() -> Self {
        Self {
            m_range: [8, 16],
            n_range: [4, 10],
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), LpGenError> {
        let bad = |msg: &str| Err(LpGenError::InvalidConfig(msg.to_string()));
        if self.m_range[0] == 0 || self.m_range[0] > self.m_range[1] {
            return bad("m_range must be a non-empty range of positive sizes");
        }
        if self.n_range[0] == 0 || self.n_range[0] > self.n_range[1] {
            return bad("n_range must be a non-empty range of positive sizes");
        }
        if !(self.p_range[0] > 0.0 && self.p_range[0] <= self.p_range[1] && self.p_range[1] <= 1.0) {
            return bad("p_range must lie in (0, 1]");
        }
        if !(self.sigma_a_range[0] > 0.0 && self.sigma_a_range[0] <= self.sigma_a_range[1]) {
            return bad("sigma_a_range must be positive and non-empty");
        }
        if !(self.gamma_range[0] > 0.0 && self.gamma_range[0] <= self.gamma_range[1] && self.gamma_range[1] < 1.0) {
            return bad("gamma_range must lie in (0, 1)");
        }
        if !(self.mu_a_std >= 0.0 && self.lambda_std >= 0.0) {
            return bad("standard deviations must be non-negative");
        }
        if !(self.beta_frac > 0.0) {
            return bad("beta_frac must be positive");
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        mean
    } else {
        Normal::new(mean, std).expect("validated std").sample(rng)
    }
}

/// Right-hand side and objective that make `(alpha, beta)` an optimal pair:
/// `b = Aα + slack`, `c = Aᵀβ − surplus`.
pub fn plant(a: &Matrix, alpha: &[f64], beta: &[f64], slack: &[f64], surplus: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let b = a.matvec(alpha).iter().zip(slack).map(|(x, s)| x + s).collect();
    let c = a.tr_matvec(beta).iter().zip(surplus).map(|(x, t)| x - t).collect();
    (b, c)
}

/// Sparsity pattern of an ER bipartite graph with edge probability `p`.
/// Empty rows, then empty columns, receive one uniformly placed entry.
/// Returns the pattern and the number of repairs.
pub fn er_pattern<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize, p: f64) -> (Vec<bool>, usize) {
    let mut pat: Vec<bool> = (0..m * n).map(|_| rng.random_bool(p)).collect();
    let mut repaired = 0;
    for i in 0..m {
        if !pat[i * n..(i + 1) * n].iter().any(|&x| x) {
            let j = rng.random_range(0..n);
            pat[i * n + j] = true;
            repaired += 1;
        }
    }
    for j in 0..n {
        if !(0..m).any(|i| pat[i * n + j]) {
            let i = rng.random_range(0..m);
            pat[i * n + j] = true;
            repaired += 1;
        }
    }
    (pat, repaired)
}

/// Instance `index` of the stream defined by `cfg.seed`.
pub fn generate_lp(cfg: &LpGenConfig, index: u64) -> Result<LpInstance, LpGenError> {
    let mut rng = child_rng(cfg.seed, index);
    let id = format!("lp-{}-{index:06}", cfg.seed);
    let mut lp = generate_lp_with(cfg, &mut rng, id)?;
    if let Some(meta) = lp.gen_meta.as_mut() {
        meta.seed = cfg.seed;
        meta.index = index;
    }
    Ok(lp)
}

/// Draws one instance from `rng`.
pub fn generate_lp_with<R: Rng + ?Sized>(cfg: &LpGenConfig, rng: &mut R, id: String) -> Result<LpInstance, LpGenError> {
    cfg.validate()?;
    let m = rng.random_range(cfg.m_range[0]..=cfg.m_range[1]);
    let n = rng.random_range(cfg.n_range[0]..=cfg.n_range[1]);
    let p = uniform(rng, cfg.p_range);
    let mu_a = normal(rng, cfg.mu_a_mean, cfg.mu_a_std);
    let sigma_a = uniform(rng, cfg.sigma_a_range);
    let gamma = uniform(rng, cfg.gamma_range);
    let lambda = normal(rng, cfg.lambda_mean, cfg.lambda_std);

    let (pattern, repaired) = er_pattern(rng, m, n, p);
    let entry = Normal::new(mu_a, sigma_a).expect("validated sigma");
    let mut a = Matrix::zeros(m, n);
    for (v, &on) in a.as_mut_slice().iter_mut().zip(&pattern) {
        if on {
            *v = entry.sample(rng);
        }
    }

    let frac = Beta::new(cfg.beta_frac, cfg.beta_frac).expect("validated beta_frac");
    let scale = lambda.exp();
    let k = ((gamma * n as f64).round() as usize).clamp(1, n.min(m));
    let mut alpha = vec![0.0; n];
    let mut surplus = vec![0.0; n];
    let primal = sample(rng, n, k).into_vec();
    for &j in &primal {
        alpha[j] = scale * (1.0 + frac.sample(rng));
    }
    for j in 0..n {
        if alpha[j] == 0.0 {
            surplus[j] = sigma_a * (1.0 + frac.sample(rng));
        }
    }
    let mut beta = vec![0.0; m];
    let mut slack = vec![0.0; m];
    let dual = sample(rng, m, k).into_vec();
    for &i in &dual {
        beta[i] = 1.0 + frac.sample(rng);
    }
    for i in 0..m {
        if beta[i] == 0.0 {
            slack[i] = sigma_a * scale * (1.0 + frac.sample(rng));
        }
    }

    let (b, c) = plant(&a, &alpha, &beta, &slack, &surplus);
    let planted_objective = c.iter().zip(&alpha).map(|(c, x)| c * x).sum();
    let mut lp = LpInstance::new(id, LpForm::Inequality, a, b, c)
        .map_err(|e| LpGenError::InvalidConfig(format!("generated data rejected: {e}")))?;
    lp.gen_meta = Some(GenMeta {
        seed: 0,
        index: 0,
        p,
        mu_a,
        sigma_a,
        gamma,
        lambda,
        beta_frac: cfg.beta_frac,
        alpha,
        beta,
        planted_objective,
        repaired,
    });
    Ok(lp)
}

/// One dataset line: an instance together with its portfolio record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub instance: LpInstance,
    pub record: SolveRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenFailure {
    pub index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetOutcome {
    pub entries: Vec<DatasetEntry>,
    pub failures: Vec<GenFailure>,
}

fn build_entry(cfg: &LpGenConfig, index: u64, opts: &SimplexOptions) -> Result<DatasetEntry, GenFailure> {
    let fail = |reason: String| GenFailure { index, reason };
    let instance = generate_lp(cfg, index).map_err(|e| fail(e.to_string()))?;
    let record = run_portfolio(&instance, opts).map_err(|e: SimplexError| fail(e.to_string()))?;
    Ok(DatasetEntry { instance, record })
}

/// Generates and solves instances `indices` of the `cfg.seed` stream.
///
/// With `workers > 1` the work runs on a rayon pool; output order and
/// content do not depend on the worker count. Instances whose solve fails
/// are reported in `failures` and left out of `entries`.
pub fn generate_dataset(
    cfg: &LpGenConfig,
    indices: &[u64],
    opts: &SimplexOptions,
    workers: usize,
) -> Result<DatasetOutcome, LpGenError> {
    cfg.validate()?;
    let results: Vec<Result<DatasetEntry, GenFailure>> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| LpGenError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| indices.par_iter().map(|&i| build_entry(cfg, i, opts)).collect())
    } else {
        indices.iter().map(|&i| build_entry(cfg, i, opts)).collect()
    };
    let mut out = DatasetOutcome::default();
    for r in results {
        match r {
            Ok(e) => out.entries.push(e),
            Err(f) => {
                log::warn!("skipping LP instance {}: {}", f.index, f.reason);
                out.failures.push(f);
            }
        }
    }
    Ok(out)
}
