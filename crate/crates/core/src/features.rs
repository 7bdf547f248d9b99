//! Fixed-length feature vectors for LP instances and graphs.
//!
//! Every extractor produces a [`FeatureVector`] tagged with a versioned
//! schema id; [`schema`] returns the position names for an id. Degenerate
//! inputs never yield NaN or infinity: empty sets summarize to zeros and the
//! vector carries a flag naming the rule that fired.

use serde::{Deserialize, Serialize};

use crate::graph::{density, GraphError, WeightedGraph};
use crate::linalg::{truncated_svd, vector_stats, Matrix, StatSummary};
use crate::lp::{LpForm, LpInstance};

/// Entries with magnitude at or below this count as structural zeros.
pub const NONZERO_TOL: f64 = 1e-12;

pub const LP_BAG: &str = "lp-bag.v1";
pub const LP_BAG_LEN: usize = 52;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("expected an inequality-form LP")]
    WrongForm,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown feature schema `{0}`")]
    UnknownSchema(String),
    #[error("schema mismatch: expected `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },
    #[error("k and q must be positive")]
    ZeroSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_id: String,
    pub values: Vec<f64>,
    /// Degenerate-input rules that fired, e.g. `empty:a_over_c`.
    #[serde(default)]
    pub flags: Vec<String>,
}

impl FeatureVector {
    fn new(schema_id: String, mut values: Vec<f64>, mut flags: Vec<String>) -> Self {
        if values.iter().any(|v| !v.is_finite()) {
            values.iter_mut().filter(|v| !v.is_finite()).for_each(|v| *v = 0.0);
            flags.push("nonfinite".into());
        }
        Self { schema_id, values, flags }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Position names of a feature schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    pub names: Vec<String>,
}

impl Schema {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Errors unless `fv` was produced under this schema.
    pub fn check(&self, fv: &FeatureVector) -> Result<(), FeatureError> {
        if fv.schema_id != self.id || fv.values.len() != self.len() {
            return Err(FeatureError::SchemaMismatch {
                expected: self.id.clone(),
                found: fv.schema_id.clone(),
            });
        }
        Ok(())
    }
}

fn stat_names(prefix: &str) -> impl Iterator<Item = String> + '_ {
    StatSummary::NAMES.iter().map(move |s| format!("{prefix}_{s}"))
}

fn block_names(k: usize) -> impl Iterator<Item = String> {
    (0..k).flat_map(move |i| (0..k).map(move |j| format!("svd_{i}_{j}")))
}

pub fn lp_svd_schema_id(k: usize) -> String {
    format!("lp-svd-k{k}.v1")
}

pub fn graph_svd_schema_id(k: usize) -> String {
    format!("graph-svd-k{k}.v1")
}

pub fn degree_schema_id(q: usize) -> String {
    format!("graph-deg-q{q}.v1")
}

fn parse_param(id: &str, prefix: &str) -> Option<usize> {
    id.strip_prefix(prefix)?.strip_suffix(".v1")?.parse().ok().filter(|&k| k > 0)
}

/// Names for a schema id.
pub fn schema(id: &str) -> Result<Schema, FeatureError> {
    let names: Vec<String> = if id == LP_BAG {
        let mut v = vec!["m".to_string(), "n".to_string()];
        for side in ["var_deg", "con_deg"] {
            for s in ["min", "max", "mean", "std"] {
                v.push(format!("{side}_{s}"));
            }
        }
        for p in ["a", "b", "c", "a_over_b", "a_over_c", "b_over_deg", "c_over_deg"] {
            v.extend(stat_names(p));
        }
        v
    } else if let Some(k) = parse_param(id, "lp-svd-k") {
        let mut v = vec!["m".to_string(), "n".to_string()];
        v.extend(block_names(k));
        v.extend(stat_names("b"));
        v.extend(stat_names("c"));
        v
    } else if let Some(k) = parse_param(id, "graph-svd-k") {
        let mut v = vec!["inv_n".to_string(), "density".to_string()];
        v.extend(block_names(k));
        v
    } else if let Some(q) = parse_param(id, "graph-deg-q") {
        let mut v = vec!["inv_n".to_string()];
        v.extend((0..q).map(|i| format!("deg_{i}")));
        v
    } else {
        return Err(FeatureError::UnknownSchema(id.to_string()));
    };
    Ok(Schema { id: id.to_string(), names })
}

/// Summary of `set`, or zeros plus a flag when it is empty.
fn summarize(set: &[f64], name: &str, flags: &mut Vec<String>) -> [f64; 6] {
    match vector_stats(set) {
        Ok(s) => s.to_array(),
        Err(_) => {
            flags.push(format!("empty:{name}"));
            [0.0; 6]
        }
    }
}

fn degree_stats(deg: &[f64]) -> [f64; 4] {
    match vector_stats(deg) {
        Ok(s) => [s.min, s.max, s.mean, s.std],
        Err(_) => [0.0; 4],
    }
}

/// Hand-crafted LP statistics: sizes, variable-constraint graph degrees,
/// coefficient summaries, and normalized-coefficient summaries.
pub fn lp_bag_of_features(lp: &LpInstance) -> Result<FeatureVector, FeatureError> {
    if lp.form != LpForm::Inequality {
        return Err(FeatureError::WrongForm);
    }
    let (m, n) = (lp.m(), lp.n());
    let mut flags = Vec::new();
    let mut row_deg = vec![0usize; m];
    let mut col_deg = vec![0usize; n];
    let mut nonzeros = Vec::new();
    for i in 0..m {
        for (j, &v) in lp.a.row(i).iter().enumerate() {
            if v.abs() > NONZERO_TOL {
                row_deg[i] += 1;
                col_deg[j] += 1;
                nonzeros.push(v);
            }
        }
    }
    let mut a_over_b = Vec::new();
    let mut a_over_c = Vec::new();
    for i in 0..m {
        for (j, &v) in lp.a.row(i).iter().enumerate() {
            if v.abs() <= NONZERO_TOL {
                continue;
            }
            if lp.b[i] != 0.0 {
                a_over_b.push(v / lp.b[i]);
            }
            if lp.c[j] != 0.0 {
                a_over_c.push(v / lp.c[j]);
            }
        }
    }
    let b_over_deg: Vec<f64> = (0..m).filter(|&i| row_deg[i] > 0).map(|i| lp.b[i] / row_deg[i] as f64).collect();
    let c_over_deg: Vec<f64> = (0..n).filter(|&j| col_deg[j] > 0).map(|j| lp.c[j] / col_deg[j] as f64).collect();

    let mut v = Vec::with_capacity(LP_BAG_LEN);
    v.extend([m as f64, n as f64]);
    v.extend(degree_stats(&col_deg.iter().map(|&d| d as f64).collect::<Vec<_>>()));
    v.extend(degree_stats(&row_deg.iter().map(|&d| d as f64).collect::<Vec<_>>()));
    v.extend(summarize(&nonzeros, "a", &mut flags));
    v.extend(summarize(&lp.b, "b", &mut flags));
    v.extend(summarize(&lp.c, "c", &mut flags));
    v.extend(summarize(&a_over_b, "a_over_b", &mut flags));
    v.extend(summarize(&a_over_c, "a_over_c", &mut flags));
    v.extend(summarize(&b_over_deg, "b_over_deg", &mut flags));
    v.extend(summarize(&c_over_deg, "c_over_deg", &mut flags));
    debug_assert_eq!(v.len(), LP_BAG_LEN);
    Ok(FeatureVector::new(LP_BAG.to_string(), v, flags))
}

/// Two-stage rank-`k` compression of `a` to a `k × k` block.
///
/// `a ≈ UΣVᵀ` gives the `m × k` matrix `UΣ`; the same decomposition applied
/// to `(UΣ)ᵀ` gives `U'Σ'`, which is returned flattened row-major.
pub fn svd_compress(a: &Matrix, k: usize) -> Vec<f64> {
    let us = truncated_svd(a, k).u_sigma();
    compress_projection(&us, k)
}

fn compress_projection(us: &Matrix, k: usize) -> Vec<f64> {
    truncated_svd(&us.transpose(), k).u_sigma().into_vec()
}

/// Sizes, the compressed `k × k` block of `A`, and summaries of `b` and `c`.
pub fn lp_svd_features(lp: &LpInstance, k: usize) -> Result<FeatureVector, FeatureError> {
    if k == 0 {
        return Err(FeatureError::ZeroSize);
    }
    let mut flags = Vec::new();
    let mut v = Vec::with_capacity(2 + k * k + 12);
    v.extend([lp.m() as f64, lp.n() as f64]);
    v.extend(svd_compress(&lp.a, k));
    v.extend(summarize(&lp.b, "b", &mut flags));
    v.extend(summarize(&lp.c, "c", &mut flags));
    Ok(FeatureVector::new(lp_svd_schema_id(k), v, flags))
}

/// Symmetric adjacency matrix carrying the edge weights.
pub fn weighted_adjacency(g: &WeightedGraph) -> Matrix {
    let mut a = Matrix::zeros(g.n, g.n);
    for &(u, v, w) in &g.edges {
        a[(u as usize, v as usize)] = w as f64;
        a[(v as usize, u as usize)] = w as f64;
    }
    a
}

/// `1/n`, density, and the compressed `k × k` block of the weighted adjacency
/// matrix, for several `k` at the cost of one decomposition.
pub fn graph_svd_features_multi(g: &WeightedGraph, ks: &[usize]) -> Result<Vec<FeatureVector>, FeatureError> {
    if ks.contains(&0) {
        return Err(FeatureError::ZeroSize);
    }
    let dens = density(g)?;
    let kmax = ks.iter().copied().max().unwrap_or(1);
    let us = truncated_svd(&weighted_adjacency(g), kmax).u_sigma();
    Ok(ks
        .iter()
        .map(|&k| {
            let cols: Vec<usize> = (0..k).collect();
            let block = compress_projection(&us.select_columns(&cols), k);
            let mut v = Vec::with_capacity(2 + k * k);
            v.extend([1.0 / g.n as f64, dens]);
            v.extend(block);
            FeatureVector::new(graph_svd_schema_id(k), v, Vec::new())
        })
        .collect())
}

pub fn graph_svd_features(g: &WeightedGraph, k: usize) -> Result<FeatureVector, FeatureError> {
    Ok(graph_svd_features_multi(g, &[k])?.remove(0))
}

/// `1/n` followed by `q` strided samples of the descending degree sequence,
/// each divided by `n`. The stride is `⌊n/q⌋`; when `n < q` it is zero and
/// every sample repeats the largest degree (flagged `degree_stride_zero`).
pub fn degree_sequence_features(g: &WeightedGraph, q: usize) -> Result<FeatureVector, FeatureError> {
    if q == 0 {
        return Err(FeatureError::ZeroSize);
    }
    if g.n == 0 {
        return Err(GraphError::TooFewNodes { n: 0 }.into());
    }
    let mut deg = g.degrees();
    deg.sort_unstable_by(|a, b| b.cmp(a));
    let n = g.n as f64;
    let stride = g.n / q;
    let mut flags = Vec::new();
    if stride == 0 {
        flags.push("degree_stride_zero".to_string());
    }
    let mut v = Vec::with_capacity(q + 1);
    v.push(1.0 / n);
    v.extend((0..q).map(|i| deg[stride * i] as f64 / n));
    Ok(FeatureVector::new(degree_schema_id(q), v, flags))
}
