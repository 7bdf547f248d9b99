//! Selection policies, cost accounting against recorded ground truth, and the
//! Wilcoxon signed-rank test.
//!
//! A [`CostTable`] holds the measured cost of every portfolio member on every
//! test instance. Policies only choose a class index per instance; they are
//! charged the recorded cost of that choice, never a fresh run.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::apsp::{ApspAlgorithm, RunRecord};
use crate::features::FeatureVector;
use crate::learn::{LearnError, Model};
use crate::linalg::Matrix;
use crate::simplex::{PivotRule, SolveRecord};

/// Largest effective sample size for which p-values come from the exact
/// null distribution.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no cost record for instance `{0}`")]
    MissingRecord(String),
    #[error("instance {row} has {found} costs, expected {expected}")]
    CostCount { row: usize, expected: usize, found: usize },
    #[error("{choices} choices for {instances} instances")]
    ChoiceCount { choices: usize, instances: usize },
    #[error("choice {choice} is not a portfolio member (size {size})")]
    UnknownChoice { choice: usize, size: usize },
    #[error("instance {row} has no `{schema}` features")]
    MissingFeatures { row: usize, schema: String },
    #[error("instance {row} has no density")]
    MissingDensity { row: usize },
    #[error("runtime regressors need {expected} models, found {found}")]
    RegressorCount { expected: usize, found: usize },
    #[error("paired samples differ in length: {x} vs {y}")]
    PairLength { x: usize, y: usize },
    #[error("paired samples are empty")]
    EmptySample,
    #[error("every reference cost is zero")]
    ZeroReferenceCost,
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Per-instance costs of every portfolio member, in class-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub algorithms: Vec<String>,
    /// Class indices from most to least preferred; resolves cost ties.
    pub preference: Vec<usize>,
    pub instance_ids: Vec<String>,
    pub costs: Vec<Vec<f64>>,
}

impl CostTable {
    pub fn new(
        algorithms: Vec<String>,
        preference: Vec<usize>,
        instance_ids: Vec<String>,
        costs: Vec<Vec<f64>>,
    ) -> Result<Self, EvalError> {
        let k = algorithms.len();
        if let Some((row, c)) = costs.iter().enumerate().find(|(_, c)| c.len() != k) {
            return Err(EvalError::CostCount { row, expected: k, found: c.len() });
        }
        if instance_ids.len() != costs.len() {
            return Err(EvalError::ChoiceCount { choices: instance_ids.len(), instances: costs.len() });
        }
        Ok(Self { algorithms, preference, instance_ids, costs })
    }

    /// Iteration counts per pivot rule; ties prefer the earlier rule.
    pub fn from_solve_records(records: &[SolveRecord]) -> Self {
        Self {
            algorithms: PivotRule::ALL.iter().map(|r| r.key().to_string()).collect(),
            preference: PivotRule::ALL.iter().map(|r| r.index()).collect(),
            instance_ids: records.iter().map(|r| r.instance_id.clone()).collect(),
            costs: records
                .iter()
                .map(|r| PivotRule::ALL.iter().map(|&p| *r.iterations.get(p) as f64).collect())
                .collect(),
        }
    }

    /// Median seconds per APSP algorithm; ties follow [`ApspAlgorithm::TIE_ORDER`].
    pub fn from_run_records(records: &[RunRecord]) -> Self {
        Self {
            algorithms: ApspAlgorithm::ALL.iter().map(|a| a.key().to_string()).collect(),
            preference: ApspAlgorithm::TIE_ORDER.iter().map(|a| a.index()).collect(),
            instance_ids: records.iter().map(|r| r.graph_id.clone()).collect(),
            costs: records
                .iter()
                .map(|r| ApspAlgorithm::ALL.iter().map(|&a| r.times_s.get(a)).collect())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.algorithms.len()
    }

    /// Cheapest class of one instance.
    pub fn best(&self, row: usize) -> usize {
        argmin_preferred(&self.costs[row], &self.preference)
    }

    pub fn best_classes(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.best(i)).collect()
    }

    /// Restricts the table to the given instance ids, in that order.
    pub fn select(&self, ids: &[String]) -> Result<Self, EvalError> {
        let pos: BTreeMap<&str, usize> = self.instance_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut costs = Vec::with_capacity(ids.len());
        for id in ids {
            let &i = pos.get(id.as_str()).ok_or_else(|| EvalError::MissingRecord(id.clone()))?;
            costs.push(self.costs[i].clone());
        }
        Ok(Self { algorithms: self.algorithms.clone(), preference: self.preference.clone(), instance_ids: ids.to_vec(), costs })
    }
}

/// Index of the smallest value; ties go to the earliest entry of `preference`.
pub fn argmin_preferred(values: &[f64], preference: &[usize]) -> usize {
    let mut best = preference[0];
    for &c in preference {
        if values[c] < values[best] {
            best = c;
        }
    }
    best
}

/// Index of the largest value; ties go to the earliest entry of `preference`.
pub fn argmax_preferred(values: &[f64], preference: &[usize]) -> usize {
    let mut best = preference[0];
    for &c in preference {
        if values[c] > values[best] {
            best = c;
        }
    }
    best
}

/// Features available to a policy for one instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstanceFeatures {
    pub by_schema: BTreeMap<String, FeatureVector>,
    /// Graph density, for the density heuristic.
    pub density: Option<f64>,
}

impl InstanceFeatures {
    pub fn insert(&mut self, fv: FeatureVector) {
        self.by_schema.insert(fv.schema_id.clone(), fv);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectionPolicy {
    Fixed(usize),
    DirectClassifier(Model),
    /// One cost model per portfolio member, in class-index order.
    RuntimeRegressors(Vec<Model>),
    /// `below` when density is under `threshold`, otherwise `above`.
    DensityHeuristic { threshold: f64, below: usize, above: usize },
}

impl SelectionPolicy {
    /// Peng's algorithm on sparse graphs, Floyd-Warshall on dense ones.
    pub fn density_heuristic(threshold: f64) -> Self {
        SelectionPolicy::DensityHeuristic {
            threshold,
            below: ApspAlgorithm::Peng.index(),
            above: ApspAlgorithm::FloydWarshall.index(),
        }
    }
}

fn gather(model: &Model, instances: &[InstanceFeatures]) -> Result<Vec<FeatureVector>, EvalError> {
    let schema = model.schema_id().unwrap_or_default().to_string();
    instances
        .iter()
        .enumerate()
        .map(|(row, inst)| {
            inst.by_schema.get(&schema).cloned().ok_or_else(|| EvalError::MissingFeatures { row, schema: schema.clone() })
        })
        .collect()
}

fn rows(m: &Matrix) -> impl Iterator<Item = &[f64]> {
    (0..m.rows()).map(move |i| m.row(i))
}

/// Chooses a class for every instance.
pub fn select_all(
    policy: &SelectionPolicy,
    instances: &[InstanceFeatures],
    preference: &[usize],
) -> Result<Vec<usize>, EvalError> {
    match policy {
        SelectionPolicy::Fixed(c) => Ok(vec![*c; instances.len()]),
        SelectionPolicy::DensityHeuristic { threshold, below, above } => instances
            .iter()
            .enumerate()
            .map(|(row, inst)| {
                let d = inst.density.ok_or(EvalError::MissingDensity { row })?;
                Ok(if d < *threshold { *below } else { *above })
            })
            .collect(),
        SelectionPolicy::DirectClassifier(model) => {
            let probs = model.predict_features(&gather(model, instances)?)?;
            Ok(rows(&probs).map(|p| argmax_preferred(p, preference)).collect())
        }
        SelectionPolicy::RuntimeRegressors(models) => {
            if models.len() != preference.len() {
                return Err(EvalError::RegressorCount { expected: preference.len(), found: models.len() });
            }
            let mut predicted = vec![vec![0.0; models.len()]; instances.len()];
            for (c, model) in models.iter().enumerate() {
                let out = model.predict_features(&gather(model, instances)?)?;
                for (i, row) in rows(&out).enumerate() {
                    predicted[i][c] = row[0];
                }
            }
            Ok(predicted.iter().map(|p| argmin_preferred(p, preference)).collect())
        }
    }
}

/// Chooses a class for one instance.
pub fn select(policy: &SelectionPolicy, instance: &InstanceFeatures, preference: &[usize]) -> Result<usize, EvalError> {
    Ok(select_all(policy, std::slice::from_ref(instance), preference)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub name: String,
    pub accuracy: f64,
    pub mean_cost: f64,
    pub total_cost: f64,
    pub choices: Vec<usize>,
    pub charged: Vec<f64>,
}

/// Charges `choices` against the table.
pub fn evaluate_choices(name: &str, choices: &[usize], table: &CostTable) -> Result<PolicyReport, EvalError> {
    if choices.len() != table.len() {
        return Err(EvalError::ChoiceCount { choices: choices.len(), instances: table.len() });
    }
    let mut charged = Vec::with_capacity(choices.len());
    let mut hits = 0usize;
    for (i, &c) in choices.iter().enumerate() {
        if c >= table.classes() {
            return Err(EvalError::UnknownChoice { choice: c, size: table.classes() });
        }
        charged.push(table.costs[i][c]);
        hits += usize::from(c == table.best(i));
    }
    let total: f64 = charged.iter().sum();
    let n = choices.len().max(1) as f64;
    Ok(PolicyReport {
        name: name.to_string(),
        accuracy: hits as f64 / n,
        mean_cost: total / n,
        total_cost: total,
        choices: choices.to_vec(),
        charged,
    })
}

pub fn evaluate(
    name: &str,
    policy: &SelectionPolicy,
    instances: &[InstanceFeatures],
    table: &CostTable,
) -> Result<PolicyReport, EvalError> {
    if instances.len() != table.len() {
        return Err(EvalError::ChoiceCount { choices: instances.len(), instances: table.len() });
    }
    evaluate_choices(name, &select_all(policy, instances, &table.preference)?, table)
}

/// The per-instance cheapest choice.
pub fn oracle_report(table: &CostTable) -> PolicyReport {
    evaluate_choices("oracle", &table.best_classes(), table).expect("oracle choices index the table")
}

/// One report per fixed portfolio member, named by algorithm key.
pub fn fixed_reports(table: &CostTable) -> Vec<PolicyReport> {
    (0..table.classes())
        .map(|c| evaluate_choices(&table.algorithms[c], &vec![c; table.len()], table).expect("fixed choice indexes the table"))
        .collect()
}

/// Smallest and largest per-instance ratio `policy / reference`. Instances
/// whose reference cost is zero are skipped.
pub fn best_worst_ratios(policy: &[f64], reference: &[f64]) -> Result<(f64, f64), EvalError> {
    if policy.len() != reference.len() {
        return Err(EvalError::PairLength { x: policy.len(), y: reference.len() });
    }
    let mut best = f64::INFINITY;
    let mut worst = f64::NEG_INFINITY;
    let mut skipped = 0;
    for (&p, &r) in policy.iter().zip(reference) {
        if r == 0.0 {
            skipped += 1;
            continue;
        }
        best = best.min(p / r);
        worst = worst.max(p / r);
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} instances with zero reference cost");
    }
    if best.is_infinite() {
        return Err(EvalError::ZeroReferenceCost);
    }
    Ok((best, worst))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cost_label: String,
    pub instances: usize,
    pub policies: Vec<PolicyReport>,
    pub oracle: PolicyReport,
}

impl EvalReport {
    pub fn policy(&self, name: &str) -> Option<&PolicyReport> {
        self.policies.iter().find(|p| p.name == name)
    }

    /// Aligned text table sorted from the most to the least costly policy,
    /// ending with the oracle row.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<&PolicyReport> = self.policies.iter().collect();
        rows.sort_by(|a, b| b.total_cost.total_cmp(&a.total_cost));
        rows.push(&self.oracle);
        let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>14}  {:>14}  {:>9}", "policy", format!("mean {}", self.cost_label), format!("total {}", self.cost_label), "accuracy");
        for r in rows {
            let _ = writeln!(out, "{:<width$}  {:>14.4}  {:>14.4}  {:>8.2}%", r.name, r.mean_cost, r.total_cost, 100.0 * r.accuracy);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W+, W-).
    pub statistic: f64,
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    pub n_effective: usize,
    pub p_value: f64,
    pub exact: bool,
    /// Set when every difference was zero.
    pub all_zero: bool,
}

/// Average ranks (1-based) of `values`, ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Nonzero differences, their average ranks of |d|, and W+.
fn signed_ranks(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64), EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::PairLength { x: x.len(), y: y.len() });
    }
    if x.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let ranks = average_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let w_plus = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    Ok((d, ranks, w_plus))
}

/// Two-sided p-value of `w_plus` under the exact null distribution given
/// the (possibly tied) ranks: every sign assignment equally likely.
pub fn exact_p_value(ranks: &[f64], w_plus: f64) -> f64 {
    // Average ranks are multiples of 1/2, so doubled ranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total: f64 = counts.iter().sum();
    let w = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Two-sided normal approximation with tie-corrected variance and a
/// continuity correction of 1/2.
pub fn normal_p_value(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

/// Paired two-sided Wilcoxon signed-rank test. Zero differences are dropped;
/// up to [`EXACT_MAX_N`] remaining pairs use the exact null distribution.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, EvalError> {
    let (d, ranks, w_plus) = signed_ranks(x, y)?;
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult { statistic: 0.0, w_plus: 0.0, n_effective: 0, p_value: 1.0, exact: true, all_zero: true });
    }
    let total = n as f64 * (n as f64 + 1.0) / 2.0;
    let exact = n <= EXACT_MAX_N;
    let p_value = if exact { exact_p_value(&ranks, w_plus) } else { normal_p_value(&ranks, w_plus) };
    Ok(WilcoxonResult { statistic: w_plus.min(total - w_plus), w_plus, n_effective: n, p_value, exact, all_zero: false })
}

/// Exact and approximate p-values of the same paired sample.
pub fn wilcoxon_both(x: &[f64], y: &[f64]) -> Result<(f64, f64), EvalError> {
    let (_, ranks, w_plus) = signed_ranks(x, y)?;
    if ranks.is_empty() {
        return Ok((1.0, 1.0));
    }
    Ok((exact_p_value(&ranks, w_plus), normal_p_value(&ranks, w_plus)))
}
