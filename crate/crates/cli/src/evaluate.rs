//! Policy evaluation on the test split and the report tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Result};
use portfolio_select::eval::{
    best_worst_ratios, evaluate, fixed_reports, oracle_report, wilcoxon_signed_rank, CostTable, EvalReport,
    InstanceFeatures, PolicyReport, SelectionPolicy, WilcoxonResult,
};
use portfolio_select::features::schema;
use portfolio_select::learn::{gbdt_feature_gain, Model};
use serde::{Deserialize, Serialize};

use crate::config::{CaseStudy, ExperimentConfig};
use crate::featurize::FeatureTable;
use crate::generate::Split;
use crate::train::TrainedModel;
use crate::workspace::{write_file, Workspace};

/// Density threshold of the APSP rule of thumb.
pub const DENSITY_THRESHOLD: f64 = 0.5;
pub const DENSITY_POLICY: &str = "density-heuristic";
/// Simplex policies are compared per instance against this fixed rule.
pub const SIMPLEX_REFERENCE: &str = "steepest";

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    Classifier(String),
    Regressors(Vec<String>),
    Density(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub name: String,
    pub kind: PolicyKind,
}

impl PolicySpec {
    fn presets(&self) -> Vec<String> {
        match &self.kind {
            PolicyKind::Classifier(p) => vec![p.clone()],
            PolicyKind::Regressors(ps) => ps.clone(),
            PolicyKind::Density(_) => vec![],
        }
    }
}

fn spec(name: &str, kind: PolicyKind) -> PolicySpec {
    PolicySpec { name: name.to_string(), kind }
}

/// Learned (and heuristic) policies of a case study whose presets are all configured.
pub fn policy_specs(cfg: &ExperimentConfig) -> Vec<PolicySpec> {
    let all = match cfg.case_study {
        CaseStudy::Simplex => vec![
            spec(
                "gbdt-regressors",
                PolicyKind::Regressors(
                    ["dantzig", "hybrid", "devex", "steepest", "greatest"].iter().map(|r| format!("lp-gbdt-{r}")).collect(),
                ),
            ),
            spec("gbdt-svd-classifier", PolicyKind::Classifier("lp-gbdt-svd-classifier".into())),
            spec("nn-bag", PolicyKind::Classifier("lp-nn-bag".into())),
            spec("nn-svd", PolicyKind::Classifier("lp-nn-svd".into())),
        ],
        CaseStudy::Apsp => vec![
            spec(
                "nn-runtime",
                PolicyKind::Regressors(
                    ["dijkstra", "peng", "floyd_warshall"].iter().map(|a| format!("apsp-nn-runtime-{a}")).collect(),
                ),
            ),
            spec("nn-svd", PolicyKind::Classifier("apsp-nn-svd".into())),
            spec("nn-degree", PolicyKind::Classifier("apsp-nn-degree".into())),
            spec("gbdt-svd", PolicyKind::Classifier("apsp-gbdt-svd".into())),
            spec("gbdt-degree", PolicyKind::Classifier("apsp-gbdt-degree".into())),
            spec(DENSITY_POLICY, PolicyKind::Density(DENSITY_THRESHOLD)),
        ],
    };
    all.into_iter().filter(|s| s.presets().iter().all(|p| cfg.presets.contains(p))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub best: f64,
    pub worst: f64,
    pub wilcoxon: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub mean_total_cost: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub case_study: CaseStudy,
    pub cost_label: String,
    /// Names of the learned and heuristic policies.
    pub policies: Vec<String>,
    /// One report per training repetition.
    pub reports: Vec<EvalReport>,
    /// Per-instance ratios against the reference fixed choice (repetition 0).
    pub reference: Option<String>,
    pub ratios: BTreeMap<String, RatioRow>,
    pub across_repetitions: BTreeMap<String, RepetitionSummary>,
    /// Wilcoxon p-values over paired per-repetition accuracies and total costs.
    pub wilcoxon_accuracy: BTreeMap<String, BTreeMap<String, f64>>,
    pub wilcoxon_total_cost: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Evaluation {
    pub fn primary(&self) -> &EvalReport {
        &self.reports[0]
    }

    pub fn fixed<'a>(&'a self, algorithms: &'a [String]) -> impl Iterator<Item = &'a PolicyReport> + 'a {
        self.primary().policies.iter().filter(move |p| algorithms.contains(&p.name))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let r0 = self.primary();
        let _ = writeln!(out, "{} case study: {} test instances, repetition 0\n", self.case_study.key(), r0.instances);
        out.push_str(&r0.to_text());
        if let Some(reference) = &self.reference {
            let _ = writeln!(out, "\nper-instance ratio against {reference}");
            let _ = writeln!(out, "{:<22}  {:>9}  {:>9}  {:>11}", "policy", "best", "worst", "wilcoxon p");
            for (name, r) in &self.ratios {
                let _ = writeln!(out, "{name:<22}  {:>8.2}%  {:>8.2}%  {:>11.4e}", 100.0 * r.best, 100.0 * r.worst, r.wilcoxon.p_value);
            }
        }
        if self.reports.len() > 1 {
            let _ = writeln!(out, "\nmeans over {} repetitions", self.reports.len());
            let _ = writeln!(out, "{:<22}  {:>16}  {:>9}", "policy", "total cost", "accuracy");
            for (name, s) in &self.across_repetitions {
                let _ = writeln!(out, "{name:<22}  {:>16.4}  {:>8.2}%", s.mean_total_cost, 100.0 * s.mean_accuracy);
            }
            for (title, m) in [("accuracy", &self.wilcoxon_accuracy), ("total cost", &self.wilcoxon_total_cost)] {
                let _ = writeln!(out, "\nwilcoxon p-values over repetitions ({title})");
                let _ = write!(out, "{:<22}", "");
                for b in &self.policies {
                    let _ = write!(out, "  {b:>12.12}");
                }
                out.push('\n');
                for a in &self.policies {
                    let _ = write!(out, "{a:<22}");
                    for b in &self.policies {
                        match m.get(a).and_then(|row| row.get(b)) {
                            Some(p) => {
                                let _ = write!(out, "  {p:>12.4}");
                            }
                            None => {
                                let _ = write!(out, "  {:>12}", "-");
                            }
                        }
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn cost_label(case: CaseStudy) -> &'static str {
    match case {
        CaseStudy::Simplex => "iterations",
        CaseStudy::Apsp => "seconds",
    }
}

/// Test-split features for every configured schema, aligned by row.
pub fn test_inputs(ws: &Workspace, cfg: &ExperimentConfig) -> Result<(Vec<InstanceFeatures>, CostTable)> {
    let mut instances: Vec<InstanceFeatures> = Vec::new();
    let mut table: Option<CostTable> = None;
    for schema_id in &cfg.schemas {
        let t = FeatureTable::read(ws, schema_id)?;
        let rows = t.rows(Split::Test);
        let costs = t.cost_table(&rows)?;
        match &table {
            None => {
                instances = vec![InstanceFeatures::default(); rows.len()];
                table = Some(costs);
            }
            Some(existing) if existing.instance_ids != costs.instance_ids => {
                bail!("feature tables disagree on the test instances");
            }
            Some(_) => {}
        }
        let density = t.column("density");
        for (inst, fv) in instances.iter_mut().zip(t.vectors(&rows)) {
            if let Some(c) = density {
                inst.density = Some(fv.values[c]);
            }
            inst.insert(fv);
        }
    }
    let Some(table) = table else { bail!("no feature schemas configured") };
    Ok((instances, table))
}

fn build_policy(ws: &Workspace, spec: &PolicySpec, rep: usize) -> Result<SelectionPolicy> {
    let load = |p: &str| -> Result<Model> { Ok(TrainedModel::load(ws, p, rep)?.model) };
    Ok(match &spec.kind {
        PolicyKind::Classifier(p) => SelectionPolicy::DirectClassifier(load(p)?),
        PolicyKind::Regressors(ps) => SelectionPolicy::RuntimeRegressors(ps.iter().map(|p| load(p)).collect::<Result<_>>()?),
        PolicyKind::Density(t) => SelectionPolicy::density_heuristic(*t),
    })
}

fn p_matrix(names: &[String], values: &BTreeMap<String, Vec<f64>>) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let mut m = BTreeMap::new();
    for a in names {
        let mut row = BTreeMap::new();
        for b in names {
            if a != b {
                row.insert(b.clone(), wilcoxon_signed_rank(&values[a], &values[b])?.p_value);
            }
        }
        m.insert(a.clone(), row);
    }
    Ok(m)
}

/// Evaluates fixed choices, learned policies and the oracle on the test split.
pub fn cmd_evaluate(ws: &Workspace, cfg: &ExperimentConfig, repetitions: usize) -> Result<Evaluation> {
    let (instances, table) = test_inputs(ws, cfg)?;
    let specs = policy_specs(cfg);
    let mut reports = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let mut policies = fixed_reports(&table);
        for s in &specs {
            let policy = build_policy(ws, s, rep)?;
            policies.push(evaluate(&s.name, &policy, &instances, &table)?);
        }
        reports.push(EvalReport {
            cost_label: cost_label(cfg.case_study).to_string(),
            instances: table.len(),
            policies,
            oracle: oracle_report(&table),
        });
    }
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();

    let reference = (cfg.case_study == CaseStudy::Simplex).then(|| SIMPLEX_REFERENCE.to_string());
    let mut ratios = BTreeMap::new();
    if let Some(reference) = &reference {
        let base = &reports[0].policy(reference).expect("fixed rules are always reported").charged;
        for name in &names {
            let charged = &reports[0].policy(name).expect("every policy is reported").charged;
            let (best, worst) = best_worst_ratios(charged, base)?;
            ratios.insert(name.clone(), RatioRow { best, worst, wilcoxon: wilcoxon_signed_rank(charged, base)? });
        }
    }

    let mut across = BTreeMap::new();
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut tot: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for name in &names {
        let per: Vec<&PolicyReport> = reports.iter().map(|r| r.policy(name).expect("every policy is reported")).collect();
        acc.insert(name.clone(), per.iter().map(|p| p.accuracy).collect());
        tot.insert(name.clone(), per.iter().map(|p| p.total_cost).collect());
        across.insert(
            name.clone(),
            RepetitionSummary {
                mean_total_cost: tot[name].iter().sum::<f64>() / repetitions as f64,
                mean_accuracy: acc[name].iter().sum::<f64>() / repetitions as f64,
            },
        );
    }
    let (wilcoxon_accuracy, wilcoxon_total_cost) =
        if repetitions > 1 { (p_matrix(&names, &acc)?, p_matrix(&names, &tot)?) } else { Default::default() };

    let evaluation = Evaluation {
        case_study: cfg.case_study,
        cost_label: cost_label(cfg.case_study).to_string(),
        policies: names,
        reports,
        reference,
        ratios,
        across_repetitions: across,
        wilcoxon_accuracy,
        wilcoxon_total_cost,
    };
    write_reports(ws, &evaluation, &table)?;
    Ok(evaluation)
}

fn write_reports(ws: &Workspace, evaluation: &Evaluation, table: &CostTable) -> Result<()> {
    let dir = ws.reports_dir();
    let json = dir.join("eval.json");
    let text = dir.join("eval.txt");
    let csv_path = dir.join("instances.csv");
    write_file(&json, &(serde_json::to_string_pretty(evaluation)? + "\n"))?;
    write_file(&text, &evaluation.to_text())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["instance_id", "policy", "true_best", "chosen", "cost_chosen", "cost_best"])?;
    for p in &evaluation.primary().policies {
        if !evaluation.policies.contains(&p.name) {
            continue;
        }
        for (i, &c) in p.choices.iter().enumerate() {
            let best = table.best(i);
            w.write_record([
                table.instance_ids[i].clone(),
                p.name.clone(),
                table.algorithms[best].clone(),
                table.algorithms[c].clone(),
                format!("{}", table.costs[i][c]),
                format!("{}", table.costs[i][best]),
            ])?;
        }
    }
    write_file(&csv_path, &String::from_utf8(w.into_inner()?)?)?;
    ws.record(&[json, text, csv_path])
}

/// Feature-gain tables for the boosted-tree models and a training-curve
/// summary; returns the text printed by the `report` command.
pub fn cmd_report(ws: &Workspace, cfg: &ExperimentConfig) -> Result<String> {
    let mut out = String::new();
    let mut written = Vec::new();
    for name in &cfg.presets {
        let m = TrainedModel::load(ws, name, 0)?;
        match &m.model {
            Model::Gbdt(g) => {
                let names = schema(&m.schema_id)?.names;
                let gains = gbdt_feature_gain(g);
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["feature", "gain"])?;
                for (n, v) in names.iter().zip(&gains) {
                    w.write_record([n.clone(), format!("{v}")])?;
                }
                let path = ws.reports_dir().join("gains").join(format!("{name}.csv"));
                write_file(&path, &String::from_utf8(w.into_inner()?)?)?;
                written.push(path);
                let mut ranked: Vec<(usize, f64)> = gains.iter().copied().enumerate().collect();
                ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let top: Vec<String> = ranked.iter().take(5).map(|(i, g)| format!("{} ({g:.3e})", names[*i])).collect();
                let _ = writeln!(
                    out,
                    "{name}: {} rounds, loss {:.4} -> {:.4}; top gain: {}",
                    g.train_loss.len(),
                    g.initial_loss,
                    g.train_loss.last().copied().unwrap_or(g.initial_loss),
                    top.join(", ")
                );
            }
            Model::Mlp(n) => {
                let last = n.history.last();
                let _ = writeln!(
                    out,
                    "{name}: {} epochs, final loss {:.4}, accuracy {}, val accuracy {}",
                    n.history.len(),
                    last.map_or(f64::NAN, |h| h.loss),
                    last.and_then(|h| h.accuracy).map_or("-".into(), |a| format!("{:.2}%", 100.0 * a)),
                    last.and_then(|h| h.val_accuracy).map_or("-".into(), |a| format!("{:.2}%", 100.0 * a)),
                );
            }
        }
    }
    if !written.is_empty() {
        ws.record(&written)?;
    }
    let eval_txt = ws.reports_dir().join("eval.txt");
    if eval_txt.exists() {
        out.push('\n');
        out.push_str(&std::fs::read_to_string(eval_txt)?);
    }
    Ok(out)
}
