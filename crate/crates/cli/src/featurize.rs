//! Feature extraction into CSV tables with a JSON schema sidecar.
//!
//! Columns: `id`, `split`, the schema's feature names, `best` (class index
//! of the cheapest portfolio member) and one `cost_<algorithm>` column per
//! portfolio member.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use portfolio_select::eval::CostTable;
use portfolio_select::features::{
    degree_sequence_features, graph_svd_features_multi, lp_bag_of_features, lp_svd_features, schema, FeatureVector,
    LP_BAG,
};
use portfolio_select::graph::WeightedGraph;
use portfolio_select::linalg::Matrix;
use portfolio_select::lp::LpInstance;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CaseStudy, ExperimentConfig};
use crate::generate::{load_graph_entries, load_lp_entries, Split};
use crate::workspace::{sha256_file, workers, write_file, Workspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_id: String,
    pub feature_columns: Vec<String>,
    pub label_columns: Vec<String>,
    pub algorithms: Vec<String>,
    pub preference: Vec<usize>,
    pub dataset_sha256: String,
    pub rows: usize,
    /// Instances whose extractor raised a degenerate-input flag.
    pub flagged: Vec<(String, Vec<String>)>,
}

/// A parsed feature CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub sidecar: Sidecar,
    pub ids: Vec<String>,
    pub splits: Vec<Split>,
    pub x: Vec<Vec<f64>>,
    pub best: Vec<usize>,
    pub costs: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn read(ws: &Workspace, schema_id: &str) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_str(
            &std::fs::read_to_string(ws.sidecar_path(schema_id))
                .with_context(|| format!("features for `{schema_id}` are missing; run featurize"))?,
        )?;
        let dataset = sha256_file(&ws.dataset_path())?;
        if sidecar.dataset_sha256 != dataset {
            bail!("features for `{schema_id}` were built from a different dataset; re-run featurize");
        }
        let mut reader = csv::Reader::from_path(ws.features_path(schema_id))?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let nf = sidecar.feature_columns.len();
        let k = sidecar.algorithms.len();
        if header.len() != 2 + nf + 1 + k || header[2..2 + nf] != sidecar.feature_columns[..] {
            bail!("{} does not match its schema sidecar", ws.features_path(schema_id).display());
        }
        let mut t = FeatureTable { sidecar, ids: vec![], splits: vec![], x: vec![], best: vec![], costs: vec![] };
        for rec in reader.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> { Ok(rec[i].parse::<f64>()?) };
            t.ids.push(rec[0].to_string());
            t.splits.push(match &rec[1] {
                "train" => Split::Train,
                "test" => Split::Test,
                other => bail!("unknown split `{other}`"),
            });
            t.x.push((2..2 + nf).map(num).collect::<Result<_>>()?);
            t.best.push(rec[2 + nf].parse()?);
            t.costs.push((3 + nf..3 + nf + k).map(num).collect::<Result<_>>()?);
        }
        Ok(t)
    }

    pub fn rows(&self, split: Split) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn matrix(&self, rows: &[usize]) -> Matrix {
        let data = rows.iter().flat_map(|&i| self.x[i].iter().copied()).collect();
        Matrix::from_vec(rows.len(), self.sidecar.feature_columns.len(), data).expect("rows share the schema width")
    }

    pub fn vectors(&self, rows: &[usize]) -> Vec<FeatureVector> {
        rows.iter()
            .map(|&i| FeatureVector { schema_id: self.sidecar.schema_id.clone(), values: self.x[i].clone(), flags: vec![] })
            .collect()
    }

    pub fn cost_table(&self, rows: &[usize]) -> Result<CostTable> {
        Ok(CostTable::new(
            self.sidecar.algorithms.clone(),
            self.sidecar.preference.clone(),
            rows.iter().map(|&i| self.ids[i].clone()).collect(),
            rows.iter().map(|&i| self.costs[i].clone()).collect(),
        )?)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.sidecar.feature_columns.iter().position(|c| c == name)
    }
}

fn param(id: &str, prefix: &str) -> Option<usize> {
    id.strip_prefix(prefix)?.strip_suffix(".v1")?.parse().ok()
}

fn lp_features(lp: &LpInstance, schemas: &[String]) -> Result<Vec<FeatureVector>> {
    schemas
        .iter()
        .map(|s| {
            if s == LP_BAG {
                Ok(lp_bag_of_features(lp)?)
            } else if let Some(k) = param(s, "lp-svd-k") {
                Ok(lp_svd_features(lp, k)?)
            } else {
                bail!("schema `{s}` does not apply to LP instances")
            }
        })
        .collect()
}

fn graph_features(g: &WeightedGraph, schemas: &[String]) -> Result<Vec<FeatureVector>> {
    let ks: Vec<usize> = schemas.iter().filter_map(|s| param(s, "graph-svd-k")).collect();
    let mut svd = if ks.is_empty() { Vec::new() } else { graph_svd_features_multi(g, &ks)? }.into_iter();
    schemas
        .iter()
        .map(|s| {
            if param(s, "graph-svd-k").is_some() {
                Ok(svd.next().expect("one block per requested k"))
            } else if let Some(q) = param(s, "graph-deg-q") {
                Ok(degree_sequence_features(g, q)?)
            } else {
                bail!("schema `{s}` does not apply to graphs")
            }
        })
        .collect()
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Writes one CSV and sidecar per schema. Re-running on the same dataset
/// reproduces the files byte for byte.
pub fn cmd_featurize(ws: &Workspace, cfg: &ExperimentConfig, schemas: &[String]) -> Result<Vec<PathBuf>> {
    for s in schemas {
        schema(s)?;
    }
    let dataset_sha256 = sha256_file(&ws.dataset_path()).context("no dataset; run generate first")?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers()).build()?;
    let (ids, splits, table, features): (Vec<String>, Vec<Split>, CostTable, Vec<Vec<FeatureVector>>) =
        match cfg.case_study {
            CaseStudy::Simplex => {
                let entries = load_lp_entries(ws)?;
                let feats = pool.install(|| entries.par_iter().map(|e| lp_features(&e.instance, schemas)).collect::<Result<Vec<_>>>())?;
                let records: Vec<_> = entries.iter().map(|e| e.record.clone()).collect();
                (
                    entries.iter().map(|e| e.instance.id.clone()).collect(),
                    entries.iter().map(|e| e.split).collect(),
                    CostTable::from_solve_records(&records),
                    feats,
                )
            }
            CaseStudy::Apsp => {
                let entries = load_graph_entries(ws)?;
                let feats = pool.install(|| entries.par_iter().map(|e| graph_features(&e.graph, schemas)).collect::<Result<Vec<_>>>())?;
                let records: Vec<_> = entries.iter().map(|e| e.record.clone()).collect();
                (
                    entries.iter().map(|e| e.graph.id.clone()).collect(),
                    entries.iter().map(|e| e.split).collect(),
                    CostTable::from_run_records(&records),
                    feats,
                )
            }
        };

    let mut written = Vec::new();
    for (si, schema_id) in schemas.iter().enumerate() {
        let names = schema(schema_id)?.names;
        let label_columns: Vec<String> =
            std::iter::once("best".to_string()).chain(table.algorithms.iter().map(|a| format!("cost_{a}"))).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = ["id", "split"]
            .into_iter()
            .chain(names.iter().map(String::as_str))
            .chain(label_columns.iter().map(String::as_str))
            .collect();
        w.write_record(&header)?;
        let mut flagged = Vec::new();
        for i in 0..ids.len() {
            let fv = &features[i][si];
            if !fv.flags.is_empty() {
                flagged.push((ids[i].clone(), fv.flags.clone()));
            }
            let mut row = vec![ids[i].clone(), splits[i].key().to_string()];
            row.extend(fv.values.iter().map(|&v| fmt_num(v)));
            row.push(table.best(i).to_string());
            row.extend(table.costs[i].iter().map(|&v| fmt_num(v)));
            w.write_record(&row)?;
        }
        let csv_path = ws.features_path(schema_id);
        write_file(&csv_path, &String::from_utf8(w.into_inner()?)?)?;
        let sidecar = Sidecar {
            schema_id: schema_id.clone(),
            feature_columns: names,
            label_columns,
            algorithms: table.algorithms.clone(),
            preference: table.preference.clone(),
            dataset_sha256: dataset_sha256.clone(),
            rows: ids.len(),
            flagged,
        };
        let side_path = ws.sidecar_path(schema_id);
        write_file(&side_path, &(serde_json::to_string_pretty(&sidecar)? + "\n"))?;
        written.push(csv_path);
        written.push(side_path);
    }
    ws.record(&written)?;
    Ok(written)
}
