//! Model training from feature tables.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use portfolio_select::learn::{preset, Model, ModelConfig, Preset, PresetTarget};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::featurize::FeatureTable;
use crate::generate::Split;
use crate::workspace::{sha256_file, workers, write_file, Workspace};

pub const TRAINED_FORMAT: &str = "trained-model.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub preset: String,
    pub repetition: usize,
    pub seed: u64,
    pub schema_id: String,
    pub target: PresetTarget,
    pub features_sha256: String,
    pub train_rows: usize,
    pub model: Model,
}

impl TrainedModel {
    /// Loads a model and checks it against the current feature table.
    pub fn load(ws: &Workspace, preset: &str, rep: usize) -> Result<Self> {
        let path = ws.model_path(preset, rep);
        let m: TrainedModel = serde_json::from_str(
            &std::fs::read_to_string(&path).with_context(|| format!("model {} is missing; run train", path.display()))?,
        )?;
        let current = sha256_file(&ws.features_path(&m.schema_id))?;
        if m.features_sha256 != current {
            bail!("{} was trained on different `{}` features; retrain", path.display(), m.schema_id);
        }
        Ok(m)
    }
}

/// The named preset with this experiment's seed and validation share.
pub fn configured_preset(cfg: &ExperimentConfig, name: &str, rep: usize) -> Result<Preset> {
    let mut p = preset(name)?.with_seed(cfg.seed.wrapping_add(rep as u64));
    if let ModelConfig::Mlp(m) = &mut p.config {
        m.validation_split = cfg.validation_fraction;
    }
    Ok(p)
}

/// Training labels for `preset` on the given rows.
pub fn labels(table: &FeatureTable, preset: &Preset, rows: &[usize]) -> Result<Vec<f64>> {
    match &preset.target {
        PresetTarget::BestClass => Ok(rows.iter().map(|&i| table.best[i] as f64).collect()),
        PresetTarget::Cost { algorithm, .. } => {
            let Some(c) = table.sidecar.algorithms.iter().position(|a| a == algorithm) else {
                bail!("`{algorithm}` is not in the `{}` portfolio", table.sidecar.schema_id);
            };
            Ok(rows.iter().map(|&i| preset.target.encode(table.costs[i][c])).collect())
        }
    }
}

pub fn train_model(table: &FeatureTable, preset: &Preset, rep: usize, features_sha256: &str) -> Result<TrainedModel> {
    if table.sidecar.schema_id != preset.schema_id {
        bail!("preset `{}` needs `{}` features, got `{}`", preset.name, preset.schema_id, table.sidecar.schema_id);
    }
    let rows = table.rows(Split::Train);
    let x = table.matrix(&rows);
    let y = labels(table, preset, &rows)?;
    let model = preset.train(&x, &y).with_context(|| format!("training `{}`", preset.name))?;
    let seed = match &preset.config {
        ModelConfig::Gbdt(c) => c.seed,
        ModelConfig::Mlp(c) => c.seed,
    };
    Ok(TrainedModel {
        format: TRAINED_FORMAT.to_string(),
        preset: preset.name.clone(),
        repetition: rep,
        seed,
        schema_id: preset.schema_id.clone(),
        target: preset.target.clone(),
        features_sha256: features_sha256.to_string(),
        train_rows: rows.len(),
        model,
    })
}

/// Trains every preset for every repetition. Models already trained on the
/// current features are kept.
pub fn cmd_train(ws: &Workspace, cfg: &ExperimentConfig, presets: &[String], repetitions: usize) -> Result<Vec<PathBuf>> {
    let mut tables: BTreeMap<String, (FeatureTable, String)> = BTreeMap::new();
    let mut jobs = Vec::new();
    for name in presets {
        for rep in 0..repetitions {
            let p = configured_preset(cfg, name, rep)?;
            if !tables.contains_key(&p.schema_id) {
                let t = FeatureTable::read(ws, &p.schema_id)?;
                let h = sha256_file(&ws.features_path(&p.schema_id))?;
                tables.insert(p.schema_id.clone(), (t, h));
            }
            let path = ws.model_path(name, rep);
            if path.exists() && TrainedModel::load(ws, name, rep).is_ok_and(|m| m.seed == cfg.seed.wrapping_add(rep as u64)) {
                log::info!("keeping {}", path.display());
                continue;
            }
            jobs.push((p, rep));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers()).build()?;
    let trained: Vec<TrainedModel> = pool.install(|| {
        jobs.par_iter()
            .map(|(p, rep)| {
                let (table, hash) = &tables[&p.schema_id];
                let start = Instant::now();
                let m = train_model(table, p, *rep, hash)?;
                log::info!("trained {} r{rep} in {:.1}s", p.name, start.elapsed().as_secs_f64());
                Ok(m)
            })
            .collect::<Result<_>>()
    })?;
    let mut written = Vec::new();
    for m in &trained {
        let path = ws.model_path(&m.preset, m.repetition);
        write_file(&path, &serde_json::to_string(m)?)?;
        let hist = ws.history_path(&m.preset, m.repetition);
        write_file(&hist, &(serde_json::to_string_pretty(&m.model.history_json())? + "\n"))?;
        written.push(path);
        written.push(hist);
    }
    if !written.is_empty() {
        ws.record(&written)?;
    }
    Ok(written)
}
