//! Experiment pipeline for learned algorithm selection: generate, featurize,
//! train, evaluate, report.

pub mod acceptance;
pub mod config;
pub mod evaluate;
pub mod featurize;
pub mod generate;
pub mod train;
pub mod workspace;

use std::path::Path;

use anyhow::Result;
use log::info;
use serde::{Deserialize, Serialize};

use crate::acceptance::{case_checks, Check};
use crate::config::ExperimentConfig;
use crate::evaluate::Evaluation;
use crate::workspace::{write_file, Workspace};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reproduction {
    pub workspace: String,
    pub evaluation: Evaluation,
    pub checks: Vec<Check>,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        !self.checks.iter().any(Check::failed)
    }
}

/// Runs every stage end to end and scores the acceptance checks.
pub fn cmd_reproduce(out: &Path, cfg: &ExperimentConfig) -> Result<Reproduction> {
    let ws = Workspace::init(out, cfg)?;
    let g = generate::cmd_generate(&ws, cfg)?;
    info!("generated {} new instances ({} resumed, {} failed)", g.written, g.resumed, g.failed);
    featurize::cmd_featurize(&ws, cfg, &cfg.schemas)?;
    train::cmd_train(&ws, cfg, &cfg.presets, cfg.repetitions)?;
    let evaluation = evaluate::cmd_evaluate(&ws, cfg, cfg.repetitions)?;
    evaluate::cmd_report(&ws, cfg)?;
    let checks = case_checks(&ws, cfg, &evaluation)?;
    let path = ws.reports_dir().join("acceptance.json");
    let rep = Reproduction { workspace: ws.root.display().to_string(), evaluation, checks };
    write_file(&path, &serde_json::to_string_pretty(&rep)?)?;
    ws.record(&[path])?;
    Ok(rep)
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
