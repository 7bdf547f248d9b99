//! Dataset generation: instances plus ground-truth cost records, appended
//! as JSON lines so an interrupted run resumes where it stopped.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use portfolio_select::apsp::{run_apsp_portfolio, RunRecord};
use portfolio_select::graph::{generate_graph, WeightedGraph};
use portfolio_select::io::append_jsonl;
use portfolio_select::lp::LpInstance;
use portfolio_select::lp_gen::generate_dataset;
use portfolio_select::simplex::{SimplexOptions, SolveRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{CaseStudy, ExperimentConfig};
use crate::workspace::{workers, Workspace};

/// Simplex instances are generated and appended in chunks of this many.
const LP_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn of(cfg: &ExperimentConfig, index: u64) -> Self {
        if (index as usize) < cfg.train {
            Split::Train
        } else {
            Split::Test
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpEntry {
    pub split: Split,
    pub instance: LpInstance,
    pub record: SolveRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEntry {
    pub split: Split,
    pub graph: WeightedGraph,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureLine {
    pub index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub requested: usize,
    pub resumed: usize,
    pub written: usize,
    pub failed: usize,
}

/// Reads complete JSON lines. A torn final line (no trailing newline, not
/// parseable) is cut off so appending can continue cleanly.
pub fn read_resumable<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut items = Vec::new();
    let mut good_len = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        offset += line.len();
        if line.trim().is_empty() {
            good_len = offset;
            continue;
        }
        let is_last = offset == text.len();
        match serde_json::from_str(line) {
            Ok(item) if line.ends_with('\n') => {
                items.push(item);
                good_len = offset;
            }
            _ if is_last => log::warn!("dropping a torn final line in {}", path.display()),
            Ok(_) => unreachable!("only the final line can lack a newline"),
            Err(e) => return Err(e).with_context(|| format!("{} at byte {}", path.display(), offset - line.len())),
        }
    }
    if good_len < text.len() {
        let f = fs::OpenOptions::new().write(true).open(path)?;
        f.set_len(good_len as u64)?;
    }
    Ok(items)
}

pub fn load_lp_entries(ws: &Workspace) -> Result<Vec<LpEntry>> {
    read_resumable(&ws.dataset_path())
}

pub fn load_graph_entries(ws: &Workspace) -> Result<Vec<GraphEntry>> {
    read_resumable(&ws.dataset_path())
}

/// Generates every missing instance of the configured train and test sets.
pub fn cmd_generate(ws: &Workspace, cfg: &ExperimentConfig) -> Result<GenerateSummary> {
    let summary = match cfg.case_study {
        CaseStudy::Simplex => generate_simplex(ws, cfg)?,
        CaseStudy::Apsp => generate_apsp(ws, cfg)?,
    };
    let mut paths = vec![ws.dataset_path()];
    if ws.failures_path().exists() {
        paths.push(ws.failures_path());
    }
    ws.record(&paths)?;
    Ok(summary)
}

fn generate_simplex(ws: &Workspace, cfg: &ExperimentConfig) -> Result<GenerateSummary> {
    let mut done: BTreeSet<u64> = BTreeSet::new();
    for e in load_lp_entries(ws)? {
        done.insert(e.instance.gen_meta.as_ref().map_or(u64::MAX, |m| m.index));
    }
    for f in read_resumable::<FailureLine>(&ws.failures_path())? {
        done.insert(f.index);
    }
    let todo: Vec<u64> = (0..cfg.total() as u64).filter(|i| !done.contains(i)).collect();
    let mut summary = GenerateSummary { requested: cfg.total(), resumed: cfg.total() - todo.len(), ..Default::default() };
    let threads = if cfg.parallel_generation { workers() } else { 1 };
    let opts = SimplexOptions::default();
    let start = Instant::now();
    for chunk in todo.chunks(LP_CHUNK) {
        let outcome = generate_dataset(&cfg.lp, chunk, &opts, threads)?;
        let entries: Vec<LpEntry> = outcome
            .entries
            .into_iter()
            .map(|e| {
                let index = e.instance.gen_meta.as_ref().map_or(0, |m| m.index);
                LpEntry { split: Split::of(cfg, index), instance: e.instance, record: e.record }
            })
            .collect();
        let failures: Vec<FailureLine> =
            outcome.failures.into_iter().map(|f| FailureLine { index: f.index, reason: f.reason }).collect();
        append_jsonl(&ws.dataset_path(), &entries)?;
        if !failures.is_empty() {
            append_jsonl(&ws.failures_path(), &failures)?;
        }
        summary.written += entries.len();
        summary.failed += failures.len();
        log::info!(
            "simplex: {}/{} instances ({:.1}s)",
            summary.resumed + summary.written + summary.failed,
            summary.requested,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(summary)
}

fn generate_apsp(ws: &Workspace, cfg: &ExperimentConfig) -> Result<GenerateSummary> {
    let done: BTreeSet<u64> = load_graph_entries(ws)?
        .iter()
        .filter_map(|e| e.graph.gen_meta.as_ref().map(|m| m.index))
        .collect();
    let todo: Vec<u64> = (0..cfg.total() as u64).filter(|i| !done.contains(i)).collect();
    let mut summary = GenerateSummary { requested: cfg.total(), resumed: cfg.total() - todo.len(), ..Default::default() };
    let start = Instant::now();
    let mut out = fs::OpenOptions::new().create(true).append(true).open(ws.dataset_path())?;
    for &index in &todo {
        let graph = generate_graph(&cfg.graph, index)?;
        let record = run_apsp_portfolio(&graph, cfg.timing_repeats)
            .with_context(|| format!("timing graph {}", graph.id))?;
        let entry = GraphEntry { split: Split::of(cfg, index), graph, record };
        let mut line = serde_json::to_vec(&entry)?;
        line.push(b'\n');
        out.write_all(&line)?;
        summary.written += 1;
        if summary.written % 50 == 0 {
            out.flush()?;
            log::info!(
                "apsp: {}/{} graphs ({:.1}s)",
                summary.resumed + summary.written,
                summary.requested,
                start.elapsed().as_secs_f64()
            );
        }
    }
    out.flush()?;
    Ok(summary)
}
