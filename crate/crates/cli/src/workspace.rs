//! Output-directory layout and the artifact manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const WORKERS_ENV: &str = "PORTFOLIO_SELECT_WORKERS";

/// Worker count: the environment override, else the available parallelism.
pub fn workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub sha256: String,
    pub bytes: u64,
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub created_unix: u64,
    /// Keyed by path relative to the workspace root.
    pub artifacts: BTreeMap<String, Artifact>,
}

/// One case study's directory: `<out>/<case>/`.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn at(out: &Path, cfg: &ExperimentConfig) -> Self {
        Self { root: out.join(cfg.case_study.key()) }
    }

    /// Creates the directory and stores `cfg`, refusing to mix with a
    /// different stored config.
    pub fn init(out: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        let ws = Self::at(out, cfg);
        fs::create_dir_all(&ws.root).with_context(|| format!("creating {}", ws.root.display()))?;
        let text = serde_json::to_string_pretty(cfg)? + "\n";
        let path = ws.config_path();
        if path.exists() {
            let stored = fs::read_to_string(&path)?;
            if stored != text {
                bail!("{} holds a different experiment config; choose another --out", ws.root.display());
            }
        } else {
            fs::write(&path, &text)?;
        }
        if !ws.manifest_path().exists() {
            let manifest = Manifest {
                tool_version: TOOL_VERSION.to_string(),
                config_sha256: sha256_file(&path)?,
                created_unix: now_unix(),
                artifacts: BTreeMap::new(),
            };
            ws.save_manifest(&manifest)?;
        }
        Ok(ws)
    }

    /// Opens an existing workspace and checks its manifest against the stored config.
    pub fn open(root: &Path) -> Result<(Self, ExperimentConfig)> {
        let ws = Self { root: root.to_path_buf() };
        let cfg_text = fs::read_to_string(ws.config_path())
            .with_context(|| format!("no experiment config in {}", root.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&cfg_text)?;
        let manifest = ws.manifest()?;
        if manifest.config_sha256 != sha256_file(&ws.config_path())? {
            bail!("config.json in {} no longer matches its manifest", root.display());
        }
        Ok((ws, cfg))
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.root.join("dataset.jsonl")
    }

    pub fn failures_path(&self) -> PathBuf {
        self.root.join("failures.jsonl")
    }

    pub fn features_path(&self, schema: &str) -> PathBuf {
        self.root.join("features").join(format!("{schema}.csv"))
    }

    pub fn sidecar_path(&self, schema: &str) -> PathBuf {
        self.root.join("features").join(format!("{schema}.schema.json"))
    }

    pub fn model_path(&self, preset: &str, rep: usize) -> PathBuf {
        self.root.join("models").join(format!("{preset}.r{rep}.json"))
    }

    pub fn history_path(&self, preset: &str, rep: usize) -> PathBuf {
        self.root.join("models").join(format!("{preset}.r{rep}.history.json"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let text = fs::read_to_string(self.manifest_path())
            .with_context(|| format!("no manifest in {}", self.root.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn save_manifest(&self, m: &Manifest) -> Result<()> {
        fs::write(self.manifest_path(), serde_json::to_string_pretty(m)? + "\n")?;
        Ok(())
    }

    /// Hashes `paths` and records them in the manifest.
    pub fn record(&self, paths: &[PathBuf]) -> Result<()> {
        let mut m = self.manifest()?;
        for p in paths {
            let rel = p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().replace('\\', "/");
            let bytes = fs::metadata(p)?.len();
            m.artifacts.insert(rel, Artifact { sha256: sha256_file(p)?, bytes, created_unix: now_unix() });
        }
        self.save_manifest(&m)
    }
}

/// Writes `text` after creating the parent directory.
pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
