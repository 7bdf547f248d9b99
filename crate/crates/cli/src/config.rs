//! Experiment configuration and the three preset scales.

use std::path::Path;

use anyhow::{bail, Context, Result};
use portfolio_select::features::{degree_schema_id, graph_svd_schema_id, lp_svd_schema_id, LP_BAG};
use portfolio_select::graph::GraphGenConfig;
use portfolio_select::learn::all_presets;
use portfolio_select::lp_gen::LpGenConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CaseStudy {
    Simplex,
    Apsp,
}

impl CaseStudy {
    pub fn key(self) -> &'static str {
        match self {
            CaseStudy::Simplex => "simplex",
            CaseStudy::Apsp => "apsp",
        }
    }

    /// Feature schemas the case study's presets consume.
    pub fn schemas(self) -> Vec<String> {
        match self {
            CaseStudy::Simplex => vec![LP_BAG.to_string(), lp_svd_schema_id(20)],
            CaseStudy::Apsp => vec![graph_svd_schema_id(20), graph_svd_schema_id(5), degree_schema_id(50)],
        }
    }

    pub fn presets(self) -> Vec<String> {
        let prefix = match self {
            CaseStudy::Simplex => "lp-",
            CaseStudy::Apsp => "apsp-",
        };
        all_presets().into_iter().map(|p| p.name).filter(|n| n.starts_with(prefix)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Smoke,
    Desk,
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case_study: CaseStudy,
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    /// Trailing share of the training rows that networks hold out for validation curves.
    pub validation_fraction: f64,
    pub lp: LpGenConfig,
    pub graph: GraphGenConfig,
    /// Timed runs per APSP algorithm; the median is recorded.
    pub timing_repeats: usize,
    pub schemas: Vec<String>,
    pub presets: Vec<String>,
    /// Independent training seeds per preset.
    pub repetitions: usize,
    /// Parallelize simplex generation. APSP timing always runs serially.
    pub parallel_generation: bool,
}

impl ExperimentConfig {
    pub fn for_scale(case_study: CaseStudy, scale: Scale) -> Self {
        let (train, test, lp, graph, timing_repeats) = match (case_study, scale) {
            (CaseStudy::Simplex, Scale::Smoke) => (60, 20, LpGenConfig::smoke(), GraphGenConfig::smoke(), 1),
            (CaseStudy::Simplex, Scale::Desk) => (2000, 500, LpGenConfig::desk(), GraphGenConfig::desk(), 1),
            (CaseStudy::Simplex, Scale::Paper) => (24634, 7279, LpGenConfig::default(), GraphGenConfig::default(), 1),
            (CaseStudy::Apsp, Scale::Smoke) => (60, 20, LpGenConfig::smoke(), GraphGenConfig::smoke(), 1),
            (CaseStudy::Apsp, Scale::Desk) => (600, 200, LpGenConfig::desk(), GraphGenConfig::desk(), 3),
            (CaseStudy::Apsp, Scale::Paper) => (2309, 1125, LpGenConfig::default(), GraphGenConfig::default(), 5),
        };
        Self {
            case_study,
            seed: 0,
            train,
            test,
            validation_fraction: 0.1,
            lp,
            graph,
            timing_repeats,
            schemas: case_study.schemas(),
            presets: case_study.presets(),
            repetitions: 30,
            parallel_generation: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.lp.seed = seed;
        self.graph.seed = seed;
        self
    }

    pub fn total(&self) -> usize {
        self.train + self.test
    }

    /// Reads TOML or JSON (by extension).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.test == 0 {
            bail!("train and test sizes must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            bail!("validation_fraction must lie in (0, 1)");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        if self.timing_repeats == 0 {
            bail!("timing_repeats must be at least 1");
        }
        self.lp.validate()?;
        self.graph.validate()?;
        let known = self.case_study.presets();
        if let Some(p) = self.presets.iter().find(|p| !known.contains(p)) {
            bail!("preset `{p}` does not belong to the {} case study", self.case_study.key());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_validate_and_round_trip() {
        for case in [CaseStudy::Simplex, CaseStudy::Apsp] {
            for scale in [Scale::Smoke, Scale::Desk, Scale::Paper] {
                let cfg = ExperimentConfig::for_scale(case, scale).with_seed(4);
                cfg.validate().unwrap();
                let text = toml::to_string(&cfg).unwrap();
                assert_eq!(toml::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
            }
        }
        let desk = ExperimentConfig::for_scale(CaseStudy::Simplex, Scale::Desk);
        assert_eq!((desk.train, desk.test, desk.lp.m_range, desk.lp.n_range), (2000, 500, [40, 120], [20, 60]));
        let desk = ExperimentConfig::for_scale(CaseStudy::Apsp, Scale::Desk);
        assert_eq!((desk.train, desk.test, desk.graph.n_range), (600, 200, [20, 300]));
        assert_eq!(desk.presets.len(), 7);
    }

    #[test]
    fn rejects_foreign_presets() {
        let mut cfg = ExperimentConfig::for_scale(CaseStudy::Apsp, Scale::Smoke);
        cfg.presets.push("lp-nn-bag".into());
        assert!(cfg.validate().is_err());
    }
}
