use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use portfolio_select_cli::config::{CaseStudy, ExperimentConfig, Scale};
use portfolio_select_cli::workspace::Workspace;
use portfolio_select_cli::{cmd_reproduce, evaluate, featurize, generate, train};

#[derive(Parser)]
#[command(name = "portfolio-select", version, about = "Learned algorithm selection for simplex pivot rules and APSP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Case study to run.
    #[arg(long, value_enum, default_value = "simplex")]
    case: CaseStudy,
    /// Preset sizes; ignored when --config is given.
    #[arg(long, value_enum, default_value = "smoke")]
    scale: Scale,
    /// TOML or JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; the case study writes into `<out>/<case>/`.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Generate simplex instances on all workers.
    #[arg(long)]
    parallel_generation: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::for_scale(self.case, self.scale),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(r) = self.repetitions {
            cfg.repetitions = r;
        }
        cfg.parallel_generation |= self.parallel_generation;
        cfg.validate()?;
        Ok(cfg)
    }

    fn open(&self) -> Result<(Workspace, ExperimentConfig)> {
        let cfg = self.config()?;
        Ok((Workspace::init(&self.out, &cfg)?, cfg))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate instances and record per-algorithm costs.
    Generate(Common),
    /// Extract feature tables.
    Featurize {
        #[command(flatten)]
        common: Common,
        /// Schema ids; defaults to the config's list.
        #[arg(long = "schema")]
        schemas: Vec<String>,
    },
    /// Train presets.
    Train {
        #[command(flatten)]
        common: Common,
        /// Preset names; defaults to the config's list.
        #[arg(long = "preset")]
        presets: Vec<String>,
    },
    /// Score trained models on the test split.
    Evaluate(Common),
    /// Write gain tables and print the evaluation summary.
    Report(Common),
    /// Run every stage and the acceptance checks.
    Reproduce(Common),
}

fn or_default(given: Vec<String>, default: &[String]) -> Vec<String> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(c) => {
            let (ws, cfg) = c.open()?;
            let s = generate::cmd_generate(&ws, &cfg)?;
            println!("{} requested, {} resumed, {} written, {} failed", s.requested, s.resumed, s.written, s.failed);
        }
        Command::Featurize { common, schemas } => {
            let (ws, cfg) = common.open()?;
            for p in featurize::cmd_featurize(&ws, &cfg, &or_default(schemas, &cfg.schemas))? {
                println!("{}", p.display());
            }
        }
        Command::Train { common, presets } => {
            let (ws, cfg) = common.open()?;
            for p in train::cmd_train(&ws, &cfg, &or_default(presets, &cfg.presets), cfg.repetitions)? {
                println!("{}", p.display());
            }
        }
        Command::Evaluate(c) => {
            let (ws, cfg) = c.open()?;
            print!("{}", evaluate::cmd_evaluate(&ws, &cfg, cfg.repetitions)?.to_text());
        }
        Command::Report(c) => {
            let (ws, cfg) = c.open()?;
            print!("{}", evaluate::cmd_report(&ws, &cfg)?);
        }
        Command::Reproduce(c) => {
            let cfg = c.config()?;
            let rep = cmd_reproduce(&c.out, &cfg)?;
            print!("{}", rep.evaluation.to_text());
            for check in &rep.checks {
                println!("{check}");
            }
            if !rep.passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
