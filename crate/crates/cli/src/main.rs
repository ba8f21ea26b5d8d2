use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use uplift_core::pipeline::{Pipeline, PipelineConfig, Stage};
use uplift_core::policy::Criterion;
use uplift_core::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Simulate,
    Discretize,
    Select,
    Recommend,
    Evaluate,
    Report,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Policy {
    Cl,
    ClCvar,
    ClCvarFl,
    PredictOnly,
    All,
}

/// Credit-limit recommendation pipeline.
#[derive(Debug, Parser)]
#[command(name = "uplift", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    /// Comma-separated treatment levels to consider.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Propensity trimming threshold.
    #[arg(long)]
    eps: Option<f64>,
    /// CVaR confidence level.
    #[arg(long)]
    p: Option<f64>,
    /// Bootstrap replicates per level.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut c = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(Error::Config(format!("config: {} does not exist", path.display())));
            }
            PipelineConfig::load(path)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(p) = cli.policy {
        c.policies = match p {
            Policy::Cl => vec![Criterion::Cl],
            Policy::ClCvar => vec![Criterion::ClCvar],
            Policy::ClCvarFl => vec![Criterion::ClCvarFl],
            Policy::PredictOnly => vec![Criterion::PredictOnly],
            Policy::All => Criterion::ALL.to_vec(),
        };
    }
    if let Some(l) = &cli.levels {
        c.levels = l.clone();
    }
    if let Some(e) = cli.eps {
        c.trim_eps = e;
    }
    if let Some(p) = cli.p {
        c.cvar_p = p;
    }
    if let Some(b) = cli.bootstrap {
        c.bootstrap = b;
    }
    if let Some(o) = &cli.out {
        c.out_dir = o.clone();
    }
    Ok(c)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Error> {
    let stage = match cli.command {
        Command::Simulate => Stage::Simulate,
        Command::Discretize => Stage::Discretize,
        Command::Select => Stage::Select,
        Command::Recommend => Stage::Recommend,
        Command::Evaluate => Stage::Evaluate,
        Command::Report => Stage::Report,
        Command::All => Stage::All,
    };
    Pipeline::new(config(cli)?)?.run(stage)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
