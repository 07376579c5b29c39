mod config;
mod document;
mod experiments;
mod sweep;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use document::{Outcome, ReportDocument};
use experiments::ConstantsKind;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(
    name = "logconvex-lab",
    version,
    about = "Numerical laboratory for log-convexity, observability and Carleman-type weights"
)]
struct Cli {
    /// JSON run configuration; defaults are used for every missing field.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report.json and CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid cells per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true, env = "LOGCONVEX_LAB_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigen-system summary of the configured domain.
    Basis,
    /// Evolution trace CSV of the first seeded state.
    Evolve,
    /// Run one inequality suite.
    Check { kind: CheckKind },
    /// Certify the sign of the commutator difference for a radial weight.
    Certify {
        /// Re-run the built-in reference verdicts instead of the configured parameters.
        #[arg(long)]
        reference: bool,
    },
    /// Grid scan over radial weight parameters.
    Search,
    /// Evaluate a constant chain.
    Constants {
        /// theorem11 | lemma41 | lemmaA | lemma22, or spectral-chain | observability | spectral-observation | localization
        #[arg(value_parser = parse_constants)]
        which: ConstantsKind,
    },
    /// Cartesian parameter sweep of a check.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Logconvexity,
    Diffineq,
    Interpolation,
    Observation,
    Observability,
    Spectral,
    Hardy,
    Nash,
}

impl CheckKind {
    pub fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, false).ok()
    }
}

fn parse_constants(s: &str) -> Result<ConstantsKind, String> {
    ConstantsKind::parse(s).ok_or_else(|| format!("unknown constant chain `{s}`"))
}

pub fn run_check(cfg: &RunConfig, kind: CheckKind) -> Result<Outcome> {
    match kind {
        CheckKind::Logconvexity => experiments::logconvexity(cfg),
        CheckKind::Diffineq => experiments::diffineq(cfg),
        CheckKind::Interpolation => experiments::interpolation(cfg),
        CheckKind::Observation => experiments::observation(cfg),
        CheckKind::Observability => experiments::observability(cfg),
        CheckKind::Spectral => experiments::spectral(cfg),
        CheckKind::Hardy => experiments::functional(cfg, true),
        CheckKind::Nash => experiments::functional(cfg, false),
    }
}

fn experiment_name(cmd: &Command) -> String {
    match cmd {
        Command::Basis => "basis".into(),
        Command::Evolve => "evolve".into(),
        Command::Check { kind } => {
            format!("check {}", kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default())
        }
        Command::Certify { reference } => if *reference { "certify reference" } else { "certify" }.into(),
        Command::Search => "search".into(),
        Command::Constants { which } => format!("constants {which:?}"),
        Command::Sweep => "sweep".into(),
    }
}

fn write_outputs(out: &Path, outcome: &Outcome) -> Result<Vec<String>> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut files = vec![];
    for (name, bytes) in &outcome.csv {
        let path = out.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        files.push(name.clone());
    }
    Ok(files)
}

fn execute(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    cfg.validate()?;
    let outcome = match &cli.command {
        Command::Basis => experiments::basis(&cfg)?,
        Command::Evolve => experiments::evolve_trace(&cfg)?,
        Command::Check { kind } => run_check(&cfg, *kind)?,
        Command::Certify { reference } => experiments::certify(&cfg, *reference)?,
        Command::Search => experiments::search(&cfg)?,
        Command::Constants { which } => experiments::constants(&cfg, *which)?,
        Command::Sweep => sweep::run(&cfg, cli.jobs)?,
    };
    let files = match &cli.out {
        Some(dir) => write_outputs(dir, &outcome)?,
        None => vec![],
    };
    let doc = ReportDocument::new(
        &experiment_name(&cli.command),
        serde_json::to_value(&cfg)?,
        &outcome,
        files,
        start.elapsed().as_secs_f64(),
    );
    let text = doc.to_json();
    if let Some(dir) = &cli.out {
        std::fs::write(dir.join("report.json"), &text)
            .with_context(|| format!("writing report in {}", dir.display()))?;
    }
    // a closed stdout (e.g. piped into head) is not a run failure
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(outcome.verdict.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
