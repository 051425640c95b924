use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use scalelab_cli::{
    emit, run, Command, ConfigError, ExperimentConfig, Lemma, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS,
};

#[derive(Debug, Parser)]
#[command(
    name = "scalelab",
    version,
    about = "Run scalelab experiments and emit JSON reports with CSV tables"
)]
struct Cli {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; reported margins do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Verify one lemma suite.
    VerifyLemma {
        #[arg(value_enum)]
        lemma: LemmaArg,
    },
    /// Compare Kobayashi metric and distance estimates with exact values.
    KobayashiEval,
    /// Build the scaling stages and their diagnostics.
    ScaleRun,
    /// End-to-end replay on the ball.
    TheoremReplay,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LemmaArg {
    Esti,
    Disc,
    Ball,
    Final,
}

impl Cmd {
    fn command(&self) -> Command {
        match self {
            Cmd::VerifyLemma { lemma } => Command::VerifyLemma(match lemma {
                LemmaArg::Esti => Lemma::Esti,
                LemmaArg::Disc => Lemma::Disc,
                LemmaArg::Ball => Lemma::Ball,
                LemmaArg::Final => Lemma::Final,
            }),
            Cmd::KobayashiEval => Command::KobayashiEval,
            Cmd::ScaleRun => Command::ScaleRun,
            Cmd::TheoremReplay => Command::TheoremReplay,
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output = out.display().to_string();
    }
    if cli.jobs == Some(0) {
        return Err(ConfigError::Invalid {
            field: "--jobs".into(),
            reason: "must be positive".into(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    let command = cli.command.command();
    let mut report = pool.install(|| run(&config, command))?;
    emit(
        &mut report,
        &config,
        command,
        PathBuf::from(&config.output).as_path(),
    )?;

    for e in &report.entries {
        let mark = if e.pass { "ok  " } else { "FAIL" };
        println!(
            "{mark} {:<40} value {:>12.5e}  margin {:>12.5e}",
            e.name, e.value, e.margin
        );
    }
    for a in &report.artifacts {
        println!("  {a}");
    }
    Ok(report.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }
    };
    ExitCode::from(code as u8)
}
