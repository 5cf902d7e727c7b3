use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use attn_impute::experiment::{ExperimentConfig, ExperimentError, InjectConfig, ResultsTable};
use attn_impute::theory::{self, TheorySpec};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "attn-impute", version, about = "Train and compare missing-data front-ends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write results.csv, runs.csv and table.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo check of the layer-1 expectation bounds.
    VerifyTheory {
        /// Theory spec; defaults to the bundled one.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Render a results directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Inject missingness into a dataset and export a snapshot.
    Inject {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ExperimentError>() {
        Some(e) => e.exit_code() as u8,
        None if err.downcast_ref::<theory::TheoryError>().is_some_and(theory::TheoryError::is_config) => 2,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run { config, jobs, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out
                .or_else(|| cfg.output_dir.clone().map(|d| cfg.base_dir.clone().unwrap_or_default().join(d)))
                .unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
            let table = attn_impute::experiment::run_experiment(&cfg, jobs)?;
            table.write_to(&dir)?;
            print!("{}", table.render_table()?);
            println!("wrote {}", dir.display());
            Ok(u8::from(table.any_failed()))
        }
        Command::VerifyTheory { spec, samples } => {
            let path = spec.unwrap_or_else(theory::default_spec_path);
            let mut spec = TheorySpec::load(&path)?;
            if let Some(s) = samples {
                spec.samples = s;
            }
            let report = theory::run_suite(&spec)?;
            print!("{}", report.render());
            Ok(u8::from(!report.all_pass()))
        }
        Command::Report { input, format } => {
            let table = ResultsTable::read_from(&input)?;
            match format {
                Format::Table => print!("{}", table.render_table()?),
                Format::Csv => {
                    let runs = input.join("runs.csv");
                    let text = std::fs::read_to_string(&runs).with_context(|| format!("reading {}", runs.display()))?;
                    print!("{text}");
                }
            }
            Ok(0)
        }
        Command::Inject { config } => {
            let cfg = InjectConfig::load(&config)?;
            let paths = cfg.run()?;
            println!("{}\n{}\n{}", paths.values.display(), paths.mask.display(), paths.meta.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_for(&err))
        }
    }
}
