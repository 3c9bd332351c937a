use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rezone::experiment::{run_experiment, threads_from_env, ExperimentConfig, RunOptions};
use rezone::instance::{classify_ses, read_block_groups, write_instance_files};
use rezone::synth::{generate, SynthParams};
use rezone::weights::{derive_weights, read_demographics, read_survey};
use rezone::Error;

#[derive(Parser)]
#[command(name = "rezone", version, about = "Multi-level school attendance boundary optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Directory holding the instance files.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for zonings, metrics and the manifest.
        #[arg(long)]
        out: PathBuf,
        /// Number of solver seeds, counted from the config's first seed.
        #[arg(long)]
        seeds: Option<usize>,
        /// Wall-clock limit per solve, in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Only report errors.
        #[arg(long)]
        quiet: bool,
    },
    /// Write a synthetic district in the instance file layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// TOML file with generator parameters; defaults apply otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Derive per-school objective weights from survey responses.
    Weights {
        #[arg(long)]
        survey: PathBuf,
        #[arg(long)]
        demographics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify census block groups by socioeconomic status.
    Ses {
        #[arg(long)]
        block_groups: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = matches!(cli.command, Command::Run { quiet: true, .. });
    let level = if quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(cli.command, quiet) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command, quiet: bool) -> Result<(), Error> {
    match command {
        Command::Run {
            config,
            data,
            out,
            seeds,
            time_limit,
            ..
        } => {
            let exp = ExperimentConfig::from_file(&config)?;
            let opts = RunOptions {
                seeds,
                time_limit,
                threads: threads_from_env()?,
            };
            let outcome = run_experiment(&exp, &data, &out, &opts)?;
            if !quiet {
                for r in &outcome.runs {
                    println!("seed {}: objective {:.6} (status quo {:.6})", r.seed, r.objective(), r.sq_objective);
                }
                println!("wrote {} files to {}", outcome.artifacts.len(), out.display());
            }
        }
        Command::Synth { out, params, seed } => {
            let mut p = match params {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
                    toml::from_str::<SynthParams>(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                }
                None => SynthParams::default(),
            };
            if let Some(s) = seed {
                p.seed = s;
            }
            let inst = generate(&p, &Default::default())?;
            write_instance_files(&inst, &out)?;
            println!("wrote {} units and {} schools to {}", inst.units().len(), inst.schools().len(), out.display());
        }
        Command::Weights {
            survey,
            demographics,
            out,
        } => {
            let weights = derive_weights(&read_survey(&survey)?, &read_demographics(&demographics)?)?;
            for r in weights.rows.iter().filter(|r| !r.missing_races.is_empty()) {
                log::warn!("school {}: no respondents of {}", r.school, r.missing_races.join(", "));
            }
            weights.write_csv(&out)?;
        }
        Command::Ses { block_groups, out } => {
            let rows = classify_ses(&read_block_groups(&block_groups)?)?;
            let ctx = || out.display().to_string();
            let mut w = csv::Writer::from_path(&out).map_err(|e| Error::io(ctx(), std::io::Error::other(e)))?;
            for r in &rows {
                w.serialize(r).map_err(|e| Error::io(ctx(), std::io::Error::other(e)))?;
            }
            w.flush().map_err(|e| Error::io(ctx(), e))?;
        }
    }
    Ok(())
}
