use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ppgstage::cliio::commands::{
    cmd_eval, cmd_prep, cmd_report, cmd_synth, cmd_train, cmd_windows, configure_threads, CliResult,
};
use ppgstage::datagen::SynthConfig;
use ppgstage::sigprep::FilterSpec;
use ppgstage::superwin::ConfigId;

/// PPG sleep staging pipeline.
///
/// Exit codes: 0 success, 1 runtime failure, 2 usage error. The worker
/// thread count can be set with PPGSTAGE_THREADS.
#[derive(Parser)]
#[command(name = "ppgstage", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled cohort (signals, label CSVs, manifest).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        subjects: usize,
        #[arg(long, default_value_t = 2.0)]
        hours: f64,
        #[arg(long, default_value_t = 64.0)]
        sample_rate: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0.05)]
        unscored: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Preprocess every manifest subject into a window grid.
    Prep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the super-window index of one configuration.
    Windows {
        /// Directory written by `prep`.
        #[arg(long)]
        grids: PathBuf,
        #[arg(long, value_parser = parse_config)]
        config: ConfigId,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated training from a run config (TOML).
    Train {
        #[arg(long)]
        run_config: PathBuf,
        /// Overrides the run config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a checkpoint on preprocessed subjects.
    Eval {
        #[arg(long)]
        run_config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Restrict to these subjects (repeatable).
        #[arg(long = "subject")]
        subjects: Vec<String>,
        /// Output path prefix for `.json` and `.confusion.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a training or evaluation report as a table.
    Report { path: PathBuf },
}

fn parse_config(s: &str) -> Result<ConfigId, String> {
    s.parse().map_err(|e: ppgstage::Error| e.to_string())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Synth {
            out,
            subjects,
            hours,
            sample_rate,
            noise,
            unscored,
            seed,
        } => {
            let cfg = SynthConfig {
                subjects,
                hours,
                sample_rate_hz: sample_rate,
                noise_std: noise,
                unscored_fraction: unscored,
                seed,
                ..SynthConfig::default()
            };
            let m = cmd_synth(&cfg, &out)?;
            println!("wrote {} subjects to {}", m.subjects.len(), out.display());
        }
        Command::Prep { manifest, out } => {
            let s = cmd_prep(&manifest, &out, &FilterSpec::default())?;
            for e in &s.errors {
                eprintln!("warning: {}: {}", e.subject_id, e.error);
            }
            let windows: usize = s.subjects.iter().map(|e| e.stats.windows).sum();
            println!(
                "preprocessed {} subjects ({windows} windows), {} failed",
                s.subjects.len(),
                s.errors.len()
            );
        }
        Command::Windows { grids, config, out } => {
            let idx = cmd_windows(&grids, config, &out)?;
            println!("{} super-windows for {config} written to {}", idx.items.len(), out.display());
        }
        Command::Train { run_config, seed } => {
            let r = cmd_train(&run_config, seed, &mut |line| eprintln!("{line}"))?;
            print!("{}", ppgstage::cliio::report::render_train_report(&r));
        }
        Command::Eval {
            run_config,
            checkpoint,
            subjects,
            out,
        } => {
            let doc = cmd_eval(&run_config, &checkpoint, &subjects, out.as_deref())?;
            print!("{}", ppgstage::cliio::report::render_eval(&doc.report));
        }
        Command::Report { path } => print!("{}", cmd_report(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
