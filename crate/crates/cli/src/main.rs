use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nusrec_cli::commands::{self, Written};
use nusrec_cli::{CliError, CliResult, RunConfig};
use nusrec_core::reconstructor::Path as RecPath;

#[derive(Parser)]
#[command(name = "nusrec", version, about = "Reconstruction filters for periodically nonuniform bandpass sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunFlags {
    /// Reconstruction path (overrides the configuration).
    #[arg(long, value_enum)]
    path: Option<PathArg>,
    /// Skip the noisy run; SNR and MSE are then distortion-limited.
    #[arg(long)]
    no_noise: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Direct,
    Polyphase,
}

impl From<PathArg> for RecPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Direct => RecPath::Direct,
            PathArg::Polyphase => RecPath::Polyphase,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Design the bank and write coefficients, responses and a report.
    Design {
        #[command(flatten)]
        common: Common,
    },
    /// Design, sample, reconstruct and score.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunFlags,
        /// Also write the reference and output sequences as CSV.
        #[arg(long)]
        traces: bool,
    },
    /// Repeat `simulate` for several filter orders.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunFlags,
        /// Comma-separated even filter orders.
        #[arg(long, value_delimiter = ',', required = true)]
        orders: Vec<usize>,
    },
}

fn load(common: &Common) -> CliResult<(RunConfig, PathBuf)> {
    let config = RunConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((config, out))
}

fn report(written: &Written) {
    for p in &written.0 {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Design { common } => {
            let (config, out) = load(&common)?;
            report(&commands::design(&config, &out)?);
        }
        Command::Simulate { common, run, traces } => {
            let (mut config, out) = load(&common)?;
            commands::apply_overrides(&mut config, run.path.map(Into::into), run.no_noise);
            report(&commands::simulate(&config, &out, traces)?);
        }
        Command::Sweep { common, run, orders } => {
            let (mut config, out) = load(&common)?;
            commands::apply_overrides(&mut config, run.path.map(Into::into), run.no_noise);
            let (written, rows) = commands::sweep(&config, &orders, &out)?;
            report(&written);
            let mut first_err: Option<CliError> = None;
            let mut ok = 0;
            for row in rows {
                match row.result {
                    Ok(_) => ok += 1,
                    Err(e) => {
                        eprintln!("N = {}: {e}", row.order);
                        first_err.get_or_insert(e);
                    }
                }
            }
            // a sweep fails only when no order succeeded
            if ok == 0 {
                if let Some(e) = first_err {
                    return Err(e);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
