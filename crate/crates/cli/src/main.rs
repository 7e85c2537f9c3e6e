use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sfde_cli::config::ModeConfig;
use sfde_cli::{Overrides, Vary};

#[derive(Parser)]
#[command(name = "sfde", version, about = "Prices and initial-segment deltas for SFDE market models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Consistent,
    #[value(alias = "paper_literal")]
    PaperLiteral,
}

#[derive(Clone, Copy, ValueEnum)]
enum VaryArg {
    H,
    Paths,
    Eps,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Risk-neutral weight formula.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every estimator listed in the config.
    Run(Common),
    /// Repeat the run over a list of step sizes, path counts or FD steps.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        vary: VaryArg,
        /// Sweep points, space or comma separated.
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        seed: c.seed,
        n_paths: c.paths,
        out: c.out.clone(),
        mode: c.mode.map(|m| match m {
            Mode::Consistent => ModeConfig::Consistent,
            Mode::PaperLiteral => ModeConfig::PaperLiteral,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Run(c) => sfde_cli::run(&c.config, &overrides(c), &mut stdout),
        Command::Sweep { common, vary, values } => {
            let vary = match vary {
                VaryArg::H => Vary::H,
                VaryArg::Paths => Vary::Paths,
                VaryArg::Eps => Vary::Eps,
            };
            sfde_cli::sweep(&common.config, &overrides(common), vary, values, &mut stdout)
        }
    };
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
