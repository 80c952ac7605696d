use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mns_cli::commands::{
    prepare_config, run_fidelity_sweep, run_find_mns, run_verify_dfs, show_result,
    write_fidelity_sweep, write_find_mns, Overrides,
};
use mns_cli::{CliError, EncodingFile, Result};

#[derive(Parser)]
#[command(
    name = "mns",
    version,
    about = "Search for minimal-noise subsystems of Lindblad noise models"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for the restart generator; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for restarts and sweep points.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the objective for every configured block shape.
    FindMns,
    /// Check that an encoding is decoherence free for the configured model.
    VerifyDfs {
        /// Encoding file written by `find-mns`.
        #[arg(long)]
        encoding: PathBuf,
    },
    /// Compare worst-case fidelities of the MNS and the reference encoding over a grid.
    FidelitySweep,
    /// Print a result file written by `find-mns` or `fidelity-sweep`.
    ShowResult { path: PathBuf },
}

fn config_path(cli: &Cli) -> Result<&PathBuf> {
    cli.config
        .as_ref()
        .ok_or_else(|| CliError::Validation("--config is required for this command".into()))
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::FindMns => {
            let cfg = prepare_config(config_path(cli)?, &overrides)?;
            let record = run_find_mns(&cfg)?;
            for r in &record.searches {
                println!(
                    "dims {}  J_opt {:.15}  is_dfs {}  agreement {:.2}",
                    r.dims, r.best_j, r.is_dfs, r.agreement
                );
            }
            for path in write_find_mns(&cfg, &record)? {
                println!("wrote {}", path.display());
            }
        }
        Command::VerifyDfs { encoding } => {
            let cfg = prepare_config(config_path(cli)?, &overrides)?;
            let file = EncodingFile::load(encoding)?;
            print!("{}", run_verify_dfs(&cfg, &file)?.render());
        }
        Command::FidelitySweep => {
            let cfg = prepare_config(config_path(cli)?, &overrides)?;
            let (points, record) = run_fidelity_sweep(&cfg)?;
            for p in points.iter().filter(|p| p.error.is_some()) {
                eprintln!(
                    "point {}: {}",
                    p.param,
                    p.error.as_deref().unwrap_or_default()
                );
            }
            let (csv, rec) = write_fidelity_sweep(&cfg, &points, &record)?;
            println!("wrote {}", csv.display());
            println!("wrote {}", rec.display());
        }
        Command::ShowResult { path } => print!("{}", show_result(path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are validation errors; help and version are not errors.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
