use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nvnmr::cli::{self, CliError};

#[derive(Parser)]
#[command(name = "nvnmr", about = "NV-detected Fourier NMR simulation and analysis", disable_version_flag = true)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise seed; overrides `protocol.noise.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parameter sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured protocol and write the signal CSV.
    Simulate,
    /// Transform a signal CSV and write spectrum and peak tables.
    Analyze { signal: PathBuf },
    /// Pulse-sequence programs.
    Seq {
        #[command(subcommand)]
        action: SeqAction,
    },
    /// Print the tool version.
    Version,
}

#[derive(Subcommand)]
enum SeqAction {
    /// Parse and dimension-check programs (file paths or shipped names).
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Print the canonical text of a program.
    Format {
        file: PathBuf,
        /// Rewrite the file in place.
        #[arg(long)]
        write: bool,
    },
    /// Print the flattened, timed schedule as CSV.
    Expand {
        file: PathBuf,
        /// Parameter binding `name=value`, value optionally with a unit.
        #[arg(long = "arg")]
        args: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Version => println!("nvnmr {}", cli::VERSION),
        Command::Simulate => {
            let config = cli.config.ok_or_else(|| CliError::Validation("simulate needs --config".into()))?;
            for p in cli::simulate(&config, cli.out.as_deref(), cli.seed)? {
                println!("{}", p.display());
            }
        }
        Command::Analyze { signal } => {
            for p in cli::analyze(&signal, cli.config.as_deref(), cli.out.as_deref())? {
                println!("{}", p.display());
            }
        }
        Command::Seq { action } => match action {
            SeqAction::Check { files } => print!("{}", cli::seq_check(&files)?),
            SeqAction::Format { file, write } => {
                let text = cli::seq_format(&file)?;
                if write {
                    std::fs::write(&file, text).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
                } else {
                    print!("{text}");
                }
            }
            SeqAction::Expand { file, args } => {
                let (name, csv) = cli::seq_expand(&file, &args)?;
                match cli.out {
                    Some(dir) => {
                        let path = dir.join(format!("{name}_schedule.csv"));
                        std::fs::create_dir_all(&dir)
                            .and_then(|_| std::fs::write(&path, csv))
                            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                        println!("{}", path.display());
                    }
                    None => print!("{csv}"),
                }
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
