use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crossalign_cli::commands::{
    cmd_bench, cmd_match, cmd_refine, cmd_simulate, BenchArgs, CliError, MatchArgs, RefineArgs, SimulateArgs,
};
use crossalign_core::matching::AblationMode;

#[derive(Parser)]
#[command(name = "crossalign", version, about = "Match LiDAR and camera skeletons without extrinsic calibration")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match each camera stream against a LiDAR stream.
    Match {
        lidar: PathBuf,
        #[arg(required = true)]
        cameras: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "P&T&K")]
        mode: AblationMode,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Refine LiDAR skeletons with matched camera detections.
    Refine {
        lidar: PathBuf,
        #[arg(required = true)]
        matches: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a synthetic scene.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the ablation benchmark and write a CSV report.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<AblationMode>,
    },
    /// Print the version.
    Version,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let work = move || -> Result<(), CliError> {
        match cli.command {
            Command::Match { lidar, cameras, out, config, mode, seed } => {
                for p in cmd_match(&MatchArgs { lidar, cameras, out, config, mode, seed })? {
                    println!("{}", p.display());
                }
            }
            Command::Refine { lidar, matches, out, config } => {
                println!("{}", cmd_refine(&RefineArgs { lidar, matches, out, config })?.display());
            }
            Command::Simulate { config, out, seed } => {
                for p in cmd_simulate(&SimulateArgs { config, out, seed })? {
                    println!("{}", p.display());
                }
            }
            Command::Bench { config, out, seed, mode } => {
                println!("{}", cmd_bench(&BenchArgs { config, out, seed, mode })?.display());
            }
            Command::Version => println!("crossalign {}", env!("CARGO_PKG_VERSION")),
        }
        Ok(())
    };
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
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
            ExitCode::from(e.exit_code())
        }
    }
}
