use std::path::PathBuf;
use std::process::ExitCode;

use active_stokes::experiments::{run_all, Manifest, RunOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "active-stokes", version, about = "Reproducible micro-swimmer suspension experiments")]
struct Cli {
    #[command(flatten)]
    opts: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Replace each experiment's seed list by seed, seed+1, ...
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for CSV and metadata output.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Multiply every check tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    /// Run independent experiments concurrently.
    #[arg(long, global = true)]
    concurrent: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments listed in a TOML file.
    Run { spec_file: PathBuf },
    /// Run every experiment family, with reduced sizes under --quick.
    Check {
        #[arg(long)]
        quick: bool,
    },
    /// Print the default manifest with every parameter resolved.
    ExportConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.opts.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let manifest = match &cli.command {
        Command::ExportConfig => {
            return match Manifest::default_manifest().to_toml() {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
        Command::Check { quick: false } => Manifest::default_manifest(),
        Command::Check { quick: true } => Manifest::quick(),
        Command::Run { spec_file } => match std::fs::read_to_string(spec_file).map_err(Into::into).and_then(|t| Manifest::parse(&t)) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {}: {e}", spec_file.display());
                return ExitCode::from(2);
            }
        },
    };
    if !(cli.opts.tolerance_scale > 0.0) {
        eprintln!("error: --tolerance-scale must be positive");
        return ExitCode::from(2);
    }
    let opts = RunOptions {
        seed: cli.opts.seed,
        tolerance_scale: cli.opts.tolerance_scale,
        out_dir: Some(cli.opts.out_dir.clone()),
        concurrent: cli.opts.concurrent,
    };
    let summary = match run_all(&manifest.experiment, &opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for line in summary.lines() {
        println!("{line}");
    }
    for r in &summary.reports {
        for note in &r.notes {
            println!("note {}: {note}", r.stem);
        }
    }
    match &summary.first_failure {
        None => {
            println!("all {} experiments passed; output in {}", summary.reports.len(), cli.opts.out_dir.display());
            ExitCode::SUCCESS
        }
        Some(why) => {
            println!("first failure: {why}");
            ExitCode::from(summary.exit_code() as u8)
        }
    }
}
