//! Command-line front end for the chanest link testbench.
//!
//! Exit codes: 0 on success, 2 for usage errors (unknown flags, unreadable
//! or unparsable config files), 1 for runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chanest::bench::{run_demo, run_sweep, ExperimentConfig, Method};
use chanest::selftest;

const USAGE_EXIT: u8 = 2;
const FAILURE_EXIT: u8 = 1;

#[derive(Parser)]
#[command(
    name = "chanest",
    version,
    about = "Link-level testbench for one-bit massive MIMO channel estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an SNR sweep and emit the per-method NMSE table as CSV.
    Sweep(SweepArgs),
    /// Run the fast invariant checks and report each one.
    Selftest,
    /// Run a single realization at one SNR and print per-stage NMSE.
    Demo(DemoArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the CSV report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Replace the configured SNR grid (dB values; negatives accepted).
    #[arg(long, value_name = "DB", value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Replace the configured method list.
    #[arg(long, value_name = "NAME", value_delimiter = ',', num_args = 1..)]
    methods: Option<Vec<String>>,
    /// Replace the configured realization count.
    #[arg(long, value_name = "N")]
    realizations: Option<usize>,
    /// Record wall-clock seconds per report row (report is no longer
    /// bit-reproducible across machines when set).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct DemoArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// SNR of the demonstrated realization in dB (negatives accepted).
    #[arg(long, value_name = "DB", default_value_t = 5.0, allow_hyphen_values = true)]
    snr: f64,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment description; defaults apply for omitted sections.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the master seed from the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

impl ConfigArgs {
    /// Loads the experiment config, or defaults when no file was given.
    /// Load failures are usage errors: the message plus a usage hint go to
    /// stderr and the process exits 2.
    fn resolve(&self) -> Result<ExperimentConfig, ExitCode> {
        let mut cfg = match &self.config {
            None => ExperimentConfig::default(),
            Some(path) => match ExperimentConfig::load(path) {
                Ok(cfg) => cfg,
                Err(err) => {
                    eprintln!("error: cannot use config {}: {err}", path.display());
                    eprintln!("usage: chanest <sweep|demo> [--config FILE] ...");
                    return Err(ExitCode::from(USAGE_EXIT));
                }
            },
        };
        if let Some(seed) = self.seed {
            cfg.system.seed = seed;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Selftest => run_selftest(),
        Command::Demo(args) => demo(args),
    }
}

fn sweep(args: SweepArgs) -> ExitCode {
    let mut cfg = match args.config.resolve() {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if let Some(snr) = args.snr {
        cfg.sweep.snr_db = snr;
    }
    if let Some(names) = args.methods {
        let mut methods = Vec::with_capacity(names.len());
        for name in &names {
            match Method::parse(name) {
                Ok(m) => methods.push(m),
                Err(err) => {
                    eprintln!("error: {err}");
                    return ExitCode::from(USAGE_EXIT);
                }
            }
        }
        cfg.sweep.methods = methods;
    }
    if let Some(realizations) = args.realizations {
        cfg.sweep.realizations = realizations;
    }
    if args.timing {
        cfg.sweep.timing = true;
    }

    let report = match run_sweep(&cfg) {
        Ok(report) => report,
        Err(err) => {
            eprintln!("error: sweep failed: {err}");
            return ExitCode::from(FAILURE_EXIT);
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(err) = report.write_to_path(path) {
                eprintln!("error: cannot write {}: {err}", path.display());
                return ExitCode::from(FAILURE_EXIT);
            }
            eprintln!("wrote {} rows to {}", report.rows().len(), path.display());
        }
        None => print!("{}", report.to_csv()),
    }
    ExitCode::SUCCESS
}

fn run_selftest() -> ExitCode {
    let mut failures = 0usize;
    for (name, outcome) in selftest::run_all() {
        match outcome {
            Ok(()) => println!("{name:<24} ok"),
            Err(err) => {
                failures += 1;
                println!("{name:<24} FAILED: {err}");
            }
        }
    }
    if failures == 0 {
        println!("all checks passed");
        ExitCode::SUCCESS
    } else {
        eprintln!("error: {failures} check(s) failed");
        ExitCode::from(FAILURE_EXIT)
    }
}

fn demo(args: DemoArgs) -> ExitCode {
    let cfg = match args.config.resolve() {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    match run_demo(&cfg, args.snr) {
        Ok(report) => {
            println!("snr {:.1} dB, one realization:", report.snr_db);
            println!("  stage1       nmse = {:>8.3} dB", report.stage1_nmse_db);
            println!("  pipeline     nmse = {:>8.3} dB", report.pipeline_nmse_db);
            println!("  bussgang-ls  nmse = {:>8.3} dB", report.bussgang_ls_nmse_db);
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: demo failed: {err}");
            ExitCode::from(FAILURE_EXIT)
        }
    }
}
