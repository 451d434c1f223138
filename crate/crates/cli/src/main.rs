//! `ccl`: run experiments from a config file, or the exact-oracle self-test.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use ccl_core::config::{KeyValues, RunConfig};
use ccl_core::experiments::{self, ExperimentReport};
use ccl_core::green::GreenEvaluator;
use ccl_core::selftest::run_checks;
use ccl_core::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ccl", version, about = "Cover times on discrete cylinders and random interlacements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; writes <out>/<name>.csv and <out>/<name>.json.
    Run {
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `replicas` in the config.
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long, env = "CCL_THREADS")]
        threads: Option<usize>,
    },
    /// Exact-oracle residual checks.
    Selftest {
        /// Multiply g(0) by this factor to check that the self-test notices.
        #[arg(long)]
        fault_origin: Option<f64>,
        #[arg(long, env = "CCL_THREADS")]
        threads: Option<usize>,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_VERDICT: u8 = 2;

fn set_threads(threads: Option<usize>) {
    if let Some(t) = threads.filter(|&t| t > 0) {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn load_config(
    path: &Path,
    experiment: Option<String>,
    seed: Option<u64>,
    replicas: Option<usize>,
) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    let mut kv = KeyValues::parse(&text)?;
    if let Some(e) = experiment {
        kv.set("experiment", e);
    }
    if let Some(s) = seed {
        kv.set("seed", s);
    }
    if let Some(r) = replicas {
        kv.set("replicas", r);
    }
    RunConfig::from_key_values(&kv)
}

fn write_report(report: &ExperimentReport, out: &Path, stem: &str) -> Result<(PathBuf, PathBuf), Error> {
    fs::create_dir_all(out)?;
    let csv = out.join(format!("{stem}.csv"));
    let json = out.join(format!("{stem}.json"));
    fs::write(&csv, report.to_csv()?)?;
    fs::write(&json, report.to_json()?)?;
    Ok((csv, json))
}

fn print_verdicts(report: &ExperimentReport) {
    for v in &report.verdicts {
        println!("{:4}  {:<40} {:>12.6}  accept {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.value, v.accept);
    }
}

fn cmd_run(
    experiment: Option<String>,
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    replicas: Option<usize>,
) -> ExitCode {
    let cfg = match load_config(config, experiment, seed, replicas) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let start = Instant::now();
    let report = match experiments::run(&cfg) {
        Ok(r) => r,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    match write_report(&report, out, stem) {
        Ok((csv, json)) => println!("wrote {} and {} in {:.1?}", csv.display(), json.display(), start.elapsed()),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    print_verdicts(&report);
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERDICT)
    }
}

fn cmd_selftest(fault: Option<f64>) -> ExitCode {
    let start = Instant::now();
    let mut green = GreenEvaluator::new(2, 1e-8).expect("valid parameters");
    if let Some(s) = fault {
        println!("fault injection: g(0) scaled by {s}");
        green = green.with_origin_fault(s);
    }
    let checks = match run_checks(&green, &[4, 6, 8]) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("{:<44} {:>12} {:>10}", "check", "residual", "threshold");
    for c in &checks {
        println!(
            "{:<44} {:>12.3e} {:>10.1e}  {}",
            c.name,
            c.value,
            c.threshold,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    println!("selftest finished in {:.1?}", start.elapsed());
    if checks.iter().all(|c| c.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERDICT)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            experiment,
            config,
            seed,
            out,
            replicas,
            threads,
        } => {
            set_threads(threads);
            cmd_run(experiment, &config, seed, &out, replicas)
        }
        Command::Selftest { fault_origin, threads } => {
            set_threads(threads);
            cmd_selftest(fault_origin)
        }
    }
}
