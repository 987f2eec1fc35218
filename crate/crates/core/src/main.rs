use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use onebit_dmimo::config::{ExperimentKind, ScenarioConfig};
use onebit_dmimo::experiments::{rederive, run_sweep};
use onebit_dmimo::validate::{run_suites, Suite, ValidateOptions};
use onebit_dmimo::Error;

/// Distributed massive MIMO with 1-bit ADCs: sweeps, power/dithering
/// optimization and self-checks.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SINDR versus common UE power (or cluster distance).
    SndrSweep(RunArgs),
    /// Minimum sum power versus SINDR target.
    Minpower(RunArgs),
    /// Max-min SINDR versus per-UE power cap.
    Maxmin(RunArgs),
    /// 16-QAM symbol error rate at the max-min operating point.
    Ser(RunArgs),
    /// Run the oracle suites, or re-derive a finished run.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `section.key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set geometry.antennas=64`. Wins over the file.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (same as `--set output.dir=DIR`).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Run only these suites (gradients, cr-oracle, scale-invariance, receiver-order, bcd-detectors).
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Re-derive every logged SINDR of the run in this directory instead.
    #[arg(long, value_name = "DIR")]
    rederive: Option<PathBuf>,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(match e {
        Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    })
}

fn run(kind: ExperimentKind, args: RunArgs) -> ExitCode {
    let mut cfg = match ScenarioConfig::load(args.config.as_deref(), &args.overrides) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if args.print_config {
        print!("{}", cfg.render());
        return ExitCode::SUCCESS;
    }
    if let Err(e) = cfg.validate(kind) {
        return fail(e);
    }
    let output = match run_sweep(kind, &cfg) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    if let Err(e) = output.write_to(&cfg.output_dir) {
        return fail(e);
    }
    for a in &output.artifacts {
        println!("{}", cfg.output_dir.join(&a.name).display());
    }
    if output.flagged > 0 {
        eprintln!(
            "{} row(s) flagged infeasible or failed; see the status column",
            output.flagged
        );
    }
    ExitCode::SUCCESS
}

fn validate(args: ValidateArgs) -> ExitCode {
    if let Some(dir) = args.rederive {
        return match rederive(&dir) {
            Ok(r) => {
                println!(
                    "{} rows re-derived ({} skipped), max relative SINDR error {:.3e}",
                    r.rows_checked, r.rows_skipped, r.max_rel_error
                );
                for p in &r.problems {
                    println!("  {p}");
                }
                if r.passed(1e-8) {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_FAILURE)
                }
            }
            Err(e) => fail(e),
        };
    }
    let mut suites = Vec::new();
    for name in &args.only {
        match Suite::parse(name) {
            Some(s) => suites.push(s),
            None => {
                eprintln!("error: unknown suite `{name}`");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    if suites.is_empty() {
        suites = Suite::ALL.to_vec();
    }
    let reports = run_suites(&suites, &ValidateOptions::default());
    let mut ok = true;
    for r in &reports {
        println!(
            "{} {:<15} {:>5} checks  worst {:.2e}  {:.1}s",
            if r.passed() { "PASS" } else { "FAIL" },
            r.suite.name(),
            r.checks,
            r.worst,
            r.elapsed.as_secs_f64()
        );
        for f in r.failures.iter().take(10) {
            println!("    {f}");
        }
        ok &= r.passed();
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::SndrSweep(a) => run(ExperimentKind::SndrSweep, a),
        Command::Minpower(a) => run(ExperimentKind::MinPower, a),
        Command::Maxmin(a) => run(ExperimentKind::MaxMin, a),
        Command::Ser(a) => run(ExperimentKind::Ser, a),
        Command::Validate(a) => validate(a),
    }
}
