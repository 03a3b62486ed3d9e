use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qgen::bounds::BoundName;
use qgen::scenarios::ScenarioKind;
use qgen_cli::{
    describe_failure, emit_report, parse_config, run_certify, run_sweep, selftest, Format, RunError, EXIT_CONFIG,
    EXIT_FAILED, EXIT_OK,
};

#[derive(Parser)]
#[command(name = "qgen", version, about = "Generalization certificates for learners on classical-quantum data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate and certify the configured scenario at one point.
    Certify(RunArgs),
    /// Run the [sweep] section of the config.
    Sweep(RunArgs),
    /// Scenario catalogue.
    Scenarios {
        #[command(subcommand)]
        action: ScenariosAction,
    },
    /// Run the built-in invariant checks.
    Selftest {
        /// Larger instance counts.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Subcommand)]
enum ScenariosAction {
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    Thm21,
    Cor22,
    Cor24,
    Cor26,
}

impl From<BoundArg> for BoundName {
    fn from(b: BoundArg) -> Self {
        match b {
            BoundArg::Thm21 => BoundName::Thm21,
            BoundArg::Cor22 => BoundName::Cor22,
            BoundArg::Cor24 => BoundName::Cor24,
            BoundArg::Cor26 => BoundName::Cor26,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    bound: Option<BoundArg>,
    #[arg(long, default_value = "qgen-out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "QGEN_JOBS")]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    format: FormatArg,
}

fn run(args: RunArgs, sweep: bool) -> Result<i32, RunError> {
    if let Some(j) = args.jobs {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let mut cfg = parse_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let bound = args.bound.map(BoundName::from);
    let start = Instant::now();
    let report = if sweep { run_sweep(&cfg, bound)? } else { run_certify(&cfg, bound)? };
    let format = match args.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
        FormatArg::Both => Format::Both,
    };
    let written = emit_report(&report, &args.out, format)?;
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    eprintln!("wall time {:.3}s", start.elapsed().as_secs_f64());
    let failing = report.failing();
    if failing.is_empty() {
        let certified = report.points.iter().filter(|p| p.certificate.is_some()).count();
        eprintln!("{certified} of {} point(s) certified, all hold", report.points.len());
        if certified < report.points.len() {
            eprintln!("points without a certificate are too large for exact evaluation; see their notes");
        }
        Ok(EXIT_OK)
    } else {
        for p in failing {
            eprintln!("FAILED {}", describe_failure(p));
        }
        Ok(EXIT_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match cli.command {
        Command::Certify(a) => run(a, false),
        Command::Sweep(a) => run(a, true),
        Command::Scenarios {
            action: ScenariosAction::List,
        } => {
            for k in ScenarioKind::ALL {
                println!("{:<22} axes: {:<36} {}", k.as_str(), k.axes().join(","), k.description());
            }
            Ok(EXIT_OK)
        }
        Command::Selftest { full } => {
            let checks = selftest::run(!full);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_FAILED })
        }
    };
    match code {
        Ok(c) => ExitCode::from(c as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
