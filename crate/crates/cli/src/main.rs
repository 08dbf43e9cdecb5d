//! `lcm`: simulate, verify and tabulate look-compute-move scenarios.
//!
//! Exit status: 0 the claim is confirmed, 1 refuted, 2 inconclusive,
//! 3 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lcm_core::algorithms::{builtin_for, Algorithm, Table};
use lcm_core::checker::{verify_impossibility, verify_solution, Bounds, Certificate, Outcome};
use lcm_core::problems::Verdict;
use lcm_core::report::{build_report, parse_verdicts, ReportError};
use lcm_core::scenario::{parse_scenario, AlgorithmRef, Expectation, Scenario};
use lcm_core::simulate::{simulate, Adversary};

#[derive(Parser)]
#[command(name = "lcm", version, about = "Look-compute-move robots on graphs: simulator and bounded verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one execution and judge it.
    Simulate {
        scenario: PathBuf,
        /// `full`, `random:<seed>` or `script:<path>`; defaults to
        /// `random:<scenario seed>` when the scenario sets one, else `full`.
        #[arg(long)]
        adversary: Option<String>,
        #[arg(long, default_value_t = 100)]
        rounds: usize,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Bounded verification of a solution or of impossibility.
    Verify {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        palette: Option<u8>,
        /// Write the certificate here instead of stdout.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Derive the comparison table from a verdict file.
    Report {
        #[arg(long)]
        verdicts: PathBuf,
        /// Also print the derivation behind each resolved cell.
        #[arg(long)]
        provenance: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Solution,
    Impossibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Confirmed = 0,
    Refuted = 1,
    Inconclusive = 2,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&read(path)?).with_context(|| format!("in scenario {}", path.display()))
}

fn load_algorithm(scenario: &Scenario, path: &Path) -> Result<Algorithm> {
    match &scenario.algorithm {
        None => bail!("scenario {} names no algorithm", path.display()),
        Some(AlgorithmRef::Builtin(name)) => Ok(builtin_for(name, &scenario.problem)?),
        Some(AlgorithmRef::TableFile(file)) => {
            let full = path.parent().unwrap_or(Path::new(".")).join(file);
            let table = Table::parse(&read(&full)?).with_context(|| format!("in table {}", full.display()))?;
            let algo = Algorithm::Table(table);
            algo.check_model(scenario.model)?;
            Ok(algo)
        }
    }
}

fn emit(text: &str, to: Option<&Path>) -> Result<()> {
    match to {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_simulate(scenario: &Path, adversary: Option<String>, rounds: usize, trace: Option<PathBuf>) -> Result<Status> {
    let s = load_scenario(scenario)?;
    let algo = load_algorithm(&s, scenario)?;
    let spec = adversary.unwrap_or_else(|| if s.seed != 0 { format!("random:{}", s.seed) } else { "full".into() });
    let base = scenario.parent().unwrap_or(Path::new("."));
    let adversary = Adversary::parse(&spec, |p| fs::read_to_string(base.join(p))).map_err(anyhow::Error::msg)?;
    let run = simulate(&s.problem, s.model, s.scheduler, &algo, &adversary, rounds)?;
    let mut text = run.trace.join("\n");
    text.push('\n');
    emit(&text, trace.as_deref())?;
    println!("verdict {}", run.verdict);
    Ok(match run.verdict {
        Verdict::Satisfied => Status::Confirmed,
        Verdict::Violated { .. } => Status::Refuted,
        Verdict::Pending => Status::Inconclusive,
    })
}

/// How a certificate bears on the scenario's expectation.
fn judge(cert: &Certificate, expect: Expectation) -> Status {
    match (&cert.outcome, expect) {
        (Outcome::Solved { .. }, Expectation::Solvable) | (Outcome::Impossible(_), Expectation::Unsolvable) => {
            Status::Confirmed
        }
        (Outcome::Solved { .. }, Expectation::Unsolvable) | (Outcome::Impossible(_), Expectation::Solvable) => {
            Status::Refuted
        }
        // A failing algorithm refutes a claimed solution, but says nothing
        // about whether some other algorithm exists.
        (Outcome::Violated(_), Expectation::Solvable) => Status::Refuted,
        (Outcome::Violated(_), Expectation::Unsolvable) | (Outcome::Inconclusive { .. }, _) => Status::Inconclusive,
    }
}

fn run_verify(
    scenario: &Path,
    mode: Mode,
    depth: Option<usize>,
    window: Option<usize>,
    palette: Option<u8>,
    certificate: Option<PathBuf>,
) -> Result<Status> {
    let s = load_scenario(scenario)?;
    let bounds = Bounds {
        max_depth: depth.unwrap_or(s.bounds.max_depth),
        window: window.unwrap_or(s.bounds.window),
        palette: palette.unwrap_or(s.bounds.palette),
    };
    let (cert, default_expect) = match mode {
        Mode::Solution => {
            let algo = load_algorithm(&s, scenario)?;
            (verify_solution(&algo, &s.problem, s.model, s.scheduler, bounds)?, Expectation::Solvable)
        }
        Mode::Impossibility => {
            (verify_impossibility(&s.problem, s.model.tag, s.scheduler, bounds)?, Expectation::Unsolvable)
        }
    };
    emit(&cert.to_text(s.problem.graph()), certificate.as_deref())?;
    let status = judge(&cert, s.expect.unwrap_or(default_expect));
    eprintln!("{} ({:?})", cert.tag(), status);
    Ok(status)
}

fn run_report(verdicts: &Path, provenance: bool) -> Result<Status> {
    let inputs = parse_verdicts(&read(verdicts)?).with_context(|| format!("in verdict file {}", verdicts.display()))?;
    let report = match build_report(&inputs) {
        Ok(r) => r,
        Err(e @ ReportError::Contradiction { .. }) => {
            eprintln!("error: {e}");
            return Ok(Status::Refuted);
        }
        Err(e) => return Err(e.into()),
    };
    print!("{}", report.render());
    if provenance {
        println!();
        print!("{}", report.provenance_text());
    }
    Ok(Status::Confirmed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate { scenario, adversary, rounds, trace } => run_simulate(&scenario, adversary, rounds, trace),
        Command::Verify { scenario, mode, depth, window, palette, certificate } => {
            run_verify(&scenario, mode, depth, window, palette, certificate)
        }
        Command::Report { verdicts, provenance } => run_report(&verdicts, provenance),
    };
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
