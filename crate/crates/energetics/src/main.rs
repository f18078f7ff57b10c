use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use energetics::compare::{self, CompareError, SCENARIO_COPY};
use energetics::{audit, canonical_toml, emit_report, load_scenario, LoadError, RunError};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_BREACH: u8 = 3;

#[derive(Parser)]
#[command(name = "energetics", version, about = "Embodied-energy economy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's horizon.
        #[arg(long)]
        weeks: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a scenario.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        /// Print the canonical form with all defaults.
        #[arg(long)]
        canonical: bool,
    },
    /// Compare a variant run against its baseline.
    Compare {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        variant: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check an energy journal offline.
    Audit {
        #[arg(long)]
        journal: PathBuf,
        /// Stock file to reconcile against.
        #[arg(long)]
        stock: Option<PathBuf>,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn load(path: &Path) -> Result<energetics_core::Scenario, ExitCode> {
    load_scenario(path).map_err(|e| match e {
        LoadError::Io { .. } => fail(EXIT_USAGE, e),
        LoadError::Scenario(_) => fail(EXIT_VALIDATION, e),
    })
}

fn run(scenario: PathBuf, seed: Option<u64>, weeks: Option<u32>, out: PathBuf) -> ExitCode {
    let mut s = match load(&scenario) {
        Ok(s) => s,
        Err(c) => return c,
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(w) = weeks {
        s.weeks = w;
    }
    let report = match energetics::run_scenario(s.clone(), None, None) {
        Ok(r) => r,
        Err(RunError::Scenario(e)) => return fail(EXIT_VALIDATION, e),
        Err(RunError::Abort(a)) => {
            eprintln!("error: {a}");
            if let Some(actor) = a.actor {
                eprintln!("actor: {actor}");
            }
            eprintln!("journal tail:");
            for e in &a.journal_tail {
                eprintln!("  {}", serde_json::to_string(e).unwrap_or_default());
            }
            return ExitCode::from(EXIT_BREACH);
        }
    };
    if let Err(e) = emit_report(&report, &out).and_then(|_| std::fs::write(out.join(SCENARIO_COPY), canonical_toml(&s)))
    {
        return fail(EXIT_USAGE, format!("cannot write report to {}: {e}", out.display()));
    }
    println!(
        "ran {} weeks, seed {}, digest {}",
        report.weeks, report.seed, report.final_digest
    );
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            seed,
            weeks,
            out,
        } => run(scenario, seed, weeks, out),
        Command::Validate { scenario, canonical } => match load(&scenario) {
            Ok(s) => {
                if canonical {
                    print!("{}", canonical_toml(&s));
                } else {
                    println!("ok {}", s.digest());
                }
                ExitCode::SUCCESS
            }
            Err(c) => c,
        },
        Command::Compare { base, variant, out } => match compare::compare_runs(&base, &variant) {
            Ok(c) => {
                if let Err(e) = compare::write_comparison(&c, &out) {
                    return fail(EXIT_USAGE, e);
                }
                match c.event_week {
                    Some(w) => println!("compared {} weeks, event at week {w}", c.weeks),
                    None => println!("compared {} weeks, no policy difference", c.weeks),
                }
                ExitCode::SUCCESS
            }
            Err(e @ CompareError::Io(_)) => fail(EXIT_USAGE, e),
            Err(e) => fail(EXIT_VALIDATION, e),
        },
        Command::Audit { journal, stock } => match audit::audit_journal(&journal, stock.as_deref()) {
            Ok(o) if o.is_clean() => {
                println!("ok: {} entries, drift 0", o.entries);
                ExitCode::SUCCESS
            }
            Ok(o) => {
                eprintln!("journal fails audit: drift {}", o.drift);
                for l in &o.malformed {
                    eprintln!("  malformed entry at line {l}");
                }
                for (a, l) in &o.negative {
                    eprintln!("  {a} negative at line {l}");
                }
                for (a, j, s) in &o.stock_mismatches {
                    eprintln!("  {a}: journal {j}, stock {s}");
                }
                ExitCode::from(EXIT_BREACH)
            }
            Err(e) => fail(EXIT_USAGE, e),
        },
    }
}
