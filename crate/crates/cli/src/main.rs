use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use imbalance_core::payments::iterate_table;
use imbalance_core::witness::{default_partners, vickrey_triple};
use imbalance_core::{
    build_balance_system, solve_or_refute, theorem_verify, verify_certificate, vickrey_witness_set,
    BidVector, BidderId, LinearSystem, Outcome, PriceRule, TheoremReport,
};

const FOUND: u8 = 0;
const REFUTED: u8 = 3;

/// Exact checks of budget imbalance for symmetric auction payment rules.
///
/// Exit codes: 0 affirmative result, 3 refutation or failed hypothesis,
/// 2 usage or parse error, 1 internal failure.
#[derive(Parser, Debug)]
#[command(name = "imbalance", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a price rule on a bid vector file.
    Eval {
        #[arg(long)]
        rule: PriceRule,
        #[arg(long)]
        bids: PathBuf,
    },
    /// Verify the imbalance theorem on the built-in Vickrey instance of size n.
    Theorem {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value = "neg-second-price")]
        rule: PriceRule,
        #[arg(long, default_value = "neg-first-price")]
        g: PriceRule,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the payment derivations and the hypothesis log.
        #[arg(long)]
        trace: bool,
    },
    /// Write the witness set of size n as a JSON array of bid vectors.
    Witness {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decide whether budget balance is satisfiable on a witness file.
    CheckBalance {
        #[arg(long)]
        witness: PathBuf,
        #[arg(long)]
        rule: PriceRule,
    },
    /// Solve a linear system file.
    SolveSystem {
        #[arg(long)]
        system: PathBuf,
    },
}

/// A result the tool produced but could not confirm.
#[derive(Debug)]
struct Internal(String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Internal {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Internal>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn max_dom() -> Result<usize> {
    match std::env::var("IMBALANCE_MAX_DOM") {
        Ok(v) => v.parse().with_context(|| format!("IMBALANCE_MAX_DOM={v:?} is not a count")),
        Err(_) => Ok(10),
    }
}

fn guard_dom(size: usize) -> Result<()> {
    let cap = max_dom()?;
    if size > cap {
        bail!("{size} bidders exceeds IMBALANCE_MAX_DOM={cap}");
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Eval { rule, bids } => {
            let b: BidVector = serde_json::from_str(&read(&bids)?)
                .with_context(|| format!("parsing {}", bids.display()))?;
            guard_dom(b.len())?;
            println!("{}", rule.eval(&b)?);
            Ok(FOUND)
        }
        Command::Theorem { n, rule, g, out, trace } => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            guard_dom(n as usize + 2)?;
            let mut t = vickrey_triple(n)?;
            t.g = g;
            let partners_low = default_partners(&t.low);
            let partners_high = default_partners(&t.high);
            let report = theorem_verify(&rule, &t, &partners_low, &partners_high);
            if trace {
                print_trace(&rule, &[("low", &t.low, &partners_low), ("high", &t.high, &partners_high)], &report);
            }
            if let Some(path) = out {
                write(&path, &report.to_json())?;
            }
            println!("{}", report.summary());
            Ok(if report.holds { FOUND } else { REFUTED })
        }
        Command::Witness { n, out } => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            guard_dom(n as usize + 2)?;
            let set: Vec<BidVector> = vickrey_witness_set(n)?.into_iter().collect();
            write(&out, &serde_json::to_string_pretty(&set)?)?;
            println!("{} vectors written to {}", set.len(), out.display());
            Ok(FOUND)
        }
        Command::CheckBalance { witness, rule } => {
            let set: Vec<BidVector> = serde_json::from_str(&read(&witness)?)
                .with_context(|| format!("parsing {}", witness.display()))?;
            for b in &set {
                guard_dom(b.len())?;
            }
            let sys = build_balance_system(&set, &rule)?;
            report_outcome(&sys)
        }
        Command::SolveSystem { system } => {
            let sys = LinearSystem::from_json(&read(&system)?)
                .with_context(|| format!("parsing {}", system.display()))?;
            for m in &sys.variables {
                guard_dom(m.len())?;
            }
            report_outcome(&sys)
        }
    }
}

fn report_outcome(sys: &LinearSystem) -> Result<u8> {
    match solve_or_refute(sys) {
        Outcome::Feasible(sol) => {
            if !sys.is_satisfied_by(&sol.assignment) {
                return Err(Internal("solver returned an assignment that violates a row".into()).into());
            }
            println!("FEASIBLE");
            for (m, v) in sol.pinned.iter() {
                println!("P{m} = {v}");
            }
            Ok(FOUND)
        }
        Outcome::Infeasible(cert) => {
            if !verify_certificate(sys, &cert)? {
                return Err(Internal("solver returned a certificate that does not verify".into()).into());
            }
            println!("INFEASIBLE");
            println!("{}", serde_json::to_string(&cert)?);
            Ok(REFUTED)
        }
    }
}

type Side<'a> = (&'a str, &'a BidVector, &'a BTreeMap<BidderId, BidderId>);

fn print_trace(rule: &PriceRule, sides: &[Side<'_>], report: &TheoremReport) {
    for (label, b, partners) in sides {
        for (i, j) in partners.iter() {
            let (Some(fill), Some(_)) = (b.get(*j), b.get(*i)) else {
                continue;
            };
            let base: Vec<_> = b.without(&[*i, *j].into()).bag().values().cloned().collect();
            println!("# {label}: bidder {i} with partner {j}, fill {fill}");
            match iterate_table(b.len(), fill, &base, rule) {
                Ok((_, steps)) => print!("{steps}"),
                Err(e) => println!("  derivation unavailable: {e}"),
            }
        }
    }
    for h in &report.hypothesis_log {
        println!("[{}] {}: {}", if h.pass { "pass" } else { "fail" }, h.name, h.detail);
    }
}
