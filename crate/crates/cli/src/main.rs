use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use helpkit::report::{self, Branch, RunConfig, Task};

#[derive(Parser)]
#[command(
    name = "helpkit",
    version,
    disable_help_subcommand = true,
    about = "HeLP, lattice and module checks for torsion units of integral group rings"
)]
struct Cli {
    #[command(subcommand)]
    task: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate partial augmentations that survive the HeLP constraints.
    Help(Common),
    /// Check the Zassenhaus conjecture for the given orders.
    Zc(Common),
    /// Decide whether units of order p·q exist.
    Pq(Common),
    /// Apply the lattice obstruction to exceptional HeLP candidates.
    LatticeCheck(Common),
    /// Run the order 2p module derivation against a fact set.
    Order6Derive(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Args)]
struct Common {
    /// Bundled group name or path to a group file.
    #[arg(long)]
    group: String,
    /// Comma-separated unit orders.
    #[arg(long, value_delimiter = ',')]
    orders: Vec<u64>,
    /// Prime pair `p,q`.
    #[arg(long, value_parser = parse_pair)]
    pair: Option<(u64, u64)>,
    /// Comma-separated character names; default is every usable character.
    #[arg(long, value_delimiter = ',')]
    chars: Vec<String>,
    /// Bundled fact set name or path to a fact file.
    #[arg(long)]
    facts: Option<String>,
    /// Representations `A:B` for the lattice obstruction.
    #[arg(long, value_parser = parse_lattice_pair)]
    lattice_pair: Option<(String, String)>,
    /// Restrict to systems whose power maps pass through this class.
    #[arg(long, default_value = "all")]
    branch: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Worker threads for the inner searches.
    #[arg(long)]
    threads: Option<usize>,
    /// Include eigenvalue multiplicity tables for every system.
    #[arg(long)]
    mu_tables: bool,
    /// Extra side constraint `order:class=value:provenance`; repeatable.
    #[arg(long, value_parser = parse_side)]
    side: Vec<helpkit::grpdata::SideConstraint>,
}

fn parse_pair(s: &str) -> Result<(u64, u64), String> {
    let (p, q) = s.split_once(',').ok_or("expected p,q")?;
    Ok((p.trim().parse().map_err(|_| "p is not an integer")?, q.trim().parse().map_err(|_| "q is not an integer")?))
}

fn parse_lattice_pair(s: &str) -> Result<(String, String), String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B")?;
    Ok((a.trim().to_string(), b.trim().to_string()))
}

fn parse_side(s: &str) -> Result<helpkit::grpdata::SideConstraint, String> {
    report::parse_side(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (task, c) = match cli.task {
        Command::Help(c) => (Task::Help, c),
        Command::Zc(c) => (Task::Zc, c),
        Command::Pq(c) => (Task::Pq, c),
        Command::LatticeCheck(c) => (Task::LatticeCheck, c),
        Command::Order6Derive(c) => (Task::Order6Derive, c),
    };
    if let Some(n) = c.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let cfg = RunConfig {
        group: c.group,
        task,
        orders: c.orders,
        pair: c.pair,
        characters: c.chars,
        side: c.side,
        facts: c.facts,
        lattice_pair: c.lattice_pair,
        branch: if c.branch == "all" { Branch::All } else { Branch::Class(c.branch) },
        mu_tables: c.mu_tables,
    };
    match report::run(&cfg) {
        Ok(r) => {
            match c.format {
                Format::Text => print!("{}", r.to_text()),
                Format::Structured => println!("{}", r.to_json()),
            }
            ExitCode::from(r.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
