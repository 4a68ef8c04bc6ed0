use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use horodrift::error::Result;
use horodrift::harness::config::{parse_assignments, Assignment};
use horodrift::harness::{self, ExperimentConfig, ResultRecord, SelftestOptions, Store};

const DEFAULT_STORE: &str = "horodrift-results.jsonl";
const DEFAULT_GROUPS: [&str; 4] = ["z:1", "z:2", "free:2", "free:3"];

#[derive(Parser)]
#[command(name = "horodrift", version, about = "Brownian drift and entropy experiments on model spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List space and group ids.
    Spaces,
    /// Run one estimator and append its records to the store.
    Run(RunArgs),
    /// Estimate ℓ, h, v, λ and judge the six inequalities.
    Check(RunArgs),
    /// Exact drift and entropy of simple random walks on groups.
    Group(GroupArgs),
    /// Markdown report of a record store.
    Report(ReportArgs),
    /// Reduced invariant suite of every module.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    space: Option<String>,
    #[arg(long)]
    quantity: Option<String>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horofunction: Option<String>,
    #[arg(long)]
    group: Option<String>,
    /// Record store (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct GroupArgs {
    /// Group ids such as z:2 or free:2.
    groups: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct ReportArgs {
    /// Only this space or group id.
    #[arg(long)]
    space: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiply the heat kernel used by the semigroup check (fault injection).
    #[arg(long, default_value_t = 1.0, hide = true)]
    kernel_scale: f64,
}

fn config_from_args(a: &RunArgs, forced: Option<&str>) -> Result<ExperimentConfig> {
    let mut items: Vec<Assignment> = match &a.config {
        Some(path) => parse_assignments(&std::fs::read_to_string(path)?)?,
        None => Vec::new(),
    };
    let flag = |key: &str, value: Option<String>| {
        value.map(|value| Assignment {
            line: 0,
            key: key.to_string(),
            value,
        })
    };
    items.extend(
        [
            flag("space", a.space.clone()),
            flag("group", a.group.clone()),
            flag("quantity", forced.map(str::to_string).or_else(|| a.quantity.clone())),
            flag("T", a.t.map(|v| v.to_string())),
            flag("dt", a.dt.map(|v| v.to_string())),
            flag("paths", a.paths.map(|v| v.to_string())),
            flag("seed", a.seed.map(|v| v.to_string())),
            flag("horofunction", a.horofunction.clone()),
            flag("out", a.out.as_ref().map(|p| p.display().to_string())),
        ]
        .into_iter()
        .flatten(),
    );
    ExperimentConfig::from_assignments(&items)
}

fn print_records(records: &[ResultRecord], format: Format) -> Result<()> {
    match format {
        Format::Json => {
            for r in records {
                println!("{}", r.to_line()?);
            }
        }
        Format::Csv => print!("{}", harness::records_to_csv(records)?),
    }
    Ok(())
}

fn store_path(out: Option<&str>) -> PathBuf {
    PathBuf::from(out.unwrap_or(DEFAULT_STORE))
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Spaces => {
            println!("spaces:");
            for id in ["euclidean:<n>  (1 <= n <= 8)", "h2", "h2xh2", "euclidean:<n>xh2", "h2xeuclidean:<n>"] {
                println!("  {id}");
            }
            println!("groups:");
            for id in ["z:<d>", "free:<k>"] {
                println!("  {id}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(a) => run(&a, None),
        Command::Check(a) => run(&a, Some("check")),
        Command::Group(g) => {
            let ids: Vec<String> = if g.groups.is_empty() {
                DEFAULT_GROUPS.iter().map(|s| s.to_string()).collect()
            } else {
                g.groups
            };
            let store = g.out.as_ref().map(Store::new);
            let mut records = Vec::new();
            for id in ids {
                let text = format!("group = {id}\nquantity = group_report\n");
                records.extend(harness::run(&harness::parse_config(&text)?, store.as_ref())?.records);
            }
            match g.format {
                Some(f) => print_records(&records, f)?,
                None => print!("{}", harness::report(&records, None)?),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(r) => {
            let store = Store::new(r.out.unwrap_or_else(|| PathBuf::from(DEFAULT_STORE)));
            print!("{}", harness::report(&store.load()?, r.space.as_deref())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest(s) => {
            let start = Instant::now();
            let rep = harness::selftest(&SelftestOptions {
                master: s.seed,
                kernel_scale: s.kernel_scale,
            });
            print!("{}", rep.render());
            eprintln!("selftest finished in {:.1} s", start.elapsed().as_secs_f64());
            Ok(if rep.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn run(a: &RunArgs, forced: Option<&str>) -> Result<ExitCode> {
    let config = config_from_args(a, forced)?;
    let store = Store::new(store_path(config.out.as_deref()));
    let outcome = harness::run(&config, Some(&store))?;
    if outcome.cached {
        eprintln!("cached: true");
    }
    print_records(&outcome.records, a.format)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            ExitCode::from(2)
        }
    }
}
