use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use doa::runner::{self, Overrides, RunError, Source};
use doa::{examples, render};
use doa_core::oracle::{cross_check, DEFAULT_CAP};

#[derive(Parser)]
#[command(name = "doa", version, about = "Degree of arbitrariness of moving-frame systems")]
struct Cli {
    /// List the bundled examples and exit
    #[arg(long)]
    list_examples: bool,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one spec at fixed dimensions
    Run(Common),
    /// Run over a range of one parameter and fit degree/dimension exactly
    Scan {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary
        #[arg(long, default_value = "n")]
        param: String,
        /// Inclusive range, e.g. 4..8
        #[arg(long)]
        range: String,
    },
    /// Run and recount every number in the report with the dense oracle
    Verify {
        #[command(flatten)]
        common: Common,
        /// Largest dense grid the oracle may build
        #[arg(long, default_value_t = DEFAULT_CAP)]
        oracle_cap: usize,
    },
    /// List the bundled examples
    Examples,
}

#[derive(Args)]
struct Common {
    /// Bundled example, NAME or NAME:VARIANT
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    example: Option<String>,
    /// Path to a .doa file
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Dimension bindings, key=value (repeatable or comma-separated)
    #[arg(long = "dim")]
    dims: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    max_order: Option<u32>,
    #[arg(long)]
    seed_order: Option<u32>,
    /// Ordering tried first: natural, reverse, special-smallest, special-largest, or a chain like 0<1<2<3
    #[arg(long)]
    ordering: Option<String>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Include the elimination trace in the report
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

impl Common {
    fn source(&self) -> Source {
        match (&self.example, &self.spec) {
            (Some(e), _) => Source::Example(e.clone()),
            (None, Some(p)) => Source::Path(p.clone()),
            (None, None) => unreachable!("clap requires one of --example/--spec"),
        }
    }

    fn overrides(&self) -> Overrides {
        Overrides {
            max_order: self.max_order,
            seed_order: self.seed_order,
            ordering: self.ordering.clone(),
            trials: self.trials,
            rng_seed: self.rng_seed,
            trace: self.trace,
        }
    }
}

fn parse_range(s: &str) -> Option<Vec<i64>> {
    let (a, b) = s.split_once("..")?;
    let a: i64 = a.trim().parse().ok()?;
    let b: i64 = b.trim_start_matches('=').trim().parse().ok()?;
    (a <= b).then(|| (a..=b).collect())
}

fn usage(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("doa: {e}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.list_examples || matches!(cli.cmd, Some(Cmd::Examples)) {
        for line in examples::listing() {
            println!("{line}");
        }
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.cmd else {
        return usage("no command given (run, scan, verify, examples)");
    };
    match dispatch(cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => usage(e),
    }
}

fn dispatch(cmd: Cmd) -> Result<u8, RunError> {
    match cmd {
        Cmd::Run(c) => {
            let spec = runner::load(&c.source())?;
            let (p, notes) = runner::prepare(&spec, &runner::parse_bindings(&c.dims)?, &c.overrides())?;
            for n in notes {
                eprintln!("doa: warning: {n}");
            }
            let r = runner::run(&p)?;
            match c.format {
                Format::Text => print!("{}", render::text(&r)),
                Format::Json => println!("{}", serde_json::to_string_pretty(&r).expect("report serializes")),
            }
            Ok(runner::exit_code(r.status) as u8)
        }
        Cmd::Scan { common: c, param, range } => {
            let Some(values) = parse_range(&range) else {
                return Err(RunError::Binding(range));
            };
            let spec = runner::load(&c.source())?;
            let res = runner::scan(&spec, &runner::parse_bindings(&c.dims)?, &c.overrides(), &param, &values)?;
            match c.format {
                Format::Text => {
                    for (n, r) in &res.reports {
                        println!(
                            "{param}={n:<3} {:<12} degree {:<4} dimension {:<3} ordering {}",
                            render::status_word(r.status),
                            r.characters.degree,
                            r.characters.dimension,
                            r.ordering.as_deref().unwrap_or("-")
                        );
                    }
                    println!("degree fit    {}", res.degree_fit.as_deref().unwrap_or("none (not polynomial on this range)"));
                    println!("dimension fit {}", res.dimension_fit.as_deref().unwrap_or("none (not polynomial on this range)"));
                }
                Format::Json => println!("{}", serde_json::to_string_pretty(&res).expect("scan serializes")),
            }
            Ok(res.reports.iter().map(|(_, r)| runner::exit_code(r.status) as u8).max().unwrap_or(0))
        }
        Cmd::Verify { common: c, oracle_cap } => {
            let spec = runner::load(&c.source())?;
            let (p, _) = runner::prepare(&spec, &runner::parse_bindings(&c.dims)?, &c.overrides())?;
            let r = runner::run(&p)?;
            let out = cross_check(&r, &p, oracle_cap);
            let bad: Vec<&String> = out.iter().filter(|l| !l.starts_with("skipped:")).collect();
            match c.format {
                Format::Text => {
                    println!("{} degree {} at dimension {}", r.problem, r.characters.degree, r.characters.dimension);
                    for l in &out {
                        println!("{l}");
                    }
                    if bad.is_empty() {
                        println!("oracle agrees");
                    }
                }
                Format::Json => {
                    let v = serde_json::json!({ "report": r, "disagreements": bad, "notes": out });
                    println!("{}", serde_json::to_string_pretty(&v).expect("serializes"));
                }
            }
            Ok(if bad.is_empty() { 0 } else { 4 })
        }
        Cmd::Examples => unreachable!(),
    }
}
