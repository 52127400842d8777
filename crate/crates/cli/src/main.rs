//! `roessler`: runs the computer-assisted proofs for the Rössler system and
//! writes certificates, or emits non-rigorous exploration data as CSV.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use roessler_core::cases::{Runner, System};
use roessler_core::certificate::{Certificate, RunSettings};
use roessler_core::explore::{self, ExploreSettings, Table};
use roessler_core::integrator::Representation;

#[derive(Parser, Debug)]
#[command(
    name = "roessler",
    version,
    about = "Computer-assisted proofs of periodic orbits in the Rössler system"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Taylor order of the rigorous integrator.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Local error target of the step-size control.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Grid of the period-3 exclusion, as WxH.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<Vec<usize>>,
    /// Grid of the forward-invariance check, as WxH.
    #[arg(long, global = true, value_parser = parse_grid)]
    invariance_grid: Option<Vec<usize>>,
    /// Set representation: doubleton, parallelepiped or interval-hull.
    #[arg(long, global = true)]
    representation: Option<Representation>,
    /// Number of worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run proof cases and write certificates.
    Prove(ProveArgs),
    /// Emit non-rigorous exploration data as CSV.
    Explore(ExploreArgs),
    /// Re-validate the evidence recorded in certificate files.
    Check {
        /// Certificate files.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ProveArgs {
    /// `a525`, `a47` or `all`.
    target: String,
    /// Case number (a525: 1-2, a47: 1-6). Without --case or --period every
    /// case of the system is run.
    #[arg(long, conflicts_with = "period")]
    case: Option<u32>,
    /// Prove the existence (or, for period 3 at a=4.7, the absence) of an
    /// orbit of this fundamental period.
    #[arg(long)]
    period: Option<usize>,
    /// Directory for the certificates.
    #[arg(long, default_value = "certs")]
    out_dir: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Bifurcation,
    Attractor,
    Modelmap,
}

#[derive(Args, Debug)]
struct ExploreArgs {
    kind: Kind,
    /// Parameter a (attractor and modelmap).
    #[arg(long, default_value_t = 4.7)]
    a: f64,
    /// Range of a for the bifurcation diagram.
    #[arg(long, default_value_t = 4.2)]
    a_min: f64,
    #[arg(long, default_value_t = 5.8)]
    a_max: f64,
    /// Number of a values in the bifurcation diagram.
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Returns discarded before sampling.
    #[arg(long)]
    transient: Option<usize>,
    /// Returns recorded per parameter value.
    #[arg(long)]
    samples: Option<usize>,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

fn parse_grid(s: &str) -> Result<Vec<usize>, String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid `{s}` is not of the form WxH"))?;
    let parse = |v: &str| match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("grid `{s}` needs positive integers")),
    };
    Ok(vec![parse(w)?, parse(h)?])
}

impl Global {
    fn settings(&self) -> RunSettings {
        let mut s = RunSettings::default();
        if let Some(o) = self.order {
            s.integrator.taylor_order = o;
        }
        if let Some(t) = self.tol {
            s.integrator.tolerance = t;
        }
        if let Some(r) = self.representation {
            s.integrator.representation = r;
        }
        if let Some(g) = &self.grid {
            s.exclusion_grid = g.clone();
        }
        if let Some(g) = &self.invariance_grid {
            s.invariance_grid = g.clone();
        }
        s
    }
}

/// Usage or configuration problems (exit code 2) as opposed to failed proofs.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn prove(args: &ProveArgs, settings: &RunSettings) -> Result<bool> {
    let systems: Vec<System> = match args.target.as_str() {
        "all" => System::ALL.to_vec(),
        s => vec![s.parse::<System>().map_err(|e| usage(e.to_string()))?],
    };
    let mut all_ok = true;
    for system in systems {
        let runner = Runner::new(system, settings.clone()).map_err(|e| usage(e.to_string()))?;
        let certs: Vec<Certificate> = match (args.case, args.period) {
            (Some(c), _) => {
                if !system.cases().contains(&c) {
                    return Err(usage(format!(
                        "unknown case {c} for system {system} (valid: {:?})",
                        system.cases()
                    )));
                }
                vec![runner.run_case(c)?]
            }
            (None, Some(0)) => return Err(usage("period must be at least 1")),
            (None, Some(n)) => vec![runner.prove_period(n)?],
            (None, None) => system
                .cases()
                .iter()
                .map(|&c| runner.run_case(c))
                .collect::<Result<_, _>>()?,
        };
        for cert in certs {
            let path = cert.write_to(&args.out_dir)?;
            let status = if cert.verdict { "PROVED" } else { "FAILED" };
            println!(
                "{} [{}] {status} in {:.1} s: {} -> {}",
                cert.case.file_stem(),
                cert.evidence.kind(),
                cert.duration_seconds,
                cert.claim,
                path.display()
            );
            all_ok &= cert.verdict;
        }
    }
    Ok(all_ok)
}

fn write_csv(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

fn explore(args: &ExploreArgs, global: &Global) -> Result<bool> {
    let mut s = ExploreSettings::default();
    if let Some(o) = global.order {
        if o < 8 {
            return Err(usage("exploration needs Taylor order at least 8"));
        }
        s.order = o;
    }
    if let Some(t) = args.transient {
        s.transient = t;
    }
    if let Some(n) = args.samples {
        s.samples = n;
    }
    let table = match args.kind {
        Kind::Bifurcation => {
            if !(args.a_min <= args.a_max) || args.steps == 0 {
                return Err(usage("need a-min <= a-max and at least one step"));
            }
            explore::bifurcation(args.a_min, args.a_max, args.steps, &s)
        }
        Kind::Attractor => explore::attractor(args.a, &s),
        Kind::Modelmap => explore::modelmap(args.a, &s),
    };
    write_csv(&args.out, &table)?;
    println!(
        "{} rows ({}) -> {}",
        table.rows.len(),
        table.columns.join(","),
        args.out.display()
    );
    Ok(true)
}

fn check(files: &[PathBuf]) -> Result<bool> {
    let mut all_ok = true;
    for f in files {
        let text = std::fs::read_to_string(f).with_context(|| format!("cannot read {}", f.display()))?;
        let cert = Certificate::from_text(&text).with_context(|| format!("{} is not a certificate", f.display()))?;
        match cert.recheck() {
            Ok(()) if cert.verdict => println!("{}: evidence supports the verdict", f.display()),
            Ok(()) => {
                println!("{}: negative verdict", f.display());
                all_ok = false;
            }
            Err(e) => {
                println!("{}: {e}", f.display());
                all_ok = false;
            }
        }
    }
    Ok(all_ok)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(usage("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("cannot configure the worker pool")?;
    }
    let settings = cli.global.settings();
    settings.integrator.validate().map_err(|e| usage(e.to_string()))?;
    match &cli.command {
        Command::Prove(args) => prove(args, &settings),
        Command::Explore(args) => explore(args, &cli.global),
        Command::Check { files } => check(files),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse() {
        assert_eq!(parse_grid("500x10").unwrap(), vec![500, 10]);
        assert!(parse_grid("500").is_err());
        assert!(parse_grid("0x3").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
