use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ibcast_cli::point::describe;
use ibcast_cli::spec::{db_to_linear, parse_schemes, parse_snr_list, read_config};
use ibcast_cli::sweep::{compute, make_row};
use ibcast_cli::{csv_out, mc, run_sweep, ArgError, CapacitySpec, FadingKind, SweepSpec};
use ibcast_core::Scheme;

const EXIT_ARGS: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_Z: u8 = 3;

/// Achievable rates of the block-fading Gaussian bottleneck channel.
#[derive(Parser)]
#[command(name = "ibcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate rates over an SNR grid as CSV.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare every analytic rate with a seeded Monte Carlo estimate.
    McCheck {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print full diagnostics for one operating point.
    Point {
        #[arg(long, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long)]
        capacity: String,
        #[arg(long)]
        scheme: String,
        #[arg(long, default_value = "rayleigh")]
        fading: String,
    },
}

#[derive(Args)]
struct GridArgs {
    /// `start:stop:step` in dB (inclusive) or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Fixed capacity in nats, or atoms `C:p;C:p`. May be repeated.
    #[arg(long)]
    capacity: Vec<String>,
    /// `all` or a comma list of scheme tags.
    #[arg(long)]
    schemes: Option<String>,
    /// Fading law of the channel gain; `rayleigh` (unit mean).
    #[arg(long)]
    fading: Option<String>,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

struct Resolved {
    spec: SweepSpec,
    config: BTreeMap<String, Vec<String>>,
}

impl GridArgs {
    fn resolve(self, default_snr: &str, out: Option<PathBuf>) -> Result<Resolved, ArgError> {
        let config = match &self.config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        let last = |key: &str| config.get(key).and_then(|v| v.last()).cloned();
        let snr = self.snr_db.or_else(|| last("snr-db")).unwrap_or_else(|| default_snr.to_string());
        let caps = if !self.capacity.is_empty() {
            self.capacity
        } else {
            config.get("capacity").cloned().unwrap_or_else(|| vec!["4".to_string()])
        };
        let schemes = self.schemes.or_else(|| last("schemes")).unwrap_or_else(|| "all".to_string());
        let fading = self.fading.or_else(|| last("fading")).unwrap_or_else(|| "rayleigh".to_string());
        let spec = SweepSpec {
            snr_db: parse_snr_list(&snr)?,
            capacities: caps.iter().map(|c| CapacitySpec::parse(c)).collect::<Result<_, _>>()?,
            schemes: parse_schemes(&schemes)?,
            fading: FadingKind::parse(&fading)?,
            output: out.or_else(|| last("out").map(PathBuf::from)),
        };
        Ok(Resolved { spec, config })
    }
}

enum Failure {
    Args(String),
    Solver(String),
    ZScore,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => std::fs::File::create(p)
            .map(|f| Box::new(std::io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::Args(format!("{}: {e}", p.display()))),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let args = |e: ArgError| Failure::Args(e.to_string());
    match cli.command {
        Command::Sweep { grid, out } => {
            let spec = grid.resolve("0:30:1", out).map_err(args)?.spec;
            let rows = run_sweep(&spec);
            match &spec.output {
                Some(path) => csv_out::emit_csv(&rows, path).map_err(|e| Failure::Args(e.to_string()))?,
                None => csv_out::write_rows(&rows, std::io::stdout().lock()).map_err(|e| Failure::Args(e.to_string()))?,
            }
            Ok(())
        }
        Command::McCheck { grid, samples, seed, out } => {
            let resolved = grid.resolve("0:30:10", out).map_err(args)?;
            let last = |key: &str| resolved.config.get(key).and_then(|v| v.last()).cloned();
            let parse_u64 = |key: &str, v: String| v.parse::<u64>().map_err(|_| Failure::Args(format!("{key}: not an integer: {v:?}")));
            let samples = match samples {
                Some(n) => n,
                None => last("samples").map(|v| parse_u64("samples", v)).transpose()?.unwrap_or(1_000_000),
            };
            let seed = match seed {
                Some(s) => s,
                None => last("seed").map(|v| parse_u64("seed", v)).transpose()?.unwrap_or(42),
            };
            let rows = mc::mc_check(&resolved.spec, samples, seed).map_err(args)?;
            let writer = output(&resolved.spec.output)?;
            mc::write_report(&rows, writer).map_err(|e| Failure::Args(e.to_string()))?;
            if let Some(bad) = rows.iter().find(|r| r.error.is_some()) {
                return Err(Failure::Solver(format!("{} at {} dB: {}", bad.row.scheme, bad.row.snr_db, bad.error.as_deref().unwrap_or(""))));
            }
            if !mc::passed(&rows) {
                return Err(Failure::ZScore);
            }
            Ok(())
        }
        Command::Point { snr_db, capacity, scheme, fading } => {
            let cap = CapacitySpec::parse(&capacity).map_err(args)?;
            let scheme: Scheme = scheme.parse().map_err(|e: ibcast_core::montecarlo::UnknownScheme| Failure::Args(e.to_string()))?;
            let fading = FadingKind::parse(&fading).map_err(args)?.distribution();
            if !snr_db.is_finite() {
                return Err(Failure::Args(format!("invalid SNR {snr_db}")));
            }
            let computed = compute(scheme, db_to_linear(snr_db), &cap, &fading);
            let row = make_row(scheme, snr_db, &cap, &computed);
            println!("scheme: {scheme}");
            println!("snr_db: {}", csv_out::format_number(snr_db));
            println!("p_linear: {}", csv_out::format_number(row.p_linear));
            println!("capacity_spec: {}", cap.label);
            match computed {
                Ok(c) => {
                    print!("{}", describe(&c));
                    Ok(())
                }
                Err(e) => Err(Failure::Solver(e)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ARGS } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Args(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ARGS)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(Failure::ZScore) => {
            eprintln!("monte carlo check failed: |z| > {}", mc::Z_LIMIT);
            ExitCode::from(EXIT_Z)
        }
    }
}
