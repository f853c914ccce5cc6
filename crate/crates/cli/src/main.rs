mod commands;
mod config;
mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use pnstein::rng::DEFAULT_SEED;

use report::Format;

#[derive(Parser, Debug)]
#[command(name = "pnstein", version, about = "Product-normal laws, order-n zero-bias transforms and the PN(2) Stein equation")]
struct Cli {
    /// key = value file; explicit flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "PNSTEIN_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for Monte Carlo and grid work (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Debug, Clone)]
struct PnArgs {
    /// Number of normal factors
    #[arg(long, default_value_t = 2)]
    n: u32,
    /// Scale: PN(n, sigma^2) is sigma times a product of n standard normals
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExpectMethodArg {
    Quadrature,
    MonteCarlo,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ZbWhat {
    Cdf,
    Pdf,
    Moment,
    Sample,
    SquareBias,
    Coupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Thm,
    Arflem,
    AppendixC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExpKind {
    Cor42,
    Cor43,
    Coupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PnRefArg {
    Quadrature,
    ClosedForm,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Density of PN(n, sigma^2)
    #[command(allow_negative_numbers = true)]
    Pdf {
        #[command(flatten)]
        pn: PnArgs,
        #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        /// Use the near-zero asymptotic form below the singularity floor
        #[arg(long)]
        regularized: bool,
        #[arg(long, default_value_t = 1e-10)]
        quad_tol: f64,
    },
    /// Distribution function of PN(n, sigma^2)
    #[command(allow_negative_numbers = true)]
    Cdf {
        #[command(flatten)]
        pn: PnArgs,
        #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, default_value_t = 1e-10)]
        quad_tol: f64,
    },
    /// Characteristic function of PN(n, sigma^2)
    #[command(allow_negative_numbers = true)]
    Cf {
        #[command(flatten)]
        pn: PnArgs,
        #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
        t: Vec<f64>,
        /// Also report the residual of the characteristic-function ODE (n <= 3)
        #[arg(long)]
        ode_residual: bool,
    },
    /// Draws from PN(n, sigma^2)
    Sample {
        #[command(flatten)]
        pn: PnArgs,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Raw little-endian f64 values instead of a report
        #[arg(long)]
        binary: bool,
    },
    /// E h(Z) for Z ~ PN(n, sigma^2)
    Expectation {
        #[command(flatten)]
        pn: PnArgs,
        /// Named test function
        #[arg(long)]
        h: String,
        #[arg(long, value_enum, default_value_t = ExpectMethodArg::Auto)]
        method: ExpectMethodArg,
        #[arg(long, default_value_t = pnstein::prodnormal::DEFAULT_MC_DRAWS)]
        draws: usize,
    },
    /// Order-n zero-bias transform of a base law
    #[command(allow_negative_numbers = true)]
    Zerobias {
        /// rademacher, gaussian[:s], uniform[:h], atoms:v1,p1;v2,p2, sum:m:<law>, pn:n[:s], scaled:c:<law>
        #[arg(long, default_value = "rademacher")]
        dist: String,
        #[arg(long, default_value_t = 1)]
        order: u32,
        #[arg(long, value_enum)]
        what: ZbWhat,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        w: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        p: Vec<u32>,
        #[arg(long)]
        absolute: bool,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Summands in the coupled sum
        #[arg(long, default_value_t = 1)]
        m: usize,
    },
    /// Bounded solution of the PN(2, sigma^2) Stein equation and its derivatives
    #[command(allow_negative_numbers = true)]
    SteinSolve {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        h: String,
        #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
    },
    /// Check the published solution and Bessel-product bounds on a grid
    VerifyBounds {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Test functions (thm, arflem); defaults to the catalog
        #[arg(long, value_delimiter = ',')]
        h: Vec<String>,
        /// Scales (thm, arflem)
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        sigma: Vec<f64>,
        /// Log-grid size (appendix-c)
        #[arg(long, default_value_t = 2000)]
        grid_points: usize,
    },
    /// Monte Carlo check of the product-of-sums convergence bounds
    Experiment {
        #[arg(value_enum)]
        kind: ExpKind,
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value = "rademacher")]
        dist_x: String,
        #[arg(long, default_value = "rademacher")]
        dist_y: String,
        #[arg(long, default_value = "cos")]
        h: String,
        #[arg(long, default_value_t = 1_000_000)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = PnRefArg::Quadrature)]
        pn_reference: PnRefArg,
        /// Run m = n = each size on common random numbers and fit the rate
        #[arg(long, value_delimiter = ',')]
        ladder: Vec<usize>,
        /// Export per-replication (w, w_star, h_w) rows
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        csv_rows: usize,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Pdf { .. } => "pdf",
            Cmd::Cdf { .. } => "cdf",
            Cmd::Cf { .. } => "cf",
            Cmd::Sample { .. } => "sample",
            Cmd::Expectation { .. } => "expectation",
            Cmd::Zerobias { .. } => "zerobias",
            Cmd::SteinSolve { .. } => "stein-solve",
            Cmd::VerifyBounds { .. } => "verify-bounds",
            Cmd::Experiment { .. } => "experiment",
        }
    }
}

#[derive(Debug)]
enum CliError {
    Lib(pnstein::Error),
    Io(io::Error),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O: {e}"),
            CliError::Usage(s) => write!(f, "{s}"),
        }
    }
}

impl From<pnstein::Error> for CliError {
    fn from(e: pnstein::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn open_out(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let name = cli.cmd.name();
    if let Cmd::Sample { pn, count, binary: true } = &cli.cmd {
        let mut out = open_out(&cli.out)?;
        commands::sample_binary(pn.n, pn.sigma, *count, cli.seed, &mut out)?;
        out.flush()?;
        return Ok(ExitCode::SUCCESS);
    }
    let report = pnstein::par::with_threads(cli.threads, || commands::dispatch(&cli.cmd, cli.seed))?;
    let mut out = open_out(&cli.out)?;
    report.render(name, cli.seed, cli.format, &mut out)?;
    out.flush()?;
    Ok(if report.violation { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match config::merge(argv, &Cli::command()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("{}", Cli::command().render_usage());
            }
            ExitCode::from(1)
        }
    }
}
