use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use krein_ball::schatten_analysis::ThresholdKind;
use krein_ball_cli::commands::{self, OracleCheck, OutputOptions};
use krein_ball_cli::config::{self, parse_lambda, ExperimentConfig, SideConfig, ThresholdConfig};
use krein_ball_cli::suites::Suite;
use krein_ball_cli::CliError;

/// Singular spectra of resolvent differences of Robin-type Laplacians on the
/// n-ball.
#[derive(Debug, Parser)]
#[command(name = "krein-ball", version)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit the timestamp from JSON results.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct Overrides {
    /// JSON config file (a previous JSON result is accepted too).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ambient dimension.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    /// Spectral point as `re,im` or `a+bi`.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// `neumann`, `dirichlet` or a parameter formula such as `2 - (1+l)^(-2)`.
    #[arg(long, allow_hyphen_values = true)]
    left: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    right: Option<String>,
    /// Largest spherical-harmonic degree.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Fit window `start,end` (1-based, inclusive).
    #[arg(long)]
    window: Option<String>,
    /// robin_neumann, dirichlet_neumann or parameter_difference.
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    p0: Option<f64>,
    /// Decay power of the parameter difference (sets p0 = (n-1)/q).
    #[arg(long)]
    q: Option<f64>,
    /// Tolerance on the decay exponent.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Comma-separated FD grid sizes.
    #[arg(long)]
    grids: Option<String>,
    /// Comma-separated degrees.
    #[arg(long = "l")]
    ells: Option<String>,
    /// Real eigenvalue window `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    eig_window: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weyl values and gamma norms per degree (CSV).
    Weyl {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiplicity-expanded singular values (CSV `k,s`).
    Snum {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decay-exponent fit and threshold verdict (JSON).
    Fit {
        #[command(flatten)]
        o: Overrides,
        /// Also write the spectrum CSV here.
        #[arg(long)]
        spectrum_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Real eigenvalues of the left realization per degree (JSON).
    Eig {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference residuals and convergence orders (JSON).
    Oracle {
        #[command(flatten)]
        o: Overrides,
        /// krein, gamma or weyl.
        #[arg(long, default_value = "krein")]
        check: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the verification suite (JSON). Exit code 4 if a criterion fails.
    Verify {
        /// One of robin-neumann, dirichlet-neumann, parameter-difference,
        /// trace-class, krein-oracle, gamma-adjoint, weyl-properties,
        /// eigenvalues, cross-path, all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Restrict an exponent suite to one dimension.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|_| CliError::Config(format!("bad {what} entry '{x}' in '{s}'")))
        })
        .collect()
}

fn pair_of<T: std::str::FromStr + Copy>(s: &str, what: &str) -> Result<[T; 2], CliError> {
    match list::<T>(s, what)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(CliError::Config(format!(
            "{what} needs two comma-separated values, got '{s}'"
        ))),
    }
}

fn resolve(o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut c = match &o.config {
        Some(p) => config::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = o.n {
        c.domain.n = n;
    }
    if let Some(r) = o.radius {
        c.domain.radius = r;
    }
    if let Some(l) = &o.lambda {
        c.lambda = Some(parse_lambda(l).map_err(CliError::Config)?);
    }
    if let Some(s) = &o.left {
        c.pair.left = SideConfig::from_flag(s);
    }
    if let Some(s) = &o.right {
        c.pair.right = SideConfig::from_flag(s);
    }
    if let Some(k) = o.cutoff {
        c.cutoff = k;
    }
    if let Some(w) = &o.window {
        c.fit_window = Some(pair_of(w, "window")?);
    }
    if o.threshold.is_some() || o.p0.is_some() || o.q.is_some() {
        let kind = match &o.threshold {
            Some(k) => serde_json::from_value::<ThresholdKind>(serde_json::Value::String(
                k.replace('-', "_"),
            ))
            .map_err(|_| CliError::Config(format!("unknown threshold kind '{k}'")))?,
            None => match &c.threshold {
                Some(t) => t.kind,
                None => ThresholdKind::ParameterDifference,
            },
        };
        let (p0, q) = match (o.p0, o.q, &c.threshold) {
            (None, None, Some(t)) => (t.p0, t.q),
            (p0, q, _) => (p0, q),
        };
        c.threshold = Some(ThresholdConfig { kind, p0, q });
    }
    if let Some(t) = o.tolerance {
        c.tolerance = t;
    }
    if let Some(g) = &o.grids {
        c.grids = list(g, "grid")?;
    }
    if let Some(l) = &o.ells {
        c.ells = list(l, "degree")?;
    }
    if let Some(w) = &o.eig_window {
        c.eig_window = pair_of(w, "eig window")?;
    }
    Ok(c)
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(p) => commands::write_file(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
            {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
                    path: "stdout".into(),
                    source: e,
                }),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let opts = OutputOptions {
        timestamp: !cli.no_timestamp,
    };
    match cli.command {
        Command::Weyl { o, out } => emit(&commands::weyl(&resolve(&o)?)?, out.as_ref()),
        Command::Snum { o, out } => emit(&commands::snum(&resolve(&o)?)?, out.as_ref()),
        Command::Fit {
            o,
            spectrum_out,
            out,
        } => emit(
            &commands::fit(&resolve(&o)?, spectrum_out.as_ref(), &opts)?,
            out.as_ref(),
        ),
        Command::Eig { o, out } => emit(&commands::eig(&resolve(&o)?, &opts)?, out.as_ref()),
        Command::Oracle { o, check, out } => {
            let check = OracleCheck::parse(&check)?;
            emit(
                &commands::oracle(&resolve(&o)?, check, &opts)?,
                out.as_ref(),
            )
        }
        Command::Verify { suite, n, out } => {
            let (text, passed) = commands::verify(Suite::parse(&suite)?, n, &opts)?;
            emit(&text, out.as_ref())?;
            if passed {
                Ok(())
            } else {
                Err(CliError::VerifyFailed(format!(
                    "suite '{suite}' has failing criteria"
                )))
            }
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
