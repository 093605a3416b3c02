//! `finitegap` command-line tool.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical or pipeline failure.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finitegap::closing::{closure_residual, finite_gap_approximate, finite_gap_approximate_real, lambda_star, RealForm};
use finitegap::dressing::{dress_potential, SimpleFactor};
use finitegap::io::{curve_csv, curve_json, read_potential, to_json, write_potential, Chart, PotentialFile, SpectralReport};
use finitegap::reconstruct::{curve_closure_gap, sym_reconstruct};
use finitegap::spectral::{coeffs_at, find_lambda_k_partial, zero_order_at};
use finitegap::frame::integrate_frame;
use finitegap::{CPLine, Config, Error, Integrator, Potential, C64};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "finitegap", version, about = "Finite-gap potentials and closed curves in hyperbolic 3-space")]
struct Cli {
    /// JSON file with numerical settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Closing tolerance on ‖M(λ*) ∓ 𝟙‖.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral report: roots λ_k, coefficients z_k, closing and order data at λ* = i + θ.
    Analyze {
        potential: PathBuf,
        /// Report indices 0 < |k| ≤ kmax.
        #[arg(long, default_value_t = 10)]
        kmax: i64,
        #[command(flatten)]
        out: Output,
    },
    /// Closed finite-gap approximation of a closed potential.
    Close {
        potential: PathBuf,
        /// Truncation order (default from the config).
        #[arg(long)]
        n: Option<usize>,
        /// Real-potential variant.
        #[arg(long, value_enum)]
        real: Option<RealArg>,
        #[command(flatten)]
        out: Output,
    },
    /// Curve in H³ by the Sym formula.
    Reconstruct {
        potential: PathBuf,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        /// Poincaré ball coordinates only.
        #[arg(long, conflicts_with = "hyperboloid")]
        ball: bool,
        /// Hyperboloid coordinates only.
        #[arg(long)]
        hyperboloid: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Apply a simple factor g_{λ*,L}.
    Dress {
        potential: PathBuf,
        /// λ* as `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        lambda_star: String,
        /// Line L as `a,b` (real) or `a_re,a_im,b_re,b_im`.
        #[arg(long, allow_hyphen_values = true)]
        line: String,
        /// Modes kept in the output.
        #[arg(long)]
        kmax: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args, Debug)]
struct Output {
    /// Output file (default: standard output).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RealArg {
    R2,
    S2,
    H2,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Input(String),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.root() {
            Error::InvalidInput(_)
            | Error::RealPole(_)
            | Error::TooFewSteps(_)
            | Error::ZeroVector
            | Error::PeriodMismatch(..)
            | Error::NotReal(_) => Failure::Input(e.to_string()),
            _ => Failure::Numeric(e),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error [{}]: {}", e.stage().unwrap_or("numeric"), e.root());
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => Config::from_json(&read_text(p)?)?,
        None => Config::default(),
    };
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            return Err(Failure::Input("--tol must be positive".into()));
        }
        cfg.closure_tol = t;
    }
    match cli.command {
        Command::Analyze { potential, kmax, out } => analyze(&potential, kmax, &out, &cfg),
        Command::Close { potential, n, real, out } => close(&potential, n.unwrap_or(cfg.n), real, &out, &cfg),
        Command::Reconstruct { potential, samples, ball, hyperboloid, format, out } => {
            let chart = match (ball, hyperboloid) {
                (true, _) => Some(Chart::Ball),
                (_, true) => Some(Chart::Hyperboloid),
                _ => None,
            };
            reconstruct(&potential, samples, chart, format, &out, &cfg)
        }
        Command::Dress { potential, lambda_star, line, kmax, out } => {
            dress(&potential, &lambda_star, &line, kmax, &out, &cfg)
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Potential, Failure> {
    Ok(read_potential(&read_text(path)?)?.potential()?)
}

fn emit(out: &Output, text: &str) -> Outcome {
    match &out.out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Input(format!("stdout: {e}"))),
            _ => Ok(()),
        },
    }
}

fn analyze(path: &Path, kmax: i64, out: &Output, cfg: &Config) -> Outcome {
    let q = load(path)?;
    let closure = closure_residual(&q, q.theta(), cfg)?;
    let ks: Vec<i64> = (-kmax..=kmax).filter(|&k| k != 0).collect();
    let (roots, unresolved) = find_lambda_k_partial(&q, &ks, cfg)?;
    let pairs: Vec<(i64, C64)> = roots.iter().map(|s| (s.k, s.lambda_k)).collect();
    let samples = coeffs_at(&Integrator::new(&q, cfg.n_steps)?, &pairs)?;
    let orders = zero_order_at(&q, lambda_star(q.theta()), cfg).ok().into_iter().collect();
    let semisimple = closure.semisimple;
    let report = SpectralReport::new(&samples, orders, Some(closure));
    let mut value = serde_json::to_value(&report).map_err(|e| Failure::Input(e.to_string()))?;
    value["unresolved_k"] = json!(unresolved);
    emit(out, &to_json(&value)?)?;
    if !semisimple {
        eprintln!("closing condition fails at lambda* = i + theta");
    }
    Ok(())
}

fn close(path: &Path, n: usize, real: Option<RealArg>, out: &Output, cfg: &Config) -> Outcome {
    let q = load(path)?;
    let outcome = match real {
        None => finite_gap_approximate(&q, q.theta(), n, cfg)?,
        Some(r) => {
            let form = match r {
                RealArg::R2 => RealForm::R2,
                RealArg::S2 => RealForm::S2,
                RealArg::H2 => RealForm::H2,
            };
            finite_gap_approximate_real(&q, form, n, cfg)?
        }
    };
    let mut file = PotentialFile::from_potential(&outcome.potential);
    file.provenance = Some(json!({
        "n": n,
        "closure_residual": outcome.closure.as_ref().map(|c| c.m_residual),
        "newton_iterations": outcome.newton.iterations,
        "newton_residuals": outcome.newton.residual_history,
        "polish_residuals": outcome.polish_history,
        "l2_distance": outcome.l2_distance,
        "direction_modes": outcome.directions.as_ref().map(|d| d.modes.clone()),
    }));
    emit(out, &write_potential(&file)?)?;
    if let Some(c) = &outcome.closure {
        eprintln!("closure residual {:.3e}, l2 distance to input {:.3e}", c.m_residual, outcome.l2_distance);
    }
    Ok(())
}

fn reconstruct(path: &Path, samples: usize, chart: Option<Chart>, format: Format, out: &Output, cfg: &Config) -> Outcome {
    if samples < 8 {
        return Err(Failure::Input(format!("--samples must be at least 8, got {samples}")));
    }
    let q = load(path)?;
    let curve = sym_reconstruct(&q, q.theta(), samples, cfg.n_steps)?;
    let text = match format {
        Format::Csv => curve_csv(&curve, chart),
        Format::Json => curve_json(&curve, chart)?,
    };
    emit(out, &text)?;
    let gap = curve_closure_gap(&q, q.theta(), cfg.n_steps)?;
    eprintln!("closure gap {gap:.3e} (endpoint distance {:.3e})", curve.endpoint_gap());
    Ok(())
}

fn parse_numbers(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Failure::Input(format!("{what}: '{s}': {e}"))))
        .collect()
}

fn dress(path: &Path, ls: &str, line: &str, kmax: Option<usize>, out: &Output, cfg: &Config) -> Outcome {
    let q = load(path)?;
    let l = match parse_numbers(ls, "--lambda-star")?[..] {
        [re, im] => C64::new(re, im),
        _ => return Err(Failure::Input("--lambda-star takes re,im".into())),
    };
    let line = match parse_numbers(line, "--line")?[..] {
        [a, b] => CPLine::real(a, b)?,
        [ar, ai, br, bi] => CPLine::new(C64::new(ar, ai), C64::new(br, bi))?,
        _ => return Err(Failure::Input("--line takes a,b or a_re,a_im,b_re,b_im".into())),
    };
    let sf = SimpleFactor::new(l, line)?;
    let fr = integrate_frame(&q, l, cfg.n_steps)?;
    let d = dress_potential(&q, &sf, &fr, kmax.unwrap_or(cfg.dress_modes), 1e-8)?;
    let mut file = PotentialFile::from_potential(&d.potential);
    file.warning = d.warning.clone();
    let c: Vec<[f64; 3]> = d.times.iter().zip(&d.c_samples).map(|(t, c)| [*t, c.re, c.im]).collect();
    let v = line.vector();
    file.provenance = Some(json!({
        "lambda_star": [l.re, l.im],
        "line": [v[0].re, v[0].im, v[1].re, v[1].im],
        "periodicity_defect": d.periodicity_defect,
        "c_samples": c,
    }));
    if let Some(w) = &d.warning {
        eprintln!("warning: {w}");
    }
    emit(out, &write_potential(&file)?)
}
