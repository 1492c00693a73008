//! Command-line front end: `experiment` writes the quantile table as CSV,
//! `mean` averages matrices read from a plain-text file.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid flags or
//! malformed input.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::barycenter::{
    grassmann_projection_residual, orthographic_residual, proj_mean_grassmann, proj_mean_polar,
    proj_mean_qr, qr_differential_residual, r_barycenter_orthographic, r_barycenter_polar,
    r_barycenter_qr, riemannian_mean_grassmann, rl_barycenter_polar_orthographic,
    BarycenterResult, SolverControls,
};
use crate::error::Error;
use crate::grassmann::GrassmannPoint;
use crate::linalg::Mat;
use crate::simulation::{run_experiment_with_jobs, Estimator, ExperimentConfig, ManifoldKind, ResultTable};
use crate::stiefel::StiefelPoint;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Significant digits of the statistics written to CSV.
pub const CSV_SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "projmean", version, about = "Means on Stiefel and Grassmann manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo sweep of estimator errors against sample size.
    Experiment(ExperimentArgs),
    /// Average the matrices of a sample file.
    Mean(MeanArgs),
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, value_parser = parse_manifold)]
    manifold: ManifoldKind,
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long, value_delimiter = ',', default_value = "20,50,70,100,200,500")]
    n_values: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated estimator keys; defaults to all estimators of the manifold.
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    estimators: Option<Vec<Estimator>>,
    #[arg(long)]
    out: PathBuf,
    /// Write 20*log10 of every statistic.
    #[arg(long)]
    db: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

#[derive(Debug, Args)]
struct MeanArgs {
    #[arg(long, value_parser = parse_manifold)]
    manifold: ManifoldKind,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Estimator,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Fail when an iterative estimator does not converge.
    #[arg(long)]
    strict: bool,
}

fn parse_manifold(s: &str) -> Result<ManifoldKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Experiment(a) => cmd_experiment(a),
        Command::Mean(a) => cmd_mean(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn runtime(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.into(),
    }
}

fn cmd_experiment(a: ExperimentArgs) -> Result<(), Failure> {
    if a.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let config = ExperimentConfig {
        manifold: a.manifold,
        p: a.p,
        k: a.k,
        sigma: a.sigma,
        n_values: a.n_values,
        n_trials: a.trials,
        seed: a.seed,
        estimators: a.estimators.unwrap_or_else(|| Estimator::defaults(a.manifold)),
        controls: SolverControls {
            tol: a.tol,
            max_iter: a.max_iter,
            init_index: 0,
        },
    };
    config.validate().map_err(|e| usage(e.to_string()))?;

    let start = Instant::now();
    let table = run_experiment_with_jobs(&config, a.jobs).map_err(|e| runtime(e.to_string()))?;
    log::info!(
        "{} sweep: {} cells x {} trials in {:.2?}",
        config.manifold,
        config.n_values.len(),
        config.n_trials,
        start.elapsed()
    );
    write_atomically(&a.out, render_csv(&table, a.db).as_bytes())
}

/// Writes through a sibling temporary file so a failed run leaves no partial
/// output behind.
fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        runtime(format!("cannot write {}: {e}", path.display()))
    })
}

/// Formats like C's `%.{digits}g`.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Header row: `n`, then `<E>_median,<E>_q10,<E>_q90` per estimator, then
/// `<E>_failures` for estimators that failed at least once.
pub fn csv_header(table: &ResultTable) -> Vec<String> {
    let mut cols = vec!["n".to_string()];
    for e in &table.estimators {
        for stat in ["median", "q10", "q90"] {
            cols.push(format!("{}_{stat}", e.key()));
        }
    }
    for &e in &table.estimators {
        if table.total_failures(e) > 0 {
            cols.push(format!("{}_failures", e.key()));
        }
    }
    cols
}

/// CSV rendering of a result table (LF line endings). With `db`, each
/// statistic `x` is written as `20 log10(x)`.
pub fn render_csv(table: &ResultTable, db: bool) -> String {
    let transform = |x: f64| if db { 20.0 * x.log10() } else { x };
    let failing: Vec<usize> = table
        .estimators
        .iter()
        .enumerate()
        .filter(|(_, &e)| table.total_failures(e) > 0)
        .map(|(i, _)| i)
        .collect();

    let mut out = csv_header(table).join(",");
    out.push('\n');
    for (row, &n) in table.n_values.iter().enumerate() {
        let mut fields = vec![n.to_string()];
        for cell in &table.cells[row] {
            for v in [cell.median, cell.q10, cell.q90] {
                fields.push(format_significant(transform(v), CSV_SIGNIFICANT_DIGITS));
            }
        }
        for &c in &failing {
            fields.push(table.cells[row][c].failures.to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Matrices read from a sample file.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixList {
    pub p: usize,
    pub k: usize,
    pub blocks: Vec<Mat>,
}

/// Parses the plain-text sample format: a header line `p k n`, then `n`
/// blocks of `rows` lines with `cols` whitespace-separated reals each, where
/// `(rows, cols)` is `(p, k)` on Stiefel and `(p, p)` on Grassmann. Blank
/// lines and lines starting with `#` are ignored.
pub fn parse_matrix_list(text: &str, manifold: ManifoldKind) -> Result<MatrixList, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or("empty input: missing 'p k n' header")?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("line {hline}: header must be three positive integers 'p k n'"))?;
    let [p, k, n] = dims[..] else {
        return Err(format!("line {hline}: header must be three positive integers 'p k n'"));
    };
    if p == 0 || k == 0 || n == 0 || k > p {
        return Err(format!("line {hline}: need 1 <= k <= p and n >= 1, got p={p} k={k} n={n}"));
    }
    let (rows, cols) = match manifold {
        ManifoldKind::Stiefel => (p, k),
        ManifoldKind::Grassmann => (p, p),
    };

    let mut blocks = Vec::with_capacity(n);
    for b in 0..n {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            let (lno, line) = lines
                .next()
                .ok_or_else(|| format!("block {b}: unexpected end of input at row {r}"))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<_, _>>()
                .map_err(|e| format!("line {lno} (block {b}): {e}"))?;
            if vals.len() != cols {
                return Err(format!(
                    "line {lno} (block {b}): expected {cols} columns, found {}",
                    vals.len()
                ));
            }
            if let Some(c) = vals.iter().position(|v| !v.is_finite()) {
                return Err(format!("line {lno} (block {b}): non-finite entry in column {}", c + 1));
            }
            for (c, v) in vals.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        blocks.push(m);
    }
    if let Some((lno, _)) = lines.next() {
        return Err(format!("line {lno}: trailing data after {n} blocks"));
    }
    Ok(MatrixList { p, k, blocks })
}

/// Writes a single-block file in the sample format followed by a status
/// footer.
pub fn render_mean_file(p: usize, k: usize, m: &Mat, converged: bool, iterations: usize, residual: f64) -> String {
    let mut out = format!("{p} {k} 1\n");
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "# converged={converged} iterations={iterations} residual={residual:e}"
    );
    out
}

/// Outcome of averaging a sample file.
#[derive(Debug, Clone)]
pub struct MeanOutcome {
    pub matrix: Mat,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl<P> From<BarycenterResult<P>> for MeanOutcome
where
    P: Into<Mat>,
{
    fn from(r: BarycenterResult<P>) -> Self {
        MeanOutcome {
            matrix: r.point.into(),
            converged: r.converged,
            iterations: r.iterations,
            residual: r.final_step_norm,
        }
    }
}

/// Validates the blocks as manifold points (exit-2 errors carry the block
/// index) and runs the estimator (exit-1 errors).
pub fn compute_mean(
    list: &MatrixList,
    manifold: ManifoldKind,
    estimator: Estimator,
    controls: &SolverControls,
) -> Result<MeanOutcome, (i32, String)> {
    if estimator.manifold() != manifold {
        return Err((
            EXIT_USAGE,
            format!("estimator {estimator} does not apply to the {manifold} manifold"),
        ));
    }
    controls
        .validate(list.blocks.len())
        .map_err(|e| (EXIT_USAGE, e.to_string()))?;
    let fail = |e: Error| (EXIT_RUNTIME, e.to_string());
    match manifold {
        ManifoldKind::Stiefel => {
            let samples: Vec<StiefelPoint> = list
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    StiefelPoint::new(b.clone()).map_err(|e| (EXIT_USAGE, format!("block {i}: {e}")))
                })
                .collect::<Result<_, _>>()?;
            let closed = |g: StiefelPoint, residual: f64| MeanOutcome {
                matrix: g.into_matrix(),
                converged: true,
                iterations: 0,
                residual,
            };
            Ok(match estimator {
                Estimator::ProjPolar => {
                    let g = proj_mean_polar(&samples).map_err(fail)?;
                    let res = orthographic_residual(&g, &samples).map_err(fail)?;
                    closed(g, res)
                }
                Estimator::ProjQr => {
                    let g = proj_mean_qr(&samples).map_err(fail)?;
                    let res = qr_differential_residual(&g, &samples).map_err(fail)?;
                    closed(g, res)
                }
                Estimator::RPolar => r_barycenter_polar(&samples, controls).map_err(fail)?.into(),
                Estimator::RQr => r_barycenter_qr(&samples, controls).map_err(fail)?.into(),
                Estimator::ROrthographic => {
                    r_barycenter_orthographic(&samples, controls).map_err(fail)?.into()
                }
                Estimator::RlPolarOrth => rl_barycenter_polar_orthographic(&samples, controls)
                    .map_err(fail)?
                    .into(),
                Estimator::RiemMean | Estimator::ProjEvd => unreachable!("checked above"),
            })
        }
        ManifoldKind::Grassmann => {
            let samples: Vec<GrassmannPoint> = list
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    GrassmannPoint::with_rank(b.clone(), list.k)
                        .map_err(|e| (EXIT_USAGE, format!("block {i}: {e}")))
                })
                .collect::<Result<_, _>>()?;
            Ok(match estimator {
                Estimator::ProjEvd => {
                    let g = proj_mean_grassmann(&samples).map_err(fail)?;
                    let residual = grassmann_projection_residual(&g, &samples).map_err(fail)?;
                    MeanOutcome {
                        matrix: g.into_matrix(),
                        converged: true,
                        iterations: 0,
                        residual,
                    }
                }
                Estimator::RiemMean => riemannian_mean_grassmann(&samples, controls)
                    .map_err(fail)?
                    .into(),
                _ => unreachable!("checked above"),
            })
        }
    }
}

fn cmd_mean(a: MeanArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.input)
        .map_err(|e| usage(format!("cannot read {}: {e}", a.input.display())))?;
    let list = parse_matrix_list(&text, a.manifold).map_err(usage)?;
    let controls = SolverControls {
        tol: a.tol,
        max_iter: a.max_iter,
        init_index: 0,
    };
    let outcome = compute_mean(&list, a.manifold, a.estimator, &controls)
        .map_err(|(code, message)| Failure { code, message })?;
    if a.strict && a.estimator.is_iterative() && !outcome.converged {
        return Err(runtime(format!(
            "{} did not converge after {} iterations (residual {:e})",
            a.estimator, outcome.iterations, outcome.residual
        )));
    }
    let text = render_mean_file(
        list.p,
        list.k,
        &outcome.matrix,
        outcome.converged,
        outcome.iterations,
        outcome.residual,
    );
    write_atomically(&a.out, text.as_bytes())
}
