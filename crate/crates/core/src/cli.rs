//! Command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when a verification fails and 2
//! for usage or input errors. Reports are written as JSON lines (or CSV) in a
//! fixed order, so identical arguments produce byte-identical output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{
    example_operator, example_regularizer_closed_form, verify_euclidean_firm_nonexpansive,
    verify_prox_identity, verify_regularizer_convexity, verify_t_firm_nonexpansive,
    weaker_regularizer_check, FrameShrinkage, InducedRegularizer, DEFAULT_EVAL_TOL, EXAMPLE_BRANCH_POINT,
};
use crate::matrix_io::{self, MatrixJson};
use crate::operator::{verify_operator_identities, AnalysisOperator, DEFAULT_RANK_TOL};
use crate::prox::{
    huber_scalar, numeric_prox, shrink_potential_scalar, shrink_scalar, verify_firm_nonexpansive,
    verify_moreau_characterization, ProxMap, DEFAULT_MAX_ITER,
};
use crate::report::{SolveReport, VerifyReport};
use crate::sampling::{gaussian_matrix, trial_rng, DEFAULT_SEED};
use crate::solvers::{solve_analysis_dual, synthesis_solution, AnalysisProblem};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PROXFRAME_THREADS";

#[derive(Debug, Parser)]
#[command(name = "proxframe", version, about = "Frame shrinkage as a proximity operator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the verification suites for an operator and inner prox.
    Verify(CommonArgs),
    /// Print the soft-shrinkage and single-vector-frame tables.
    Example(CommonArgs),
    /// Evaluate the induced regularizer on a grid.
    Regularizer(RegularizerArgs),
    /// Solve a denoising problem.
    Solve(SolveArgs),
    /// Time the core operations.
    Bench(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `example35`, `identity:D`, `random:NxD:SEED`, or a .csv/.json matrix file.
    #[arg(long, default_value = "example35")]
    pub operator: String,
    /// Inner prox as NAME[:LAMBDA]; NAME is soft, identity, box or ridge.
    #[arg(long, default_value = "soft:1")]
    pub prox: String,
    /// Shrinkage description `{"operator": <matrix>, "prox": {"name", "lambda"}}`; overrides --operator/--prox.
    #[arg(long)]
    pub shrinkage: Option<PathBuf>,
    /// Tolerance of the numerically solved checks (prox identity).
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; `regularizer` defaults to csv, everything else to json.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct RegularizerArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Grid as START:STOP:STEP (inclusive); points lie on the first coordinate axis.
    #[arg(long, default_value = "-2:2:0.01", allow_hyphen_values = true)]
    pub grid: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Dual projected gradient for min 1/2 ||x - y||^2 + lambda ||T y||_1.
    Dual,
    /// Closed form for matrices with orthonormal rows.
    Synthesis,
    /// Frame soft shrinkage T^+ S_lambda T.
    Frame,
    /// Numerical T-metric prox of the induced regularizer.
    Numeric,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Problem file `{"x": [...], "lambda": float}`.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Data vector as comma-separated values (instead of --problem).
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = Method::Dual)]
    pub method: Method,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
}

#[derive(Debug, Deserialize)]
struct ProblemFile {
    x: Vec<f64>,
    lambda: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProxSpec {
    pub name: String,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
struct ShrinkageFile {
    operator: MatrixJson,
    prox: ProxSpec,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Input(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.into())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };

    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    let outcome = match threads.filter(|&t| t > 0) {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| produce(&cli.command)),
            Err(e) => Err(Failure::Input(Error::Parse(format!("thread pool: {e}")))),
        },
        None => produce(&cli.command),
    };
    let outcome = outcome.and_then(|(out, text, failed)| {
        emit(out.as_deref(), &text, stdout)?;
        if failed {
            Err(Failure::Verification)
        } else {
            Ok(())
        }
    });

    match outcome {
        Ok(()) => 0,
        Err(Failure::Verification) => 1,
        Err(Failure::Input(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

type Produced = (Option<PathBuf>, String, bool);

fn produce(command: &Command) -> std::result::Result<Produced, Failure> {
    let (common, text, failed) = match command {
        Command::Verify(c) => {
            let (text, failed) = cmd_verify(c)?;
            (c, text, failed)
        }
        Command::Example(c) => (c, cmd_example(c)?, false),
        Command::Regularizer(r) => (&r.common, cmd_regularizer(r)?, false),
        Command::Solve(s) => (&s.common, cmd_solve(s)?, false),
        Command::Bench(c) => (c, cmd_bench(c)?, false),
    };
    Ok((common.out.clone(), text, failed))
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> std::io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => stdout.write_all(text.as_bytes()),
    }
}

/// Parses an operator description (built-in name or matrix file).
pub fn load_matrix(spec: &str) -> Result<DMatrix<f64>> {
    if spec == "example35" {
        return Ok(DMatrix::from_column_slice(2, 1, &[1.0, 2.0]));
    }
    if let Some(d) = spec.strip_prefix("identity:") {
        let d: usize = d.parse().map_err(|_| Error::Parse(format!("bad dimension in `{spec}`")))?;
        return Ok(DMatrix::identity(d, d));
    }
    if let Some(rest) = spec.strip_prefix("random:") {
        let bad = || Error::Parse(format!("expected random:NxD:SEED, got `{spec}`"));
        let (shape, seed) = rest.split_once(':').ok_or_else(bad)?;
        let (n, d) = shape.split_once('x').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        let d: usize = d.parse().map_err(|_| bad())?;
        let seed: u64 = seed.parse().map_err(|_| bad())?;
        return Ok(gaussian_matrix(&mut trial_rng(seed, 0), n, d));
    }
    matrix_io::read_matrix(Path::new(spec))
}

/// Parses `NAME[:LAMBDA]`.
pub fn parse_prox(spec: &str) -> Result<ProxMap> {
    let (name, lambda) = match spec.split_once(':') {
        Some((name, l)) => (
            name,
            l.parse::<f64>().map_err(|_| Error::Parse(format!("bad lambda in `{spec}`")))?,
        ),
        None => (spec, 1.0),
    };
    prox_from_name(name, lambda)
}

fn prox_from_name(name: &str, lambda: f64) -> Result<ProxMap> {
    match name {
        "soft" | "soft_shrink" => ProxMap::soft_shrink(lambda),
        "identity" => Ok(ProxMap::identity()),
        "box" | "clamp" => ProxMap::clamp(lambda),
        "ridge" => ProxMap::ridge(lambda),
        other => Err(Error::Parse(format!("unknown prox `{other}`"))),
    }
}

fn load_shrinkage(c: &CommonArgs) -> Result<FrameShrinkage> {
    let (matrix, prox) = match &c.shrinkage {
        Some(path) => {
            let file: ShrinkageFile = serde_json::from_str(&fs::read_to_string(path)?)?;
            (file.operator.into_matrix()?, prox_from_name(&file.prox.name, file.prox.lambda)?)
        }
        None => (load_matrix(&c.operator)?, parse_prox(&c.prox)?),
    };
    let op = AnalysisOperator::new(matrix, DEFAULT_RANK_TOL)?;
    Ok(FrameShrinkage::new(Arc::new(op), prox))
}

fn is_example35(fs: &FrameShrinkage) -> bool {
    let m = fs.operator().matrix();
    m.shape() == (2, 1)
        && m[(0, 0)] == 1.0
        && m[(1, 0)] == 2.0
        && fs.inner_prox().name == "soft_shrink"
        && fs.inner_prox().lambda == 1.0
}

fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn verify_reports(fs: &FrameShrinkage, c: &CommonArgs) -> Vec<VerifyReport> {
    let op = fs.operator();
    let prox = fs.inner_prox();
    let trials = c.trials.max(1);
    let mut reports = vec![
        verify_operator_identities(op, 1e-10, sub_seed(c.seed, 1)),
        verify_firm_nonexpansive(prox, op.rows(), trials, 1e-12, sub_seed(c.seed, 2)),
    ];
    if let Some(potential) = prox.potential_map() {
        reports.push(verify_moreau_characterization(
            prox,
            &*potential,
            op.rows(),
            trials,
            1e-6,
            sub_seed(c.seed, 3),
        ));
    }
    reports.push(verify_t_firm_nonexpansive(fs, trials, 1e-12, sub_seed(c.seed, 4)));
    if let Ok(reg) = InducedRegularizer::new(fs) {
        reports.push(verify_prox_identity(fs, &reg, trials, c.tol, sub_seed(c.seed, 5)));
        reports.push(weaker_regularizer_check(&reg, trials, 1e-9, sub_seed(c.seed, 6)));
        reports.push(verify_regularizer_convexity(&reg, trials, 1e-8, sub_seed(c.seed, 7)));
    }
    reports
}

fn render_reports(reports: &[VerifyReport], format: Format) -> Result<String> {
    let mut out = String::new();
    match format {
        Format::Json => {
            for r in reports {
                out.push_str(&serde_json::to_string(r)?);
                out.push('\n');
            }
        }
        Format::Csv => {
            out.push_str("property,trials,max_violation,tolerance,pass\n");
            for r in reports {
                out.push_str(&format!(
                    "{},{},{:e},{:e},{}\n",
                    r.property, r.trials, r.max_violation, r.tolerance, r.pass
                ));
            }
        }
    }
    Ok(out)
}

fn cmd_verify(c: &CommonArgs) -> Result<(String, bool)> {
    let fs = load_shrinkage(c)?;
    let reports = verify_reports(&fs, c);
    let failed = reports.iter().any(|r| !r.pass);
    Ok((render_reports(&reports, c.format.unwrap_or(Format::Json))?, failed))
}

#[derive(Serialize)]
struct ShrinkRow {
    table: &'static str,
    x: f64,
    soft_shrink: f64,
    huber: f64,
    potential: f64,
}

#[derive(Serialize)]
struct RegularizerRow {
    table: &'static str,
    y: f64,
    f_numeric: f64,
    f_closed_form: f64,
    g_of_t: f64,
    frame_prox: f64,
}

fn grid_point(start: f64, step: f64, i: usize) -> f64 {
    let x = start + step * i as f64;
    (x * 1e12).round() / 1e12
}

fn cmd_example(c: &CommonArgs) -> Result<String> {
    let lambda = 1.0;
    let shrink_rows: Vec<ShrinkRow> = (0..=12)
        .map(|i| {
            let x = grid_point(-3.0, 0.5, i);
            ShrinkRow {
                table: "soft_shrinkage",
                x,
                soft_shrink: shrink_scalar(x, lambda),
                huber: huber_scalar(x, lambda),
                potential: shrink_potential_scalar(x, lambda),
            }
        })
        .collect();

    let fs = FrameShrinkage::new(example_operator(), ProxMap::soft_shrink(lambda)?);
    let reg = InducedRegularizer::new(&fs)?;
    let mut reg_rows = Vec::new();
    for i in 0..=16 {
        let y = grid_point(-2.0, 0.25, i);
        let v = DVector::from_element(1, y);
        reg_rows.push(RegularizerRow {
            table: "single_vector_frame",
            y,
            f_numeric: reg.evaluate(&v, DEFAULT_EVAL_TOL)?,
            f_closed_form: example_regularizer_closed_form(y),
            g_of_t: reg.g_of_t(&v)?,
            frame_prox: fs.apply(&v)?[0],
        });
    }

    // The Euclidean metric is not the right one for anisotropic operators.
    let skew = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.1, 0.0, 0.1]);
    let skew_fs = FrameShrinkage::new(Arc::new(AnalysisOperator::with_default_tol(skew)?), ProxMap::soft_shrink(1.0)?);
    let trials = c.trials.max(1000);
    let demos = [
        verify_t_firm_nonexpansive(&skew_fs, trials, 1e-12, c.seed),
        verify_euclidean_firm_nonexpansive(&skew_fs, trials, 1e-12, c.seed),
    ];

    let mut out = String::new();
    match c.format.unwrap_or(Format::Json) {
        Format::Json => {
            for r in &shrink_rows {
                out.push_str(&serde_json::to_string(r)?);
                out.push('\n');
            }
            for r in &reg_rows {
                out.push_str(&serde_json::to_string(r)?);
                out.push('\n');
            }
            out.push_str(&render_reports(&demos, Format::Json)?);
        }
        Format::Csv => {
            out.push_str("x,soft_shrink,huber,potential\n");
            for r in &shrink_rows {
                out.push_str(&format!("{},{},{},{}\n", r.x, r.soft_shrink, r.huber, r.potential));
            }
            out.push('\n');
            out.push_str("y,f_numeric,f_closed_form,g_of_t,frame_prox\n");
            for r in &reg_rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.y, r.f_numeric, r.f_closed_form, r.g_of_t, r.frame_prox
                ));
            }
            out.push('\n');
            out.push_str(&render_reports(&demos, Format::Csv)?);
        }
    }
    Ok(out)
}

/// Parses `START:STOP:STEP` into inclusive grid points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("expected START:STOP:STEP, got `{spec}`"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 10_000_000 {
        return Err(bad());
    }
    Ok((0..count).map(|i| grid_point(start, step, i)).collect())
}

#[derive(Serialize)]
struct GridRow {
    x: f64,
    f_numeric: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_closed_form: Option<f64>,
    branch_point: bool,
}

fn cmd_regularizer(r: &RegularizerArgs) -> Result<String> {
    let grid = parse_grid(&r.grid)?;
    let fs = load_shrinkage(&r.common)?;
    let reg = InducedRegularizer::new(&fs)?;
    let closed = is_example35(&fs);
    let d = fs.operator().cols();

    let mut rows = Vec::with_capacity(grid.len());
    for &x in &grid {
        let mut v = DVector::zeros(d);
        v[0] = x;
        rows.push(GridRow {
            x,
            f_numeric: reg.evaluate(&v, DEFAULT_EVAL_TOL)?,
            f_closed_form: closed.then(|| example_regularizer_closed_form(x)),
            branch_point: closed && ((x.abs() - EXAMPLE_BRANCH_POINT).abs() < 1e-9),
        });
    }

    let mut out = String::new();
    match r.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            out.push_str("x,f_numeric,f_closed_form,branch_point\n");
            for row in &rows {
                let closed = row.f_closed_form.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!("{},{},{},{}\n", row.x, row.f_numeric, closed, row.branch_point));
            }
        }
        Format::Json => {
            for row in &rows {
                out.push_str(&serde_json::to_string(row)?);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

fn cmd_solve(s: &SolveArgs) -> Result<String> {
    let (x, lambda) = match (&s.problem, &s.x) {
        (Some(path), _) => {
            let p: ProblemFile = serde_json::from_str(&fs::read_to_string(path)?)?;
            (p.x, s.lambda.unwrap_or(p.lambda))
        }
        (None, Some(values)) => {
            let x = values
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad value `{v}` in --x"))))
                .collect::<Result<Vec<_>>>()?;
            (x, s.lambda.unwrap_or(1.0))
        }
        (None, None) => return Err(Error::Parse("solve needs --problem or --x".into())),
    };
    let x = DVector::from_vec(x);
    let matrix = load_matrix(&s.common.operator)?;
    let tol = s.common.tol;

    let report = match s.method {
        Method::Dual => solve_analysis_dual(&AnalysisProblem::new(x, matrix, lambda)?, tol, s.max_iter),
        Method::Synthesis => {
            let problem = AnalysisProblem::new(x.clone(), matrix.clone(), lambda)?;
            let y = synthesis_solution(&x, &matrix, lambda)?;
            SolveReport {
                objective: problem.objective(&y),
                minimizer: y.iter().copied().collect(),
                iterations: 0,
                converged: true,
                residual: 0.0,
            }
        }
        Method::Frame | Method::Numeric => {
            let op = Arc::new(AnalysisOperator::new(matrix, DEFAULT_RANK_TOL)?);
            let fs = FrameShrinkage::new(op, ProxMap::soft_shrink(lambda)?);
            let reg = InducedRegularizer::new(&fs)?;
            if s.method == Method::Numeric {
                numeric_prox(&reg, &x, Some(fs.metric()), tol, s.max_iter)?
            } else {
                let y = fs.apply(&x)?;
                let objective = 0.5 * fs.metric().norm(&(&x - &y))?.powi(2) + reg.evaluate(&y, DEFAULT_EVAL_TOL)?;
                SolveReport {
                    objective,
                    minimizer: y.iter().copied().collect(),
                    iterations: 0,
                    converged: true,
                    residual: 0.0,
                }
            }
        }
    };
    let mut out = serde_json::to_string(&report)?;
    out.push('\n');
    Ok(out)
}

#[derive(Serialize)]
struct BenchRow {
    operation: &'static str,
    calls: usize,
    seconds: f64,
    micros_per_call: f64,
}

fn cmd_bench(c: &CommonArgs) -> Result<String> {
    let fs = load_shrinkage(c)?;
    let reg = InducedRegularizer::new(&fs)?;
    let d = fs.operator().cols();
    let calls = c.trials.max(1);
    let mut rng = trial_rng(c.seed, 0);
    let inputs: Vec<DVector<f64>> = (0..calls).map(|_| crate::sampling::scaled_gaussian(&mut rng, d)).collect();

    let mut rows = Vec::new();
    let mut time = |operation: &'static str, f: &mut dyn FnMut(&DVector<f64>) -> Result<()>| -> Result<()> {
        let start = Instant::now();
        for x in &inputs {
            f(x)?;
        }
        let seconds = start.elapsed().as_secs_f64();
        rows.push(BenchRow { operation, calls, seconds, micros_per_call: seconds * 1e6 / calls as f64 });
        Ok(())
    };
    time("frame_prox", &mut |x| fs.apply(x).map(drop))?;
    time("induced_regularizer", &mut |x| reg.evaluate(x, DEFAULT_EVAL_TOL).map(drop))?;
    time("numeric_prox", &mut |x| {
        numeric_prox(&reg, x, Some(fs.metric()), c.tol * 1e-2, DEFAULT_MAX_ITER).map(drop)
    })?;

    let mut out = String::new();
    for row in &rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("-2:2:0.01").unwrap();
        assert_eq!(g.len(), 401);
        assert_eq!(g[0], -2.0);
        assert_eq!(g[300], 1.0);
        assert_eq!(g[400], 2.0);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a:1:0.1").is_err());
    }

    #[test]
    fn prox_specs() {
        assert_eq!(parse_prox("soft:2").unwrap().lambda, 2.0);
        assert_eq!(parse_prox("soft_shrink:0.5").unwrap().name, "soft_shrink");
        assert_eq!(parse_prox("identity").unwrap().name, "identity");
        assert!(parse_prox("soft:-1").is_err());
        assert!(parse_prox("soft:x").is_err());
        assert!(parse_prox("hard:1").is_err());
    }

    #[test]
    fn operator_specs() {
        assert_eq!(load_matrix("example35").unwrap().shape(), (2, 1));
        assert_eq!(load_matrix("identity:4").unwrap(), DMatrix::identity(4, 4));
        let a = load_matrix("random:6x3:9").unwrap();
        assert_eq!(a, load_matrix("random:6x3:9").unwrap());
        assert_eq!(a.shape(), (6, 3));
        assert!(load_matrix("random:6x3").is_err());
        assert!(load_matrix("identity:x").is_err());
        assert!(load_matrix("/nonexistent/file.csv").is_err());
    }
}
