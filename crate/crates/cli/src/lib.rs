//! `heatflow` command line.
//!
//! Exit codes: 0 all checks passed, 1 a verification failed, 2 usage,
//! configuration or regime error, 3 numeric failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use heatflow::bounds::{integrate_profile, lipschitz_profile, inverse_profile, ProfileKind, ThetaProfile};
use heatflow::ou_flow::semigroup_eval;
use heatflow::spectrum::eigen_compare;
use heatflow::suite::{builtin_measures, run_suite_timed, SuiteConfig};
use heatflow::transport::{flow_forward_traced, flow_forward, transport_from_gaussian, transport_traced, FlowResult, IntegratorConfig};
use heatflow::verify::{
    check_hessian_bounds, default_hessian_points, default_t_grid, dimensional_entropy_check, empirical_lipschitz,
    majorization_check, poincare_transfer, pushforward_ks_1d, weighted_poincare_check, LipschitzDirection,
    VerificationReport,
};
use heatflow::{build_builtin, Error, Measure, MeasureDoc};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "heatflow", version, about = "Heat-flow transport maps and their Lipschitz certificates")]
struct Cli {
    /// Worker threads for batch work.
    #[arg(long, global = true, env = "HEATFLOW_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lipschitz bound, profile crossover and integral for a measure class.
    Bounds(BoundsArgs),
    /// Transport points through the heat-flow map.
    Transport(TransportArgs),
    /// Evaluate Q_t f, its score and score Jacobian on a (t, x) grid.
    OuEval(OuEvalArgs),
    /// Run one numerical check.
    Verify(VerifyArgs),
    /// Compare weighted Laplacian spectra with the Gaussian one.
    Spectrum(SpectrumArgs),
    /// Run the full acceptance battery.
    Suite(SuiteArgs),
    /// List builtin measures as JSON documents.
    Builtins,
}

#[derive(Debug, Args)]
struct MeasureArgs {
    /// Measure document (JSON).
    #[arg(long, conflicts_with = "builtin")]
    measure: Option<PathBuf>,
    /// Builtin measure label (see `heatflow builtins`).
    #[arg(long)]
    builtin: Option<String>,
}

impl MeasureArgs {
    fn load(&self) -> Result<Measure, Error> {
        let doc = match (&self.measure, &self.builtin) {
            (Some(path), _) => MeasureDoc::from_json(&fs::read_to_string(path)?)?,
            (None, Some(label)) => builtin_measures()
                .into_iter()
                .find(|(l, _)| l == label)
                .map(|(_, d)| d)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown builtin '{label}'")))?,
            (None, None) => return Err(Error::InvalidParameter("pass --measure FILE or --builtin NAME".into())),
        };
        build_builtin(&doc)
    }
}

#[derive(Debug, Args)]
struct IntegratorArgs {
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Richardson extrapolation from a half-step solve.
    #[arg(long)]
    richardson: bool,
}

impl IntegratorArgs {
    fn config(&self, m: &Measure) -> Result<IntegratorConfig, Error> {
        let mut cfg = IntegratorConfig::for_measure(m).with_richardson(self.richardson);
        if let Some(t) = self.t_max {
            cfg = cfg.with_t_max(t);
        }
        if let Some(t) = self.t_min {
            cfg.t_min = t;
        }
        if let Some(s) = self.steps {
            cfg = cfg.with_steps(s);
        }
        cfg.validate(m)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Logconcave,
    Mixture,
    Logconvex,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, value_enum, required_unless_present_any = ["measure", "builtin"])]
    kind: Option<KindArg>,
    #[arg(long = "R", alias = "r")]
    r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Bound the inverse map of a measure instead of the forward map.
    #[arg(long)]
    inverse: bool,
    #[command(flatten)]
    measure: MeasureArgs,
}

#[derive(Debug, Args)]
struct TransportArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    /// Points, one per row (x₁..x_d); a header row is allowed.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Run the forward flow S = T⁻¹ from points of μ.
    #[arg(long)]
    inverse: bool,
    /// CSV of (point, t, y₁..y_d) after every step.
    #[arg(long)]
    trajectory_out: Option<PathBuf>,
    #[command(flatten)]
    integrator: IntegratorArgs,
}

#[derive(Debug, Args)]
struct OuEvalArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    /// Rows (t, x₁..x_d); a header row is allowed.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum CheckArg {
    Hessian,
    Lipschitz,
    Pushforward,
    Poincare,
    Entropy,
    WeightedPoincare,
    Majorize,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    check: CheckArg,
    #[command(flatten)]
    measure: MeasureArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples or points; defaults depend on the check.
    #[arg(long)]
    n: Option<usize>,
    /// Lipschitz check of the inverse map.
    #[arg(long)]
    inverse: bool,
    /// Directory for `<check>.json` and `<check>_margins.csv`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    integrator: IntegratorArgs,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 2048)]
    grid: usize,
    /// Directory for `spectrum.json` and `spectrum.csv`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    lipschitz_samples: usize,
    #[arg(long, default_value_t = 100_000)]
    ks_samples: usize,
    /// Directory for `suite.json`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(format!("csv: {e}"))
    }
}

type Outcome = Result<bool, Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_USAGE;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match &cli.command {
        Command::Bounds(a) => bounds(a),
        Command::Transport(a) => transport(a),
        Command::OuEval(a) => ou_eval(a),
        Command::Verify(a) => verify(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Suite(a) => suite(a),
        Command::Builtins => builtins(),
    };
    match outcome {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn need(v: Option<f64>, flag: &str) -> Result<f64, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--{flag} is required for this kind")))
}

fn bounds(a: &BoundsArgs) -> Outcome {
    let profile = match a.kind {
        Some(KindArg::Mixture) => ThetaProfile::mixture(need(a.r, "R")?)?,
        Some(KindArg::Logconcave) => ThetaProfile::logconcave(need(a.kappa, "kappa")?, a.sigma.unwrap_or(f64::INFINITY))?,
        Some(KindArg::Logconvex) => ThetaProfile::logconvex(need(a.beta, "beta")?)?,
        None => {
            let m = a.measure.load()?;
            if a.inverse {
                inverse_profile(&m)?
            } else {
                lipschitz_profile(&m)?
            }
        }
    };
    let integral = integrate_profile(&profile, profile.default_t_max())?;
    let kind = match profile.kind {
        ProfileKind::Logconcave { .. } => "logconcave",
        ProfileKind::Mixture { .. } => "mixture",
        ProfileKind::Logconvex { .. } => "logconvex",
    };
    let report = serde_json::json!({
        "kind": kind,
        "bound": profile.lipschitz_bound(),
        "integral": integral,
        "closed_form_integral": profile.closed_form_integral,
        "t0": profile.t0,
        "theta_t0": profile.t0.map(|t| profile.theta(t)),
        "theta_0": profile.theta(0.0),
        "regime": profile.regime(),
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(true)
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Failure::Usage(format!("{}: row {}: {e}", path.display(), i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Failure::Usage(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn transport(a: &TransportArgs) -> Outcome {
    let m = a.measure.load()?;
    let cfg = a.integrator.config(&m)?;
    let d = m.dim();
    let points = read_rows(&a.input)?;
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Failure::Usage(format!("point {p:?} does not have {d} coordinates")));
    }
    let traced = a.trajectory_out.is_some();
    let flows: Vec<FlowResult> = points
        .iter()
        .map(|x| match (a.inverse, traced) {
            (false, false) => transport_from_gaussian(&m, x, &cfg),
            (false, true) => transport_traced(&m, x, &cfg),
            (true, false) => flow_forward(&m, x, &cfg),
            (true, true) => flow_forward_traced(&m, x, &cfg),
        })
        .collect::<Result<_, _>>()?;
    let mut w = csv::Writer::from_writer(sink(&a.output)?);
    let mut head = header("x", d);
    head.extend(header("y", d));
    head.push("op_norm".into());
    w.write_record(&head)?;
    for (x, f) in points.iter().zip(&flows) {
        let mut row: Vec<String> = x.iter().chain(&f.endpoint).map(|v| fmt(*v)).collect();
        row.push(fmt(f.op_norm));
        w.write_record(&row)?;
    }
    w.flush()?;
    if let Some(path) = &a.trajectory_out {
        let mut w = csv::Writer::from_path(path)?;
        let mut head = vec!["point".to_string(), "t".to_string()];
        head.extend(header("y", d));
        w.write_record(&head)?;
        for (i, f) in flows.iter().enumerate() {
            for (t, y) in f.trajectory.as_deref().unwrap_or_default() {
                let mut row = vec![i.to_string(), fmt(*t)];
                row.extend(y.iter().map(|v| fmt(*v)));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
    }
    Ok(true)
}

fn ou_eval(a: &OuEvalArgs) -> Outcome {
    let m = a.measure.load()?;
    let d = m.dim();
    let rows = read_rows(&a.input)?;
    let mut w = csv::Writer::from_writer(sink(&a.output)?);
    let mut head = vec!["t".to_string()];
    head.extend(header("x", d));
    head.extend(["q".to_string(), "log_q".to_string()]);
    head.extend(header("score", d));
    for i in 1..=d {
        for j in 1..=d {
            head.push(format!("hess{i}{j}"));
        }
    }
    w.write_record(&head)?;
    for row in rows {
        if row.len() != d + 1 {
            return Err(Failure::Usage(format!("row {row:?} must hold t and {d} coordinates")));
        }
        let ev = semigroup_eval(&m, row[0], &row[1..])?;
        let mut out: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
        out.push(fmt(ev.q_value));
        out.push(fmt(ev.log_q));
        out.extend(ev.score.iter().map(|v| fmt(*v)));
        for i in 0..d {
            for j in 0..d {
                out.push(fmt(ev.score_jacobian[(i, j)]));
            }
        }
        w.write_record(&out)?;
    }
    w.flush()?;
    Ok(true)
}

fn emit(report: &VerificationReport, dir: &Option<PathBuf>, stem: &str) -> Result<(), Failure> {
    println!("{}", report.to_json());
    eprintln!("{}", report.summary_line());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.json")), report.to_json() + "\n")?;
        fs::write(dir.join(format!("{stem}_margins.csv")), report.margins_csv())?;
    }
    Ok(())
}

fn verify(a: &VerifyArgs) -> Outcome {
    let m = a.measure.load()?;
    let seed = a.seed;
    let report = match a.check {
        CheckArg::Hessian => {
            let points = default_hessian_points(&m, a.n.unwrap_or(200), seed);
            let r = check_hessian_bounds(&m, &default_t_grid(), &points, seed)?;
            emit(&r.bounds, &a.output_dir, "hessian")?;
            emit(&r.finite_difference, &a.output_dir, "hessian_fd")?;
            return Ok(r.bounds.passed && r.finite_difference.passed);
        }
        CheckArg::Lipschitz => {
            let dir = if a.inverse { LipschitzDirection::Inverse } else { LipschitzDirection::Transport };
            empirical_lipschitz(&m, a.n.unwrap_or(1000), &a.integrator.config(&m)?, seed, dir)?
        }
        CheckArg::Pushforward => pushforward_ks_1d(&m, a.n.unwrap_or(100_000), &a.integrator.config(&m)?, seed)?,
        CheckArg::Poincare => poincare_transfer(&m, a.n.unwrap_or(100_000), seed)?,
        CheckArg::Entropy => dimensional_entropy_check(&m, a.n.unwrap_or(100_000), seed)?,
        CheckArg::WeightedPoincare => {
            weighted_poincare_check(&m, a.n.unwrap_or(100_000), &a.integrator.config(&m)?, seed)?
        }
        CheckArg::Majorize => majorization_check(&m)?,
    };
    let stem = format!("{:?}", a.check).to_lowercase();
    emit(&report, &a.output_dir, &stem)?;
    Ok(report.passed)
}

fn spectrum(a: &SpectrumArgs) -> Outcome {
    let m = a.measure.load()?;
    let r = eigen_compare(&m, a.k, a.grid)?;
    println!("{}", r.to_json());
    eprintln!(
        "spectrum {}: k={} grid={} factor={:.6} worst_margin={:.3e}",
        if r.passed { "PASS" } else { "FAIL" },
        a.k,
        a.grid,
        r.bound_factor,
        r.worst_margin
    );
    if let Some(dir) = &a.output_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("spectrum.json"), r.to_json() + "\n")?;
        fs::write(dir.join("spectrum.csv"), r.to_csv())?;
    }
    Ok(r.passed)
}

fn suite(a: &SuiteArgs) -> Outcome {
    let cfg = SuiteConfig {
        seed: a.seed,
        lipschitz_samples: a.lipschitz_samples,
        ks_samples: a.ks_samples,
    };
    let (report, times) = run_suite_timed(&cfg)?;
    for (c, t) in report.criteria.iter().zip(times) {
        eprintln!("{}  ({t:.2?})", c.summary_line());
    }
    println!("{}", report.to_json());
    if let Some(dir) = &a.output_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("suite.json"), report.to_json() + "\n")?;
    }
    Ok(report.passed)
}

fn builtins() -> Outcome {
    let docs: serde_json::Map<String, serde_json::Value> = builtin_measures()
        .into_iter()
        .map(|(l, d)| (l.to_string(), serde_json::from_str(&d.to_json()).expect("json")))
        .collect();
    println!("{}", serde_json::to_string_pretty(&docs).expect("json"));
    Ok(true)
}
