use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nklab::builder::{build_t3, BuildConfig};
use nklab::catalog;
use nklab::immersion::ImmersionSource;
use nklab::invariants::{circ_dist, distance_to_angle, sweep, InvariantRow, CSV_COLUMNS};
use nklab::io::{fmt_f64, to_json_string, SampledImmersion, SECOND_ORDER_MARGIN};
use nklab::suites::{run_suite, Suite};
use nklab::transforms::{check_sampled_transform, transform_sampled, TransformKind};
use nklab::NkError;

#[derive(Parser, Debug)]
#[command(name = "nklab", version, about = "Lagrangian submanifolds of the nearly Kähler S³×S³: checks, sweeps, transforms, construction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a seeded verification suite and emit a JSON report.
    Verify(VerifyArgs),
    /// Sweep invariants over a grid of a catalog item or a sampled immersion file.
    Invariants(InvariantsArgs),
    /// Apply the swap or star transform to a sampled immersion file.
    Transform(TransformArgs),
    /// Build a Lagrangian immersion from a sinh-Gordon configuration.
    #[command(name = "build-t3")]
    BuildT3(BuildArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// structure, connection, lagrangian, transforms or all
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InvariantsArgs {
    /// Catalog item 1–8.
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    example: Option<usize>,
    /// Sampled immersion JSON file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Nodes per axis as nu,nv,nw. Catalog items are sampled over their sample box;
    /// files are subsampled from nodes at least four steps from every face.
    #[arg(long)]
    grid: Option<String>,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON path; stderr when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TransformArgs {
    /// swap, star or swap-star
    #[arg(long)]
    kind: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Interior nodes compared between source and result.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Check report path; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    config: PathBuf,
    /// Sampled immersion output.
    #[arg(long)]
    out: PathBuf,
    /// Verification report path; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    /// Bad arguments, unreadable or malformed input, write errors.
    Usage(String),
    /// A computation that could not complete (divergence, drift, rank loss).
    Check(String),
}

impl From<NkError> for Failure {
    fn from(e: NkError) -> Self {
        match e {
            NkError::Io(_) | NkError::Json(_) | NkError::InvalidInput(_) => Failure::Usage(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

/// Splits `--tol.<name> <value>` and `--tol.<name>=<value>` out of the raw arguments.
fn split_tolerances(args: Vec<String>) -> Result<(Vec<String>, BTreeMap<String, f64>), Failure> {
    let mut rest = Vec::new();
    let mut tol = BTreeMap::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(spec) = a.strip_prefix("--tol.") else {
            rest.push(a);
            continue;
        };
        let (name, value) = match spec.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Failure::Usage(format!("--tol.{spec} needs a value")))?;
                (spec.to_string(), v)
            }
        };
        let v: f64 = value
            .parse()
            .map_err(|_| Failure::Usage(format!("--tol.{name}: '{value}' is not a number")))?;
        if name.is_empty() || !(v >= 0.0) {
            return Err(Failure::Usage(format!("--tol.{name} needs a check name and a non-negative value")));
        }
        tol.insert(name, v);
    }
    Ok((rest, tol))
}

fn emit(path: Option<&Path>, text: &str, to_stderr: bool) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None if to_stderr => writeln!(std::io::stderr(), "{text}")?,
        None => writeln!(std::io::stdout(), "{text}")?,
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs, tol: &BTreeMap<String, f64>) -> Outcome {
    let suite: Suite = a.suite.parse()?;
    let report = run_suite(suite, a.n, a.seed, tol)?;
    emit(a.out.as_deref(), &to_json_string(&report), false)?;
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {} > {}", c.name, fmt_f64(c.max_residual), fmt_f64(c.tolerance));
    }
    Ok(report.pass)
}

fn parse_grid(s: &str) -> Result<Vec<usize>, Failure> {
    let dims: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("--grid '{s}' must look like nu,nv,nw")))?;
    if dims.is_empty() || dims.len() > 3 || dims.contains(&0) {
        return Err(Failure::Usage(format!("--grid '{s}' needs one to three positive counts")));
    }
    Ok(dims)
}

/// `n` evenly spaced values in `[lo, hi]`; the midpoint when `n = 1`.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn picks(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = linspace(lo as f64, hi as f64, n).iter().map(|x| x.round() as usize).collect();
    v.dedup();
    v
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |x| {
                    let mut p = prefix.clone();
                    p.push(*x);
                    p
                })
            })
            .collect()
    })
}

fn error_tag(e: &NkError) -> &'static str {
    match e {
        NkError::RankDeficient { .. } => "rank_deficient",
        NkError::NotLagrangian { .. } => "not_lagrangian",
        NkError::NonCommuting { .. } => "non_commuting",
        NkError::EigenbasisDiscontinuity { .. } => "eigenbasis_discontinuity",
        NkError::OutOfDomain { .. } => "out_of_domain",
        NkError::NotTangent { .. } => "not_tangent",
        _ => "error",
    }
}

#[derive(Serialize)]
struct Stats {
    min: [f64; 3],
    max: [f64; 3],
    mean: [f64; 3],
}

#[derive(Serialize)]
struct InvariantSummary {
    source: String,
    rows: usize,
    failed_rows: usize,
    failures: BTreeMap<String, usize>,
    /// Largest circular distance of each angle from its value in the first good row.
    angle_spread: [f64; 3],
    theta: Stats,
    curvature: Stats,
    h123_abs_min: f64,
    h123_abs_max: f64,
    worst_lagrangian: f64,
    /// `max over rows of min_i |θᵢ − π/3|`.
    max_pi_third_gap: f64,
}

fn stats(rows: &[&InvariantRow], f: impl Fn(&InvariantRow) -> [f64; 3]) -> Stats {
    let mut s = Stats { min: [f64::INFINITY; 3], max: [f64::NEG_INFINITY; 3], mean: [0.0; 3] };
    for r in rows {
        let v = f(r);
        for i in 0..3 {
            s.min[i] = s.min[i].min(v[i]);
            s.max[i] = s.max[i].max(v[i]);
            s.mean[i] += v[i] / rows.len() as f64;
        }
    }
    s
}

fn summarize(source: String, results: &[nklab::Result<InvariantRow>]) -> InvariantSummary {
    let good: Vec<&InvariantRow> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let mut failures = BTreeMap::new();
    for e in results.iter().filter_map(|r| r.as_ref().err()) {
        *failures.entry(error_tag(e).to_string()).or_insert(0) += 1;
    }
    let first = good.first().map(|r| r.theta).unwrap_or([0.0; 3]);
    let mut spread = [0.0f64; 3];
    for r in &good {
        for i in 0..3 {
            spread[i] = spread[i].max(circ_dist(r.theta[i], first[i]));
        }
    }
    let worst = |f: &dyn Fn(&InvariantRow) -> f64| good.iter().map(|r| f(r)).fold(0.0, f64::max);
    InvariantSummary {
        source,
        rows: results.len(),
        failed_rows: results.len() - good.len(),
        failures,
        angle_spread: spread,
        theta: stats(&good, |r| r.theta),
        curvature: stats(&good, |r| r.k),
        h123_abs_min: good.iter().map(|r| r.h123.abs()).fold(f64::INFINITY, f64::min),
        h123_abs_max: worst(&|r| r.h123.abs()),
        worst_lagrangian: worst(&|r| r.lag_residual),
        max_pi_third_gap: worst(&|r| distance_to_angle(&r.theta, std::f64::consts::FRAC_PI_3)),
    }
}

fn write_csv(
    out: Option<&Path>,
    points: &[Vec<f64>],
    results: &[nklab::Result<InvariantRow>],
) -> Result<(), Failure> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_COLUMNS.iter().copied().chain(["status"]))?;
    for (x, r) in points.iter().zip(results) {
        let (values, status) = match r {
            Ok(row) => (row.values(), "ok"),
            Err(e) => {
                let mut v = [f64::NAN; 11];
                for (slot, c) in v.iter_mut().zip(x) {
                    *slot = *c;
                }
                (v, error_tag(e))
            }
        };
        w.write_record(values.iter().map(|v| fmt_f64(*v)).chain([status.to_string()]))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_invariants(a: InvariantsArgs) -> Outcome {
    let grid = a.grid.as_deref().map(parse_grid).transpose()?;
    let (source, points, results) = if let Some(k) = a.example {
        let entry = catalog::example(k)?;
        let dims = grid.unwrap_or_else(|| vec![7, 7, 7]);
        let b = &entry.map.sample_box;
        let axes: Vec<Vec<f64>> =
            (0..entry.map.dim()).map(|i| linspace(b.lo[i], b.hi[i], *dims.get(i).unwrap_or(&1))).collect();
        let points = cartesian(&axes);
        let results = sweep(&entry.map, &points);
        (entry.map.label.clone(), points, results)
    } else {
        let path = a.file.as_ref().expect("clap requires --example or --file");
        let s = SampledImmersion::read(path)?;
        let shape = &s.grid.shape;
        let axes: Vec<Vec<f64>> = (0..shape.len())
            .map(|i| {
                let lo = SECOND_ORDER_MARGIN;
                let hi = (shape[i] - 1).saturating_sub(SECOND_ORDER_MARGIN).max(lo);
                let n = grid.as_ref().and_then(|g| g.get(i).copied()).unwrap_or(hi + 1 - lo);
                picks(lo, hi, n).into_iter().map(|j| j as f64).collect()
            })
            .collect();
        let points: Vec<Vec<f64>> = cartesian(&axes)
            .into_iter()
            .map(|idx| s.grid.coords(&idx.iter().map(|j| *j as usize).collect::<Vec<_>>()))
            .collect();
        let results = sweep(&s, &points);
        (s.label.clone(), points, results)
    };
    write_csv(a.out.as_deref(), &points, &results)?;
    emit(a.summary.as_deref(), &to_json_string(&summarize(source, &results)), true)?;
    Ok(true)
}

#[derive(Serialize)]
struct TransformCheck {
    report: nklab::transforms::SampledTransformReport,
    metric_tolerance: f64,
    law_tolerance: f64,
    pass: bool,
}

fn cmd_transform(a: TransformArgs, tol: &BTreeMap<String, f64>) -> Outcome {
    let kind: TransformKind = a.kind.parse()?;
    if let Some(bad) = tol.keys().find(|k| !["metric", "law"].contains(&k.as_str())) {
        return Err(Failure::Usage(format!("transform accepts --tol.metric and --tol.law, not --tol.{bad}")));
    }
    let src = SampledImmersion::read(&a.input)?;
    let dst = transform_sampled(&src, kind);
    dst.write(&a.out)?;
    let report = check_sampled_transform(&src, &dst, kind, a.n);
    let metric_tolerance = tol.get("metric").copied().unwrap_or(1e-6);
    let law_tolerance = tol.get("law").copied().unwrap_or(1e-5);
    let gate = src.lagrangian_gate();
    let pass = report.nodes_checked > report.failed_nodes
        && report.max_metric_gap <= metric_tolerance
        && report.max_law_gap <= law_tolerance
        && report.max_lagrangian_target <= gate;
    let check = TransformCheck { report, metric_tolerance, law_tolerance, pass };
    emit(a.report.as_deref(), &to_json_string(&check), false)?;
    Ok(pass)
}

fn cmd_build(a: BuildArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.config)?;
    let cfg = BuildConfig::from_json(&text)?;
    let out = build_t3(&cfg)?;
    out.immersion.write(&a.out)?;
    emit(a.report.as_deref(), &to_json_string(&out.report), false)?;
    Ok(out.report.pass)
}

fn run(args: Vec<String>) -> Outcome {
    let (args, tol) = split_tolerances(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            e.print()?;
            return if usage { Err(Failure::Usage(String::new())) } else { Ok(true) };
        }
    };
    let tol_allowed = matches!(cli.command, Command::Verify(_) | Command::Transform(_));
    if !tol.is_empty() && !tol_allowed {
        return Err(Failure::Usage("--tol.<name> applies to verify and transform only".into()));
    }
    match cli.command {
        Command::Verify(a) => cmd_verify(a, &tol),
        Command::Invariants(a) => cmd_invariants(a),
        Command::Transform(a) => cmd_transform(a, &tol),
        Command::BuildT3(a) => cmd_build(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(m)) => {
            eprintln!("nklab: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            if !m.is_empty() {
                eprintln!("nklab: {m}");
            }
            ExitCode::from(2)
        }
    }
}
