//! Command-line front end: load problem files, dispatch computations, emit
//! machine-readable results.
//!
//! Exit codes: 0 on success, 2 for validation problems (malformed files,
//! inconsistent data, inadmissible requests), 3 for numerical hard errors.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::atkinson;
use crate::classify::{self, Space};
use crate::error::{Error, Result};
use crate::io::{
    self, AtkinsonFile, ClassifyReportFile, JumpReportFile, PathSpecFile, ProblemFile, SpaceTag,
    SpectrumFile, TraceFile,
};
use crate::numkernel::{CMatrix, Tolerances};
use crate::perturb::{self, ParamPath};
use crate::problem::{canonicalize, chart_to_raw, BoundaryChart, BoundaryCondition, SLEquation};
use crate::spectrum;

#[derive(Parser)]
#[command(
    name = "sturmspec",
    version,
    about = "Spectral toolkit for self-adjoint discrete Sturm-Liouville problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonArgs {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output encoding.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Numerical rank / inertia decision threshold.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Clustering tolerance for characteristic polynomial roots.
    #[arg(long)]
    root_tol: Option<f64>,
    /// Divergence threshold for jump experiments.
    #[arg(long)]
    div_threshold: Option<f64>,
}

#[derive(Args)]
struct FileArgs {
    /// Input JSON file.
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ValidateArgs {
    /// Problem or Atkinson JSON file to check.
    input: Option<PathBuf>,
    /// Self-test: generate a random corpus and verify internal identities.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random cases for the self-test.
    #[arg(long, default_value_t = 25)]
    cases: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues with multiplicities.
    Spectrum(FileArgs),
    /// Exact number of eigenvalues from the rank formula.
    Count(FileArgs),
    /// Layer and area signature in the boundary-condition space.
    ClassifyBc(FileArgs),
    /// Layer and area signature in the equation space behind a fixed chart.
    ClassifyEq(FileArgs),
    /// Layer and area signature in the Atkinson boundary-condition space.
    ClassifyAtkinson(FileArgs),
    /// Eigenvalue branches along a path toward a singular point.
    Trace(FileArgs),
    /// Jump experiment: observed branch fates against the prediction.
    Jump(FileArgs),
    /// Reduce an Atkinson problem to its equivalent discrete problem.
    AtkinsonConvert(FileArgs),
    /// Check files against the schema, or self-test with --seed.
    Validate(ValidateArgs),
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut argv: Vec<OsString> = vec!["sturmspec".into()];
    argv.extend(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Count(args) => cmd_count(args),
        Command::ClassifyBc(args) => cmd_classify_bc(args),
        Command::ClassifyEq(args) => cmd_classify_eq(args),
        Command::ClassifyAtkinson(args) => cmd_classify_atkinson(args),
        Command::Trace(args) => cmd_trace(args),
        Command::Jump(args) => cmd_jump(args),
        Command::AtkinsonConvert(args) => cmd_atkinson_convert(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn tolerances(common: &CommonArgs) -> Tolerances {
    let mut t = Tolerances::default();
    if let Some(x) = common.rank_tol {
        t.rank_tol = x;
    }
    if let Some(x) = common.root_tol {
        t.root_cluster_tol = x;
    }
    if let Some(x) = common.div_threshold {
        t.divergence_threshold = x;
    }
    t
}

fn emit(common: &CommonArgs, text: String) -> Result<()> {
    match &common.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json<T: Serialize>(common: &CommonArgs, value: &T) -> Result<()> {
    emit(common, io::to_json(value)? + "\n")
}

/// Problem plus its embedded boundary condition, which most commands need.
fn load_problem_with_bc(
    path: &PathBuf,
    tols: &Tolerances,
) -> Result<(SLEquation, BoundaryCondition)> {
    let file: ProblemFile = io::read_json(path)?;
    let eq = file.equation(tols)?;
    let bc = file.boundary(tols)?.ok_or_else(|| {
        Error::Validation("problem file carries no \"bc\" entry".into())
    })?;
    Ok((eq, bc))
}

/// The chart of a condition: kept if given, canonicalized from a raw pair.
fn chart_of(bc: &BoundaryCondition, tols: &Tolerances) -> Result<BoundaryChart> {
    match bc {
        BoundaryCondition::Chart(chart) => Ok(chart.clone()),
        BoundaryCondition::Raw(raw) => canonicalize(raw, tols),
    }
}

fn cmd_spectrum(args: FileArgs) -> Result<()> {
    let tols = tolerances(&args.common);
    let (eq, bc) = load_problem_with_bc(&args.input, &tols)?;
    let spec = spectrum::eigenvalues(&eq, &bc, &tols)?;
    let file = SpectrumFile::from_spectrum(&spec);
    match args.common.format {
        Format::Json => emit_json(&args.common, &file),
        Format::Csv => emit(&args.common, file.csv()),
    }
}

fn cmd_count(args: FileArgs) -> Result<()> {
    let tols = tolerances(&args.common);
    let (eq, bc) = load_problem_with_bc(&args.input, &tols)?;
    let raw = bc.to_raw(&tols)?;
    let count = spectrum::count_formula(&eq, &raw, &tols)?;
    match args.common.format {
        Format::Json => emit_json(&args.common, &serde_json::json!({ "count": count })),
        Format::Csv => emit(&args.common, format!("{count}\n")),
    }
}

fn cmd_classify_bc(args: FileArgs) -> Result<()> {
    let tols = tolerances(&args.common);
    let (eq, bc) = load_problem_with_bc(&args.input, &tols)?;
    let chart = chart_of(&bc, &tols)?;
    let sig = classify::bc_signature(&eq, &chart, &tols)?;
    let classifier = classify::bc_classifier(&eq, &chart, &tols)?;
    emit_json(
        &args.common,
        &ClassifyReportFile::new(sig.layer, sig.inertia, &classifier),
    )
}

fn cmd_classify_eq(args: FileArgs) -> Result<()> {
    let tols = tolerances(&args.common);
    let (eq, bc) = load_problem_with_bc(&args.input, &tols)?;
    let chart = chart_of(&bc, &tols)?;
    let sig = classify::eq_signature(&eq, &chart, &tols)?;
    let classifier = classify::eq_classifier(&eq, &chart, &tols)?;
    emit_json(
        &args.common,
        &ClassifyReportFile::new(sig.layer, sig.inertia, &classifier),
    )
}

fn cmd_classify_atkinson(args: FileArgs) -> Result<()> {
    let tols = tolerances(&args.common);
    let file: AtkinsonFile = io::read_json(&args.input)?;
    let bc = file.boundary(&tols)?.ok_or_else(|| {
        Error::Validation("Atkinson file carries no \"bc\" entry".into())
    })?;
    let chart = chart_of(&bc, &tols)?;
    let sig = atkinson::atkinson_classify(&chart, &tols)?;
    let classifier = classify::atkinson_classifier(&chart)?;
    emit_json(
        &args.common,
        &ClassifyReportFile::new(sig.layer, sig.inertia, &classifier),
    )
}

/// Build the path and prediction a spec file describes.
fn build_path(spec: &PathSpecFile, tols: &Tolerances) -> Result<(ParamPath, classify::JumpPrediction)> {
    let t_max = spec.t_max.unwrap_or(ParamPath::DEFAULT_T_MAX);
    let k_steps = spec.k_steps.unwrap_or(ParamPath::DEFAULT_K_STEPS);
    let target = spec.target_signature();
    match spec.space {
        SpaceTag::Bc => {
            let pf = spec.problem.as_ref().ok_or_else(|| {
                Error::Validation("space \"bc\" needs a \"problem\" entry".into())
            })?;
            let eq = pf.equation(tols)?;
            let chart = spec.chart.chart(eq.d(), tols)?;
            let sig = classify::bc_signature(&eq, &chart, tols)?;
            let prediction = classify::predict_jump(target, sig.inertia, Space::BoundaryCondition)?;
            let path = perturb::make_bc_path(&eq, &chart, target, t_max, k_steps, tols)?;
            Ok((path, prediction))
        }
        SpaceTag::Eq => {
            let pf = spec.problem.as_ref().ok_or_else(|| {
                Error::Validation("space \"eq\" needs a \"problem\" entry".into())
            })?;
            let eq = pf.equation(tols)?;
            let chart = spec.chart.chart(eq.d(), tols)?;
            let sig = classify::eq_signature(&eq, &chart, tols)?;
            let prediction = classify::predict_jump(target, sig.inertia, Space::Equation)?;
            let path = perturb::make_eq_path(&eq, &chart, target, t_max, k_steps, tols)?;
            Ok((path, prediction))
        }
        SpaceTag::Atkinson => {
            let af = spec.atkinson.as_ref().ok_or_else(|| {
                Error::Validation("space \"atkinson\" needs an \"atkinson\" entry".into())
            })?;
            let ap = af.problem(tols)?;
            let chart = spec.chart.chart(ap.d(), tols)?;
            let sig = atkinson::atkinson_classify(&chart, tols)?;
            let prediction = classify::predict_jump(target, sig.inertia, Space::Atkinson)?;
            let path = atkinson::make_atkinson_bc_path(&ap, &chart, target, t_max, k_steps, tols)?;
            Ok((path, prediction))
        }
    }
}

fn cmd_trace(args: FileArgs) -> Result<()> {
    let tols = tolerances(&args.common);
    let spec: PathSpecFile = io::read_json(&args.input)?;
    let (path, _) = build_path(&spec, &tols)?;
    let trace = perturb::branch_trace(&path, &tols)?;
    match args.common.format {
        Format::Json => emit_json(&args.common, &TraceFile::from_trace(&trace)),
        Format::Csv => emit(&args.common, io::trace_csv(&trace, None)),
    }
}

fn cmd_jump(args: FileArgs) -> Result<()> {
    let tols = tolerances(&args.common);
    let spec: PathSpecFile = io::read_json(&args.input)?;
    let (path, prediction) = build_path(&spec, &tols)?;
    let report = perturb::jump_experiment(&path, prediction, &tols)?;
    match args.common.format {
        Format::Json => emit_json(&args.common, &JumpReportFile::from_report(&report)),
        Format::Csv => {
            let flags: Vec<String> = report.fates.iter().map(|&f| io::fate_token(f)).collect();
            emit(&args.common, io::trace_csv(&report.trace, Some(&flags)))
        }
    }
}

fn cmd_atkinson_convert(args: FileArgs) -> Result<()> {
    let tols = tolerances(&args.common);
    let file: AtkinsonFile = io::read_json(&args.input)?;
    let ap = file.problem(&tols)?;
    let eq = atkinson::to_discrete(&ap, &tols)?;
    let bc = match file.boundary(&tols)? {
        Some(bc) => {
            let raw = bc.to_raw(&tols)?;
            Some(BoundaryCondition::Raw(atkinson::bc_transform(&raw, &tols)?))
        }
        None => None,
    };
    emit_json(&args.common, &ProblemFile::from_equation(&eq, bc.as_ref()))
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let tols = tolerances(&args.common);
    if let Some(seed) = args.seed {
        return self_test(&args, seed, &tols);
    }
    let path = args.input.as_ref().ok_or_else(|| {
        Error::Validation("validate needs an input file or --seed for a self-test".into())
    })?;
    let value: serde_json::Value = io::read_json(path)?;
    let report = if value.get("partition").is_some() {
        let file: AtkinsonFile = serde_json::from_value(value)?;
        let ap = file.problem(&tols)?;
        let bc = file.boundary(&tols)?;
        let count = match &bc {
            Some(bc) => Some(atkinson::atkinson_count(&ap, &bc.to_raw(&tols)?, &tols)?),
            None => None,
        };
        serde_json::json!({
            "ok": true,
            "kind": "atkinson",
            "d": ap.d(),
            "N": ap.n(),
            "count": count,
        })
    } else {
        let file: ProblemFile = serde_json::from_value(value)?;
        let eq = file.equation(&tols)?;
        let bc = file.boundary(&tols)?;
        let count = match &bc {
            Some(bc) => Some(spectrum::count_formula(&eq, &bc.to_raw(&tols)?, &tols)?),
            None => None,
        };
        serde_json::json!({
            "ok": true,
            "kind": "problem",
            "d": eq.d(),
            "N": eq.n(),
            "count": count,
        })
    };
    emit_json(&args.common, &report)
}

/// Random corpus self-test: the two independent spectrum routes and the
/// count formula must agree on every generated instance.
fn self_test(args: &ValidateArgs, seed: u64, tols: &Tolerances) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures: Vec<String> = Vec::new();
    for case in 0..args.cases {
        let d = rng.random_range(1..=2);
        let n = rng.random_range(2..=4);
        let eq = random_equation(&mut rng, d, n, tols)?;
        let chart = random_chart(&mut rng, d, tols)?;
        let raw = chart_to_raw(&chart, tols)?;
        let count = spectrum::count_formula(&eq, &raw, tols)?;
        let via_gamma = spectrum::eigenvalues(&eq, &BoundaryCondition::Raw(raw.clone()), tols)?;
        let via_pencil = spectrum::pencil_oracle(&eq, &raw, tols)?;
        if via_gamma.total() != count {
            failures.push(format!(
                "case {case}: spectrum total {} != count formula {count}",
                via_gamma.total()
            ));
            continue;
        }
        if via_pencil.items().len() != via_gamma.items().len()
            || via_gamma
                .items()
                .iter()
                .zip(via_pencil.items())
                .any(|(&(a, ma), &(b, mb))| ma != mb || (a - b).abs() > 1e-8 * (1.0 + a.abs()))
        {
            failures.push(format!("case {case}: spectrum routes disagree"));
        }
    }
    let report = serde_json::json!({
        "ok": failures.is_empty(),
        "seed": seed,
        "cases": args.cases,
        "failures": failures,
    });
    emit_json(&args.common, &report)?;
    if report["ok"].as_bool() == Some(true) {
        Ok(())
    } else {
        Err(Error::NumericalInstability(
            "self-test corpus found disagreeing routes".into(),
        ))
    }
}

fn random_herm(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&g + &g.adjoint()).scale(0.5)
}

fn random_posdef(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    &(&g * &g.adjoint()) + &CMatrix::identity(n).scale(0.3)
}

fn random_equation(rng: &mut ChaCha8Rng, d: usize, n: usize, tols: &Tolerances) -> Result<SLEquation> {
    SLEquation::new(
        d,
        n,
        (0..=n).map(|_| random_posdef(rng, d)).collect(),
        (0..n).map(|_| random_herm(rng, d)).collect(),
        (0..n).map(|_| random_posdef(rng, d)).collect(),
        tols,
    )
}

fn random_chart(rng: &mut ChaCha8Rng, d: usize, tols: &Tolerances) -> Result<BoundaryChart> {
    let k: Vec<usize> = (1..=2 * d).filter(|_| rng.random_bool(0.5)).collect();
    BoundaryChart::new(k, random_herm(rng, 2 * d), tols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["no-such-command"]), 2);
        assert_eq!(run(Vec::<String>::new()), 2);
        assert_eq!(run(["spectrum", "/nonexistent/problem.json"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["--help"]), 0);
    }

    #[test]
    fn self_test_passes_on_small_corpus() {
        let dir = std::env::temp_dir().join("sturmspec-selftest");
        fs::create_dir_all(&dir).unwrap();
        let out = dir.join("report.json");
        let code = run([
            "validate",
            "--seed",
            "7",
            "--cases",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(report["ok"], serde_json::json!(true));
        assert_eq!(report["cases"], serde_json::json!(3));
    }
}
