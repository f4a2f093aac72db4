use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pointwise_or::bandwidth::{BandwidthMode, BandwidthPlan};
use pointwise_or::baselines::{glm_local_log_or, global_or, haldane_or, pearson_chi2, wald_ci_or};
use pointwise_or::estimators::{estimate_curve, interior_grid, Estimator, EstimatorConfig, DEFAULT_BIAS_RESAMPLES};
use pointwise_or::inference::{interval, BootstrapConfig, CiMethod};
use pointwise_or::io::{read_sample_path, write_sample, GridSpec, Ingested, OutputFormat, Report};
use pointwise_or::kernel::{KernelKind, KernelSpec};
use pointwise_or::simulation::{
    coverage_study, metrics_study, replicate_dataset, CoverageConfig, ModelId, StudyConfig,
};
use pointwise_or::{Error, Result};

const DEFAULT_GRID_POINTS: usize = 101;

#[derive(Parser)]
#[command(name = "pointwise-or", version, about = "Kernel estimates of the pointwise odds ratio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the log odds ratio curve.
    Estimate(EstimateArgs),
    /// Estimate the curve with pointwise confidence intervals.
    Ci(CiArgs),
    /// Global odds ratio, Wald interval, chi-square test and logistic fit.
    Baseline(BaselineArgs),
    /// Integrated bias and MSE on a simulation model.
    Simulate(SimulateArgs),
    /// Empirical coverage of an interval method on a simulation model.
    Coverage(CoverageArgs),
    /// Write one simulated dataset.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Output file (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Field delimiter for input and CSV output.
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SmoothingArgs {
    /// gaussian or epanechnikov.
    #[arg(long, default_value = "gaussian", value_parser = parse_kernel)]
    kernel: KernelKind,
    /// auto-dpi, auto-cv or a positive number.
    #[arg(long, default_value = "auto-dpi")]
    bandwidth: BandwidthMode,
    /// Shrink the selected bandwidth by n^(-1/20).
    #[arg(long)]
    undersmooth: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset with columns x,row,col.
    input: PathBuf,
    /// 1, 2 or 3.
    #[arg(long, default_value = "2")]
    estimator: Estimator,
    #[command(flatten)]
    smoothing: SmoothingArgs,
    /// lo:hi:step (default: 101 points over the h-interior of the data).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<GridSpec>,
    /// Resamples for the estimator III bias terms.
    #[arg(long, default_value_t = DEFAULT_BIAS_RESAMPLES)]
    bias_resamples: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    estimate: EstimateArgs,
    /// delta1, delta2 or bootstrap.
    #[arg(long, default_value = "bootstrap")]
    method: CiMethod,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap resamples.
    #[arg(long = "B", default_value_t = 500)]
    resamples: usize,
}

#[derive(Args)]
struct BaselineArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// lo:hi:step for the logistic local log odds ratio (default: 101 points over the data range).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<GridSpec>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct StudyArgs {
    /// A, B or C.
    #[arg(long)]
    model: ModelId,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[command(flatten)]
    smoothing: SmoothingArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Comma-separated estimators among 1, 2, 3, glm.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,glm")]
    estimator: Vec<Estimator>,
    /// lo:hi:step (default: -1.75:1.75:0.05).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<GridSpec>,
    #[arg(long, default_value_t = DEFAULT_BIAS_RESAMPLES)]
    bias_resamples: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Comma-separated evaluation points.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    x: Vec<f64>,
    /// delta1, delta2 or bootstrap.
    #[arg(long, default_value = "delta2")]
    method: CiMethod,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "B", default_value_t = 500)]
    resamples: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    model: ModelId,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replicate index within (seed, model, n).
    #[arg(long, default_value_t = 0)]
    rep: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
}

fn parse_delimiter(s: &str) -> std::result::Result<u8, String> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be a single ASCII character, got '{s}'")),
    }
}

fn parse_kernel(s: &str) -> std::result::Result<KernelKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "gaussian" => Ok(KernelKind::Gaussian),
        "epanechnikov" => Ok(KernelKind::Epanechnikov),
        _ => Err(format!("kernel must be gaussian or epanechnikov, got '{s}'")),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit(report: &Report, out: &OutputArgs) -> Result<()> {
    let mut w = open_output(&out.output)?;
    report.write(&mut w, out.format, out.delimiter)?;
    w.flush()?;
    Ok(())
}

fn base_report(command: &str, columns: &[&str]) -> Report {
    let mut r = Report::new(columns);
    r.meta("program", "pointwise-or").meta("version", env!("CARGO_PKG_VERSION")).meta("command", command);
    r
}

fn describe_data(r: &mut Report, path: &std::path::Path, data: &Ingested) {
    let t = data.table;
    r.meta("input", path.display())
        .meta("n", data.sample.len())
        .meta("row_coding", data.row_coding.describe())
        .meta("col_coding", data.col_coding.describe())
        .meta("table", format!("n11={} n12={} n21={} n22={}", t.n11, t.n12, t.n21, t.n22));
}

fn describe_smoothing(r: &mut Report, s: &SmoothingArgs, spec: &KernelSpec) {
    let mode = match s.bandwidth {
        BandwidthMode::DirectPlugIn => "auto-dpi".to_string(),
        BandwidthMode::CrossValidation => "auto-cv".to_string(),
        BandwidthMode::Fixed(h) => h.to_string(),
    };
    r.meta("seed", s.seed).meta("kernel", spec.kind.name()).meta("bandwidth", mode).meta("undersmooth", s.undersmooth);
}

fn describe_plan(r: &mut Report, plan: &BandwidthPlan) {
    r.meta("h", plan.h).meta("g", plan.g);
}

fn describe_grid(r: &mut Report, grid: &[f64], spec: Option<GridSpec>) {
    let text = match spec {
        Some(g) => format!("{}:{}:{}", g.lo, g.hi, g.step),
        None => {
            format!("{} points {}..{}", grid.len(), grid.first().unwrap_or(&f64::NAN), grid.last().unwrap_or(&f64::NAN))
        }
    };
    r.meta("grid", text);
}

/// Shared front half of `estimate` and `ci`.
struct Fitted {
    data: Ingested,
    spec: KernelSpec,
    plan: BandwidthPlan,
    grid: Vec<f64>,
    report: Report,
}

fn fit(command: &str, a: &EstimateArgs, columns: &[&str]) -> Result<Fitted> {
    if a.estimator == Estimator::Glm {
        return Err(Error::InvalidInput("use the baseline subcommand for the logistic fit".into()));
    }
    let data = read_sample_path(&a.input, a.out.delimiter)?;
    let spec = KernelSpec::new(a.smoothing.kernel);
    let plan = BandwidthPlan::select(&data.sample, &spec, a.smoothing.bandwidth, a.smoothing.undersmooth)?;
    let grid = match a.grid {
        Some(g) => g.points(),
        None => interior_grid(&data.sample, plan.h, DEFAULT_GRID_POINTS),
    };
    let mut report = base_report(command, columns);
    describe_data(&mut report, &a.input, &data);
    describe_smoothing(&mut report, &a.smoothing, &spec);
    describe_plan(&mut report, &plan);
    report.meta("estimator", a.estimator.name());
    if a.estimator == Estimator::III {
        report.meta("bias_resamples", a.bias_resamples);
    }
    describe_grid(&mut report, &grid, a.grid);
    Ok(Fitted { data, spec, plan, grid, report })
}

fn curve_config(a: &EstimateArgs, f: &Fitted) -> EstimatorConfig {
    let mut cfg = EstimatorConfig::new(a.estimator, f.plan);
    cfg.kernel = f.spec;
    cfg.bias_resamples = a.bias_resamples;
    cfg.seed = a.smoothing.seed;
    cfg
}

const CURVE_COLUMNS: [&str; 7] = ["x", "log_or", "valid", "epsilon", "h", "g", "boundary"];

fn run_estimate(a: &EstimateArgs) -> Result<()> {
    let mut f = fit("estimate", a, &CURVE_COLUMNS)?;
    let curve = estimate_curve(&f.data.sample, &f.grid, &curve_config(a, &f))?;
    for p in &curve.points {
        f.report.push(vec![
            p.x.into(),
            p.log_or.into(),
            p.valid.into(),
            p.epsilon.into(),
            f.plan.h.into(),
            f.plan.g.into(),
            p.boundary.into(),
        ]);
    }
    emit(&f.report, &a.out)
}

fn run_ci(a: &CiArgs) -> Result<()> {
    check_alpha(a.alpha)?;
    let e = &a.estimate;
    let mut columns = CURVE_COLUMNS.to_vec();
    columns.extend(["ci_lo", "ci_hi", "method", "alpha", "B", "seed"]);
    let mut f = fit("ci", e, &columns)?;
    f.report.meta("method", a.method.name()).meta("alpha", a.alpha).meta("B", a.resamples);
    let boot = BootstrapConfig::new(a.resamples, a.alpha, e.smoothing.seed, f.plan.g);
    if a.method == CiMethod::Multinomial1Bootstrap {
        boot.validate()?;
    }
    let curve = estimate_curve(&f.data.sample, &f.grid, &curve_config(e, &f))?;
    let bounds: Vec<(f64, f64)> = f
        .grid
        .par_iter()
        .map(|&x| match interval(a.method, &f.data.sample, x, f.plan.h, &f.spec, &boot) {
            Ok(ci) => Ok((ci.lo, ci.hi)),
            Err(err) if err.is_input_error() => Err(err),
            Err(_) => Ok((f64::NAN, f64::NAN)),
        })
        .collect::<Result<_>>()?;
    for (p, (lo, hi)) in curve.points.iter().zip(bounds) {
        f.report.push(vec![
            p.x.into(),
            p.log_or.into(),
            p.valid.into(),
            p.epsilon.into(),
            f.plan.h.into(),
            f.plan.g.into(),
            p.boundary.into(),
            lo.into(),
            hi.into(),
            a.method.name().into(),
            a.alpha.into(),
            a.resamples.into(),
            e.smoothing.seed.into(),
        ]);
    }
    emit(&f.report, &e.out)
}

fn run_baseline(a: &BaselineArgs) -> Result<()> {
    check_alpha(a.alpha)?;
    let data = read_sample_path(&a.input, a.out.delimiter)?;
    let t = data.table;
    let mut r = base_report("baseline", &["quantity", "x", "value"]);
    describe_data(&mut r, &a.input, &data);
    r.meta("alpha", a.alpha);
    let none = || pointwise_or::io::Field::Empty;
    let scalar = |r: &mut Report, name: &str, v: Result<f64>| {
        r.push(vec![name.into(), none(), v.unwrap_or(f64::NAN).into()]);
    };
    scalar(&mut r, "global_or", global_or(&t));
    scalar(&mut r, "haldane_or", haldane_or(&t));
    let wald = wald_ci_or(&t, a.alpha);
    scalar(&mut r, "wald_lo", wald.as_ref().map(|w| w.0).map_err(Clone::clone));
    scalar(&mut r, "wald_hi", wald.map(|w| w.1));
    let chi = pearson_chi2(&t);
    scalar(&mut r, "chi2_statistic", chi.as_ref().map(|c| c.statistic).map_err(Clone::clone));
    scalar(&mut r, "chi2_p_value", chi.map(|c| c.p_value));

    let (lo, hi) = data.sample.support();
    let grid = match a.grid {
        Some(g) => g.points(),
        None => {
            (0..DEFAULT_GRID_POINTS).map(|i| lo + (hi - lo) * i as f64 / (DEFAULT_GRID_POINTS - 1) as f64).collect()
        }
    };
    describe_grid(&mut r, &grid, a.grid);
    match glm_local_log_or(&data.sample, &grid) {
        Ok((glm, curve)) => {
            for (k, (b, se)) in glm.beta.iter().zip(glm.standard_errors).enumerate() {
                r.push(vec![format!("glm_beta{k}").into(), none(), (*b).into()]);
                r.push(vec![format!("glm_se{k}").into(), none(), se.into()]);
            }
            for p in &curve.points {
                r.push(vec!["glm_log_or".into(), p.x.into(), p.log_or.into()]);
            }
        }
        Err(err) if err.is_input_error() => return Err(err),
        Err(err) => {
            r.meta("glm", err.to_string());
        }
    }
    emit(&r, &a.out)
}

fn study_config(s: &StudyArgs, grid: Option<Vec<f64>>) -> StudyConfig {
    let mut cfg = StudyConfig::new(s.reps, s.smoothing.seed);
    cfg.kernel = KernelSpec::new(s.smoothing.kernel);
    cfg.bandwidth = s.smoothing.bandwidth;
    cfg.undersmooth = s.smoothing.undersmooth;
    if let Some(g) = grid {
        cfg.grid = g;
    }
    cfg
}

fn describe_study(r: &mut Report, s: &StudyArgs, cfg: &StudyConfig) {
    r.meta("model", s.model.name()).meta("n", s.n).meta("reps", s.reps);
    describe_smoothing(r, &s.smoothing, &cfg.kernel);
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let mut cfg = study_config(&a.study, a.grid.map(|g| g.points()));
    cfg.bias_resamples = a.bias_resamples;
    let mut r = base_report(
        "simulate",
        &[
            "model",
            "n",
            "estimator",
            "integrated_abs_bias",
            "integrated_mse",
            "replicates",
            "invalid",
            "negative_ratio",
            "evaluations",
            "mean_h",
        ],
    );
    describe_study(&mut r, &a.study, &cfg);
    r.meta("bias_resamples", cfg.bias_resamples);
    describe_grid(&mut r, &cfg.grid, a.grid);
    for m in metrics_study(a.study.model, a.study.n, &a.estimator, &cfg)? {
        r.push(vec![
            m.model.name().into(),
            m.n.into(),
            m.estimator.name().into(),
            m.integrated_abs_bias.into(),
            m.integrated_mse.into(),
            m.replicates.into(),
            m.invalid_count.into(),
            m.negative_ratio_count.into(),
            m.evaluations.into(),
            m.mean_bandwidth.into(),
        ]);
    }
    emit(&r, &a.out)
}

fn run_coverage(a: &CoverageArgs) -> Result<()> {
    check_alpha(a.alpha)?;
    let cfg = CoverageConfig { study: study_config(&a.study, None), alpha: a.alpha, resamples: a.resamples };
    let mut r = base_report(
        "coverage",
        &["model", "n", "x", "method", "alpha", "ecp", "mean_width", "replicates", "undefined"],
    );
    describe_study(&mut r, &a.study, &cfg.study);
    r.meta("method", a.method.name()).meta("alpha", a.alpha).meta("B", a.resamples);
    for c in coverage_study(a.study.model, a.study.n, &a.x, a.method, &cfg)? {
        r.push(vec![
            c.model.name().into(),
            c.n.into(),
            c.x.into(),
            c.method.name().into(),
            c.alpha.into(),
            c.ecp.into(),
            c.mean_width.into(),
            c.replicates.into(),
            c.undefined.into(),
        ]);
    }
    emit(&r, &a.out)
}

fn run_generate(a: &GenerateArgs) -> Result<()> {
    let sample = replicate_dataset(a.seed, a.model, a.n, a.rep)?;
    let mut w = open_output(&a.output)?;
    writeln!(
        w,
        "# program: pointwise-or\n# version: {}\n# command: generate\n# model: {}\n# n: {}\n# seed: {}\n# rep: {}",
        env!("CARGO_PKG_VERSION"),
        a.model.name(),
        a.n,
        a.seed,
        a.rep
    )?;
    write_sample(&mut w, &sample, a.delimiter)?;
    w.flush()?;
    Ok(())
}

fn threads(cli: &Cli) -> Option<usize> {
    match &cli.command {
        Command::Estimate(a) => a.out.threads,
        Command::Ci(a) => a.estimate.out.threads,
        Command::Baseline(a) => a.out.threads,
        Command::Simulate(a) => a.out.threads,
        Command::Coverage(a) => a.out.threads,
        Command::Generate(_) => None,
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = threads(cli) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("cannot set thread count: {e}")))?;
    }
    match &cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Ci(a) => run_ci(a),
        Command::Baseline(a) => run_baseline(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Coverage(a) => run_coverage(a),
        Command::Generate(a) => run_generate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
