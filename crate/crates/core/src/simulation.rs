//! Monte Carlo harness: three closed-form data-generating models, replicate
//! generation, integrated bias/MSE studies and interval coverage studies.
//!
//! All models draw `X ~ U[-2, 2]` and build the cells from a row margin
//! `p_1·(x)`, a column margin `p_·1(x)` and an association term `δ(x)`:
//!
//! ```text
//! p11 = p1· p·1 + δ    p12 = p1· p·2 − δ
//! p21 = p2· p·1 − δ    p22 = p2· p·2 + δ
//! ```

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{BandwidthMode, BandwidthPlan};
use crate::baselines::glm_local_log_or;
use crate::error::{Error, Result};
use crate::estimators::{estimate_curve, Estimator, EstimatorConfig, ProbVector, DEFAULT_BIAS_RESAMPLES};
use crate::inference::{interval, BootstrapConfig, CiMethod};
use crate::kernel::KernelSpec;
use crate::rng::{self, RandomStream};
use crate::sample::{Cell, CellOrder, Sample};

pub const SUPPORT: (f64, f64) = (-2.0, 2.0);

const REPLICATE_STREAM: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    A,
    B,
    C,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::A, ModelId::B, ModelId::C];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::A => "A",
            ModelId::B => "B",
            ModelId::C => "C",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl std::str::FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(ModelId::A),
            "B" => Ok(ModelId::B),
            "C" => Ok(ModelId::C),
            other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
        }
    }
}

/// Normal density with mean `mu` and standard deviation `sd`.
fn normal_pdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationModel {
    pub id: ModelId,
}

impl SimulationModel {
    pub fn new(id: ModelId) -> Self {
        Self { id }
    }

    /// `p_1·(x)`, shared by all models.
    pub fn margin_row(&self, x: f64) -> f64 {
        0.07 * (-x * x).exp() + 0.47
    }

    /// `p_·1(x)`, shared by all models.
    pub fn margin_col(&self, x: f64) -> f64 {
        0.1 / (1.0 + x.exp()) + 0.45
    }

    pub fn delta(&self, x: f64) -> f64 {
        match self.id {
            ModelId::A => 0.05 * (-0.3 * x).exp(),
            ModelId::B => 0.25 - normal_pdf(x, -1.0, 1.8),
            ModelId::C => 0.25 * (1.0 / (1.0 + (-6.0 * x).exp()) - 0.5),
        }
    }

    pub fn true_probabilities(&self, x: f64) -> ProbVector {
        let (r, c, d) = (self.margin_row(x), self.margin_col(x), self.delta(x));
        ProbVector::from_array_unchecked([r * c + d, r * (1.0 - c) - d, (1.0 - r) * c - d, (1.0 - r) * (1.0 - c) + d])
    }

    pub fn true_log_or(&self, x: f64) -> f64 {
        let p = self.true_probabilities(x).as_array();
        (p[0].ln() + p[3].ln()) - (p[1].ln() + p[2].ln())
    }
}

impl From<ModelId> for SimulationModel {
    fn from(id: ModelId) -> Self {
        Self::new(id)
    }
}

/// Evaluation grid −1.75, −1.70, …, 1.75 (71 points).
pub fn evaluation_grid() -> Vec<f64> {
    (0..71).map(|i| (-175 + 5 * i) as f64 / 100.0).collect()
}

/// `n` observations with `X ~ U[-2, 2]` and cells drawn from the model.
pub fn simulate_dataset(model: &SimulationModel, n: usize, rng: &mut RandomStream) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot simulate an empty dataset".into()));
    }
    let (lo, hi) = SUPPORT;
    let mut xs = Vec::with_capacity(n);
    let mut cells: Vec<Cell> = Vec::with_capacity(n);
    for _ in 0..n {
        let x = lo + (hi - lo) * rng.random::<f64>();
        let p = model.true_probabilities(x).as_array();
        cells.push(CellOrder::STANDARD.draw(&p, rng.random::<f64>()));
        xs.push(x);
    }
    Sample::from_parts(xs, cells, lo, hi)
}

/// Stream for replicate `rep` of the `(model, n)` configuration.
pub fn replicate_stream(seed: u64, model: ModelId, n: usize, rep: u64) -> RandomStream {
    rng::stream(seed, &[REPLICATE_STREAM, model.tag(), n as u64, rep])
}

/// Replicate `rep` of the `(model, n)` configuration, reproducible in isolation.
pub fn replicate_dataset(seed: u64, model: ModelId, n: usize, rep: u64) -> Result<Sample> {
    simulate_dataset(&model.into(), n, &mut replicate_stream(seed, model, n, rep))
}

/// Seed for resampling done inside replicate `rep` (bias terms, bootstrap).
fn replicate_seed(seed: u64, model: ModelId, n: usize, rep: u64) -> u64 {
    rng::stream_id(&[seed, model.tag(), n as u64, rep])
}

/// Settings shared by the bias/MSE and coverage studies.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub replicates: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
    pub bandwidth: BandwidthMode,
    pub undersmooth: bool,
    pub bias_resamples: usize,
    pub grid: Vec<f64>,
}

impl StudyConfig {
    /// Plug-in bandwidth with undersmoothing on every replicate, over the
    /// 71-point evaluation grid.
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            kernel: KernelSpec::gaussian(),
            bandwidth: BandwidthMode::DirectPlugIn,
            undersmooth: true,
            bias_resamples: DEFAULT_BIAS_RESAMPLES,
            grid: evaluation_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: ModelId,
    pub n: usize,
    pub estimator: Estimator,
    pub integrated_abs_bias: f64,
    pub integrated_mse: f64,
    pub replicates: usize,
    /// Invalid (non-finite) estimates over all replicates and grid points.
    pub invalid_count: usize,
    /// Invalid estimates whose amended cross-product ratio was negative.
    pub negative_ratio_count: usize,
    /// Replicates × grid points.
    pub evaluations: usize,
    pub mean_bandwidth: f64,
    /// Pointwise `|mean − truth|`, one per grid point (NaN if no valid estimate).
    pub pointwise_abs_bias: Vec<f64>,
    pub pointwise_mse: Vec<f64>,
}

impl MetricsReport {
    pub fn invalid_fraction(&self) -> f64 {
        self.invalid_count as f64 / self.evaluations as f64
    }

    pub fn negative_ratio_fraction(&self) -> f64 {
        self.negative_ratio_count as f64 / self.evaluations as f64
    }
}

/// Estimates of one replicate: per estimator, per grid point; NaN marks an
/// invalid value.
struct ReplicateOutcome {
    h: f64,
    values: Vec<Vec<f64>>,
    negative_ratios: Vec<usize>,
}

fn run_replicate(
    model: ModelId,
    n: usize,
    rep: u64,
    estimators: &[Estimator],
    config: &StudyConfig,
) -> Result<ReplicateOutcome> {
    let sample = replicate_dataset(config.seed, model, n, rep)?;
    let grid = &config.grid;
    let all_invalid = || (vec![f64::NAN; grid.len()], 0);
    let plan = BandwidthPlan::select(&sample, &config.kernel, config.bandwidth, config.undersmooth);
    let per_estimator: Vec<(Vec<f64>, usize)> = estimators
        .iter()
        .map(|&est| match est {
            Estimator::Glm => Ok(match glm_local_log_or(&sample, grid) {
                Ok((_, curve)) => (curve.log_or(), 0),
                Err(e) if is_fit_failure(&e) => all_invalid(),
                Err(e) => return Err(e),
            }),
            _ => {
                let Ok(plan) = plan else { return Ok(all_invalid()) };
                let mut cfg = EstimatorConfig::new(est, plan);
                cfg.kernel = config.kernel;
                cfg.bias_resamples = config.bias_resamples;
                cfg.seed = replicate_seed(config.seed, model, n, rep);
                let curve = estimate_curve(&sample, grid, &cfg)?;
                let values = curve.points.iter().map(|p| if p.valid { p.log_or } else { f64::NAN }).collect();
                Ok((values, curve.points.iter().filter(|p| p.negative_ratio).count()))
            }
        })
        .collect::<Result<_>>()?;
    let (values, negative_ratios) = per_estimator.into_iter().unzip();
    Ok(ReplicateOutcome { h: plan.map(|p| p.h).unwrap_or(f64::NAN), values, negative_ratios })
}

fn is_fit_failure(e: &Error) -> bool {
    matches!(e, Error::Separation(_) | Error::NoConvergence { .. } | Error::DegenerateData(_))
}

/// Order-independent mean: values are sorted before summation, so the
/// result does not depend on which replicate produced which value.
fn stable_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Integrated |bias| and MSE of one estimator.
pub fn integrated_metrics(
    model: ModelId,
    estimator: Estimator,
    n: usize,
    config: &StudyConfig,
) -> Result<MetricsReport> {
    metrics_study(model, n, &[estimator], config).map(|mut v| v.remove(0))
}

/// Integrated |bias| and MSE of several estimators on the same replicates.
pub fn metrics_study(
    model: ModelId,
    n: usize,
    estimators: &[Estimator],
    config: &StudyConfig,
) -> Result<Vec<MetricsReport>> {
    let reps: Vec<u64> = (0..config.replicates as u64).collect();
    metrics_for_replicates(model, n, estimators, config, &reps)
}

/// Metrics over an explicit set of replicate indices.
pub fn metrics_for_replicates(
    model: ModelId,
    n: usize,
    estimators: &[Estimator],
    config: &StudyConfig,
    reps: &[u64],
) -> Result<Vec<MetricsReport>> {
    if reps.len() < 2 {
        return Err(Error::InvalidInput("a metrics study needs at least two replicates".into()));
    }
    if n == 0 || config.grid.is_empty() || estimators.is_empty() {
        return Err(Error::InvalidInput("study needs n ≥ 1, a grid and at least one estimator".into()));
    }
    let outcomes: Vec<ReplicateOutcome> =
        reps.par_iter().map(|&rep| run_replicate(model, n, rep, estimators, config)).collect::<Result<_>>()?;

    let truth: Vec<f64> = config.grid.iter().map(|&x| SimulationModel::new(model).true_log_or(x)).collect();
    let mut hs: Vec<f64> = outcomes.iter().map(|o| o.h).filter(|h| h.is_finite()).collect();
    let mean_bandwidth = if hs.is_empty() { f64::NAN } else { stable_mean(&mut hs) };

    let reports = estimators
        .iter()
        .enumerate()
        .map(|(e, &estimator)| {
            let mut invalid_count = 0;
            let mut bias = Vec::with_capacity(truth.len());
            let mut mse = Vec::with_capacity(truth.len());
            for (j, &t) in truth.iter().enumerate() {
                let mut vals: Vec<f64> = outcomes.iter().map(|o| o.values[e][j]).filter(|v| v.is_finite()).collect();
                invalid_count += reps.len() - vals.len();
                if vals.is_empty() {
                    bias.push(f64::NAN);
                    mse.push(f64::NAN);
                    continue;
                }
                let mean = stable_mean(&mut vals);
                let mut sq: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
                let b = mean - t;
                // MSE = variance + bias², so MSE ≥ bias² holds in floating point too.
                bias.push(b.abs());
                mse.push(stable_mean(&mut sq) + b * b);
            }
            let integrate = |v: &[f64]| {
                let mut finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
                if finite.is_empty() {
                    f64::NAN
                } else {
                    stable_mean(&mut finite)
                }
            };
            MetricsReport {
                model,
                n,
                estimator,
                integrated_abs_bias: integrate(&bias),
                integrated_mse: integrate(&mse),
                replicates: reps.len(),
                invalid_count,
                negative_ratio_count: outcomes.iter().map(|o| o.negative_ratios[e]).sum(),
                evaluations: reps.len() * truth.len(),
                mean_bandwidth,
                pointwise_abs_bias: bias,
                pointwise_mse: mse,
            }
        })
        .collect();
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub model: ModelId,
    pub n: usize,
    pub x: f64,
    pub method: CiMethod,
    pub alpha: f64,
    /// Fraction of all replicates whose interval covers the truth; an
    /// interval that cannot be formed counts as not covering.
    pub ecp: f64,
    /// Mean log-scale width over the intervals that could be formed.
    pub mean_width: f64,
    pub replicates: usize,
    pub undefined: usize,
}

/// Settings for [`coverage_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub study: StudyConfig,
    pub alpha: f64,
    /// Bootstrap resamples per interval.
    pub resamples: usize,
}

/// Empirical coverage and mean width of `method` at each of `x_points`.
pub fn coverage_study(
    model: ModelId,
    n: usize,
    x_points: &[f64],
    method: CiMethod,
    config: &CoverageConfig,
) -> Result<Vec<CoverageReport>> {
    let study = &config.study;
    if study.replicates == 0 || n == 0 {
        return Err(Error::InvalidInput("coverage study needs replicates and n ≥ 1".into()));
    }
    if method == CiMethod::Multinomial1Bootstrap {
        BootstrapConfig::new(config.resamples, config.alpha, 0, 1.0).validate()?;
    }
    let sim = SimulationModel::new(model);
    let truth: Vec<f64> = x_points.iter().map(|&x| sim.true_log_or(x)).collect();

    // Per replicate and x: Some(width, covered) or None when undefined.
    let outcomes: Vec<Vec<Option<(f64, bool)>>> = (0..study.replicates as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<Option<(f64, bool)>>> {
            let sample = replicate_dataset(study.seed, model, n, rep)?;
            let Ok(plan) = BandwidthPlan::select(&sample, &study.kernel, study.bandwidth, study.undersmooth) else {
                return Ok(vec![None; x_points.len()]);
            };
            let boot =
                BootstrapConfig::new(config.resamples, config.alpha, replicate_seed(study.seed, model, n, rep), plan.g);
            Ok(x_points
                .iter()
                .zip(&truth)
                .map(|(&x, &t)| {
                    interval(method, &sample, x, plan.h, &study.kernel, &boot)
                        .ok()
                        .filter(|ci| ci.lo.is_finite() && ci.hi.is_finite())
                        .map(|ci| (ci.width, ci.contains(t)))
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    Ok(x_points
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let defined: Vec<(f64, bool)> = outcomes.iter().filter_map(|o| o[j]).collect();
            let covered = defined.iter().filter(|d| d.1).count();
            let mut widths: Vec<f64> = defined.iter().map(|d| d.0).collect();
            CoverageReport {
                model,
                n,
                x,
                method,
                alpha: config.alpha,
                ecp: covered as f64 / study.replicates as f64,
                mean_width: if widths.is_empty() { f64::NAN } else { stable_mean(&mut widths) },
                replicates: study.replicates,
                undefined: study.replicates - defined.len(),
            }
        })
        .collect())
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a − F_b|`.
pub fn kolmogorov_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
