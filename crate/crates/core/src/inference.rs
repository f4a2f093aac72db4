//! Confidence intervals for log OR(x).
//!
//! Two delta-method bands (around estimators I and II) and a percentile
//! interval from the multinomial-1 bootstrap: covariates stay fixed and each
//! one-hot cell vector is redrawn from the pilot fit `p̂^g(X_k)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{alternating_sum, density_floor, epsilon_amendment, local_fit, pilot_probabilities};
use crate::kernel::{nw_weights, KernelSpec};
use crate::rng::{self, RandomStream};
use crate::sample::{Cell, CellOrder, Sample};

const BOOTSTRAP_STREAM: u64 = 0xB007;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CiMethod {
    DeltaI,
    DeltaII,
    Multinomial1Bootstrap,
}

impl CiMethod {
    pub fn name(self) -> &'static str {
        match self {
            CiMethod::DeltaI => "delta1",
            CiMethod::DeltaII => "delta2",
            CiMethod::Multinomial1Bootstrap => "bootstrap",
        }
    }
}

impl std::str::FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "delta1" | "dm-i" | "delta-i" => Ok(CiMethod::DeltaI),
            "delta2" | "dm-ii" | "delta-ii" => Ok(CiMethod::DeltaII),
            "bootstrap" | "m1b" | "m1b-ii" => Ok(CiMethod::Multinomial1Bootstrap),
            other => Err(Error::InvalidInput(format!("unknown interval method '{other}'"))),
        }
    }
}

/// Interval on the log-OR scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub x: f64,
    /// Nominal coverage, `1 − alpha`.
    pub level: f64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub method: CiMethod,
    pub width: f64,
}

impl ConfidenceInterval {
    fn new(x: f64, alpha: f64, estimate: f64, lo: f64, hi: f64, method: CiMethod) -> Self {
        Self { x, level: 1.0 - alpha, estimate, lo, hi, method, width: hi - lo }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Resampling settings for [`bootstrap_ci`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub alpha: f64,
    pub seed: u64,
    pub pilot_g: f64,
    pub order: CellOrder,
}

impl BootstrapConfig {
    pub fn new(resamples: usize, alpha: f64, seed: u64, pilot_g: f64) -> Self {
        Self { resamples, alpha, seed, pilot_g, order: CellOrder::STANDARD }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        let required = (2.0 / self.alpha).ceil() as usize;
        if self.resamples < required {
            return Err(Error::InsufficientResamples { required, got: self.resamples, alpha: self.alpha });
        }
        if !(self.pilot_g > 0.0 && self.pilot_g.is_finite()) {
            return Err(Error::InvalidInput(format!("pilot bandwidth must be positive, got {}", self.pilot_g)));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

/// Standard normal quantile `z_{1−α/2}`.
pub fn normal_critical_value(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Delta-method interval around the plug-in estimator:
/// `log ÔR ± z · sqrt(ν₀/(n h f̂) · Σ 1/p̂_ij)`.
pub fn delta_ci_plugin(sample: &Sample, x: f64, h: f64, spec: &KernelSpec, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let fit = local_fit(sample, x, h, spec)?;
    let p = fit.probs.as_array();
    if p.iter().any(|&v| v <= 0.0) {
        return Err(Error::EmptyCell { x });
    }
    let center = alternating_sum(p.map(f64::ln));
    let var = spec.nu0 / (sample.len() as f64 * h * fit.fhat) * p.iter().map(|v| 1.0 / v).sum::<f64>();
    let half = normal_critical_value(alpha) * var.sqrt();
    Ok(ConfidenceInterval::new(x, alpha, center, center - half, center + half, CiMethod::DeltaI))
}

/// Delta-method interval around the amended estimator, with every reciprocal
/// `1/p̂_ij` replaced by `1/(p̂_ij + ε)`. Always finite.
pub fn delta_ci_amended(sample: &Sample, x: f64, h: f64, spec: &KernelSpec, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let n = sample.len();
    let fit = local_fit(sample, x, h, spec)?;
    let amend = epsilon_amendment(n, h, fit.fhat, density_floor(sample), spec);
    let q = fit.probs.as_array().map(|v| v + amend.epsilon);
    let center = alternating_sum(q.map(f64::ln));
    let var = spec.nu0 / (n as f64 * h * amend.fhat) * q.iter().map(|v| 1.0 / v).sum::<f64>();
    let half = normal_critical_value(alpha) * var.sqrt();
    Ok(ConfidenceInterval::new(x, alpha, center, center - half, center + half, CiMethod::DeltaII))
}

fn draw_cells(pilot: &[[f64; 4]], order: CellOrder, rng: &mut RandomStream) -> Vec<Cell> {
    pilot.iter().map(|p| order.draw(p, rng.random::<f64>())).collect()
}

/// One multinomial-1 bootstrap sample: same covariates, each cell drawn from
/// `Multinomial(1, p̂^g(X_k))` in observation order.
pub fn multinomial1_resample(
    sample: &Sample,
    g: f64,
    spec: &KernelSpec,
    order: CellOrder,
    rng: &mut RandomStream,
) -> Result<Sample> {
    let pilot = pilot_probabilities(sample, g, spec)?;
    sample.with_cells(draw_cells(&pilot, order, rng))
}

/// Bootstrap replicates of `D_b = log ÕR*^h_b(x) − log ÕR^g(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    /// `log ÕR^h(x)` on the original sample.
    pub center: f64,
    /// `log ÕR^g(x)`, the value the resamples are centred on.
    pub pilot_center: f64,
    pub epsilon: f64,
    /// `D_b` in resample order.
    pub deviations: Vec<f64>,
}

/// Draw the multinomial-1 bootstrap distribution at `x`. Resample `b` uses
/// the stream `(seed, b)`, so the output does not depend on scheduling.
/// Both the `h` and `g` stage estimates use `ε = ν₀/(2 n h f̂^h(x))`.
pub fn bootstrap_deviations(
    sample: &Sample,
    x: f64,
    h: f64,
    config: &BootstrapConfig,
    spec: &KernelSpec,
) -> Result<BootstrapDraws> {
    if config.resamples == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one resample".into()));
    }
    let n = sample.len();
    let fit = local_fit(sample, x, h, spec)?;
    let eps = epsilon_amendment(n, h, fit.fhat, density_floor(sample), spec).epsilon;
    let amended = |p: [f64; 4]| alternating_sum(p.map(|v| (v + eps).ln()));
    let center = amended(fit.probs.as_array());
    let pilot_fit = local_fit(sample, x, config.pilot_g, spec)?;
    let pilot_center = amended(pilot_fit.probs.as_array());

    let pilot = pilot_probabilities(sample, config.pilot_g, spec)?;
    let weights = nw_weights(x, sample.xs(), h, spec)?;
    let deviations = (0..config.resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(config.seed, &[BOOTSTRAP_STREAM, b]);
            let mut sums = [0.0; 4];
            for (w, p) in weights.as_slice().iter().zip(&pilot) {
                sums[config.order.draw(p, rng.random::<f64>()).index()] += w;
            }
            amended(sums) - pilot_center
        })
        .collect();
    Ok(BootstrapDraws { center, pilot_center, epsilon: eps, deviations })
}

/// Lower and upper percentile bootstrap quantiles.
///
/// With `r = max(1, ⌈B α/2⌉)` the quantiles are the `r`-th smallest and
/// `r`-th largest of the sorted deviations, so they mirror each other under
/// negation of the sample.
pub fn percentile_bounds(deviations: &[f64], alpha: f64) -> (f64, f64) {
    let mut sorted = deviations.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    let r = ((b as f64 * alpha / 2.0 - 1e-9).ceil() as usize).clamp(1, b.div_ceil(2));
    (sorted[r - 1], sorted[b - r])
}

/// Percentile interval `(log ÕR^h(x) − u*, log ÕR^h(x) − l*)`.
pub fn bootstrap_ci(
    sample: &Sample,
    x: f64,
    h: f64,
    config: &BootstrapConfig,
    spec: &KernelSpec,
) -> Result<ConfidenceInterval> {
    config.validate()?;
    let draws = bootstrap_deviations(sample, x, h, config, spec)?;
    let (lower, upper) = percentile_bounds(&draws.deviations, config.alpha);
    Ok(ConfidenceInterval::new(
        x,
        config.alpha,
        draws.center,
        draws.center - upper,
        draws.center - lower,
        CiMethod::Multinomial1Bootstrap,
    ))
}

/// Dispatch on the interval method.
pub fn interval(
    method: CiMethod,
    sample: &Sample,
    x: f64,
    h: f64,
    spec: &KernelSpec,
    config: &BootstrapConfig,
) -> Result<ConfidenceInterval> {
    match method {
        CiMethod::DeltaI => delta_ci_plugin(sample, x, h, spec, config.alpha),
        CiMethod::DeltaII => delta_ci_amended(sample, x, h, spec, config.alpha),
        CiMethod::Multinomial1Bootstrap => bootstrap_ci(sample, x, h, config, spec),
    }
}
