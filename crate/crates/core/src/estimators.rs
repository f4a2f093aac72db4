//! Pointwise log odds ratio estimators.
//!
//! All three estimators start from Nadaraya–Watson estimates of the four
//! conditional cell probabilities, computed with one shared weight vector so
//! they lie on the simplex. They differ in the amendment `ε(x)` added to each
//! probability before taking the log cross-product ratio:
//!
//! * I, plug-in: `ε = 0`.
//! * II, amended: `ε = ν₀ / (2 n h f̂(x))`.
//! * III, bias-corrected: the II amendment minus
//!   `h² κ₂ Σ(−1)^(i+j) b_ij/p_ij / Σ(−1)^(i+j) 1/p_ij`, with the bias terms
//!   `b_ij` estimated by a multinomial bootstrap from a pilot fit.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthPlan;
use crate::error::{Error, Result};
use crate::inference::ConfidenceInterval;
use crate::kernel::{KernelSpec, WeightVector};
use crate::rng;
use crate::sample::{Cell, CellOrder, Sample};

/// Denominators of the III correction smaller than this in magnitude are singular.
pub const SINGULAR_DENOMINATOR: f64 = 1e-8;

/// Default number of bootstrap resamples for the III bias terms.
pub const DEFAULT_BIAS_RESAMPLES: usize = 500;

const BIAS_STREAM: u64 = 0xB1A5;

/// `(v11 + v22) − (v12 + v21)`. Grouping the diagonal and off-diagonal terms
/// makes the result flip sign exactly under a row relabelling.
#[inline]
pub(crate) fn alternating_sum(v: [f64; 4]) -> f64 {
    (v[0] + v[3]) - (v[1] + v[2])
}

/// Conditional cell probabilities `(p11, p12, p21, p22)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbVector([f64; 4]);

impl ProbVector {
    pub const SUM_TOLERANCE: f64 = 1e-10;

    pub fn new(p11: f64, p12: f64, p21: f64, p22: f64) -> Result<Self> {
        Self::from_array([p11, p12, p21, p22])
    }

    pub fn from_array(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!("probabilities must be non-negative, got {p:?}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self(p))
    }

    pub(crate) fn from_array_unchecked(p: [f64; 4]) -> Self {
        Self(p)
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.0[cell.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn row_swapped(&self) -> Self {
        let p = self.0;
        Self([p[2], p[3], p[0], p[1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    I,
    II,
    III,
    /// Logistic regression with an interaction term.
    Glm,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::I => "I",
            Estimator::II => "II",
            Estimator::III => "III",
            Estimator::Glm => "GLM",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "i" => Ok(Estimator::I),
            "2" | "ii" => Ok(Estimator::II),
            "3" | "iii" => Ok(Estimator::III),
            "glm" => Ok(Estimator::Glm),
            other => Err(Error::InvalidInput(format!("unknown estimator '{other}'"))),
        }
    }
}

/// One pointwise estimate of log OR(x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOrEstimate {
    pub x: f64,
    pub estimator: Estimator,
    pub log_or: f64,
    /// Amendment added to every cell probability.
    pub epsilon: f64,
    pub valid: bool,
    /// `x` lies within one bandwidth of the support edge.
    pub boundary: bool,
    /// The density estimate was raised to the density floor.
    pub density_floor_hit: bool,
    /// The amended cross-product ratio is negative (an odd number of
    /// amended probabilities fell below zero). Only estimator III can do this.
    #[serde(default)]
    pub negative_ratio: bool,
}

impl LocalOrEstimate {
    fn new(x: f64, estimator: Estimator, log_or: f64, epsilon: f64) -> Self {
        Self {
            x,
            estimator,
            log_or,
            epsilon,
            valid: log_or.is_finite(),
            boundary: false,
            density_floor_hit: false,
            negative_ratio: false,
        }
    }
}

/// Probabilities and density estimate at one point, from a single kernel pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    pub probs: ProbVector,
    pub fhat: f64,
}

/// `p̂^h(x)` and `f̂^h(x)` sharing one sweep over the sample.
pub fn local_fit(sample: &Sample, x: f64, h: f64, spec: &KernelSpec) -> Result<LocalFit> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")));
    }
    let mut sums = [0.0; 4];
    for (&xk, &c) in sample.xs().iter().zip(sample.cells()) {
        sums[c.index()] += spec.eval((x - xk) / h);
    }
    let mass = (sums[0] + sums[1]) + (sums[2] + sums[3]);
    if mass <= 0.0 {
        return Err(Error::AllZeroWeights { x });
    }
    let probs = ProbVector::from_array_unchecked(sums.map(|s| s / mass));
    Ok(LocalFit { probs, fhat: mass / (sample.len() as f64 * h) })
}

/// Nadaraya–Watson estimates of the four cell probabilities at `x`.
pub fn cell_probabilities(sample: &Sample, x: f64, h: f64, spec: &KernelSpec) -> Result<ProbVector> {
    local_fit(sample, x, h, spec).map(|f| f.probs)
}

/// Lower bound applied to `f̂(x)` in the amendment: `1 / (n · range(X))`.
pub fn density_floor(sample: &Sample) -> f64 {
    let range = sample.range();
    if range > 0.0 {
        1.0 / (sample.len() as f64 * range)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amendment {
    pub epsilon: f64,
    /// Density actually used after flooring.
    pub fhat: f64,
    pub floor_hit: bool,
}

/// `ε(x) = ν₀ / (2 n h f̂(x))` with `f̂` floored at `floor`.
pub fn epsilon_amendment(n: usize, h: f64, fhat: f64, floor: f64, spec: &KernelSpec) -> Amendment {
    let floor_hit = fhat < floor;
    let f = if floor_hit { floor } else { fhat };
    Amendment { epsilon: spec.nu0 / (2.0 * n as f64 * h * f), fhat: f, floor_hit }
}

/// Estimator I: `log(p11) + log(p22) − log(p12) − log(p21)`.
///
/// Empty cells give `−∞` (numerator) or `+∞` (denominator) and `NaN` when
/// both are empty; all of these are marked invalid.
pub fn log_or_plugin(p: &ProbVector) -> LocalOrEstimate {
    let log_or = alternating_sum(p.as_array().map(f64::ln));
    LocalOrEstimate::new(f64::NAN, Estimator::I, log_or, 0.0)
}

/// Estimator II: the log cross-product ratio of `p̂_ij + ε`.
pub fn log_or_amended(p: &ProbVector, eps: f64) -> LocalOrEstimate {
    let log_or = alternating_sum(p.as_array().map(|v| (v + eps).ln()));
    LocalOrEstimate::new(f64::NAN, Estimator::II, log_or, eps)
}

/// Estimator III from precomputed bias terms.
///
/// `fhat` is the density value used for the II amendment (already floored).
/// The estimate is invalid when the alternating sum of reciprocal
/// probabilities is singular or when an amended probability is not positive.
pub fn log_or_corrected(
    p: &ProbVector,
    n: usize,
    h: f64,
    fhat: f64,
    bhat: &[f64; 4],
    spec: &KernelSpec,
) -> LocalOrEstimate {
    let base = spec.nu0 / (2.0 * n as f64 * h * fhat);
    let probs = p.as_array();
    let denominator = alternating_sum(probs.map(|v| 1.0 / v));
    let invalid =
        |eps| LocalOrEstimate { valid: false, ..LocalOrEstimate::new(f64::NAN, Estimator::III, f64::NAN, eps) };
    if !denominator.is_finite() || denominator.abs() < SINGULAR_DENOMINATOR {
        return invalid(f64::NAN);
    }
    let numerator = alternating_sum([0, 1, 2, 3].map(|i| bhat[i] / probs[i]));
    let eps = base - h * h * spec.kappa2 * (numerator / denominator);
    if !eps.is_finite() || probs.iter().any(|v| v + eps <= 0.0) {
        let negatives = probs.iter().filter(|&&v| v + eps < 0.0).count();
        return LocalOrEstimate { negative_ratio: negatives % 2 == 1, ..invalid(eps) };
    }
    LocalOrEstimate { estimator: Estimator::III, ..log_or_amended(p, eps) }
}

/// Pilot fits `p̂^g(X_k)` at every observation.
pub(crate) fn pilot_probabilities(sample: &Sample, g: f64, spec: &KernelSpec) -> Result<Vec<[f64; 4]>> {
    sample.xs().par_iter().map(|&xk| cell_probabilities(sample, xk, g, spec).map(|p| p.as_array())).collect()
}

/// Bootstrap estimates of the bias terms `b_ij(x)` at every point of `grid`.
///
/// Each of the `resamples` bootstrap datasets keeps the covariates and draws
/// every cell from `Multinomial(1, p̂^g(X_k))` (resample `b` uses the stream
/// `(seed, b)`). The estimate is
/// `[mean_b p̂*_ij^h(x) − p̂_ij^g(x)] / (h² κ₂)`. Because the NW fit is linear
/// in the responses, the mean over resamples is taken on the one-hot draws
/// first and smoothed once.
#[allow(clippy::too_many_arguments)]
pub fn estimate_bias_terms_on_grid(
    sample: &Sample,
    grid: &[f64],
    h: f64,
    g: f64,
    resamples: usize,
    seed: u64,
    order: CellOrder,
    spec: &KernelSpec,
) -> Result<Vec<[f64; 4]>> {
    if resamples == 0 {
        return Err(Error::InvalidInput("bias bootstrap needs at least one resample".into()));
    }
    let pilot = pilot_probabilities(sample, g, spec)?;
    let n = sample.len();
    let counts = (0..resamples as u64)
        .into_par_iter()
        .fold(
            || vec![[0u32; 4]; n],
            |mut acc, b| {
                let mut rng = rng::stream(seed, &[BIAS_STREAM, b]);
                for (slot, p) in acc.iter_mut().zip(&pilot) {
                    slot[order.draw(p, rng.random::<f64>()).index()] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![[0u32; 4]; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    for c in 0..4 {
                        x[c] += y[c];
                    }
                }
                a
            },
        );
    let mean_draws: Vec<[f64; 4]> = counts.iter().map(|c| c.map(|v| v as f64 / resamples as f64)).collect();
    let scale = h * h * spec.kappa2;
    grid.iter()
        .map(|&x| {
            let w = crate::kernel::nw_weights(x, sample.xs(), h, spec)?;
            let boot_mean = smooth(&w, &mean_draws);
            let target = cell_probabilities(sample, x, g, spec)?.as_array();
            Ok([0, 1, 2, 3].map(|c| (boot_mean[c] - target[c]) / scale))
        })
        .collect()
}

fn smooth(w: &WeightVector, values: &[[f64; 4]]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (wk, v) in w.as_slice().iter().zip(values) {
        for c in 0..4 {
            out[c] += wk * v[c];
        }
    }
    out
}

/// Bias terms at a single point; see [`estimate_bias_terms_on_grid`].
pub fn estimate_bias_terms(
    sample: &Sample,
    x: f64,
    h: f64,
    g: f64,
    resamples: usize,
    seed: u64,
    spec: &KernelSpec,
) -> Result<[f64; 4]> {
    estimate_bias_terms_on_grid(sample, &[x], h, g, resamples, seed, CellOrder::STANDARD, spec).map(|v| v[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub estimator: Estimator,
    pub kernel: KernelSpec,
    pub plan: BandwidthPlan,
    /// Resamples for the III bias terms.
    pub bias_resamples: usize,
    pub seed: u64,
    /// Inverse-CDF cell order for the III bias bootstrap.
    pub draw_order: CellOrder,
}

impl EstimatorConfig {
    pub fn new(estimator: Estimator, plan: BandwidthPlan) -> Self {
        Self {
            estimator,
            kernel: KernelSpec::gaussian(),
            plan,
            bias_resamples: DEFAULT_BIAS_RESAMPLES,
            seed: 0,
            draw_order: CellOrder::STANDARD,
        }
    }
}

/// Estimates over a grid, plus the bandwidths that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    pub estimator: Estimator,
    pub h: Option<f64>,
    pub g: Option<f64>,
    pub points: Vec<LocalOrEstimate>,
    /// Pointwise intervals, when requested (same order as `points`).
    pub intervals: Vec<ConfidenceInterval>,
}

impl CurveEstimate {
    pub fn log_or(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.log_or).collect()
    }
}

/// `count` equally spaced points over the `h`-interior of the support.
pub fn interior_grid(sample: &Sample, h: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = sample.support();
    let (a, b) = if hi - lo > 2.0 * h { (lo + h, hi - h) } else { (lo, hi) };
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Evaluate the configured estimator at every grid point.
///
/// Points where the kernel puts no mass are kept with `valid = false`.
pub fn estimate_curve(sample: &Sample, grid: &[f64], config: &EstimatorConfig) -> Result<CurveEstimate> {
    let spec = &config.kernel;
    let BandwidthPlan { h, g, .. } = config.plan;
    let n = sample.len();
    let floor = density_floor(sample);

    let bias = if config.estimator == Estimator::III && !grid.is_empty() {
        Some(estimate_bias_terms_on_grid(
            sample,
            grid,
            h,
            g,
            config.bias_resamples,
            config.seed,
            config.draw_order,
            spec,
        )?)
    } else {
        None
    };

    let mut points = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        let boundary = !sample.is_interior(x, h);
        let fit = match local_fit(sample, x, h, spec) {
            Ok(fit) => fit,
            Err(Error::AllZeroWeights { .. }) => {
                points.push(LocalOrEstimate {
                    x,
                    estimator: config.estimator,
                    log_or: f64::NAN,
                    epsilon: f64::NAN,
                    valid: false,
                    boundary,
                    density_floor_hit: false,
                    negative_ratio: false,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let amendment = epsilon_amendment(n, h, fit.fhat, floor, spec);
        let mut est = match config.estimator {
            Estimator::I => log_or_plugin(&fit.probs),
            Estimator::II => log_or_amended(&fit.probs, amendment.epsilon),
            Estimator::III => {
                let bhat = bias.as_ref().map(|b| b[i]).unwrap_or([0.0; 4]);
                log_or_corrected(&fit.probs, n, h, amendment.fhat, &bhat, spec)
            }
            Estimator::Glm => {
                return Err(Error::InvalidInput("the GLM estimator is fitted by baselines::glm_local_log_or".into()))
            }
        };
        est.x = x;
        est.boundary = boundary;
        est.density_floor_hit = amendment.floor_hit;
        points.push(est);
    }
    Ok(CurveEstimate { estimator: config.estimator, h: Some(h), g: Some(g), points, intervals: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Observation;
    use approx::assert_relative_eq;

    fn pv(p: [f64; 4]) -> ProbVector {
        ProbVector::from_array(p).unwrap()
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(0.25, 0.25, 0.25, 0.25).is_ok());
        assert!(ProbVector::new(0.5, 0.5, 0.5, -0.5).is_err());
        assert!(ProbVector::new(0.3, 0.3, 0.3, 0.3).is_err());
    }

    #[test]
    fn four_coincident_observations() {
        let obs: Vec<Observation> = Cell::ALL.iter().map(|&c| Observation::new(0.7, c)).collect();
        let s = Sample::new(&obs).unwrap();
        let p = cell_probabilities(&s, 0.7, 0.3, &KernelSpec::gaussian()).unwrap();
        assert_eq!(p.as_array(), [0.25; 4]);
    }

    #[test]
    fn six_point_oracle() {
        // Direct scalar evaluation of the NW ratio per cell.
        let data = [
            (-1.2, Cell::C11),
            (-0.4, Cell::C12),
            (0.1, Cell::C11),
            (0.5, Cell::C22),
            (0.9, Cell::C21),
            (1.6, Cell::C22),
        ];
        let obs: Vec<Observation> = data.iter().map(|&(x, c)| Observation::new(x, c)).collect();
        let s = Sample::new(&obs).unwrap();
        let k = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let total: f64 = data.iter().map(|(x, _)| k(-x)).sum();
        let p = cell_probabilities(&s, 0.0, 1.0, &KernelSpec::gaussian()).unwrap();
        for cell in Cell::ALL {
            let num: f64 = data.iter().filter(|(_, c)| *c == cell).map(|(x, _)| k(-x)).sum();
            assert_relative_eq!(p.get(cell), num / total, epsilon = 1e-14);
        }
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_values() {
        let g = KernelSpec::gaussian();
        let a = epsilon_amendment(200, 0.1, 0.25, 0.0, &g);
        assert_relative_eq!(a.epsilon, 0.0282095, epsilon = 1e-7);
        assert!(!a.floor_hit);
        let b = epsilon_amendment(400, 0.1, 0.25, 0.0, &g);
        assert_eq!(b.epsilon * 2.0, a.epsilon);
        let e = epsilon_amendment(100, 0.5, 0.5, 0.0, &KernelSpec::epanechnikov());
        assert_relative_eq!(e.epsilon, 0.012, epsilon = 1e-15);
    }

    #[test]
    fn density_floor_applies() {
        let a = epsilon_amendment(100, 0.5, 1e-9, 0.0025, &KernelSpec::gaussian());
        assert!(a.floor_hit);
        assert_eq!(a.fhat, 0.0025);
    }

    #[test]
    fn plugin_values() {
        assert_eq!(log_or_plugin(&pv([0.25; 4])).log_or, 0.0);
        let (r, c) = (0.6, 0.3);
        let product = pv([r * c, r * (1.0 - c), (1.0 - r) * c, (1.0 - r) * (1.0 - c)]);
        assert!(log_or_plugin(&product).log_or.abs() < 1e-14);
        let est = log_or_plugin(&pv([0.32, 0.22, 0.18, 0.28]));
        assert_relative_eq!(est.log_or, 0.816_526_2, epsilon = 1e-6);
        assert!(est.valid);
    }

    #[test]
    fn plugin_empty_cells() {
        let e = log_or_plugin(&pv([0.5, 0.0, 0.25, 0.25]));
        assert_eq!(e.log_or, f64::INFINITY);
        assert!(!e.valid);
        let e = log_or_plugin(&pv([0.0, 0.5, 0.25, 0.25]));
        assert_eq!(e.log_or, f64::NEG_INFINITY);
        assert!(!e.valid);
        let e = log_or_plugin(&pv([0.0, 0.0, 0.5, 0.5]));
        assert!(e.log_or.is_nan());
        assert!(!e.valid);
    }

    #[test]
    fn amended_values() {
        assert_eq!(log_or_amended(&pv([0.25; 4]), 0.3).log_or, 0.0);
        assert_eq!(log_or_amended(&pv([0.5, 0.5, 0.0, 0.0]), 0.01).log_or, 0.0);
        let e = log_or_amended(&pv([0.32, 0.22, 0.18, 0.28]), 0.0282095);
        let q = [0.32, 0.22, 0.18, 0.28].map(|v: f64| v + 0.0282095);
        let expected = ((q[0] * q[3]) / (q[1] * q[2])).ln();
        assert_relative_eq!(e.log_or, expected, epsilon = 1e-12);
        assert_relative_eq!(e.log_or, 0.7308, epsilon = 1e-4);
        assert!(e.valid);
    }

    #[test]
    fn amended_tends_to_plugin() {
        let p = pv([0.32, 0.22, 0.18, 0.28]);
        let target = log_or_plugin(&p).log_or;
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6] {
            let gap = (log_or_amended(&p, eps).log_or - target).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn corrected_reduces_to_amended() {
        let p = pv([0.31, 0.2, 0.17, 0.32]);
        let spec = KernelSpec::gaussian();
        let iii = log_or_corrected(&p, 200, 0.3, 0.25, &[0.0; 4], &spec);
        let eps = epsilon_amendment(200, 0.3, 0.25, 0.0, &spec).epsilon;
        let ii = log_or_amended(&p, eps);
        assert_eq!(iii.log_or.to_bits(), ii.log_or.to_bits());
        assert_eq!(iii.estimator, Estimator::III);
    }

    #[test]
    fn corrected_singular_denominator() {
        let e = log_or_corrected(&pv([0.25; 4]), 200, 0.3, 0.25, &[0.1, 0.0, 0.0, 0.0], &KernelSpec::gaussian());
        assert!(!e.valid);
    }

    #[test]
    fn corrected_negative_amendment_is_invalid() {
        // Large bias term pushes ε far below −min p.
        let p = pv([0.05, 0.3, 0.3, 0.35]);
        let e = log_or_corrected(&p, 50, 0.5, 0.25, &[5.0, 0.0, 0.0, 0.0], &KernelSpec::gaussian());
        assert!(e.epsilon < -0.05);
        assert!(!e.valid);
    }

    #[test]
    fn empty_grid_gives_empty_curve() {
        let obs: Vec<Observation> = (0..20).map(|k| Observation::new(k as f64, Cell::from_index(k % 4))).collect();
        let s = Sample::new(&obs).unwrap();
        for est in [Estimator::I, Estimator::II, Estimator::III] {
            let cfg = EstimatorConfig::new(est, BandwidthPlan::fixed(2.0, 20));
            assert!(estimate_curve(&s, &[], &cfg).unwrap().points.is_empty());
        }
    }

    #[test]
    fn interior_grid_endpoints() {
        let obs: Vec<Observation> = (0..=10).map(|k| Observation::new(k as f64, Cell::from_index(k % 4))).collect();
        let s = Sample::new(&obs).unwrap();
        let g = interior_grid(&s, 1.0, 101);
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[100], 9.0);
        assert_eq!(interior_grid(&s, 1.0, 0).len(), 0);
    }
}
