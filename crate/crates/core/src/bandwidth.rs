//! Bandwidth selection.
//!
//! The estimation bandwidth `h` is shared by all four cell regressions. It is
//! chosen by a direct plug-in rule (per cell, then combined by geometric
//! mean), by pooled leave-one-out cross-validation, or fixed by the caller,
//! and is optionally undersmoothed to the `n^(-1/4)` rate. The pilot
//! bandwidth `g` used to generate bootstrap data is oversmoothed to the
//! `n^(-1/9)` rate.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::sample::{min_max, Cell, Sample};

/// Samples whose covariate standard deviation falls below this are degenerate.
pub const DEGENERATE_SD: f64 = 1e-12;

const TRIM: f64 = 0.01;
const PROPORTION_TRUNCATED: f64 = 0.05;
const MAX_BLOCKS: usize = 5;
const BLOCK_DIVISOR: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandwidthMethod {
    DirectPlugIn,
    CrossValidation,
    Fixed,
}

impl BandwidthMethod {
    pub fn name(self) -> &'static str {
        match self {
            BandwidthMethod::DirectPlugIn => "auto-dpi",
            BandwidthMethod::CrossValidation => "auto-cv",
            BandwidthMethod::Fixed => "fixed",
        }
    }
}

/// How to obtain the base bandwidth before undersmoothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthMode {
    DirectPlugIn,
    CrossValidation,
    Fixed(f64),
}

impl std::str::FromStr for BandwidthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto-dpi" | "dpi" => Ok(BandwidthMode::DirectPlugIn),
            "auto-cv" | "cv" => Ok(BandwidthMode::CrossValidation),
            v => match v.parse::<f64>() {
                Ok(h) if h > 0.0 && h.is_finite() => Ok(BandwidthMode::Fixed(h)),
                _ => Err(Error::InvalidInput(format!(
                    "bandwidth must be auto-dpi, auto-cv or a positive number, got '{v}'"
                ))),
            },
        }
    }
}

/// Estimation bandwidth `h` and pilot bandwidth `g`, both in covariate units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPlan {
    pub h: f64,
    pub g: f64,
    pub method: BandwidthMethod,
    pub undersmoothed: bool,
}

impl BandwidthPlan {
    /// Fixed `h` with the pilot derived from it.
    pub fn fixed(h: f64, n: usize) -> Self {
        Self { h, g: pilot_bandwidth(h, n), method: BandwidthMethod::Fixed, undersmoothed: false }
    }

    pub fn select(sample: &Sample, spec: &KernelSpec, mode: BandwidthMode, undersmoothed: bool) -> Result<Self> {
        let n = sample.len();
        let (base, method) = match mode {
            BandwidthMode::DirectPlugIn => (dpi_common_bandwidth(sample, spec)?, BandwidthMethod::DirectPlugIn),
            BandwidthMode::CrossValidation => {
                let grid = default_cv_grid(sample.xs());
                (cv_bandwidth(sample, spec, &grid)?, BandwidthMethod::CrossValidation)
            }
            BandwidthMode::Fixed(h) => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")));
                }
                (h, BandwidthMethod::Fixed)
            }
        };
        let h = if undersmoothed { undersmooth(base, n) } else { base };
        // The pilot is always derived from the n^(-1/4) version of the base
        // bandwidth so that g keeps its n^(-1/9) rate.
        let g = match (method, undersmoothed) {
            (BandwidthMethod::Fixed, false) => pilot_bandwidth(h, n),
            (_, true) => pilot_bandwidth(h, n),
            (_, false) => pilot_bandwidth(undersmooth(base, n), n),
        };
        Ok(Self { h, g, method, undersmoothed })
    }
}

/// `h_opt · n^(−1/20)`, turning an `n^(−1/5)` bandwidth into an `n^(−1/4)` one.
pub fn undersmooth(h_opt: f64, n: usize) -> f64 {
    h_opt * (n.max(1) as f64).powf(-1.0 / 20.0)
}

/// `h · n^(5/36)`: oversmoothed pilot with `g ∝ n^(−1/9)` when `h ∝ n^(−1/4)`.
pub fn pilot_bandwidth(h: f64, n: usize) -> f64 {
    h * (n.max(1) as f64).powf(5.0 / 36.0)
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Gaussian kernel without its normalizing constant; the local polynomial
/// pilot fits below are invariant to it.
fn gauss(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

/// Quartic fitted by least squares on one block of the sorted covariate.
/// Coefficients are in the standardized variable `t = (x − center) / scale`.
#[derive(Debug, Clone)]
struct QuarticPiece {
    center: f64,
    scale: f64,
    coef: [f64; 5],
}

impl QuarticPiece {
    fn fit(xs: &[f64], ys: &[f64]) -> Result<(Self, f64)> {
        let (lo, hi) = min_max(xs);
        let center = 0.5 * (lo + hi);
        let scale = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
        let design = DMatrix::from_fn(xs.len(), 5, |r, c| ((xs[r] - center) / scale).powi(c as i32));
        let y = DVector::from_column_slice(ys);
        let svd = design.clone().svd(true, true);
        let a = svd.solve(&y, 1e-12).map_err(|e| Error::DegenerateData(format!("quartic fit failed: {e}")))?;
        let resid = &y - &design * &a;
        let coef = [a[0], a[1], a[2], a[3], a[4]];
        Ok((Self { center, scale, coef }, resid.norm_squared()))
    }

    /// (m''(x), m''''(x)) in original covariate units.
    fn derivatives(&self, x: f64) -> (f64, f64) {
        let t = (x - self.center) / self.scale;
        let a = &self.coef;
        let s2 = self.scale * self.scale;
        let d2 = 2.0 * a[2] + t * (6.0 * a[3] + t * 12.0 * a[4]);
        (d2 / s2, 24.0 * a[4] / (s2 * s2))
    }
}

/// Quartic fits on `blocks` contiguous groups of the sorted data, each of
/// `n / blocks` points with the remainder going to the last block. Returns
/// the residual sum of squares and, per observation, `(m'', m'''')`.
fn blocked_quartic(xs: &[f64], ys: &[f64], blocks: usize) -> Result<(f64, Vec<(f64, f64)>)> {
    let n = xs.len();
    let size = n / blocks;
    let mut rss = 0.0;
    let mut derivs = Vec::with_capacity(n);
    for b in 0..blocks {
        let lo = b * size;
        let hi = if b + 1 == blocks { n } else { lo + size };
        let (piece, r) = QuarticPiece::fit(&xs[lo..hi], &ys[lo..hi])?;
        rss += r;
        derivs.extend(xs[lo..hi].iter().map(|&x| piece.derivatives(x)));
    }
    Ok((rss, derivs))
}

/// Local cubic estimate of `m''(t)` with Gaussian weights at bandwidth `g`.
fn local_cubic_second_derivative(xs: &[f64], ys: &[f64], t: f64, g: f64) -> Option<f64> {
    let mut gram = Matrix4::<f64>::zeros();
    let mut rhs = Vector4::<f64>::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let u = (x - t) / g;
        let w = gauss(u);
        if w == 0.0 {
            continue;
        }
        let v = Vector4::new(1.0, u, u * u, u * u * u);
        gram += v * v.transpose() * w;
        rhs += v * (w * y);
    }
    let c = gram.lu().solve(&rhs)?;
    let d2 = 2.0 * c[2] / (g * g);
    d2.is_finite().then_some(d2)
}

/// Residual variance of a local linear fit at bandwidth `lambda`, corrected
/// by its effective degrees of freedom `n − 2 tr S + tr SᵀS`.
fn local_linear_variance(xs: &[f64], ys: &[f64], lambda: f64) -> f64 {
    let n = xs.len();
    let (mut rss, mut trace, mut frob) = (0.0, 0.0, 0.0);
    let mut row = vec![0.0; n];
    for k in 0..n {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (j, &x) in xs.iter().enumerate() {
            let d = x - xs[k];
            let w = gauss(d / lambda);
            row[j] = w;
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
        }
        let det = s0 * s2 - s1 * s1;
        let mut fit = 0.0;
        for (j, &x) in xs.iter().enumerate() {
            let s = row[j] * (s2 - (x - xs[k]) * s1) / det;
            fit += s * ys[j];
            frob += s * s;
            if j == k {
                trace += s;
            }
        }
        rss += (ys[k] - fit).powi(2);
    }
    rss / (n as f64 - 2.0 * trace + frob)
}

fn check_covariate(xs: &[f64]) -> Result<()> {
    if xs.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "bandwidth selection needs at least 10 observations, got {}",
            xs.len()
        )));
    }
    if sample_sd(xs) < DEGENERATE_SD {
        return Err(Error::DegenerateData("all covariate values are identical".into()));
    }
    Ok(())
}

/// Direct plug-in bandwidth for one regression (Ruppert, Sheather and Wand).
///
/// Targets the AMISE minimizer `h⁵ = ν₀ σ² (b − a) / (κ₂² θ₂₂ n)` with
/// `θ₂₂ = ∫ (m'')² f`, where `[a, b]` is the covariate range:
///
/// 1. Drop 1% of the sorted data at each end.
/// 2. Fit blocked quartics, choosing the number of blocks (at most
///    `max(min(n/20, 5), 1)`) by Mallows' Cp, which gives `σ²_Q` and
///    `θ₂₄ = mean(m'' m'''')`.
/// 3. Estimate `θ₂₂` from a local cubic fit of `m''` at the bandwidth that is
///    AMSE-optimal given `σ²_Q` and `θ₂₄`, averaging over points inside the
///    central 90% of the range.
/// 4. Re-estimate `σ²` from a local linear fit at its own pilot bandwidth.
pub fn dpi_bandwidth(xs: &[f64], ys: &[f64], spec: &KernelSpec) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("covariate and response lengths differ".into()));
    }
    check_covariate(xs)?;
    let (ylo, yhi) = min_max(ys);
    if yhi - ylo == 0.0 {
        return Err(Error::DegenerateData("response is constant".into()));
    }
    let (a, b) = min_max(xs);
    let range = b - a;

    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let cut = (TRIM * xs.len() as f64).floor() as usize;
    let kept = &order[cut..xs.len() - cut];
    let sx: Vec<f64> = kept.iter().map(|&i| xs[i]).collect();
    let sy: Vec<f64> = kept.iter().map(|&i| ys[i]).collect();
    let n = sx.len();
    let nf = n as f64;

    let max_blocks = (n / BLOCK_DIVISOR).clamp(1, MAX_BLOCKS);
    let fits: Vec<(f64, Vec<(f64, f64)>)> =
        (1..=max_blocks).map(|k| blocked_quartic(&sx, &sy, k)).collect::<Result<_>>()?;
    let scale_max = fits[max_blocks - 1].0 / (n - 5 * max_blocks) as f64;
    let blocks = if scale_max > 0.0 {
        (1..=max_blocks)
            .map(|k| (k, fits[k - 1].0 / scale_max - (nf - 10.0 * k as f64)))
            .fold((1, f64::INFINITY), |best, (k, cp)| if cp < best.1 { (k, cp) } else { best })
            .0
    } else {
        1
    };
    let (rss, derivs) = &fits[blocks - 1];
    let sigma2_q = rss / (n - 5 * blocks) as f64;
    let theta24 = derivs.iter().map(|(d2, d4)| d2 * d4).sum::<f64>() / nf;
    if !(sigma2_q > 0.0 && theta24 != 0.0 && theta24.is_finite()) {
        return Err(Error::DegenerateData("plug-in functionals vanish".into()));
    }

    let sqrt_pi = std::f64::consts::PI.sqrt();
    let base = sigma2_q * range / (theta24.abs() * nf);
    let gamma = if theta24 < 0.0 {
        (3.0 * base / (8.0 * sqrt_pi)).powf(1.0 / 7.0)
    } else {
        (15.0 * base / (16.0 * sqrt_pi)).powf(1.0 / 7.0)
    };
    let (lo, hi) = (a + PROPORTION_TRUNCATED * range, b - PROPORTION_TRUNCATED * range);
    let theta22 = sx
        .par_iter()
        .filter(|&&x| x > lo && x < hi)
        .map(|&x| local_cubic_second_derivative(&sx, &sy, x, gamma).map(|d| d * d))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::DegenerateData("local cubic pilot fit is singular".into()))?
        .iter()
        .sum::<f64>()
        / nf;
    if theta22.is_nan() || theta22 <= 0.0 {
        return Err(Error::DegenerateData("estimated curvature functional is zero".into()));
    }

    let c3k = (4.0 * (0.5 + 2.0 * 2f64.sqrt() - 4.0 / 3.0 * 3f64.sqrt()) / (2.0 * std::f64::consts::PI).sqrt())
        .powf(1.0 / 9.0);
    let lambda = c3k * (sigma2_q * sigma2_q * range / (theta22 * nf).powi(2)).powf(1.0 / 9.0);
    let sigma2 = local_linear_variance(&sx, &sy, lambda);

    let h = (spec.nu0 * sigma2 * range / (spec.kappa2 * spec.kappa2 * theta22 * nf)).powf(0.2);
    if h.is_finite() && h > 0.0 {
        Ok(h.min(range))
    } else {
        Ok(range)
    }
}

/// Common plug-in bandwidth: geometric mean of the per-cell plug-in values.
/// Cells whose indicator is constant in the sample are skipped.
pub fn dpi_common_bandwidth(sample: &Sample, spec: &KernelSpec) -> Result<f64> {
    let xs = sample.xs();
    check_covariate(xs)?;
    let mut log_sum = 0.0;
    let mut used = 0;
    for cell in Cell::ALL {
        match dpi_bandwidth(xs, &sample.indicators(cell), spec) {
            Ok(h) => {
                log_sum += h.ln();
                used += 1;
            }
            Err(Error::DegenerateData(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::DegenerateData("every cell indicator is constant".into()));
    }
    Ok((log_sum / used as f64).exp())
}

/// 40 log-spaced candidates from 5% to 100% of the covariate range.
pub fn default_cv_grid(xs: &[f64]) -> Vec<f64> {
    let (lo, hi) = min_max(xs);
    let range = hi - lo;
    let (a, b) = ((0.05 * range).ln(), range.ln());
    (0..40).map(|i| (a + (b - a) * i as f64 / 39.0).exp()).collect()
}

/// Pooled leave-one-out score
/// `CV(h) = Σ_k Σ_ij (Z_k^ij − p̂_ij^(−k),h(X_k))²`.
/// Returns `+∞` when some leave-one-out fit has no kernel mass.
pub fn cv_objective(sample: &Sample, spec: &KernelSpec, h: f64) -> f64 {
    let xs = sample.xs();
    let cells = sample.cells();
    let n = xs.len();
    let mut total = 0.0;
    for k in 0..n {
        let mut sums = [0.0; 4];
        let mut mass = 0.0;
        for l in 0..n {
            if l == k {
                continue;
            }
            let w = spec.eval((xs[k] - xs[l]) / h);
            sums[cells[l].index()] += w;
            mass += w;
        }
        if mass <= 0.0 {
            return f64::INFINITY;
        }
        let own = cells[k].index();
        total += (0..4)
            .map(|c| {
                let z = if c == own { 1.0 } else { 0.0 };
                (z - sums[c] / mass).powi(2)
            })
            .sum::<f64>();
    }
    total
}

/// Grid value minimizing [`cv_objective`]; ties go to the larger bandwidth.
pub fn cv_bandwidth(sample: &Sample, spec: &KernelSpec, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("cross-validation grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidInput(format!("grid bandwidth must be positive, got {bad}")));
    }
    check_covariate(sample.xs())?;
    let scores: Vec<f64> = grid.par_iter().map(|&h| cv_objective(sample, spec, h)).collect();
    let mut best = 0;
    for i in 1..grid.len() {
        let better = scores[i] < scores[best] || (scores[i] == scores[best] && grid[i] > grid[best]);
        if better {
            best = i;
        }
    }
    if !scores[best].is_finite() {
        return Err(Error::DegenerateData("no grid bandwidth gives a finite cross-validation score".into()));
    }
    Ok(grid[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Observation;
    use approx::assert_relative_eq;

    fn toy_sample(n: usize) -> Sample {
        // Deterministic spread of covariates and cells.
        let obs: Vec<Observation> = (0..n)
            .map(|k| {
                let x = ((k * 37) % n) as f64 / n as f64 * 4.0 - 2.0;
                let cell = Cell::from_index((k * 7 + k / 3) % 4);
                Observation::new(x, cell)
            })
            .collect();
        Sample::new(&obs).unwrap()
    }

    #[test]
    fn undersmooth_values() {
        assert_eq!(undersmooth(0.5, 1), 0.5);
        assert_relative_eq!(undersmooth(0.5, 10_000_000_000), 0.5 / 10f64.sqrt(), epsilon = 1e-12);
        // 0.4 · 250^(−0.05), evaluated independently.
        assert_relative_eq!(undersmooth(0.4, 250), 0.3035030018469438, epsilon = 1e-12);
    }

    #[test]
    fn pilot_values() {
        assert_eq!(pilot_bandwidth(0.3, 1), 0.3);
        assert_relative_eq!(pilot_bandwidth(0.3, 200), 0.6261937867394513, epsilon = 1e-12);
        for n in 2..500 {
            assert!(pilot_bandwidth(0.3, n) > 0.3);
        }
    }

    #[test]
    fn undersmooth_monotone_and_linear() {
        let mut prev = f64::INFINITY;
        for n in 1..300 {
            let h = undersmooth(0.7, n);
            assert!(h <= prev);
            prev = h;
            assert_relative_eq!(undersmooth(1.4, n), 2.0 * h, epsilon = 1e-15);
        }
    }

    #[test]
    fn pilot_rate_over_n() {
        // h_opt ∝ n^(−1/5) ⇒ g ∝ n^(−1/9).
        let g = |n: usize| pilot_bandwidth(undersmooth(2.0 * (n as f64).powf(-0.2), n), n);
        let ratio = g(1600) / g(100);
        assert_relative_eq!(ratio, 16f64.powf(-1.0 / 9.0), epsilon = 1e-12);
    }

    #[test]
    fn constant_response_is_degenerate() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 10.0).collect();
        let err = dpi_bandwidth(&xs, &[1.0; 30], &KernelSpec::gaussian()).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)));
    }

    #[test]
    fn identical_covariates_are_degenerate() {
        let ys: Vec<f64> = (0..30).map(|i| (i % 2) as f64).collect();
        let err = dpi_bandwidth(&[1.5; 30], &ys, &KernelSpec::gaussian()).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)));
    }

    #[test]
    fn too_small_sample_rejected() {
        let xs: Vec<f64> = (0..5).map(|i| i as f64).collect();
        assert!(dpi_bandwidth(&xs, &[0.0, 1.0, 0.0, 1.0, 1.0], &KernelSpec::gaussian()).is_err());
    }

    #[test]
    fn quartic_is_recovered() {
        let xs: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 / 25.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 + 0.1 * x - 0.2 * x * x + 0.05 * x.powi(4)).collect();
        let (piece, rss) = QuarticPiece::fit(&xs, &ys).unwrap();
        assert!(rss < 1e-20);
        let (d2, d4) = piece.derivatives(0.3);
        assert_relative_eq!(d2, -0.4 + 0.6 * 0.09, epsilon = 1e-10);
        assert_relative_eq!(d4, 1.2, epsilon = 1e-9);
    }

    #[test]
    fn single_candidate_grid() {
        let s = toy_sample(30);
        assert_eq!(cv_bandwidth(&s, &KernelSpec::gaussian(), &[0.37]).unwrap(), 0.37);
    }

    #[test]
    fn cv_ties_prefer_larger() {
        let s = toy_sample(30);
        assert_eq!(cv_bandwidth(&s, &KernelSpec::gaussian(), &[0.5, 0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn local_cubic_is_exact_on_cubics() {
        let xs: Vec<f64> = (0..40).map(|i| -2.0 + i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - x + 0.5 * x * x - 0.3 * x.powi(3)).collect();
        for t in [-1.0, 0.0, 0.7] {
            let d2 = local_cubic_second_derivative(&xs, &ys, t, 0.6).unwrap();
            assert_relative_eq!(d2, 1.0 - 1.8 * t, epsilon = 1e-8);
        }
    }

    #[test]
    fn local_linear_variance_of_a_line_is_zero() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 7.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.2 + 0.1 * x).collect();
        assert!(local_linear_variance(&xs, &ys, 0.5).abs() < 1e-20);
    }

    #[test]
    fn plug_in_matches_reference_implementation() {
        // Deterministic design; the expected value comes from an independent
        // dense-matrix implementation of the same plug-in steps.
        let n = 120;
        let xs: Vec<f64> =
            (0..n).map(|k| ((k * 37) % n) as f64 / n as f64 * 4.0 - 2.0 + 0.013 * (k as f64).sin()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(k, x)| if (3.0 * x).sin() + (7.0 * k as f64).cos() > 0.3 { 1.0 } else { 0.0 })
            .collect();
        let h = dpi_bandwidth(&xs, &ys, &KernelSpec::gaussian()).unwrap();
        assert_relative_eq!(h, 0.22467802083456073, epsilon = 1e-9);
    }

    #[test]
    fn cv_rejects_bad_grid() {
        let s = toy_sample(30);
        assert!(cv_bandwidth(&s, &KernelSpec::gaussian(), &[]).is_err());
        assert!(cv_bandwidth(&s, &KernelSpec::gaussian(), &[0.1, -1.0]).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_cv_grid(&[-2.0, 2.0]);
        assert_eq!(g.len(), 40);
        assert_relative_eq!(g[0], 0.2, epsilon = 1e-12);
        assert_relative_eq!(g[39], 4.0, epsilon = 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn plan_fixed_and_modes() {
        let s = toy_sample(40);
        let spec = KernelSpec::gaussian();
        let p = BandwidthPlan::select(&s, &spec, BandwidthMode::Fixed(0.4), false).unwrap();
        assert_eq!(p.h, 0.4);
        assert_eq!(p.g, pilot_bandwidth(0.4, 40));
        assert!(p.g > p.h);
        let p = BandwidthPlan::select(&s, &spec, BandwidthMode::DirectPlugIn, true).unwrap();
        assert!(p.h > 0.0 && p.g > p.h && p.undersmoothed);
        assert!("auto-cv".parse::<BandwidthMode>().is_ok());
        assert_eq!("0.25".parse::<BandwidthMode>().unwrap(), BandwidthMode::Fixed(0.25));
        assert!("-1".parse::<BandwidthMode>().is_err());
        assert!("wide".parse::<BandwidthMode>().is_err());
    }
}
