//! Global and parametric comparators: the classical odds ratio of a 2×2
//! table, its Haldane adjustment, the Wald interval, Pearson's χ² test and
//! the local log odds ratio implied by a logistic regression with an
//! interaction term.
//!
//! Orientation: row `i` is the first binary variable (R), column `j` the
//! second (S). With the ICU example, rows are emergency/elective admission
//! and columns are died/lived.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::estimators::{CurveEstimate, Estimator, LocalOrEstimate};
use crate::inference::normal_critical_value;
use crate::sample::Sample;

/// Cell counts of a 2×2 table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table2x2 {
    pub n11: u64,
    pub n12: u64,
    pub n21: u64,
    pub n22: u64,
}

impl Table2x2 {
    pub fn new(n11: u64, n12: u64, n21: u64, n22: u64) -> Self {
        Self { n11, n12, n21, n22 }
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n12 + self.n21 + self.n22
    }

    pub fn row_swapped(&self) -> Self {
        Self::new(self.n21, self.n22, self.n11, self.n12)
    }

    pub fn col_swapped(&self) -> Self {
        Self::new(self.n12, self.n11, self.n22, self.n21)
    }

    pub fn transposed(&self) -> Self {
        Self::new(self.n11, self.n21, self.n12, self.n22)
    }

    fn as_f64(&self) -> [f64; 4] {
        [self.n11, self.n12, self.n21, self.n22].map(|v| v as f64)
    }
}

/// `(n11·n22)/(n12·n21)`.
pub fn global_or(t: &Table2x2) -> Result<f64> {
    let [a, b, c, d] = t.as_f64();
    if b * c == 0.0 {
        return Err(Error::EmptyDenominator);
    }
    Ok((a * d) / (b * c))
}

/// Haldane's adjustment: half a count added to every cell.
pub fn haldane_or(t: &Table2x2) -> Result<f64> {
    if t.total() == 0 {
        return Err(Error::InvalidInput("table is empty".into()));
    }
    let [a, b, c, d] = t.as_f64().map(|v| v + 0.5);
    Ok((a * d) / (b * c))
}

/// Wald interval for the odds ratio: `exp(log OR ± z · sqrt(Σ 1/n_ij))`.
pub fn wald_ci_or(t: &Table2x2, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = t.as_f64();
    if n.contains(&0.0) {
        return Err(Error::EmptyTableCell("Wald interval needs every count positive".into()));
    }
    let log_or = (n[0].ln() + n[3].ln()) - (n[1].ln() + n[2].ln());
    let se = n.iter().map(|v| 1.0 / v).sum::<f64>().sqrt();
    let half = normal_critical_value(alpha) * se;
    Ok(((log_or - half).exp(), (log_or + half).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Pearson's χ² test of independence, one degree of freedom, no continuity correction.
pub fn pearson_chi2(t: &Table2x2) -> Result<ChiSquareTest> {
    let [a, b, c, d] = t.as_f64();
    let margins = [a + b, c + d, a + c, b + d];
    if margins.contains(&0.0) {
        return Err(Error::DegenerateMargin);
    }
    let n = a + b + c + d;
    let cross = a * d - b * c;
    let statistic = n * cross * cross / (margins[0] * margins[1] * margins[2] * margins[3]);
    let chi2 = ChiSquared::new(1.0).expect("one degree of freedom is valid");
    Ok(ChiSquareTest { statistic, p_value: chi2.sf(statistic) })
}

/// Logistic regression `logit P(S=1 | R, X) = β₀ + β₁x + β₂r + β₃xr` with
/// `S = 1` for column 1 and `r = 1` for row 1. The local log odds ratio is
/// `β₂ + β₃x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub beta: [f64; 4],
    pub standard_errors: [f64; 4],
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
}

impl GlmFit {
    pub fn local_log_or(&self, x: f64) -> f64 {
        self.beta[2] + self.beta[3] * x
    }
}

pub const GLM_MAX_ITERATIONS: usize = 50;
pub const GLM_GRADIENT_TOLERANCE: f64 = 1e-8;
const SEPARATION_COEFFICIENT: f64 = 1e4;
/// Linear predictors beyond this put fitted probabilities within 1e-13 of 0 or 1.
const SEPARATION_ETA: f64 = 30.0;

struct Design {
    rows: Vec<[f64; 4]>,
    ys: Vec<f64>,
}

impl Design {
    fn from_sample(sample: &Sample) -> Self {
        let rows = sample
            .observations()
            .map(|o| {
                let r = if o.cell.row() == 1 { 1.0 } else { 0.0 };
                [1.0, o.x, r, o.x * r]
            })
            .collect();
        let ys = sample.cells().iter().map(|c| if c.col() == 1 { 1.0 } else { 0.0 }).collect();
        Self { rows, ys }
    }

    fn log_likelihood(&self, beta: &Vector4<f64>) -> f64 {
        self.rows
            .iter()
            .zip(&self.ys)
            .map(|(row, &y)| {
                let eta = Vector4::from(*row).dot(beta);
                // y·η − log(1 + e^η), stable for large |η|.
                y * eta - softplus(eta)
            })
            .sum()
    }

    /// Score vector and Fisher information at `beta`.
    fn score_and_information(&self, beta: &Vector4<f64>) -> (Vector4<f64>, Matrix4<f64>) {
        let mut score = Vector4::zeros();
        let mut info = Matrix4::zeros();
        for (row, &y) in self.rows.iter().zip(&self.ys) {
            let v = Vector4::from(*row);
            let mu = logistic(v.dot(beta));
            score += v * (y - mu);
            info += v * v.transpose() * (mu * (1.0 - mu));
        }
        (score, info)
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Newton–Raphson (equivalently IRLS for the canonical logit link) with step
/// halving whenever the log-likelihood would decrease.
pub fn fit_glm(sample: &Sample) -> Result<GlmFit> {
    let design = Design::from_sample(sample);
    let r_sum: f64 = design.rows.iter().map(|r| r[2]).sum();
    if r_sum == 0.0 || r_sum == design.rows.len() as f64 {
        return Err(Error::Separation("row variable is constant; design matrix is rank deficient".into()));
    }
    let y_sum: f64 = design.ys.iter().sum();
    if y_sum == 0.0 || y_sum == design.ys.len() as f64 {
        return Err(Error::Separation("column variable is constant".into()));
    }

    let mut beta = Vector4::zeros();
    let mut loglik = design.log_likelihood(&beta);
    for iteration in 1..=GLM_MAX_ITERATIONS {
        let (score, info) = design.score_and_information(&beta);
        let gradient_norm = score.norm();
        if gradient_norm < GLM_GRADIENT_TOLERANCE {
            return finish(&design, beta, loglik, iteration - 1);
        }
        let chol = info.cholesky().ok_or_else(|| Error::Separation("information matrix is singular".into()))?;
        let step = chol.solve(&score);
        let mut scale = 1.0;
        loop {
            let candidate = beta + step * scale;
            let cand_ll = design.log_likelihood(&candidate);
            if cand_ll >= loglik - 1e-12 * loglik.abs() || scale < 1e-10 {
                beta = candidate;
                loglik = cand_ll;
                break;
            }
            scale *= 0.5;
        }
        if beta.iter().any(|b| !b.is_finite() || b.abs() > SEPARATION_COEFFICIENT) {
            return Err(Error::Separation("coefficients diverge; the likelihood is unbounded".into()));
        }
    }
    let (score, _) = design.score_and_information(&beta);
    if score.norm() < GLM_GRADIENT_TOLERANCE {
        return finish(&design, beta, loglik, GLM_MAX_ITERATIONS);
    }
    Err(Error::NoConvergence { iterations: GLM_MAX_ITERATIONS, gradient_norm: score.norm() })
}

fn finish(design: &Design, beta: Vector4<f64>, loglik: f64, iterations: usize) -> Result<GlmFit> {
    if design.rows.iter().any(|row| Vector4::from(*row).dot(&beta).abs() > SEPARATION_ETA) {
        return Err(Error::Separation("fitted probabilities are numerically 0 or 1".into()));
    }
    let (score, info) = design.score_and_information(&beta);
    let cov = info.try_inverse().ok_or_else(|| Error::Separation("information matrix is singular".into()))?;
    Ok(GlmFit {
        beta: [beta[0], beta[1], beta[2], beta[3]],
        standard_errors: [0, 1, 2, 3].map(|i| cov[(i, i)].max(0.0).sqrt()),
        converged: true,
        iterations,
        log_likelihood: loglik,
        gradient_norm: score.norm(),
    })
}

/// Fit the logistic model and evaluate `β₂ + β₃x` over `grid`.
pub fn glm_local_log_or(sample: &Sample, grid: &[f64]) -> Result<(GlmFit, CurveEstimate)> {
    let fit = fit_glm(sample)?;
    let points = grid
        .iter()
        .map(|&x| {
            let log_or = fit.local_log_or(x);
            LocalOrEstimate {
                x,
                estimator: Estimator::Glm,
                log_or,
                epsilon: 0.0,
                valid: log_or.is_finite(),
                boundary: false,
                density_floor_hit: false,
                negative_ratio: false,
            }
        })
        .collect();
    Ok((fit, CurveEstimate { estimator: Estimator::Glm, h: None, g: None, points, intervals: Vec::new() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{Cell, Observation};
    use approx::assert_relative_eq;

    const ICU: Table2x2 = Table2x2 { n11: 38, n12: 109, n21: 2, n22: 51 };

    #[test]
    fn icu_global_odds_ratio() {
        assert!((global_or(&ICU).unwrap() - 8.89).abs() < 0.005);
        assert_relative_eq!(haldane_or(&ICU).unwrap(), 38.5 * 51.5 / (109.5 * 2.5), epsilon = 1e-12);
        assert_relative_eq!(haldane_or(&ICU).unwrap(), 7.2429, epsilon = 1e-4);
    }

    #[test]
    fn simple_tables() {
        assert_eq!(global_or(&Table2x2::new(7, 7, 7, 7)).unwrap(), 1.0);
        assert_eq!(global_or(&Table2x2::new(2, 1, 1, 2)).unwrap(), 4.0);
        assert_eq!(haldane_or(&Table2x2::new(3, 3, 3, 3)).unwrap(), 1.0);
        assert_relative_eq!(haldane_or(&Table2x2::new(0, 5, 5, 0)).unwrap(), 0.25 / 30.25, epsilon = 1e-15);
        assert_eq!(global_or(&Table2x2::new(1, 0, 3, 4)), Err(Error::EmptyDenominator));
    }

    #[test]
    fn icu_wald_interval() {
        let (lo, hi) = wald_ci_or(&ICU, 0.05).unwrap();
        assert!((lo - 2.064).abs() < 0.01, "{lo}");
        assert!((hi - 38.290).abs() < 0.01, "{hi}");
    }

    #[test]
    fn wald_small_and_huge_tables() {
        let (lo, hi) = wald_ci_or(&Table2x2::new(10, 10, 10, 10), 0.05).unwrap();
        // exp(±1.959964 · sqrt(0.4)), evaluated independently.
        assert_relative_eq!(lo, 0.2895028710899464, epsilon = 1e-9);
        assert_relative_eq!(hi, 3.454197176819388, epsilon = 1e-9);
        let big = 1_000_000_000_000;
        let (lo, hi) = wald_ci_or(&Table2x2::new(big, big, big, big), 0.05).unwrap();
        assert!((lo - 1.0).abs() < 1e-5 && (hi - 1.0).abs() < 1e-5);
        assert!(matches!(wald_ci_or(&Table2x2::new(0, 1, 1, 1), 0.05), Err(Error::EmptyTableCell(_))));
    }

    #[test]
    fn chi_square_values() {
        let t = pearson_chi2(&ICU).unwrap();
        assert!((t.statistic - 11.87).abs() < 0.01);
        assert!(t.p_value < 0.005 && t.p_value > 0.0005);
        let t = pearson_chi2(&Table2x2::new(6, 3, 4, 2)).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        assert_eq!(pearson_chi2(&Table2x2::new(20, 0, 0, 20)).unwrap().statistic, 40.0);
        assert_eq!(pearson_chi2(&Table2x2::new(0, 0, 3, 4)), Err(Error::DegenerateMargin));
    }

    #[test]
    fn glm_rejects_constant_row() {
        let obs: Vec<Observation> =
            (0..20).map(|k| Observation::new(k as f64, if k % 2 == 0 { Cell::C11 } else { Cell::C12 })).collect();
        let s = Sample::new(&obs).unwrap();
        assert!(matches!(fit_glm(&s), Err(Error::Separation(_))));
    }

    #[test]
    fn glm_detects_complete_separation() {
        // Column is determined exactly by the sign of x within each row.
        let obs: Vec<Observation> = (0..40)
            .map(|k| {
                let x = k as f64 - 19.5;
                let row = if k % 2 == 0 { 1 } else { 2 };
                let col = if x < 0.0 { 1 } else { 2 };
                Observation::new(x, Cell::new(row, col).unwrap())
            })
            .collect();
        let s = Sample::new(&obs).unwrap();
        assert!(fit_glm(&s).is_err());
    }

    #[test]
    fn glm_saturated_binary_covariate() {
        // With x ∈ {−1, 1} the model is saturated, so β₂ + β₃x is the log
        // odds ratio of the stratum table at x.
        let mut obs = Vec::new();
        for (cell, count) in [(Cell::C11, 30), (Cell::C12, 10), (Cell::C21, 15), (Cell::C22, 25)] {
            for k in 0..count {
                obs.push(Observation::new(if k % 2 == 0 { -1.0 } else { 1.0 }, cell));
            }
        }
        let s = Sample::new(&obs).unwrap();
        let fit = fit_glm(&s).unwrap();
        assert!(fit.converged && fit.gradient_norm < GLM_GRADIENT_TOLERANCE);
        // Strata: x = −1 → (15, 5, 8, 13); x = 1 → (15, 5, 7, 12).
        assert_relative_eq!(fit.local_log_or(-1.0), (15.0f64 * 13.0 / (5.0 * 8.0)).ln(), epsilon = 1e-8);
        assert_relative_eq!(fit.local_log_or(1.0), (15.0f64 * 12.0 / (5.0 * 7.0)).ln(), epsilon = 1e-8);
        assert!(fit.standard_errors.iter().all(|s| *s > 0.0));
    }
}
