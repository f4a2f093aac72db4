//! Kernel functions, Nadaraya–Watson weights and kernel density estimation.
//!
//! Everything here is an exact O(n) sum per evaluation point; there is no
//! binning. Kernel values below [`KERNEL_FLOOR`] are flushed to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel values smaller than this are treated as exactly zero.
pub const KERNEL_FLOOR: f64 = 1e-300;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
    Epanechnikov,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Epanechnikov => "epanechnikov",
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(KernelKind::Gaussian),
            "epanechnikov" | "epa" => Ok(KernelKind::Epanechnikov),
            other => Err(Error::InvalidInput(format!("unknown kernel '{other}'"))),
        }
    }
}

/// A second-order symmetric kernel together with its constants
/// `nu0 = ∫K²` and `kappa2 = ∫u²K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub nu0: f64,
    pub kappa2: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::gaussian()
    }
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        let (nu0, kappa2) = match kind {
            KernelKind::Gaussian => (1.0 / (2.0 * std::f64::consts::PI.sqrt()), 1.0),
            KernelKind::Epanechnikov => (0.6, 0.2),
        };
        Self { kind, nu0, kappa2 }
    }

    pub fn gaussian() -> Self {
        Self::new(KernelKind::Gaussian)
    }

    pub fn epanechnikov() -> Self {
        Self::new(KernelKind::Epanechnikov)
    }

    /// K(u).
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let k = match self.kind {
            KernelKind::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * u * u).exp(),
            KernelKind::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        };
        if k < KERNEL_FLOOR {
            0.0
        } else {
            k
        }
    }

    /// K'(u).
    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => -u * self.eval(u),
            KernelKind::Epanechnikov => {
                if u.abs() < 1.0 {
                    -1.5 * u
                } else {
                    0.0
                }
            }
        }
    }

    /// `(nu0, kappa2)`.
    pub fn constants(&self) -> (f64, f64) {
        (self.nu0, self.kappa2)
    }

    /// Half-width of the support, `None` for unbounded kernels.
    pub fn support_radius(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Gaussian => None,
            KernelKind::Epanechnikov => Some(1.0),
        }
    }
}

/// Free-function form of [`KernelSpec::eval`].
pub fn kernel_eval(spec: &KernelSpec, u: f64) -> f64 {
    spec.eval(u)
}

/// Free-function form of [`KernelSpec::constants`].
pub fn kernel_constants(spec: &KernelSpec) -> (f64, f64) {
    spec.constants()
}

/// Normalized Nadaraya–Watson weights: non-negative and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Σ_k w_k y_k.
    pub fn dot(&self, ys: &[f64]) -> f64 {
        self.0.iter().zip(ys).map(|(w, y)| w * y).sum()
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bandwidth must be positive and finite, got {h}")))
    }
}

/// W_h(x, X_k) = K((x − X_k)/h) / Σ_l K((x − X_l)/h).
pub fn nw_weights(x: f64, xs: &[f64], h: f64, spec: &KernelSpec) -> Result<WeightVector> {
    check_bandwidth(h)?;
    if xs.is_empty() {
        return Err(Error::InvalidInput("empty covariate vector".into()));
    }
    let mut w: Vec<f64> = xs.iter().map(|&xk| spec.eval((x - xk) / h)).collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights { x });
    }
    for wk in &mut w {
        *wk /= total;
    }
    Ok(WeightVector(w))
}

/// Nadaraya–Watson regression of `ys` on `xs`, evaluated at `x`.
pub fn nw_estimate(x: f64, xs: &[f64], ys: &[f64], h: f64, spec: &KernelSpec) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "covariate and response lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    // Normalize after accumulating so a constant response is reproduced exactly.
    check_bandwidth(h)?;
    if xs.is_empty() {
        return Err(Error::InvalidInput("empty covariate vector".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&xk, &yk) in xs.iter().zip(ys) {
        let k = spec.eval((x - xk) / h);
        num += k * yk;
        den += k;
    }
    if den <= 0.0 {
        return Err(Error::AllZeroWeights { x });
    }
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    Ok((num / den).clamp(lo, hi))
}

/// Kernel density estimate f̂(x) = (nh)⁻¹ Σ K((x − X_k)/h).
pub fn kde(x: f64, xs: &[f64], h: f64, spec: &KernelSpec) -> f64 {
    if xs.is_empty() || h.is_nan() || h <= 0.0 {
        return 0.0;
    }
    let s: f64 = xs.iter().map(|&xk| spec.eval((x - xk) / h)).sum();
    s / (xs.len() as f64 * h)
}

/// Derivative of the kernel density estimate, f̂'(x).
pub fn kde_derivative(x: f64, xs: &[f64], h: f64, spec: &KernelSpec) -> f64 {
    if xs.is_empty() || h.is_nan() || h <= 0.0 {
        return 0.0;
    }
    let s: f64 = xs.iter().map(|&xk| spec.derivative((x - xk) / h)).sum();
    s / (xs.len() as f64 * h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let step = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * step);
        }
        s * step / 3.0
    }

    #[test]
    fn gaussian_at_zero_and_symmetry() {
        let k = KernelSpec::gaussian();
        assert_relative_eq!(k.eval(0.0), 0.3989423, epsilon = 1e-7);
        assert_eq!(k.eval(1.0), k.eval(-1.0));
        assert_eq!(k.eval(2.7), k.eval(-2.7));
    }

    #[test]
    fn epanechnikov_support() {
        let k = KernelSpec::epanechnikov();
        assert_eq!(k.eval(1.5), 0.0);
        assert_eq!(k.eval(-1.0), 0.0);
        assert_relative_eq!(k.eval(0.0), 0.75);
    }

    #[test]
    fn far_tail_flushed_to_zero() {
        assert_eq!(KernelSpec::gaussian().eval(40.0), 0.0);
    }

    #[test]
    fn analytic_constants() {
        let (nu0, kappa2) = kernel_constants(&KernelSpec::gaussian());
        assert_relative_eq!(nu0, 0.2820948, epsilon = 1e-7);
        assert_eq!(kappa2, 1.0);
        let (nu0, kappa2) = kernel_constants(&KernelSpec::epanechnikov());
        assert_relative_eq!(nu0, 0.6);
        assert_relative_eq!(kappa2, 0.2);
    }

    #[test]
    fn constants_match_quadrature() {
        for spec in [KernelSpec::gaussian(), KernelSpec::epanechnikov()] {
            let (a, b) = match spec.kind {
                KernelKind::Gaussian => (-12.0, 12.0),
                KernelKind::Epanechnikov => (-1.0, 1.0),
            };
            let mass = simpson(|u| spec.eval(u), a, b, 20_000);
            let nu0 = simpson(|u| spec.eval(u).powi(2), a, b, 20_000);
            let kappa2 = simpson(|u| u * u * spec.eval(u), a, b, 20_000);
            assert!((mass - 1.0).abs() < 1e-6, "{:?} mass {mass}", spec.kind);
            assert!((nu0 - spec.nu0).abs() < 1e-6);
            assert!((kappa2 - spec.kappa2).abs() < 1e-6);
        }
    }

    #[test]
    fn single_point_weight_is_one() {
        let w = nw_weights(-3.0, &[0.3], 1.0, &KernelSpec::gaussian()).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
    }

    #[test]
    fn symmetric_pair_weights() {
        let w = nw_weights(0.0, &[-1.0, 1.0], 1.0, &KernelSpec::gaussian()).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn weights_match_hand_evaluation() {
        // K(0), K(-1), K(-4) normalized, evaluated independently.
        let expected = [0.622329381456755, 0.3774618502935207, 0.00020876824972442776];
        let w = nw_weights(0.0, &[0.0, 0.5, 2.0], 0.5, &KernelSpec::gaussian()).unwrap();
        for (a, b) in w.as_slice().iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn compact_kernel_far_from_data() {
        let err = nw_weights(10.0, &[0.0, 1.0], 0.5, &KernelSpec::epanechnikov()).unwrap_err();
        assert!(matches!(err, Error::AllZeroWeights { .. }));
        let err = nw_estimate(10.0, &[0.0, 1.0], &[0.0, 1.0], 0.5, &KernelSpec::epanechnikov());
        assert!(matches!(err, Err(Error::AllZeroWeights { .. })));
    }

    #[test]
    fn nw_constant_and_symmetric() {
        let xs = [0.1, 0.7, -1.2, 3.0];
        let est = nw_estimate(0.4, &xs, &[0.3; 4], 0.8, &KernelSpec::gaussian()).unwrap();
        assert_eq!(est, 0.3);
        let est = nw_estimate(0.0, &[-1.0, 1.0], &[0.0, 1.0], 1.0, &KernelSpec::gaussian()).unwrap();
        assert_eq!(est, 0.5);
    }

    #[test]
    fn nw_rejects_bad_inputs() {
        let spec = KernelSpec::gaussian();
        assert!(nw_estimate(0.0, &[1.0], &[1.0, 2.0], 1.0, &spec).is_err());
        assert!(nw_weights(0.0, &[1.0], 0.0, &spec).is_err());
        assert!(nw_weights(0.0, &[], 1.0, &spec).is_err());
    }

    #[test]
    fn kde_single_points() {
        let spec = KernelSpec::gaussian();
        assert_relative_eq!(kde(0.0, &[0.0], 1.0, &spec), 0.3989423, epsilon = 1e-7);
        assert_relative_eq!(kde(0.0, &[0.0, 0.0], 2.0, &spec), 0.1994711, epsilon = 1e-7);
    }

    #[test]
    fn kde_integrates_to_one() {
        let xs = [-1.3, -0.2, 0.0, 0.4, 2.2];
        for spec in [KernelSpec::gaussian(), KernelSpec::epanechnikov()] {
            let total = simpson(|x| kde(x, &xs, 0.6, &spec), -12.0, 12.0, 40_000);
            assert!((total - 1.0).abs() < 1e-6, "{total}");
        }
    }

    #[test]
    fn kde_derivative_matches_finite_difference() {
        let xs = [-1.3, -0.2, 0.0, 0.4, 2.2];
        let spec = KernelSpec::gaussian();
        let step = 1e-5;
        for x in [-1.0, 0.1, 0.9] {
            let fd = (kde(x + step, &xs, 0.6, &spec) - kde(x - step, &xs, 0.6, &spec)) / (2.0 * step);
            assert_relative_eq!(kde_derivative(x, &xs, 0.6, &spec), fd, epsilon = 1e-8);
        }
    }
}
