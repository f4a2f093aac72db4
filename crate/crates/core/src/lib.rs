//! Kernel estimation of the pointwise odds ratio `OR(x)` between two binary
//! variables given a continuous covariate.
//!
//! Cell probabilities `p_ij(x)` are estimated by Nadaraya–Watson regression of
//! the one-hot cell indicators on the covariate. Three log odds ratio
//! estimators are provided: the plug-in (I), a Haldane-style amendment (II)
//! and a bias-corrected amendment (III), together with delta-method and
//! multinomial-1 bootstrap intervals.

pub mod bandwidth;
pub mod baselines;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod kernel;
pub mod rng;
pub mod sample;
pub mod simulation;

pub use bandwidth::{BandwidthMode, BandwidthPlan};
pub use baselines::{GlmFit, Table2x2};
pub use error::{Error, Result};
pub use estimators::{CurveEstimate, Estimator, EstimatorConfig, LocalOrEstimate, ProbVector};
pub use inference::{BootstrapConfig, CiMethod, ConfidenceInterval};
pub use kernel::{KernelKind, KernelSpec};
pub use sample::{Cell, CellOrder, Observation, Sample};
pub use simulation::{ModelId, SimulationModel};
