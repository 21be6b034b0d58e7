//! Robust estimation of a sparse mean from heavy-tailed samples of which a fixed
//! fraction has been replaced by an adversary.
//!
//! The estimator runs in two stages. Stage 1 splits the samples into subgroups,
//! takes their means and runs a subgradient method on the median-of-means loss
//! with the mean parameterized as `u*u - v*v` and initialized at a tiny scale.
//! Signal coordinates grow geometrically while the others stay near zero, so
//! thresholding the result recovers the support. Stage 2 runs a dense robust
//! estimator on the samples projected to that support.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod contamination;
pub mod densefilter;
mod error;
pub mod mom;
pub mod pipeline;
pub mod sampling;
mod scalar;
pub mod seed;
pub mod subgm;

pub use contamination::{apply_contamination, make_lower_bound_adversary, Contamination, Strategy};
pub use densefilter::{
    assemble_full_estimate, dense_robust_mean, filter_mean, project_to_support, DenseEstimator, FilterConfig,
};
pub use error::{Error, Result};
pub use mom::{
    make_plan, mom_1d, mom_coordinatewise, sign_statistic, subgroup_means, SubgroupMeans, SubgroupPlan,
    SubgroupRule,
};
pub use pipeline::{evaluate, run_estimator, success_rate, EstimateReport, EstimatorKind, Metrics};
pub use sampling::{dense_mean, density, sample_inliers, InlierDistribution, Samples, SparseMean};
pub use scalar::Scalar;
pub use subgm::{
    convex_baseline_run, identify_support, subgm_run, subgm_step, FactoredIterate, Iterations, SubgmConfig,
    Trace, TraceSpec,
};

pub type SampleMatrix = Samples<f64>;
pub type SparseMeanSpec = SparseMean<f64>;
pub type ContaminationSpec = Contamination<f64>;
pub type Means = SubgroupMeans<f64>;
pub type Iterate = FactoredIterate<f64>;
pub type SubgmTrace = Trace<f64>;
pub type Report = EstimateReport<f64>;

pub type SampleMatrix32 = Samples<f32>;
pub type SparseMeanSpec32 = SparseMean<f32>;
pub type Means32 = SubgroupMeans<f32>;
pub type Iterate32 = FactoredIterate<f32>;

/// Version of this library, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
