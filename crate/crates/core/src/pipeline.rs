//! The two-stage estimator, its baselines and the evaluation metrics.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::contamination::{check_epsilon, corrupted_count};
use crate::densefilter::{assemble_full_estimate, dense_robust_mean, project_to_support, DenseEstimator};
use crate::error::{shape, Error, Result};
use crate::mom::{coordinatewise_mom, make_plan, subgroup_means, SubgroupRule};
use crate::sampling::{dense_mean, Samples, SparseMean};
use crate::scalar::Scalar;
use crate::seed;
use crate::subgm::{convex_baseline_run, identify_support, subgm_run, SubgmConfig, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// SubGM estimate and its thresholded support.
    Stage1Only,
    /// Stage 1 support, then a dense robust estimator on the projected samples.
    Full(DenseEstimator),
    CoordMomBaseline(SubgroupRule),
    /// Subgradient descent on the convex coordinate-wise MoM loss from zero.
    ConvexBaseline { eta: f64, iterations: usize },
    /// Coordinate-wise MoM on the uncorrupted rows. Simulation only.
    Oracle,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Stage1Only => "stage1",
            Self::Full(_) => "full",
            Self::CoordMomBaseline(_) => "coord_mom",
            Self::ConvexBaseline { .. } => "convex",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput<T> {
    pub estimate: Array1<T>,
    pub support: BTreeSet<usize>,
    pub trace: Option<Trace<T>>,
}

/// Stage 1 on its own: subgroup means, SubGM, thresholded support.
fn stage_one<T: Scalar>(
    samples: &Samples<T>,
    mom_rule: SubgroupRule,
    cfg: &SubgmConfig,
    epsilon: f64,
) -> Result<EstimatorOutput<T>> {
    let plan = make_plan(samples.rows(), mom_rule, epsilon)?;
    let means = subgroup_means(samples, &plan)?;
    let (iterate, trace) = subgm_run(&means, cfg)?;
    let estimate = iterate.estimate();
    let support = identify_support(estimate.view(), cfg.alpha, cfg.support_threshold_multiplier);
    Ok(EstimatorOutput {
        estimate,
        support,
        trace: (!trace.is_empty()).then_some(trace),
    })
}

pub fn run_estimator<T: Scalar>(
    samples: &Samples<T>,
    kind: &EstimatorKind,
    mom_rule: SubgroupRule,
    subgm_cfg: &SubgmConfig,
    epsilon: f64,
    seed: u64,
) -> Result<EstimatorOutput<T>> {
    check_epsilon(epsilon)?;
    let threshold_support =
        |est: &Array1<T>| identify_support(est.view(), subgm_cfg.alpha, subgm_cfg.support_threshold_multiplier);
    match kind {
        EstimatorKind::Stage1Only => stage_one(samples, mom_rule, subgm_cfg, epsilon),
        EstimatorKind::Full(dense) => {
            let first = stage_one(samples, mom_rule, subgm_cfg, epsilon)?;
            if first.support.is_empty() {
                return Ok(EstimatorOutput {
                    estimate: Array1::zeros(samples.dim()),
                    ..first
                });
            }
            let projected = project_to_support(samples, &first.support)?;
            let stage2_seed = seed::derive(seed, &[seed::label("stage2")]);
            let local = dense_robust_mean(&projected, epsilon, dense, stage2_seed)?;
            let estimate = assemble_full_estimate(&first.support, &local, samples.dim())?;
            Ok(EstimatorOutput { estimate, ..first })
        }
        EstimatorKind::CoordMomBaseline(rule) => {
            let estimate = coordinatewise_mom(samples, *rule, epsilon)?;
            let support = threshold_support(&estimate);
            Ok(EstimatorOutput {
                estimate,
                support,
                trace: None,
            })
        }
        EstimatorKind::ConvexBaseline { eta, iterations } => {
            let plan = make_plan(samples.rows(), mom_rule, epsilon)?;
            let means = subgroup_means(samples, &plan)?;
            let (estimate, trace) = convex_baseline_run(&means, *eta, *iterations, &subgm_cfg.trace)?;
            let support = threshold_support(&estimate);
            Ok(EstimatorOutput {
                estimate,
                support,
                trace: (!trace.is_empty()).then_some(trace),
            })
        }
        EstimatorKind::Oracle => {
            if samples.corrupted_rows().is_empty() && corrupted_count(epsilon, samples.rows()) > 0 {
                return Err(Error::State(
                    "oracle needs the corrupted-row labels, but none are recorded".into(),
                ));
            }
            let clean = samples.clean()?;
            let estimate = coordinatewise_mom(&clean, mom_rule, epsilon)?;
            let support = threshold_support(&estimate);
            Ok(EstimatorOutput {
                estimate,
                support,
                trace: None,
            })
        }
    }
}

/// Jaccard index `|found ∩ truth| / |found ∪ truth|`, with `0/0 = 1`.
pub fn success_rate(found: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> f64 {
    let union = found.union(truth).count();
    if union == 0 {
        return 1.0;
    }
    found.intersection(truth).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub l2_error: f64,
    pub linf_error: f64,
    pub success_rate: f64,
}

pub fn evaluate<T: Scalar>(
    estimate: ArrayView1<T>,
    support: &BTreeSet<usize>,
    truth: &SparseMean<T>,
) -> Result<Metrics> {
    if estimate.len() != truth.dimension() {
        return Err(shape(format!(
            "estimate has length {}, truth has dimension {}",
            estimate.len(),
            truth.dimension()
        )));
    }
    let dense = dense_mean(truth);
    let (sq, max) = estimate
        .iter()
        .zip(dense.iter())
        .map(|(&e, &t)| (e - t).to_f64_lossy().abs())
        .fold((0.0f64, 0.0f64), |(s, m), x| (s + x * x, m.max(x)));
    Ok(Metrics {
        l2_error: sq.sqrt(),
        linf_error: max,
        success_rate: success_rate(support, &truth.support()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport<T> {
    pub estimate: Array1<T>,
    pub support: BTreeSet<usize>,
    pub metrics: Metrics,
    pub wall_time: Duration,
    pub trace: Option<Trace<T>>,
}

/// Runs an estimator, times it and scores it against the true mean.
pub fn estimate_and_report<T: Scalar>(
    samples: &Samples<T>,
    kind: &EstimatorKind,
    mom_rule: SubgroupRule,
    subgm_cfg: &SubgmConfig,
    epsilon: f64,
    seed: u64,
    truth: &SparseMean<T>,
) -> Result<EstimateReport<T>> {
    let started = Instant::now();
    let out = run_estimator(samples, kind, mom_rule, subgm_cfg, epsilon, seed)?;
    let wall_time = started.elapsed();
    let metrics = evaluate(out.estimate.view(), &out.support, truth)?;
    Ok(EstimateReport {
        estimate: out.estimate,
        support: out.support,
        metrics,
        wall_time,
        trace: out.trace,
    })
}
