//! Stage 2: robust dense mean estimation on the recovered support.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contamination::check_epsilon;
use crate::error::{param, shape, Result};
use crate::mom::{coordinatewise_mom, SubgroupRule};
use crate::sampling::Samples;
use crate::scalar::Scalar;
use crate::seed;

/// Constants of the iterative spectral filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub max_rounds: usize,
    /// Rows scoring at or above this quantile are removed each round.
    /// `None` uses `max(1 - 2 epsilon, 0.9)`.
    pub score_quantile: Option<f64>,
    /// Stop once the top eigenvalue is at most `sigma2 * (1 + threshold_constant * epsilon)`.
    pub threshold_constant: f64,
    /// Inlier variance bound; estimated from the data when absent.
    pub sigma2: Option<f64>,
    pub power_iterations: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_rounds: 50,
            score_quantile: None,
            threshold_constant: 9.0,
            sigma2: None,
            power_iterations: 100,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(param("filter needs at least one round"));
        }
        if let Some(q) = self.score_quantile {
            if !(q > 0.5 && q < 1.0) {
                return Err(param(format!("score quantile must lie in (0.5, 1), got {q}")));
            }
        }
        if let Some(s) = self.sigma2 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(param(format!("sigma2 must be positive, got {s}")));
            }
        }
        if !(self.threshold_constant >= 0.0) {
            return Err(param("threshold constant must be nonnegative"));
        }
        if self.power_iterations == 0 {
            return Err(param("power iteration needs at least one step"));
        }
        Ok(())
    }

    pub fn quantile_for(&self, epsilon: f64) -> f64 {
        self.score_quantile
            .unwrap_or_else(|| (1.0 - 2.0 * epsilon).max(0.9))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenseEstimator {
    CoordMom(SubgroupRule),
    IterativeFilter(FilterConfig),
}

impl Default for DenseEstimator {
    fn default() -> Self {
        Self::IterativeFilter(FilterConfig::default())
    }
}

/// Keeps the listed columns, preserving row order and corruption flags.
pub fn project_to_support<T: Scalar>(samples: &Samples<T>, support: &BTreeSet<usize>) -> Result<Samples<T>> {
    if let Some(&bad) = support.iter().find(|&&i| i >= samples.dim()) {
        return Err(shape(format!(
            "support index {bad} out of range for d={}",
            samples.dim()
        )));
    }
    let cols: Vec<usize> = support.iter().copied().collect();
    Samples::with_corrupted(
        samples.data().select(Axis(1), &cols),
        samples.corrupted_rows().clone(),
    )
}

/// Scatters `dense` onto `support` in a zero vector of length `d`.
pub fn assemble_full_estimate<T: Scalar>(
    support: &BTreeSet<usize>,
    dense: &Array1<T>,
    d: usize,
) -> Result<Array1<T>> {
    if support.len() != dense.len() {
        return Err(shape(format!(
            "support has {} indices but the estimate has {} entries",
            support.len(),
            dense.len()
        )));
    }
    let mut out = Array1::zeros(d);
    for (&i, &x) in support.iter().zip(dense.iter()) {
        if i >= d {
            return Err(shape(format!("support index {i} out of range for d={d}")));
        }
        out[i] = x;
    }
    Ok(out)
}

pub fn dense_robust_mean<T: Scalar>(
    samples_k: &Samples<T>,
    epsilon: f64,
    est: &DenseEstimator,
    seed: u64,
) -> Result<Array1<T>> {
    check_epsilon(epsilon)?;
    if samples_k.dim() == 0 {
        return Ok(Array1::zeros(0));
    }
    match est {
        DenseEstimator::CoordMom(rule) => coordinatewise_mom(samples_k, *rule, epsilon),
        DenseEstimator::IterativeFilter(cfg) => Ok(filter_mean(samples_k, epsilon, cfg, seed)?.estimate),
    }
}

/// Outcome of [`filter_mean`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport<T> {
    pub estimate: Array1<T>,
    pub rounds: usize,
    pub removed: usize,
    /// More rows were removed than `2 epsilon n + ln n`.
    pub over_removed: bool,
}

/// Iterative spectral filter: while the top eigenvalue of the empirical covariance
/// exceeds `sigma2 * (1 + c * epsilon)`, drop the rows whose squared projection on
/// the top eigenvector lies above the score quantile.
pub fn filter_mean<T: Scalar>(
    samples: &Samples<T>,
    epsilon: f64,
    cfg: &FilterConfig,
    seed: u64,
) -> Result<FilterReport<T>> {
    check_epsilon(epsilon)?;
    cfg.validate()?;
    let data = samples.data();
    let (n, k) = data.dim();
    if k == 0 {
        return Ok(FilterReport {
            estimate: Array1::zeros(0),
            rounds: 0,
            removed: 0,
            over_removed: false,
        });
    }
    let sigma2 = match cfg.sigma2 {
        Some(s) => s,
        None => estimate_sigma2(samples, epsilon)?,
    };
    let limit = T::of(sigma2 * (1.0 + cfg.threshold_constant * epsilon));
    let quantile = cfg.quantile_for(epsilon);
    let start = start_vector::<T>(k, seed);

    let mut alive: Vec<usize> = (0..n).collect();
    let mut rounds = 0;
    // A quantile of 1 (the default at epsilon = 0) never removes anything.
    while rounds < cfg.max_rounds && alive.len() > 1 && quantile < 1.0 {
        rounds += 1;
        let rows = data.select(Axis(0), &alive);
        let mean = column_mean(&rows);
        let centered = &rows - &mean.view().insert_axis(Axis(0));
        let m = T::of(alive.len() as f64);
        let cov = centered.t().dot(&centered).mapv(|x| x / m);
        let (lambda, dir) = top_eigenpair(&cov, &start, cfg.power_iterations);
        if lambda <= limit {
            break;
        }
        let scores: Vec<T> = centered.dot(&dir).mapv(|p| p * p).to_vec();
        let mut sorted = scores.clone();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        // Rows tied at the cut go too: identical outliers share one score and
        // would otherwise survive every round together.
        let pos = ((quantile * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        let cut = sorted[pos];
        let kept: Vec<usize> = alive
            .iter()
            .zip(&scores)
            .filter(|(_, &s)| s < cut)
            .map(|(&r, _)| r)
            .collect();
        if kept.is_empty() {
            break;
        }
        alive = kept;
    }
    let estimate = column_mean(&data.select(Axis(0), &alive));
    let removed = n - alive.len();
    let budget = 2.0 * epsilon * n as f64 + (n as f64).ln();
    Ok(FilterReport {
        estimate,
        rounds,
        removed,
        over_removed: removed as f64 > budget,
    })
}

fn column_mean<T: Scalar>(rows: &Array2<T>) -> Array1<T> {
    let m = T::of(rows.nrows() as f64);
    rows.sum_axis(Axis(0)).mapv(|s| s / m)
}

/// Heuristic variance bound: the largest coordinate-wise MoM of squared deviations
/// from the coordinate-wise MoM center.
pub fn estimate_sigma2<T: Scalar>(samples: &Samples<T>, epsilon: f64) -> Result<f64> {
    let center = coordinatewise_mom(samples, SubgroupRule::Practical, epsilon)?;
    let sq = Samples::with_corrupted(
        (samples.data() - &center.view().insert_axis(Axis(0))).mapv(|x| x * x),
        BTreeSet::new(),
    )?;
    let spread = coordinatewise_mom(&sq, SubgroupRule::Practical, epsilon)?;
    let s = spread.iter().fold(0.0f64, |m, x| m.max(x.to_f64_lossy()));
    Ok(if s > 0.0 { s } else { f64::MIN_POSITIVE })
}

fn start_vector<T: Scalar>(k: usize, seed: u64) -> Array1<T> {
    let mut rng = seed::stream_rng(seed::derive(seed, &[seed::label("power")]));
    Array1::from_iter((0..k).map(|_| T::of(rng.random_range(-1.0..1.0))))
}

/// Power iteration for the top eigenpair of a symmetric PSD matrix.
pub fn top_eigenpair<T: Scalar>(matrix: &Array2<T>, start: &Array1<T>, iterations: usize) -> (T, Array1<T>) {
    let norm = |v: &Array1<T>| v.iter().map(|&x| x * x).sum::<T>().sqrt();
    let mut v = start.clone();
    let n0 = norm(&v);
    if n0 == T::zero() {
        v = Array1::from_elem(start.len(), T::one());
    }
    let n0 = norm(&v);
    v.mapv_inplace(|x| x / n0);
    for _ in 0..iterations {
        let w = matrix.dot(&v);
        let nw = norm(&w);
        if nw == T::zero() || !nw.is_finite() {
            return (T::zero(), v);
        }
        v = w.mapv(|x| x / nw);
    }
    let lambda = v.dot(&matrix.dot(&v));
    (lambda, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn projection_examples() {
        let s = Samples::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let p = project_to_support(&s, &BTreeSet::from([0, 2])).unwrap();
        assert_eq!(p.data().row(0).to_vec(), vec![1.0, 3.0]);
        let all = project_to_support(&s, &BTreeSet::from([0, 1, 2])).unwrap();
        assert_eq!(all, s);
        let none = project_to_support(&s, &BTreeSet::new()).unwrap();
        assert_eq!(none.data().dim(), (2, 0));
        assert!(project_to_support(&s, &BTreeSet::from([3])).is_err());
    }

    #[test]
    fn assembly_examples() {
        let out = assemble_full_estimate(&BTreeSet::from([1]), &array![7.0], 3).unwrap();
        assert_eq!(out.to_vec(), vec![0.0, 7.0, 0.0]);
        let out = assemble_full_estimate::<f64>(&BTreeSet::new(), &array![], 2).unwrap();
        assert_eq!(out.to_vec(), vec![0.0, 0.0]);
        assert!(assemble_full_estimate(&BTreeSet::from([0, 1]), &array![1.0], 3).is_err());
    }

    #[test]
    fn singleton_median_ignores_one_outlier() {
        let s = Samples::from_rows(&[vec![0.0], vec![0.0], vec![0.0], vec![0.0], vec![1000.0]]).unwrap();
        let est = dense_robust_mean(&s, 0.2, &DenseEstimator::CoordMom(SubgroupRule::Fixed(5)), 0).unwrap();
        assert_eq!(est.to_vec(), vec![0.0]);
    }

    #[test]
    fn filter_is_a_no_op_below_threshold() {
        let s = Samples::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let cfg = FilterConfig {
            sigma2: Some(1.0),
            ..FilterConfig::default()
        };
        let r = filter_mean(&s, 0.0, &cfg, 3).unwrap();
        assert_eq!(r.removed, 0);
        assert_eq!(r.estimate.to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn filter_drops_far_cluster() {
        let mut rows: Vec<Vec<f64>> = (0..90).map(|i| vec![((i % 7) as f64 - 3.0) / 3.0, ((i % 5) as f64 - 2.0) / 2.0]).collect();
        rows.extend((0..10).map(|_| vec![30.0, 30.0]));
        let s = Samples::from_rows(&rows).unwrap();
        let cfg = FilterConfig {
            sigma2: Some(1.0),
            ..FilterConfig::default()
        };
        let r = filter_mean(&s, 0.1, &cfg, 1).unwrap();
        assert!(r.removed >= 10, "{r:?}");
        assert!(r.estimate.iter().all(|x| x.abs() < 0.5), "{r:?}");
        assert!(!r.over_removed);
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let m: Array2<f64> = array![[1.0, 0.0], [0.0, 4.0]];
        let (l, v) = top_eigenpair(&m, &array![1.0, 1.0], 100);
        assert!((l - 4.0).abs() < 1e-12);
        assert!((v[1].abs() - 1.0).abs() < 1e-12);
        let (l, _) = top_eigenpair(&Array2::<f64>::zeros((2, 2)), &array![1.0, 0.0], 10);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn empty_support_and_bad_epsilon() {
        let s = Samples::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let none = project_to_support(&s, &BTreeSet::new()).unwrap();
        assert_eq!(dense_robust_mean(&none, 0.1, &DenseEstimator::default(), 0).unwrap().len(), 0);
        assert!(dense_robust_mean(&s, 0.5, &DenseEstimator::default(), 0).is_err());
        let bad = DenseEstimator::IterativeFilter(FilterConfig {
            score_quantile: Some(0.4),
            ..FilterConfig::default()
        });
        assert!(dense_robust_mean(&s, 0.1, &bad, 0).is_err());
    }
}
