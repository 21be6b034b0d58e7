//! Stage 1: subgradient method on the factored loss
//! `(1/2J) * sum_j ||means_j - (u*u - v*v)||_1` from the small initialization
//! `u = v = alpha * 1`.
//!
//! The coordinate form of one step is
//! `u_i <- (1 + eta * beta_i) u_i`, `v_i <- (1 - eta * beta_i) v_i`, where
//! `beta_i` is the sign statistic of column `i` at the current estimate. Signal
//! coordinates see `|beta_i|` of order one and grow geometrically while residual
//! coordinates see `beta_i` near zero and stay at the scale of `alpha^2`.
//!
//! Coordinates never interact, so a run is computed one column at a time.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Error, Result};
use crate::mom::{sign_statistic, SubgroupMeans};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Iterations {
    Fixed(usize),
    /// `ceil((2 / eta) * ln(1 / alpha))`, the start of the window in which
    /// signals have converged but residuals have not yet grown.
    Auto,
}

/// Which iterations and coordinates to record.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceSpec {
    /// Record every `every`-th iteration (plus the first and last); 0 disables tracing.
    pub every: usize,
    /// `None` records all coordinates.
    pub coordinates: Option<Vec<usize>>,
}

impl TraceSpec {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn every(every: usize, coordinates: Option<Vec<usize>>) -> Self {
        Self { every, coordinates }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgmConfig {
    pub alpha: f64,
    pub eta: f64,
    pub iterations: Iterations,
    pub trace: TraceSpec,
    pub support_threshold_multiplier: f64,
}

impl SubgmConfig {
    pub fn new(alpha: f64, eta: f64, iterations: Iterations) -> Self {
        Self {
            alpha,
            eta,
            iterations,
            trace: TraceSpec::off(),
            support_threshold_multiplier: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(param(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(param(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.support_threshold_multiplier >= 1.0) {
            return Err(param("support threshold multiplier must be at least 1"));
        }
        Ok(())
    }

    pub fn resolved_iterations(&self) -> usize {
        match self.iterations {
            Iterations::Fixed(t) => t,
            Iterations::Auto => auto_iterations(self.alpha, self.eta),
        }
    }
}

pub fn auto_iterations(alpha: f64, eta: f64) -> usize {
    ((2.0 / eta) * (1.0 / alpha).ln()).ceil().max(0.0) as usize
}

/// The pair `(u, v)` parameterizing the estimate `u*u - v*v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredIterate<T> {
    pub u: Array1<T>,
    pub v: Array1<T>,
    pub t: usize,
}

impl<T: Scalar> FactoredIterate<T> {
    pub fn initial(dim: usize, alpha: T) -> Self {
        Self {
            u: Array1::from_elem(dim, alpha),
            v: Array1::from_elem(dim, alpha),
            t: 0,
        }
    }

    pub fn estimate(&self) -> Array1<T> {
        ndarray::Zip::from(&self.u)
            .and(&self.v)
            .map_collect(|&u, &v| u * u - v * v)
    }
}

/// Recorded trajectory: `values[[r, c]]` and `betas[[r, c]]` hold the estimate and
/// sign statistic of `coordinates[c]` at iteration `times[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub times: Vec<usize>,
    pub coordinates: Vec<usize>,
    pub values: Array2<T>,
    pub betas: Array2<T>,
}

impl<T: Scalar> Trace<T> {
    pub fn empty() -> Self {
        Self {
            times: Vec::new(),
            coordinates: Vec::new(),
            values: Array2::zeros((0, 0)),
            betas: Array2::zeros((0, 0)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Trajectory of one recorded coordinate, if it was recorded.
    pub fn series(&self, coordinate: usize) -> Option<ArrayView1<'_, T>> {
        let c = self.coordinates.iter().position(|&x| x == coordinate)?;
        Some(self.values.column(c))
    }
}

fn recorded_times(total: usize, every: usize) -> Vec<usize> {
    if every == 0 {
        return Vec::new();
    }
    let mut times: Vec<usize> = (0..=total).step_by(every).collect();
    if times.last() != Some(&total) {
        times.push(total);
    }
    times
}

fn trace_coordinates(spec: &TraceSpec, dim: usize) -> Result<Vec<usize>> {
    match &spec.coordinates {
        None => Ok((0..dim).collect()),
        Some(cs) => {
            if let Some(&bad) = cs.iter().find(|&&c| c >= dim) {
                return Err(param(format!("trace coordinate {bad} out of range for d={dim}")));
            }
            Ok(cs.clone())
        }
    }
}

/// Column-major copy of the means so each coordinate's values are contiguous.
fn columns<T: Scalar>(means: &SubgroupMeans<T>) -> Vec<Vec<T>> {
    means.means().columns().into_iter().map(|c| c.to_vec()).collect()
}

/// Sign statistic of one column at `a`, accumulated in row order.
#[inline]
fn column_beta<T: Scalar>(column: &[T], a: T, inv_j: T) -> T {
    let mut s = T::zero();
    for &x in column {
        s = s + (x - a).sign0();
    }
    s * inv_j
}

/// Both factors and the estimate they represent are finite.
#[inline]
fn finite_pair<T: Scalar>(u: T, v: T) -> bool {
    (u * u - v * v).is_finite()
}

/// One multiplicative update; returns the new pair and the statistic used.
#[inline]
fn factored_update<T: Scalar>(u: T, v: T, column: &[T], eta: T, inv_j: T) -> (T, T, T) {
    let beta = column_beta(column, u * u - v * v, inv_j);
    let step = eta * beta;
    ((T::one() + step) * u, (T::one() - step) * v, beta)
}

pub fn subgm_step<T: Scalar>(
    iter: &FactoredIterate<T>,
    means: &SubgroupMeans<T>,
    eta: T,
) -> Result<FactoredIterate<T>> {
    let d = means.dim();
    if iter.u.len() != d || iter.v.len() != d {
        return Err(shape(format!(
            "iterate has length {}/{}, means have {d} columns",
            iter.u.len(),
            iter.v.len()
        )));
    }
    if let Some(i) = (0..d).find(|&i| !finite_pair(iter.u[i], iter.v[i])) {
        return Err(Error::Numeric {
            coordinate: i,
            iteration: iter.t,
        });
    }
    let beta = sign_statistic(means, iter.estimate().view())?;
    let mut next = iter.clone();
    for i in 0..d {
        let step = eta * beta[i];
        next.u[i] = (T::one() + step) * iter.u[i];
        next.v[i] = (T::one() - step) * iter.v[i];
        if !finite_pair(next.u[i], next.v[i]) {
            return Err(Error::Numeric {
                coordinate: i,
                iteration: iter.t + 1,
            });
        }
    }
    next.t += 1;
    Ok(next)
}

/// Runs `T` steps from `u = v = alpha * 1`.
pub fn subgm_run<T: Scalar>(
    means: &SubgroupMeans<T>,
    cfg: &SubgmConfig,
) -> Result<(FactoredIterate<T>, Trace<T>)> {
    cfg.validate()?;
    let d = means.dim();
    let total = cfg.resolved_iterations();
    let eta = T::of(cfg.eta);
    let alpha = T::of(cfg.alpha);
    if alpha == T::zero() {
        return Err(param("alpha underflows the scalar type"));
    }
    let inv_j = T::one() / T::of(means.groups() as f64);
    let times = recorded_times(total, cfg.trace.every);
    let traced = if times.is_empty() {
        Vec::new()
    } else {
        trace_coordinates(&cfg.trace, d)?
    };
    let mut values = Array2::zeros((times.len(), traced.len()));
    let mut betas = Array2::zeros((times.len(), traced.len()));

    let cols = columns(means);
    let mut out = FactoredIterate::initial(d, alpha);
    out.t = total;
    for (i, column) in cols.iter().enumerate() {
        let slot = traced.iter().position(|&c| c == i);
        let (mut u, mut v) = (alpha, alpha);
        let mut next_record = 0;
        for t in 0..=total {
            let (nu, nv, beta) = factored_update(u, v, column, eta, inv_j);
            if let Some(c) = slot {
                if next_record < times.len() && times[next_record] == t {
                    values[[next_record, c]] = u * u - v * v;
                    betas[[next_record, c]] = beta;
                    next_record += 1;
                }
            }
            if t == total {
                break;
            }
            if !finite_pair(nu, nv) {
                return Err(Error::Numeric {
                    coordinate: i,
                    iteration: t + 1,
                });
            }
            u = nu;
            v = nv;
        }
        out.u[i] = u;
        out.v[i] = v;
    }
    let trace = if times.is_empty() {
        Trace::empty()
    } else {
        Trace {
            times,
            coordinates: traced,
            values,
            betas,
        }
    };
    Ok((out, trace))
}

/// `{ i : |estimate_i| >= multiplier * alpha }`.
pub fn identify_support<T: Scalar>(estimate: ArrayView1<T>, alpha: f64, multiplier: f64) -> BTreeSet<usize> {
    let threshold = T::of(multiplier * alpha);
    estimate
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Subgradient descent on the convex loss `(1/J) * sum_j ||means_j - mu||_1`
/// from `mu = 0`: `mu <- mu + eta * beta(mu)`.
pub fn convex_baseline_run<T: Scalar>(
    means: &SubgroupMeans<T>,
    eta: f64,
    iterations: usize,
    trace: &TraceSpec,
) -> Result<(Array1<T>, Trace<T>)> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(param(format!("eta must be positive, got {eta}")));
    }
    let d = means.dim();
    let eta = T::of(eta);
    let inv_j = T::one() / T::of(means.groups() as f64);
    let times = recorded_times(iterations, trace.every);
    let traced = if times.is_empty() {
        Vec::new()
    } else {
        trace_coordinates(trace, d)?
    };
    let mut values = Array2::zeros((times.len(), traced.len()));
    let mut betas = Array2::zeros((times.len(), traced.len()));

    let cols = columns(means);
    let mut mu = Array1::zeros(d);
    for (i, column) in cols.iter().enumerate() {
        let slot = traced.iter().position(|&c| c == i);
        let mut m = T::zero();
        let mut next_record = 0;
        for t in 0..=iterations {
            let beta = column_beta(column, m, inv_j);
            if let Some(c) = slot {
                if next_record < times.len() && times[next_record] == t {
                    values[[next_record, c]] = m;
                    betas[[next_record, c]] = beta;
                    next_record += 1;
                }
            }
            if t == iterations {
                break;
            }
            m = m + eta * beta;
        }
        mu[i] = m;
    }
    let trace = if times.is_empty() {
        Trace::empty()
    } else {
        Trace {
            times,
            coordinates: traced,
            values,
            betas,
        }
    };
    Ok((mu, trace))
}

/// `(1/2J) * sum_j ||means_j - (u*u - v*v)||_1`.
pub fn ncvx_objective<T: Scalar>(means: &SubgroupMeans<T>, u: ArrayView1<T>, v: ArrayView1<T>) -> T {
    let est = ndarray::Zip::from(&u).and(&v).map_collect(|&a, &b| a * a - b * b);
    let two = T::one() + T::one();
    crate::mom::convex_objective(means, est.view()) / two
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn means(rows: Array2<f64>) -> SubgroupMeans<f64> {
        SubgroupMeans::from_matrix(rows).unwrap()
    }

    #[test]
    fn zero_statistic_leaves_iterate() {
        // a column symmetric around the initial estimate 0 gives beta = 0
        let m = means(array![[-1.0], [1.0]]);
        let it = FactoredIterate::initial(1, 0.3);
        let next = subgm_step(&it, &m, 0.1).unwrap();
        assert_eq!(next.u, it.u);
        assert_eq!(next.v, it.v);
        assert_eq!(next.t, 1);
    }

    #[test]
    fn single_step_arithmetic() {
        let m = means(array![[1.0], [2.0], [3.0]]);
        let it = FactoredIterate::initial(1, 0.1);
        let next = subgm_step(&it, &m, 0.05).unwrap();
        assert!((next.u[0] - 0.105).abs() < 1e-15);
        assert!((next.v[0] - 0.095).abs() < 1e-15);
        assert!((next.estimate()[0] - 0.002).abs() < 1e-15);
    }

    #[test]
    fn constant_beta_is_geometric() {
        let m = means(array![[100.0], [200.0]]);
        let (alpha, eta) = (1e-3, 0.05);
        let mut it = FactoredIterate::initial(1, alpha);
        for _ in 0..40 {
            it = subgm_step(&it, &m, eta).unwrap();
        }
        let mut expected = alpha;
        for _ in 0..40 {
            expected *= 1.0 + eta;
        }
        assert_eq!(it.u[0], expected);
    }

    #[test]
    fn all_zero_means_is_a_fixed_point() {
        let m = means(Array2::zeros((5, 3)));
        let cfg = SubgmConfig::new(1e-5, 0.05, Iterations::Fixed(100));
        let (it, _) = subgm_run(&m, &cfg).unwrap();
        assert!(it.estimate().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn run_matches_repeated_steps() {
        let m = means(array![[1.0, -2.0, 0.1], [1.5, -1.0, -0.2], [0.7, -3.0, 0.05]]);
        let cfg = SubgmConfig::new(1e-4, 0.1, Iterations::Fixed(150));
        let (run, _) = subgm_run(&m, &cfg).unwrap();
        let mut it = FactoredIterate::initial(3, 1e-4);
        for _ in 0..150 {
            it = subgm_step(&it, &m, 0.1).unwrap();
        }
        assert_eq!(run, it);
    }

    #[test]
    fn auto_iterations_formula() {
        assert_eq!(auto_iterations(1e-5, 0.05), 461);
        let cfg = SubgmConfig::new(1e-10, 0.07, Iterations::Auto);
        assert_eq!(cfg.resolved_iterations(), 658);
    }

    #[test]
    fn support_threshold_is_inclusive() {
        let est = array![0.5, 1e-9, -0.3];
        assert_eq!(identify_support(est.view(), 1e-5, 1.0), BTreeSet::from([0, 2]));
        assert!(identify_support(Array1::<f64>::zeros(4).view(), 1e-5, 1.0).is_empty());
        let edge = array![1e-5, -1e-5, 0.99e-5];
        assert_eq!(identify_support(edge.view(), 1e-5, 1.0), BTreeSet::from([0, 1]));
    }

    #[test]
    fn convex_first_step_and_zero_iterations() {
        let m = means(array![[1.0, -1.0], [2.0, 0.0], [3.0, 1.0]]);
        let (mu, _) = convex_baseline_run(&m, 0.05, 0, &TraceSpec::off()).unwrap();
        assert_eq!(mu.to_vec(), vec![0.0, 0.0]);
        let (mu, trace) = convex_baseline_run(&m, 0.05, 1, &TraceSpec::every(1, None)).unwrap();
        assert_eq!(mu.to_vec(), vec![0.05, 0.0]);
        assert_eq!(trace.times, vec![0, 1]);
        assert_eq!(trace.betas.row(0).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn trace_records_initial_row() {
        let m = means(array![[1.0, 2.0]]);
        let mut cfg = SubgmConfig::new(1e-3, 0.1, Iterations::Fixed(0));
        cfg.trace = TraceSpec::every(1, Some(vec![1]));
        let (_, trace) = subgm_run(&m, &cfg).unwrap();
        assert_eq!(trace.times, vec![0]);
        assert_eq!(trace.values[[0, 0]], 0.0);
        assert_eq!(trace.betas[[0, 0]], 1.0);
        cfg.trace = TraceSpec::every(1, Some(vec![2]));
        assert!(subgm_run(&m, &cfg).is_err());
    }

    #[test]
    fn overflow_names_coordinate() {
        let m = means(array![[0.0, 1.0]]);
        let cfg = SubgmConfig::new(1.0, 1e200, Iterations::Fixed(5));
        match subgm_run(&m, &cfg) {
            Err(Error::Numeric { coordinate, iteration }) => {
                assert_eq!(coordinate, 1);
                assert_eq!(iteration, 1);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config() {
        let m = means(array![[1.0]]);
        assert!(subgm_run(&m, &SubgmConfig::new(0.0, 0.1, Iterations::Auto)).is_err());
        assert!(subgm_run(&m, &SubgmConfig::new(1e-3, -0.1, Iterations::Auto)).is_err());
    }
}
