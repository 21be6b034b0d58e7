//! Strong contamination: an adversary replaces a fraction of the rows.

use std::collections::BTreeSet;

use ndarray::Array1;
use rand::distr::Distribution;
use rand_distr::Cauchy;

use crate::error::{param, shape, Error, Result};
use crate::sampling::{dense_mean, Samples, SparseMean};
use crate::scalar::Scalar;
use crate::seed;

/// What the adversary writes into the rows it replaces.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy<T> {
    None,
    /// Every replaced row becomes `center + shift`.
    ConstantBias { center: Array1<T>, shift: Array1<T> },
    /// Independent Cauchy draws per coordinate.
    HeavyTailOutliers { location: f64, scale: f64 },
    /// Every replaced row becomes the given vector.
    PointMass(Array1<T>),
}

impl<T: Scalar> Strategy<T> {
    /// Outliers at `mean + bias * 1`.
    pub fn constant_bias(mean: &SparseMean<T>, bias: T) -> Self {
        let center = dense_mean(mean);
        let shift = Array1::from_elem(center.len(), bias);
        Self::ConstantBias { center, shift }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contamination<T> {
    pub epsilon: f64,
    pub strategy: Strategy<T>,
}

impl<T: Scalar> Contamination<T> {
    pub fn new(epsilon: f64, strategy: Strategy<T>) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self { epsilon, strategy })
    }

    pub fn none() -> Self {
        Self {
            epsilon: 0.0,
            strategy: Strategy::None,
        }
    }

    /// Number of rows replaced out of `n`: `floor(epsilon * n)`.
    pub fn corrupted_count(&self, n: usize) -> usize {
        corrupted_count(self.epsilon, n)
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..0.5).contains(&epsilon) {
        Ok(())
    } else {
        Err(param(format!("epsilon must lie in [0, 0.5), got {epsilon}")))
    }
}

pub fn corrupted_count(epsilon: f64, n: usize) -> usize {
    // The slack absorbs products such as 0.29 * 100 = 28.999999999999996.
    (epsilon * n as f64 + 1e-9).floor() as usize
}

/// Point mass at `sigma / sqrt(epsilon)` on one coordinate, zero elsewhere.
///
/// Mixing a point mass at the origin with this one shifts the mean of the
/// mixture by `sigma * sqrt(epsilon)` while keeping the variance at most
/// `sigma^2`, so no estimator can do better than that error.
pub fn make_lower_bound_adversary<T: Scalar>(
    sigma: f64,
    epsilon: f64,
    support_index: usize,
    dimension: usize,
) -> Result<Contamination<T>> {
    if !(epsilon > 0.0) {
        return Err(param("lower-bound adversary needs epsilon > 0"));
    }
    if !(sigma > 0.0) {
        return Err(param("lower-bound adversary needs sigma > 0"));
    }
    if support_index >= dimension {
        return Err(param(format!(
            "support index {support_index} out of range for d={dimension}"
        )));
    }
    let mut value = Array1::zeros(dimension);
    value[support_index] = T::of(sigma / epsilon.sqrt());
    Ok(Contamination {
        epsilon,
        strategy: Strategy::PointMass(value),
    })
}

/// Replaces `floor(epsilon * n)` uniformly chosen rows according to the strategy.
pub fn apply_contamination<T: Scalar>(
    samples: &Samples<T>,
    spec: &Contamination<T>,
    seed: u64,
) -> Result<Samples<T>> {
    check_epsilon(spec.epsilon)?;
    if !samples.corrupted_rows().is_empty() {
        return Err(Error::State("samples were already contaminated".into()));
    }
    let n = samples.rows();
    let d = samples.dim();
    let count = spec.corrupted_count(n);
    if count == 0 || matches!(spec.strategy, Strategy::None) {
        return Ok(samples.clone());
    }

    let mut rng = seed::stream_rng(seed::derive(seed, &[seed::label("rows")]));
    let rows: BTreeSet<usize> = rand::seq::index::sample(&mut rng, n, count)
        .into_iter()
        .collect();

    let (mut data, _) = samples.clone().into_parts();
    let check_len = |v: &Array1<T>| {
        if v.len() == d {
            Ok(())
        } else {
            Err(shape(format!("outlier vector has length {}, expected {d}", v.len())))
        }
    };
    match &spec.strategy {
        Strategy::None => unreachable!(),
        Strategy::ConstantBias { center, shift } => {
            check_len(center)?;
            check_len(shift)?;
            let row = center + shift;
            for &r in &rows {
                data.row_mut(r).assign(&row);
            }
        }
        Strategy::PointMass(v) => {
            check_len(v)?;
            for &r in &rows {
                data.row_mut(r).assign(v);
            }
        }
        Strategy::HeavyTailOutliers { location, scale } => {
            let cauchy = Cauchy::new(*location, *scale).map_err(|e| param(e.to_string()))?;
            let stream = seed::derive(seed, &[seed::label("outliers")]);
            for &r in &rows {
                for (j, x) in data.row_mut(r).iter_mut().enumerate() {
                    *x = T::of(cauchy.sample(&mut seed::cell_rng(stream, r, j)));
                }
            }
        }
    }
    Samples::with_corrupted(data, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_inliers, InlierDistribution};
    use ndarray::array;

    fn gaussian(n: usize, d: usize) -> Samples<f64> {
        let m = SparseMean::zero(d).unwrap();
        sample_inliers(&InlierDistribution::Gaussian { variance: 1.0 }, &m, n, 5).unwrap()
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let s = gaussian(20, 3);
        let spec = Contamination::new(0.0, Strategy::PointMass(array![1.0, 2.0, 3.0])).unwrap();
        let out = apply_contamination(&s, &spec, 1).unwrap();
        assert_eq!(out, s);
        assert!(out.corrupted_rows().is_empty());
    }

    #[test]
    fn point_mass_replaces_floor_count() {
        let s = gaussian(10, 2);
        let v = array![7.0, -7.0];
        let spec = Contamination::new(0.2, Strategy::PointMass(v.clone())).unwrap();
        let out = apply_contamination(&s, &spec, 3).unwrap();
        assert_eq!(out.corrupted_rows().len(), 2);
        let hits = out.data().rows().into_iter().filter(|r| *r == v).count();
        assert_eq!(hits, 2);
        for r in 0..10 {
            if !out.corrupted_rows().contains(&r) {
                assert_eq!(out.data().row(r), s.data().row(r));
            }
        }
    }

    #[test]
    fn lower_bound_values() {
        let c = make_lower_bound_adversary::<f64>(1.0, 0.04, 0, 3).unwrap();
        assert_eq!(c.strategy, Strategy::PointMass(array![5.0, 0.0, 0.0]));
        let c = make_lower_bound_adversary::<f64>(2.0, 0.25, 0, 2).unwrap();
        assert_eq!(c.strategy, Strategy::PointMass(array![4.0, 0.0]));
        let c = make_lower_bound_adversary::<f64>(1.0, 1.0, 1, 2).unwrap();
        assert_eq!(c.strategy, Strategy::PointMass(array![0.0, 1.0]));
        assert!(make_lower_bound_adversary::<f64>(1.0, 0.0, 0, 2).is_err());
    }

    #[test]
    fn rejects_bad_epsilon_and_recontamination() {
        let s = gaussian(10, 2);
        let bad = Contamination {
            epsilon: 0.5,
            strategy: Strategy::PointMass(array![0.0, 0.0]),
        };
        assert!(matches!(apply_contamination(&s, &bad, 1), Err(Error::Parameter(_))));
        let spec = Contamination::new(0.3, Strategy::PointMass(array![0.0, 0.0])).unwrap();
        let once = apply_contamination(&s, &spec, 1).unwrap();
        assert!(matches!(apply_contamination(&once, &spec, 1), Err(Error::State(_))));
    }

    #[test]
    fn constant_bias_row() {
        let m = SparseMean::new(3, vec![(1, 2.0)]).unwrap();
        let s = gaussian(10, 3);
        let spec = Contamination::new(0.1, Strategy::constant_bias(&m, 0.5)).unwrap();
        let out = apply_contamination(&s, &spec, 2).unwrap();
        let r = *out.corrupted_rows().iter().next().unwrap();
        assert_eq!(out.data().row(r).to_vec(), vec![0.5, 2.5, 0.5]);
    }

    #[test]
    fn heavy_tail_is_seeded() {
        let s = gaussian(50, 4);
        let spec = Contamination::new(0.1, Strategy::HeavyTailOutliers { location: 20.0, scale: 50f64.sqrt() }).unwrap();
        let a = apply_contamination(&s, &spec, 11).unwrap();
        let b = apply_contamination(&s, &spec, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.corrupted_rows().len(), 5);
    }

    #[test]
    fn awkward_products_floor_correctly() {
        assert_eq!(corrupted_count(0.29, 100), 29);
        assert_eq!(corrupted_count(0.2, 10), 2);
        assert_eq!(corrupted_count(0.05, 2000), 100);
        assert_eq!(corrupted_count(0.0, 7), 0);
    }
}
