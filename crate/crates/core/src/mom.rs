//! Subgroup partitioning, median-of-means and the sign statistic.

use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Result};
use crate::sampling::Samples;
use crate::scalar::Scalar;

/// How many subgroups to split `n` samples into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgroupRule {
    /// `J = 100 * ceil(epsilon * n)`.
    Theory,
    /// `J = floor(1.5 * ceil(epsilon * n) + 150)`.
    Practical,
    Fixed(usize),
}

impl SubgroupRule {
    /// Unclamped subgroup count.
    pub fn raw_groups(&self, n: usize, epsilon: f64) -> usize {
        let bad = ceil_count(epsilon, n);
        match *self {
            Self::Theory => 100 * bad,
            Self::Practical => (1.5 * bad as f64 + 150.0).floor() as usize,
            Self::Fixed(j) => j,
        }
    }
}

/// `ceil(epsilon * n)`, tolerant of products like `0.1 * 600 = 60.00000000000001`.
pub fn ceil_count(epsilon: f64, n: usize) -> usize {
    (epsilon * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Contiguous partition of `n` rows into `J` groups whose sizes differ by at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubgroupPlan {
    n: usize,
    groups: usize,
    clamped: bool,
}

impl SubgroupPlan {
    pub fn new(n: usize, groups: usize) -> Result<Self> {
        if n == 0 {
            return Err(param("cannot partition zero samples"));
        }
        if groups == 0 || groups > n {
            return Err(param(format!("subgroup count {groups} outside [1, {n}]")));
        }
        Ok(Self {
            n,
            groups,
            clamped: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Whether the rule asked for a count outside `[1, n]`.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    /// Smallest subgroup size, `floor(n / J)`.
    pub fn min_size(&self) -> usize {
        self.n / self.groups
    }

    /// Rows of group `j`. The first `n mod J` groups hold one extra row.
    pub fn range(&self, j: usize) -> Range<usize> {
        let base = self.n / self.groups;
        let extra = self.n % self.groups;
        let start = j * base + j.min(extra);
        let len = base + usize::from(j < extra);
        start..start + len
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.groups).map(|j| self.range(j).len()).collect()
    }

    pub fn assignment(&self) -> Vec<usize> {
        (0..self.groups)
            .flat_map(|j| self.range(j).map(move |_| j))
            .collect()
    }
}

pub fn make_plan(n: usize, rule: SubgroupRule, epsilon: f64) -> Result<SubgroupPlan> {
    if n == 0 {
        return Err(param("cannot partition zero samples"));
    }
    let raw = rule.raw_groups(n, epsilon);
    let groups = raw.clamp(1, n);
    Ok(SubgroupPlan {
        n,
        groups,
        clamped: groups != raw,
    })
}

/// Per-subgroup empirical means, one row per group.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupMeans<T> {
    means: Array2<T>,
    plan: SubgroupPlan,
}

impl<T: Scalar> SubgroupMeans<T> {
    /// Wraps precomputed means; the plan is taken to be `J` singleton groups.
    pub fn from_matrix(means: Array2<T>) -> Result<Self> {
        let plan = SubgroupPlan::new(means.nrows(), means.nrows())?;
        if means.ncols() == 0 {
            return Err(shape("subgroup means need at least one column"));
        }
        Ok(Self { means, plan })
    }

    pub fn means(&self) -> &Array2<T> {
        &self.means
    }

    pub fn plan(&self) -> &SubgroupPlan {
        &self.plan
    }

    pub fn groups(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// Keeps only the listed coordinates.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self {
            means: self.means.select(Axis(1), columns),
            plan: self.plan,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            means: self.means.mapv(f),
            plan: self.plan,
        }
    }
}

pub fn subgroup_means<T: Scalar>(samples: &Samples<T>, plan: &SubgroupPlan) -> Result<SubgroupMeans<T>> {
    if plan.n() != samples.rows() {
        return Err(shape(format!(
            "plan covers {} rows but samples have {}",
            plan.n(),
            samples.rows()
        )));
    }
    let d = samples.dim();
    let mut means = Array2::zeros((plan.groups(), d));
    for (j, mut out) in means.rows_mut().into_iter().enumerate() {
        let range = plan.range(j);
        let len = T::of(range.len() as f64);
        for r in range {
            out.zip_mut_with(&samples.data().row(r), |acc, &x| *acc = *acc + x);
        }
        out.mapv_inplace(|s| s / len);
    }
    Ok(SubgroupMeans { means, plan: *plan })
}

/// Median of `values`; the midpoint of the two central order statistics for even length.
pub fn mom_1d<T: Scalar>(values: &[T]) -> Result<T> {
    if values.is_empty() {
        return Err(shape("median of an empty list"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(param("median input contains NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    let m = sorted.len();
    Ok(if m % 2 == 1 {
        sorted[m / 2]
    } else {
        let two = T::one() + T::one();
        (sorted[m / 2 - 1] + sorted[m / 2]) / two
    })
}

/// Column-wise median of the subgroup means, which minimizes
/// `(1/J) * sum_j ||means_j - mu||_1`.
pub fn mom_coordinatewise<T: Scalar>(means: &SubgroupMeans<T>) -> Result<Array1<T>> {
    means
        .means
        .columns()
        .into_iter()
        .map(|col| mom_1d(&col.to_vec()))
        .collect::<Result<Vec<T>>>()
        .map(Array1::from)
}

/// `beta_i = (1/J) * sum_j sign(means[j][i] - a[i])` with `sign(0) = 0`.
pub fn sign_statistic<T: Scalar>(means: &SubgroupMeans<T>, a: ArrayView1<T>) -> Result<Array1<T>> {
    if a.len() != means.dim() {
        return Err(shape(format!(
            "sign statistic point has length {}, expected {}",
            a.len(),
            means.dim()
        )));
    }
    let inv_j = T::one() / T::of(means.groups() as f64);
    let mut beta = Array1::zeros(means.dim());
    for row in means.means.rows() {
        for ((b, &x), &ai) in beta.iter_mut().zip(row.iter()).zip(a.iter()) {
            *b = *b + (x - ai).sign0();
        }
    }
    beta.mapv_inplace(|b| b * inv_j);
    Ok(beta)
}

/// `(1/J) * sum_j ||means_j - mu||_1`.
pub fn convex_objective<T: Scalar>(means: &SubgroupMeans<T>, mu: ArrayView1<T>) -> T {
    let total: T = means
        .means
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(mu.iter()).map(|(&x, &m)| (x - m).abs()).sum::<T>())
        .sum();
    total / T::of(means.groups() as f64)
}

/// Coordinate-wise MoM of a sample matrix under a subgroup rule.
pub fn coordinatewise_mom<T: Scalar>(
    samples: &Samples<T>,
    rule: SubgroupRule,
    epsilon: f64,
) -> Result<Array1<T>> {
    let plan = make_plan(samples.rows(), rule, epsilon)?;
    mom_coordinatewise(&subgroup_means(samples, &plan)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn plan_examples() {
        let p = make_plan(600, SubgroupRule::Theory, 0.1).unwrap();
        assert_eq!(p.groups(), 600);
        assert!(p.was_clamped());
        let p = make_plan(600, SubgroupRule::Practical, 0.1).unwrap();
        assert_eq!(p.groups(), 240);
        assert!(!p.was_clamped());
        let p = make_plan(6, SubgroupRule::Fixed(3), 0.0).unwrap();
        assert_eq!(p.sizes(), vec![2, 2, 2]);
        assert_eq!(p.assignment(), vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn uneven_partition() {
        let p = SubgroupPlan::new(7, 3).unwrap();
        assert_eq!(p.sizes(), vec![3, 2, 2]);
        assert_eq!(p.range(1), 3..5);
        assert_eq!(p.min_size(), 2);
        // zero epsilon asks for no groups under the theory rule
        let p = make_plan(10, SubgroupRule::Theory, 0.0).unwrap();
        assert_eq!(p.groups(), 1);
        assert!(p.was_clamped());
    }

    #[test]
    fn means_of_small_example() {
        let s = Samples::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![100.0], vec![6.0]]).unwrap();
        let m = subgroup_means(&s, &SubgroupPlan::new(6, 3).unwrap()).unwrap();
        assert_eq!(m.means().column(0).to_vec(), vec![1.5, 3.5, 53.0]);
        assert_eq!(mom_1d(&m.means().column(0).to_vec()).unwrap(), 3.5);
        let singletons = subgroup_means(&s, &SubgroupPlan::new(6, 6).unwrap()).unwrap();
        assert_eq!(singletons.means(), s.data());
        assert!(subgroup_means(&s, &SubgroupPlan::new(5, 5).unwrap()).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(mom_1d(&[-1.0, 0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(mom_1d(&[5.0, 5.0, 5.0, 5.0]).unwrap(), 5.0);
        assert_eq!(mom_1d(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert!(mom_1d::<f64>(&[]).is_err());
        assert!(mom_1d(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn coordinatewise_example() {
        let m = SubgroupMeans::from_matrix(array![[0.0, 10.0], [1.0, 20.0], [2.0, 30.0]]).unwrap();
        assert_eq!(mom_coordinatewise(&m).unwrap().to_vec(), vec![1.0, 20.0]);
        let single = SubgroupMeans::from_matrix(array![[3.0, -4.0]]).unwrap();
        assert_eq!(mom_coordinatewise(&single).unwrap().to_vec(), vec![3.0, -4.0]);
    }

    #[test]
    fn sign_statistic_examples() {
        let m: SubgroupMeans<f64> = SubgroupMeans::from_matrix(array![[-1.0], [2.0], [3.0]]).unwrap();
        let b = sign_statistic(&m, array![0.0].view()).unwrap();
        assert!((b[0] - 1.0 / 3.0).abs() < 1e-15);
        let b = sign_statistic(&m, array![10.0].view()).unwrap();
        assert_eq!(b[0], -1.0);
        let one = SubgroupMeans::from_matrix(array![[2.0]]).unwrap();
        assert_eq!(sign_statistic(&one, array![2.0].view()).unwrap()[0], 0.0);
        assert!(sign_statistic(&m, array![0.0, 1.0].view()).is_err());
    }
}
