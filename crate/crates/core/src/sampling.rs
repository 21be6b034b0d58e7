//! Seeded heavy-tailed inlier generation around a sparse mean.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::distr::{Distribution, Open01};
use rand::Rng;
use rand_distr::{LogNormal, Normal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{param, shape, Result};
use crate::scalar::Scalar;
use crate::seed;

/// A `k`-sparse mean in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMean<T> {
    dimension: usize,
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseMean<T> {
    pub fn new(dimension: usize, mut entries: Vec<(usize, T)>) -> Result<Self> {
        if dimension == 0 {
            return Err(param("mean dimension must be positive"));
        }
        entries.sort_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(param(format!("duplicate mean index {}", w[0].0)));
            }
        }
        for &(i, v) in &entries {
            if i >= dimension {
                return Err(param(format!("mean index {i} out of range for d={dimension}")));
            }
            if v == T::zero() || !v.is_finite() {
                return Err(param(format!("mean entry at {i} must be finite and nonzero")));
            }
        }
        Ok(Self { dimension, entries })
    }

    /// Places `values` on coordinates `0..values.len()`.
    pub fn leading(dimension: usize, values: &[T]) -> Result<Self> {
        Self::new(dimension, values.iter().copied().enumerate().collect())
    }

    pub fn zero(dimension: usize) -> Result<Self> {
        Self::new(dimension, Vec::new())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn sparsity(&self) -> usize {
        self.entries.len()
    }

    pub fn support(&self) -> BTreeSet<usize> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }

    /// Largest magnitude among the nonzeros; zero for the empty mean.
    pub fn max_abs(&self) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |m, &(_, v)| m.max(v.abs()))
    }

    /// Smallest nonzero magnitude, if any.
    pub fn min_abs(&self) -> Option<T> {
        self.entries
            .iter()
            .map(|&(_, v)| v.abs())
            .reduce(|a, b| a.min(b))
    }

    pub fn negated(&self) -> Self {
        Self {
            dimension: self.dimension,
            entries: self.entries.iter().map(|&(i, v)| (i, -v)).collect(),
        }
    }
}

/// Dense expansion of a sparse mean.
pub fn dense_mean<T: Scalar>(mean: &SparseMean<T>) -> Array1<T> {
    let mut out = Array1::zeros(mean.dimension);
    for &(i, v) in &mean.entries {
        out[i] = v;
    }
    out
}

/// Zero-centred noise families. All except `Gaussian` and `StudentT` are
/// symmetrized by an independent fair sign on the magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InlierDistribution {
    /// Log-logistic magnitude with shape `c`.
    Fisk { c: f64 },
    /// Pareto magnitude with tail index `b` and unit scale.
    ParetoSymmetric { b: f64 },
    StudentT { nu: f64 },
    /// Lognormal magnitude with zero log-mean, scaled so that `E[X^2] = variance`.
    Lognormal { variance: f64 },
    Gaussian { variance: f64 },
}

impl InlierDistribution {
    pub fn validate(&self) -> Result<()> {
        let (name, p) = self.parameter();
        if !(p.is_finite() && p > 0.0) {
            return Err(param(format!("{name} parameter must be positive, got {p}")));
        }
        if let Self::Lognormal { variance } = self {
            if *variance <= 1.0 {
                return Err(param(format!(
                    "symmetric lognormal with zero log-mean needs variance > 1, got {variance}"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        self.parameter().0
    }

    /// The family's single shape/scale parameter.
    pub fn parameter(&self) -> (&'static str, f64) {
        match *self {
            Self::Fisk { c } => ("fisk", c),
            Self::ParetoSymmetric { b } => ("pareto", b),
            Self::StudentT { nu } => ("student_t", nu),
            Self::Lognormal { variance } => ("lognormal", variance),
            Self::Gaussian { variance } => ("gaussian", variance),
        }
    }

    /// Same family with its parameter replaced.
    pub fn with_parameter(&self, p: f64) -> Self {
        match *self {
            Self::Fisk { .. } => Self::Fisk { c: p },
            Self::ParetoSymmetric { .. } => Self::ParetoSymmetric { b: p },
            Self::StudentT { .. } => Self::StudentT { nu: p },
            Self::Lognormal { .. } => Self::Lognormal { variance: p },
            Self::Gaussian { .. } => Self::Gaussian { variance: p },
        }
    }

    fn log_sigma(variance: f64) -> f64 {
        (variance.ln() / 2.0).sqrt()
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        self.validate()?;
        let a = x.abs();
        let p = match *self {
            Self::Fisk { c } => c * a.powf(c - 1.0) / (2.0 * (1.0 + a.powf(c)).powi(2)),
            Self::ParetoSymmetric { b } => {
                if a < 1.0 {
                    0.0
                } else {
                    b / (2.0 * a.powf(b + 1.0))
                }
            }
            Self::StudentT { nu } => {
                let log_norm = ln_gamma((nu + 1.0) / 2.0)
                    - ln_gamma(nu / 2.0)
                    - 0.5 * (nu * PI).ln();
                (log_norm - (nu + 1.0) / 2.0 * (1.0 + x * x / nu).ln()).exp()
            }
            Self::Lognormal { variance } => {
                if a == 0.0 {
                    0.0
                } else {
                    let s = Self::log_sigma(variance);
                    let z = a.ln() / s;
                    0.5 * (-0.5 * z * z).exp() / (a * s * (2.0 * PI).sqrt())
                }
            }
            Self::Gaussian { variance } => {
                (-0.5 * x * x / variance).exp() / (2.0 * PI * variance).sqrt()
            }
        };
        Ok(p)
    }

    /// Second moment about zero, when finite.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            Self::Fisk { c } if c > 2.0 => {
                let r = 2.0 * PI / c;
                Some(r / r.sin())
            }
            Self::ParetoSymmetric { b } if b > 2.0 => Some(b / (b - 2.0)),
            Self::StudentT { nu } if nu > 2.0 => Some(nu / (nu - 2.0)),
            Self::Lognormal { variance } | Self::Gaussian { variance } => Some(variance),
            _ => None,
        }
    }

    /// `E|X|^3`, when finite.
    pub fn third_abs_moment(&self) -> Option<f64> {
        match *self {
            Self::Fisk { c } if c > 3.0 => {
                let r = 3.0 * PI / c;
                Some(r / r.sin())
            }
            Self::ParetoSymmetric { b } if b > 3.0 => Some(b / (b - 3.0)),
            Self::StudentT { nu } if nu > 3.0 => {
                // E|T|^r = nu^{r/2} Γ((r+1)/2) Γ((nu-r)/2) / (√π Γ(nu/2)) at r = 3.
                let log = 1.5 * nu.ln() + ln_gamma((nu - 3.0) / 2.0)
                    - 0.5 * PI.ln()
                    - ln_gamma(nu / 2.0);
                Some(log.exp())
            }
            Self::Lognormal { variance } => {
                let s2 = variance.ln() / 2.0;
                Some((4.5 * s2).exp())
            }
            Self::Gaussian { variance } => Some(variance.powf(1.5) * 2.0 * (2.0 / PI).sqrt()),
            _ => None,
        }
    }

    fn sampler(&self) -> Result<NoiseSampler> {
        self.validate()?;
        Ok(match *self {
            Self::Fisk { c } => NoiseSampler::Fisk(1.0 / c),
            Self::ParetoSymmetric { b } => NoiseSampler::Pareto(-1.0 / b),
            Self::StudentT { nu } => {
                NoiseSampler::StudentT(StudentT::new(nu).map_err(|e| param(e.to_string()))?)
            }
            Self::Lognormal { variance } => NoiseSampler::Lognormal(
                LogNormal::new(0.0, Self::log_sigma(variance)).map_err(|e| param(e.to_string()))?,
            ),
            Self::Gaussian { variance } => NoiseSampler::Gaussian(
                Normal::new(0.0, variance.sqrt()).map_err(|e| param(e.to_string()))?,
            ),
        })
    }
}

enum NoiseSampler {
    Fisk(f64),
    Pareto(f64),
    StudentT(StudentT<f64>),
    Lognormal(LogNormal<f64>),
    Gaussian(Normal<f64>),
}

impl NoiseSampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let signed = |rng: &mut R, m: f64| if rng.random::<bool>() { m } else { -m };
        match self {
            // |X| = (U / (1 - U))^{1/c} inverts t^c / (1 + t^c).
            Self::Fisk(inv_c) => {
                let u: f64 = Open01.sample(rng);
                let m = (u / (1.0 - u)).powf(*inv_c);
                signed(rng, m)
            }
            Self::Pareto(neg_inv_b) => {
                let u: f64 = Open01.sample(rng);
                let m = u.powf(*neg_inv_b);
                signed(rng, m)
            }
            Self::StudentT(d) => d.sample(rng),
            Self::Lognormal(d) => {
                let m = d.sample(rng);
                signed(rng, m)
            }
            Self::Gaussian(d) => d.sample(rng),
        }
    }
}

/// Free-function form of [`InlierDistribution::density`].
pub fn density(dist: &InlierDistribution, x: f64) -> Result<f64> {
    dist.density(x)
}

/// An `n x d` observation matrix with the set of rows an adversary replaced.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples<T> {
    data: Array2<T>,
    corrupted: BTreeSet<usize>,
}

impl<T: Scalar> Samples<T> {
    pub fn new(data: Array2<T>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(shape(format!(
                "sample matrix must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self {
            data,
            corrupted: BTreeSet::new(),
        })
    }

    pub fn with_corrupted(data: Array2<T>, corrupted: BTreeSet<usize>) -> Result<Self> {
        if let Some(&r) = corrupted.iter().next_back() {
            if r >= data.nrows() {
                return Err(shape(format!("corrupted row {r} out of range")));
            }
        }
        Ok(Self { data, corrupted })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(shape("ragged rows"));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| shape(e.to_string()))?;
        Self::new(data)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn corrupted_rows(&self) -> &BTreeSet<usize> {
        &self.corrupted
    }

    pub fn into_parts(self) -> (Array2<T>, BTreeSet<usize>) {
        (self.data, self.corrupted)
    }

    /// Rows not marked as corrupted, in their original order.
    pub fn clean(&self) -> Result<Self> {
        let keep: Vec<usize> = (0..self.rows())
            .filter(|r| !self.corrupted.contains(r))
            .collect();
        if keep.is_empty() {
            return Err(shape("no clean rows"));
        }
        Self::new(self.data.select(ndarray::Axis(0), &keep))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.mapv(f),
            corrupted: self.corrupted.clone(),
        }
    }
}

/// Draws `n` i.i.d. rows of `dist` noise shifted by the dense expansion of `mean`.
///
/// Cell `(i, j)` is drawn from its own generator keyed by `(seed, i, j)`, so the
/// output does not depend on how rows are scheduled across threads.
pub fn sample_inliers<T: Scalar>(
    dist: &InlierDistribution,
    mean: &SparseMean<T>,
    n: usize,
    seed: u64,
) -> Result<Samples<T>> {
    if n == 0 {
        return Err(param("sample count must be positive"));
    }
    let sampler = dist.sampler()?;
    let d = mean.dimension();
    let center = dense_mean(mean);
    let mut flat = vec![T::zero(); n * d];
    flat.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        for (j, x) in row.iter_mut().enumerate() {
            let mut rng = seed::cell_rng(seed, i, j);
            *x = T::of(sampler.draw(&mut rng)) + center[j];
        }
    });
    let data = Array2::from_shape_vec((n, d), flat).map_err(|e| shape(e.to_string()))?;
    Samples::new(data)
}
