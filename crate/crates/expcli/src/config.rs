//! Experiment configuration, read from TOML.
//!
//! A config names the inlier distribution, the sparse mean, the adversary, the
//! estimators to compare and their hyperparameters, and at most one sweep axis.
//! Every section except `[data]` is optional and falls back to the defaults of
//! the practical setup (`alpha = 1e-5`, `eta = 0.05`, the practical subgroup
//! rule, 200 SubGM iterations inside the full pipeline and 600 on their own).
//!
//! ```toml
//! trials = 10
//! base_seed = 7
//! estimators = ["full", "stage1", "oracle"]
//!
//! [data]
//! d = 100
//! n = 600
//! k = 4
//! distribution = { family = "fisk", c = 3.1 }
//!
//! [contamination]
//! epsilon = 0.1
//! strategy = "constant_bias"
//!
//! [sweep]
//! axis = "epsilon"
//! values = [0.05, 0.1, 0.2, 0.3]
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sparse_mom::{
    DenseEstimator, EstimatorKind, FilterConfig, InlierDistribution, Iterations, SubgmConfig, SubgroupRule,
};

use crate::error::{CliError, CliResult};

pub const DEFAULT_VALUES: [f64; 4] = [10.0, -5.0, -4.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub estimators: Vec<EstimatorName>,
    pub data: DataConfig,
    #[serde(default)]
    pub contamination: ContaminationConfig,
    #[serde(default)]
    pub subgm: SubgmSection,
    #[serde(default)]
    pub mom: MomSection,
    #[serde(default)]
    pub stage2: Stage2Section,
    #[serde(default)]
    pub convex: ConvexSection,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub bench: BenchSection,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    Stage1,
    Full,
    CoordMom,
    Convex,
    Oracle,
}

impl EstimatorName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Stage1 => "stage1",
            Self::Full => "full",
            Self::CoordMom => "coord_mom",
            Self::Convex => "convex",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub d: usize,
    /// Fixed sample size; exactly one of `n` and `n_per_k` must be given.
    #[serde(default)]
    pub n: Option<usize>,
    /// Sample size proportional to the sparsity, `n = n_per_k * k`.
    #[serde(default)]
    pub n_per_k: Option<usize>,
    pub k: usize,
    /// Nonzero values, cycled to length `k` and placed on coordinates `0..k`.
    #[serde(default = "default_values")]
    pub values: Vec<f64>,
    pub distribution: InlierDistribution,
}

fn default_values() -> Vec<f64> {
    DEFAULT_VALUES.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    None,
    ConstantBias,
    HeavyTail,
    PointMass,
    /// Point mass at `sigma / sqrt(epsilon)` on one coordinate.
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationConfig {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyName,
    /// Constant-bias shift `c`: outliers sit at `mu + c * 1`.
    #[serde(default = "default_bias")]
    pub bias: f64,
    #[serde(default = "default_location")]
    pub location: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Point-mass value, broadcast to every coordinate when it has one entry.
    #[serde(default)]
    pub value: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub index: usize,
}

fn default_strategy() -> StrategyName {
    StrategyName::ConstantBias
}
fn default_bias() -> f64 {
    2.0
}
fn default_location() -> f64 {
    20.0
}
fn default_scale() -> f64 {
    50f64.sqrt()
}
fn default_sigma() -> f64 {
    1.0
}

impl Default for ContaminationConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            strategy: default_strategy(),
            bias: default_bias(),
            location: default_location(),
            scale: default_scale(),
            value: Vec::new(),
            sigma: default_sigma(),
            index: 0,
        }
    }
}

/// An iteration count or the word `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IterationSetting {
    Count(usize),
    Word(AutoWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoWord {
    Auto,
}

impl IterationSetting {
    pub fn resolve(self) -> Iterations {
        match self {
            Self::Count(t) => Iterations::Fixed(t),
            Self::Word(AutoWord::Auto) => Iterations::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgmSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// SubGM iterations inside the full pipeline.
    #[serde(default = "default_full_iterations")]
    pub full_iterations: IterationSetting,
    /// SubGM iterations when stage 1 is the whole estimator, and for traces.
    #[serde(default = "default_stage1_iterations")]
    pub stage1_iterations: IterationSetting,
    #[serde(default = "default_multiplier")]
    pub threshold_multiplier: f64,
}

fn default_alpha() -> f64 {
    1e-5
}
fn default_eta() -> f64 {
    0.05
}
fn default_full_iterations() -> IterationSetting {
    IterationSetting::Count(200)
}
fn default_stage1_iterations() -> IterationSetting {
    IterationSetting::Count(600)
}
fn default_multiplier() -> f64 {
    1.0
}

impl Default for SubgmSection {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            eta: default_eta(),
            full_iterations: default_full_iterations(),
            stage1_iterations: default_stage1_iterations(),
            threshold_multiplier: default_multiplier(),
        }
    }
}

impl SubgmSection {
    fn config(&self, iterations: IterationSetting) -> SubgmConfig {
        let mut cfg = SubgmConfig::new(self.alpha, self.eta, iterations.resolve());
        cfg.support_threshold_multiplier = self.threshold_multiplier;
        cfg
    }

    pub fn full_config(&self) -> SubgmConfig {
        self.config(self.full_iterations)
    }

    pub fn stage1_config(&self) -> SubgmConfig {
        self.config(self.stage1_iterations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomSection {
    #[serde(default = "default_rule")]
    pub rule: SubgroupRule,
}

fn default_rule() -> SubgroupRule {
    SubgroupRule::Practical
}

impl Default for MomSection {
    fn default() -> Self {
        Self { rule: default_rule() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Kind {
    Filter,
    CoordMom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage2Section {
    #[serde(default = "default_stage2")]
    pub kind: Stage2Kind,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub score_quantile: Option<f64>,
    #[serde(default = "default_threshold_constant")]
    pub threshold_constant: f64,
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default = "default_power_iterations")]
    pub power_iterations: usize,
    /// Subgroup rule of the coordinate-wise MoM variant; defaults to `[mom] rule`.
    #[serde(default)]
    pub rule: Option<SubgroupRule>,
}

fn default_stage2() -> Stage2Kind {
    Stage2Kind::Filter
}
fn default_max_rounds() -> usize {
    FilterConfig::default().max_rounds
}
fn default_threshold_constant() -> f64 {
    FilterConfig::default().threshold_constant
}
fn default_power_iterations() -> usize {
    FilterConfig::default().power_iterations
}

impl Default for Stage2Section {
    fn default() -> Self {
        Self {
            kind: default_stage2(),
            max_rounds: default_max_rounds(),
            score_quantile: None,
            threshold_constant: default_threshold_constant(),
            sigma2: None,
            power_iterations: default_power_iterations(),
            rule: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexSection {
    /// Defaults to `[subgm] eta`.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_convex_iterations")]
    pub iterations: usize,
}

fn default_convex_iterations() -> usize {
    600
}

impl Default for ConvexSection {
    fn default() -> Self {
        Self {
            eta: None,
            iterations: default_convex_iterations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    None,
    Epsilon,
    K,
    TailParam,
    N,
    D,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Epsilon => "epsilon",
            Self::K => "k",
            Self::TailParam => "tail_param",
            Self::N => "n",
            Self::D => "d",
        }
    }

    fn is_integer(&self) -> bool {
        matches!(self, Self::K | Self::N | Self::D)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_axis")]
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
}

fn default_axis() -> SweepAxis {
    SweepAxis::None
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::None,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    /// Coordinates to record; defaults to the support of the true mean.
    #[serde(default)]
    pub coordinates: Option<Vec<usize>>,
    #[serde(default = "one")]
    pub every: usize,
    /// Which trial's data to trace.
    #[serde(default)]
    pub trial: usize,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            coordinates: None,
            every: 1,
            trial: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    #[serde(default = "default_bench_d")]
    pub d_values: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_bench_d() -> Vec<usize> {
    vec![500, 1000, 2000]
}
fn default_repeats() -> usize {
    3
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            d_values: default_bench_d(),
            repeats: default_repeats(),
        }
    }
}

/// One concrete point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub value: Option<f64>,
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub distribution: InlierDistribution,
}

impl ExperimentConfig {
    pub fn sweep_values(&self) -> Vec<Option<f64>> {
        match self.sweep.axis {
            SweepAxis::None => vec![None],
            _ => self.sweep.values.iter().map(|&v| Some(v)).collect(),
        }
    }

    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        self.sweep_values()
            .into_iter()
            .enumerate()
            .map(|(index, value)| self.point(index, value))
            .collect()
    }

    fn point(&self, index: usize, value: Option<f64>) -> SweepPoint {
        let mut p = SweepPoint {
            index,
            value,
            d: self.data.d,
            n: 0,
            k: self.data.k,
            epsilon: self.contamination.epsilon,
            distribution: self.data.distribution,
        };
        if let Some(v) = value {
            match self.sweep.axis {
                SweepAxis::None => {}
                SweepAxis::Epsilon => p.epsilon = v,
                SweepAxis::K => p.k = v as usize,
                SweepAxis::TailParam => p.distribution = p.distribution.with_parameter(v),
                SweepAxis::N => p.n = v as usize,
                SweepAxis::D => p.d = v as usize,
            }
        }
        if p.n == 0 {
            p.n = match (self.data.n, self.data.n_per_k) {
                (Some(n), _) => n,
                (None, Some(per)) => per * p.k,
                (None, None) => 0,
            };
        }
        p
    }

    pub fn planned_runs(&self) -> usize {
        self.sweep_values().len() * self.trials * self.estimators.len()
    }

    pub fn dense_estimator(&self) -> DenseEstimator {
        let s = &self.stage2;
        match s.kind {
            Stage2Kind::Filter => DenseEstimator::IterativeFilter(FilterConfig {
                max_rounds: s.max_rounds,
                score_quantile: s.score_quantile,
                threshold_constant: s.threshold_constant,
                sigma2: s.sigma2,
                power_iterations: s.power_iterations,
            }),
            Stage2Kind::CoordMom => DenseEstimator::CoordMom(s.rule.unwrap_or(self.mom.rule)),
        }
    }

    pub fn convex_eta(&self) -> f64 {
        self.convex.eta.unwrap_or(self.subgm.eta)
    }

    /// The core estimator and the SubGM settings it runs with.
    pub fn estimator(&self, name: EstimatorName) -> (EstimatorKind, SubgmConfig) {
        match name {
            EstimatorName::Stage1 => (EstimatorKind::Stage1Only, self.subgm.stage1_config()),
            EstimatorName::Full => (EstimatorKind::Full(self.dense_estimator()), self.subgm.full_config()),
            EstimatorName::CoordMom => (EstimatorKind::CoordMomBaseline(self.mom.rule), self.subgm.stage1_config()),
            EstimatorName::Convex => (
                EstimatorKind::ConvexBaseline {
                    eta: self.convex_eta(),
                    iterations: self.convex.iterations,
                },
                self.subgm.stage1_config(),
            ),
            EstimatorName::Oracle => (EstimatorKind::Oracle, self.subgm.stage1_config()),
        }
    }

    /// Checks everything the type system does not; errors name the offending key.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |key: &str, msg: String| Err(CliError::Config(format!("`{key}`: {msg}")));
        if self.estimators.is_empty() {
            return bad("estimators", "the estimator list is empty".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.estimators {
            if !seen.insert(*e) {
                return bad("estimators", format!("`{}` is listed twice", e.as_str()));
            }
        }
        if self.trials == 0 {
            return bad("trials", "need at least one trial".into());
        }
        if self.data.values.is_empty() {
            return bad("data.values", "need at least one nonzero value".into());
        }
        if let Some(v) = self.data.values.iter().find(|v| **v == 0.0 || !v.is_finite()) {
            return bad("data.values", format!("values must be finite and nonzero, got {v}"));
        }
        match (self.data.n, self.data.n_per_k) {
            (Some(_), Some(_)) => return bad("data.n", "give either `n` or `n_per_k`, not both".into()),
            (None, None) if self.sweep.axis != SweepAxis::N => {
                return bad("data.n", "missing; give `n` or `n_per_k`".into())
            }
            _ => {}
        }
        if let Err(e) = self.data.distribution.validate() {
            return bad("data.distribution", e.to_string());
        }
        let c = &self.contamination;
        if !(0.0..0.5).contains(&c.epsilon) {
            return bad("contamination.epsilon", format!("must lie in [0, 0.5), got {}", c.epsilon));
        }
        match c.strategy {
            StrategyName::HeavyTail if !(c.scale > 0.0 && c.scale.is_finite()) => {
                return bad("contamination.scale", format!("must be positive, got {}", c.scale));
            }
            StrategyName::PointMass if c.value.is_empty() => {
                return bad("contamination.value", "point mass needs a value".into());
            }
            StrategyName::LowerBound if !(c.sigma > 0.0) => {
                return bad("contamination.sigma", format!("must be positive, got {}", c.sigma));
            }
            _ => {}
        }
        for (key, cfg) in [
            ("subgm", self.subgm.full_config()),
            ("subgm", self.subgm.stage1_config()),
        ] {
            if let Err(e) = cfg.validate() {
                return bad(key, e.to_string());
            }
        }
        if !(self.convex_eta() > 0.0) {
            return bad("convex.eta", "must be positive".into());
        }
        if let DenseEstimator::IterativeFilter(f) = self.dense_estimator() {
            if let Err(e) = f.validate() {
                return bad("stage2", e.to_string());
            }
        }
        if self.sweep.axis != SweepAxis::None && self.sweep.values.is_empty() {
            return bad("sweep.values", "a sweep needs at least one value".into());
        }
        if self.sweep.axis == SweepAxis::None && !self.sweep.values.is_empty() {
            return bad("sweep.values", "values given without a sweep axis".into());
        }
        if self.sweep.axis.is_integer() {
            if let Some(v) = self.sweep.values.iter().find(|v| !(v.fract() == 0.0 && **v >= 1.0)) {
                return bad("sweep.values", format!("{} values must be positive integers, got {v}", self.sweep.axis.as_str()));
            }
        }
        for p in self.sweep_points() {
            let at = match p.value {
                Some(v) => format!(" at sweep value {v}"),
                None => String::new(),
            };
            if p.d == 0 {
                return bad("data.d", format!("must be positive{at}"));
            }
            if p.k > p.d {
                return bad("data.k", format!("k={} exceeds d={}{at}", p.k, p.d));
            }
            if p.n == 0 {
                return bad("data.n", format!("must be positive{at}"));
            }
            if !(0.0..0.5).contains(&p.epsilon) {
                return bad("sweep.values", format!("epsilon {} outside [0, 0.5)", p.epsilon));
            }
            if let Err(e) = p.distribution.validate() {
                return bad("sweep.values", format!("{e}{at}"));
            }
            if c.strategy == StrategyName::PointMass && c.value.len() != 1 && c.value.len() != p.d {
                return bad(
                    "contamination.value",
                    format!("has {} entries but d={}{at}", c.value.len(), p.d),
                );
            }
            if c.strategy == StrategyName::LowerBound && c.index >= p.d {
                return bad("contamination.index", format!("{} out of range for d={}{at}", c.index, p.d));
            }
        }
        if self.trace.every == 0 {
            return bad("trace.every", "stride must be positive".into());
        }
        if self.bench.repeats == 0 {
            return bad("bench.repeats", "need at least one repeat".into());
        }
        if self.bench.d_values.is_empty() || self.bench.d_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("bench.d_values", "must be a nonempty ascending list".into());
        }
        if self.bench.d_values[0] < self.data.k {
            return bad("bench.d_values", format!("smallest d is below k={}", self.data.k));
        }
        Ok(())
    }
}

/// Parses and validates a config. Syntax and type errors carry the line and key.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
estimators = ["full"]
[data]
d = 10
n = 50
k = 2
distribution = { family = "gaussian", variance = 1.0 }
"#;

    #[test]
    fn defaults_are_filled() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.subgm.alpha, 1e-5);
        assert_eq!(cfg.subgm.eta, 0.05);
        assert_eq!(cfg.mom.rule, SubgroupRule::Practical);
        assert_eq!(cfg.subgm.full_config().resolved_iterations(), 200);
        assert_eq!(cfg.subgm.stage1_config().resolved_iterations(), 600);
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.data.values, DEFAULT_VALUES.to_vec());
        assert_eq!(cfg.dense_estimator(), DenseEstimator::default());
    }

    #[test]
    fn planned_run_count() {
        let text = format!(
            "{}\n[sweep]\naxis = \"epsilon\"\nvalues = [0.05, 0.1]\n",
            MINIMAL
                .replace("[\"full\"]", "[\"full\", \"stage1\"]")
                .replace("estimators", "trials = 3\nestimators")
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.planned_runs(), 12);
    }

    #[test]
    fn empty_estimator_list_is_named() {
        let err = parse_config(&MINIMAL.replace("[\"full\"]", "[]")).unwrap_err();
        assert!(err.to_string().contains("estimators"), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config(&MINIMAL.replace("k = 2", "k = 2\nsparsity = 3")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sparsity") && msg.contains("line"), "{msg}");
        let err = parse_config(&MINIMAL.replace("variance = 1.0", "variance = 1.0, c = 2.0")).unwrap_err();
        assert!(err.to_string().contains('c'), "{err}");
    }

    #[test]
    fn type_mismatch_reports_key() {
        let err = parse_config(&MINIMAL.replace("d = 10", "d = \"ten\"")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line") && msg.contains('d'), "{msg}");
    }

    #[test]
    fn iteration_settings() {
        let cfg = parse_config(&format!("{MINIMAL}\n[subgm]\nfull_iterations = \"auto\"\nstage1_iterations = 50\n")).unwrap();
        assert_eq!(cfg.subgm.full_config().iterations, Iterations::Auto);
        assert_eq!(cfg.subgm.stage1_config().iterations, Iterations::Fixed(50));
        assert!(parse_config(&format!("{MINIMAL}\n[subgm]\nfull_iterations = \"often\"\n")).is_err());
    }

    #[test]
    fn sweep_points_follow_axis() {
        let text = MINIMAL.replace("n = 50", "n_per_k = 100");
        let cfg = parse_config(&format!("{text}\n[sweep]\naxis = \"k\"\nvalues = [2, 4]\n")).unwrap();
        let pts = cfg.sweep_points();
        assert_eq!((pts[0].k, pts[0].n), (2, 200));
        assert_eq!((pts[1].k, pts[1].n), (4, 400));
        let bad = format!("{text}\n[sweep]\naxis = \"k\"\nvalues = [2.5]\n");
        assert!(parse_config(&bad).is_err());
        let too_big = format!("{text}\n[sweep]\naxis = \"k\"\nvalues = [11]\n");
        assert!(parse_config(&too_big).unwrap_err().to_string().contains("data.k"));
    }

    #[test]
    fn invariant_violations() {
        assert!(parse_config(&MINIMAL.replace("[\"full\"]", "[\"full\", \"full\"]")).is_err());
        let err = parse_config(&MINIMAL.replace("estimators", "trials = 0\nestimators")).unwrap_err();
        assert!(err.to_string().contains("trials"), "{err}");
        assert!(parse_config(&format!("{MINIMAL}\n[contamination]\nepsilon = 0.5\n")).is_err());
        assert!(parse_config(&format!("{MINIMAL}\n[sweep]\naxis = \"epsilon\"\n")).is_err());
        assert!(parse_config(&MINIMAL.replace("variance = 1.0", "variance = -1.0")).is_err());
    }
}
