use std::collections::BTreeMap;
use std::path::Path;
use std::sync::mpsc;
use std::time::Instant;

use ndarray::Array1;
use rayon::prelude::*;
use sparse_mom::pipeline::estimate_and_report;
use sparse_mom::{
    apply_contamination, convex_baseline_run, make_lower_bound_adversary, make_plan, run_estimator, sample_inliers,
    seed, subgm_run, subgroup_means, Contamination, EstimatorKind, Samples, SparseMean, Strategy, Trace, TraceSpec,
};

use crate::config::{EstimatorName, ExperimentConfig, StrategyName, SweepAxis, SweepPoint};
use crate::error::{CliError, CliResult};
use crate::output::{
    fmt_opt, CsvSink, Manifest, BENCH_FILE, BENCH_HEADER, MANIFEST_FILE, RESULTS_FILE, RESULTS_HEADER, TIMING_FILE,
    TIMING_HEADER, TRACE_FILE, TRACE_HEADER,
};

/// Seed of one trial. Every random draw of the trial is derived from it.
pub fn trial_seed(base_seed: u64, sweep_index: usize, trial: usize) -> u64 {
    seed::derive(base_seed, &[sweep_index as u64, trial as u64])
}

/// Seed handed to one estimator, keyed by its name so that adding or
/// reordering estimators leaves the others untouched.
pub fn estimator_seed(trial_seed: u64, name: EstimatorName) -> u64 {
    seed::derive(trial_seed, &[seed::label(name.as_str())])
}

pub fn true_mean(cfg: &ExperimentConfig, point: &SweepPoint) -> CliResult<SparseMean<f64>> {
    let values: Vec<f64> = cfg.data.values.iter().copied().cycle().take(point.k).collect();
    Ok(SparseMean::leading(point.d, &values)?)
}

fn contamination(cfg: &ExperimentConfig, point: &SweepPoint, truth: &SparseMean<f64>) -> CliResult<Contamination<f64>> {
    let c = &cfg.contamination;
    let strategy = match c.strategy {
        StrategyName::None => Strategy::None,
        StrategyName::ConstantBias => Strategy::constant_bias(truth, c.bias),
        StrategyName::HeavyTail => Strategy::HeavyTailOutliers {
            location: c.location,
            scale: c.scale,
        },
        StrategyName::PointMass => Strategy::PointMass(if c.value.len() == 1 {
            Array1::from_elem(point.d, c.value[0])
        } else {
            Array1::from(c.value.clone())
        }),
        StrategyName::LowerBound if point.epsilon > 0.0 => {
            return Ok(make_lower_bound_adversary(c.sigma, point.epsilon, c.index, point.d)?);
        }
        StrategyName::LowerBound => Strategy::None,
    };
    Ok(Contamination::new(point.epsilon, strategy)?)
}

/// The true mean and the contaminated samples of one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub truth: SparseMean<f64>,
    pub samples: Samples<f64>,
    pub seed: u64,
}

pub fn trial_data(cfg: &ExperimentConfig, point: &SweepPoint, trial: usize) -> CliResult<TrialData> {
    let seed = trial_seed(cfg.base_seed, point.index, trial);
    let truth = true_mean(cfg, point)?;
    let clean = sample_inliers(
        &point.distribution,
        &truth,
        point.n,
        seed::derive(seed, &[seed::label("inliers")]),
    )?;
    let spec = contamination(cfg, point, &truth)?;
    let samples = apply_contamination(&clean, &spec, seed::derive(seed, &[seed::label("contamination")]))?;
    Ok(TrialData { truth, samples, seed })
}

/// One estimator on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_axis: SweepAxis,
    pub sweep_index: usize,
    pub sweep_value: Option<f64>,
    pub estimator: EstimatorName,
    pub trial: usize,
    pub seed: u64,
    pub l2_error: f64,
    pub linf_error: f64,
    pub success_rate: f64,
    pub support_size: usize,
    pub wall_time_ms: f64,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.sweep_axis.as_str(),
            self.sweep_index,
            fmt_opt(self.sweep_value),
            self.estimator.as_str(),
            self.trial,
            self.seed,
            self.l2_error,
            self.linf_error,
            self.success_rate,
            self.support_size
        )
    }

    pub fn timing_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.sweep_index,
            self.estimator.as_str(),
            self.trial,
            self.wall_time_ms
        )
    }
}

/// Runs every configured estimator on one trial. Rerunning a trial with the
/// same config reproduces its rows exactly.
pub fn run_trial(cfg: &ExperimentConfig, point: &SweepPoint, trial: usize) -> CliResult<Vec<ResultRow>> {
    let data = trial_data(cfg, point, trial)?;
    cfg.estimators
        .iter()
        .map(|&name| {
            let (kind, subgm) = cfg.estimator(name);
            let seed = estimator_seed(data.seed, name);
            let report = estimate_and_report(
                &data.samples,
                &kind,
                cfg.mom.rule,
                &subgm,
                point.epsilon,
                seed,
                &data.truth,
            )?;
            Ok(ResultRow {
                sweep_axis: cfg.sweep.axis,
                sweep_index: point.index,
                sweep_value: point.value,
                estimator: name,
                trial,
                seed: data.seed,
                l2_error: report.metrics.l2_error,
                linf_error: report.metrics.linf_error,
                success_rate: report.metrics.success_rate,
                support_size: report.support.len(),
                wall_time_ms: report.wall_time.as_secs_f64() * 1e3,
            })
        })
        .collect()
}

pub fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    if threads == Some(0) {
        return Err(CliError::Config("thread count must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

struct Sinks {
    results: CsvSink,
    timing: CsvSink,
}

impl Sinks {
    fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            results: CsvSink::create(&dir.join(RESULTS_FILE), RESULTS_HEADER)?,
            timing: CsvSink::create(&dir.join(TIMING_FILE), TIMING_HEADER)?,
        })
    }

    fn write(&mut self, rows: &[ResultRow]) -> CliResult<()> {
        for r in rows {
            self.results.row(&r.csv_line())?;
            self.timing.row(&r.timing_line())?;
        }
        self.results.flush()?;
        self.timing.flush()
    }
}

/// Reorders one finished sweep point from trial-major to estimator-major.
fn canonical(per_trial: Vec<Vec<ResultRow>>) -> Vec<ResultRow> {
    let estimators = per_trial.first().map_or(0, Vec::len);
    let mut columns: Vec<Vec<ResultRow>> = (0..estimators).map(|_| Vec::with_capacity(per_trial.len())).collect();
    for rows in per_trial {
        for (e, row) in rows.into_iter().enumerate() {
            columns[e].push(row);
        }
    }
    columns.into_iter().flatten().collect()
}

/// Runs the whole grid on a pool of `threads` workers (all cores when `None`).
///
/// Rows come back, and are written to `out_dir/results.csv` as each sweep
/// point completes, in the order (sweep index, estimator, trial) whatever the
/// completion order. The file gets its end marker only if every trial succeeded.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    threads: Option<usize>,
) -> CliResult<Vec<ResultRow>> {
    cfg.validate()?;
    let pool = thread_pool(threads)?;
    let points = cfg.sweep_points();
    let trials = cfg.trials;
    let jobs: Vec<(usize, usize)> = points
        .iter()
        .flat_map(|p| (0..trials).map(move |t| (p.index, t)))
        .collect();
    let mut sinks = out_dir.map(Sinks::create).transpose()?;

    let (tx, rx) = mpsc::channel::<(usize, usize, CliResult<Vec<ResultRow>>)>();
    let mut all = Vec::with_capacity(cfg.planned_runs());
    let mut failure: Option<CliError> = None;

    std::thread::scope(|scope| {
        let points = &points;
        let jobs = &jobs;
        scope.spawn(move || {
            pool.install(|| {
                jobs.par_iter().for_each_with(tx, |tx, &(s, t)| {
                    let _ = tx.send((s, t, run_trial(cfg, &points[s], t)));
                });
            });
        });

        let mut pending: BTreeMap<usize, Vec<Option<Vec<ResultRow>>>> = BTreeMap::new();
        let mut next = 0;
        for (s, t, result) in rx {
            match result {
                Ok(rows) => pending.entry(s).or_insert_with(|| vec![None; trials])[t] = Some(rows),
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
            while pending.get(&next).is_some_and(|slots| slots.iter().all(Option::is_some)) {
                let slots = pending.remove(&next).expect("checked above");
                let rows = canonical(slots.into_iter().flatten().collect());
                if failure.is_none() {
                    if let Some(s) = sinks.as_mut() {
                        if let Err(e) = s.write(&rows) {
                            failure = Some(e);
                        }
                    }
                }
                all.extend(rows);
                next += 1;
            }
        }
    });

    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(s) = sinks {
        s.results.finish_with_marker()?;
        s.timing.finish()?;
    }
    if let Some(dir) = out_dir {
        Manifest::new("run", cfg, threads, vec![RESULTS_FILE, TIMING_FILE, MANIFEST_FILE]).write(dir)?;
    }
    Ok(all)
}

/// Trajectories of SubGM and the convex baseline on the same subgroup means.
#[derive(Debug, Clone)]
pub struct TraceRun {
    pub truth: SparseMean<f64>,
    pub ncvx: Trace<f64>,
    pub cvx: Trace<f64>,
    pub ncvx_estimate: Array1<f64>,
    pub cvx_estimate: Array1<f64>,
}

impl TraceRun {
    pub fn csv_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for (method, trace) in [("ncvx", &self.ncvx), ("cvx", &self.cvx)] {
            for (r, t) in trace.times.iter().enumerate() {
                for (c, coord) in trace.coordinates.iter().enumerate() {
                    lines.push(format!(
                        "{method},{t},{coord},{},{}",
                        trace.values[[r, c]],
                        trace.betas[[r, c]]
                    ));
                }
            }
        }
        lines
    }
}

fn single_point(cfg: &ExperimentConfig, what: &str) -> CliResult<SweepPoint> {
    let mut points = cfg.sweep_points();
    if points.len() != 1 {
        return Err(CliError::Config(format!(
            "`sweep`: {what} needs a single sweep point, the config has {}",
            points.len()
        )));
    }
    Ok(points.remove(0))
}

/// Traces one trial. `coordinates` defaults to the support of the true mean.
pub fn trace_trial(cfg: &ExperimentConfig, trial: usize, coordinates: Option<&[usize]>) -> CliResult<TraceRun> {
    let point = single_point(cfg, "a trace")?;
    let coordinates = match coordinates {
        Some(cs) => cs.to_vec(),
        None => true_mean(cfg, &point)?.support().into_iter().collect(),
    };
    if let Some(bad) = coordinates.iter().find(|&&c| c >= point.d) {
        return Err(CliError::Config(format!(
            "`trace.coordinates`: coordinate {bad} out of range for d={}",
            point.d
        )));
    }
    let data = trial_data(cfg, &point, trial)?;
    let plan = make_plan(point.n, cfg.mom.rule, point.epsilon)?;
    let means = subgroup_means(&data.samples, &plan)?;
    let spec = TraceSpec::every(cfg.trace.every, Some(coordinates));

    let mut subgm = cfg.subgm.stage1_config();
    subgm.trace = spec.clone();
    let (iterate, ncvx) = subgm_run(&means, &subgm)?;
    let (cvx_estimate, cvx) = convex_baseline_run(&means, cfg.convex_eta(), cfg.convex.iterations, &spec)?;
    Ok(TraceRun {
        truth: data.truth,
        ncvx,
        cvx,
        ncvx_estimate: iterate.estimate(),
        cvx_estimate,
    })
}

/// Traces the trial and coordinates named in `[trace]` and writes `trace.csv`.
pub fn run_trace(cfg: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> CliResult<TraceRun> {
    cfg.validate()?;
    let pool = thread_pool(threads)?;
    let run = pool.install(|| trace_trial(cfg, cfg.trace.trial, cfg.trace.coordinates.as_deref()))?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut sink = CsvSink::create(&out_dir.join(TRACE_FILE), TRACE_HEADER)?;
    for line in run.csv_lines() {
        sink.row(&line)?;
    }
    sink.finish()?;
    Manifest::new("trace", cfg, threads, vec![TRACE_FILE, MANIFEST_FILE]).write(out_dir)?;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub d: usize,
    pub estimator: EstimatorName,
    pub n: usize,
    pub iterations: usize,
    pub repeats: usize,
    /// Fastest of the repeats.
    pub wall_time_ms: f64,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.d,
            self.estimator.as_str(),
            self.n,
            self.iterations,
            self.repeats,
            self.wall_time_ms
        )
    }
}

/// Times stage 1 alone and the full pipeline at each dimension, keeping `n`,
/// the iteration counts and the data distribution fixed. Data generation is
/// not timed.
pub fn run_bench(cfg: &ExperimentConfig, d_values: &[usize]) -> CliResult<Vec<BenchRow>> {
    if d_values.is_empty() || d_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("`bench.d_values`: must be a nonempty ascending list".into()));
    }
    let base = single_point(cfg, "a benchmark")?;
    let mut rows = Vec::new();
    for &d in d_values {
        if d < base.k {
            return Err(CliError::Config(format!("`bench.d_values`: d={d} is below k={}", base.k)));
        }
        let point = SweepPoint { d, ..base.clone() };
        let data = trial_data(cfg, &point, 0)?;
        for name in [EstimatorName::Stage1, EstimatorName::Full] {
            let (kind, subgm) = cfg.estimator(name);
            let seed = estimator_seed(data.seed, name);
            let mut best = f64::INFINITY;
            for _ in 0..cfg.bench.repeats {
                let started = Instant::now();
                let out = run_estimator(&data.samples, &kind, cfg.mom.rule, &subgm, point.epsilon, seed)?;
                best = best.min(started.elapsed().as_secs_f64() * 1e3);
                std::hint::black_box(out);
            }
            rows.push(BenchRow {
                d,
                estimator: name,
                n: point.n,
                iterations: match kind {
                    EstimatorKind::ConvexBaseline { iterations, .. } => iterations,
                    _ => subgm.resolved_iterations(),
                },
                repeats: cfg.bench.repeats,
                wall_time_ms: best,
            });
        }
    }
    Ok(rows)
}

/// Runs the benchmark over `[bench] d_values` and writes `bench.csv`.
pub fn run_bench_to(cfg: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> CliResult<Vec<BenchRow>> {
    cfg.validate()?;
    let pool = thread_pool(threads)?;
    let rows = pool.install(|| run_bench(cfg, &cfg.bench.d_values))?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut sink = CsvSink::create(&out_dir.join(BENCH_FILE), BENCH_HEADER)?;
    for r in &rows {
        sink.row(&r.csv_line())?;
    }
    sink.finish()?;
    Manifest::new("bench", cfg, threads, vec![BENCH_FILE, MANIFEST_FILE]).write(out_dir)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const SMALL: &str = r#"
trials = 3
base_seed = 11
estimators = ["full", "stage1", "oracle"]
[data]
d = 20
n = 200
k = 2
values = [4.0, -3.0]
distribution = { family = "gaussian", variance = 1.0 }
[contamination]
epsilon = 0.1
[subgm]
stage1_iterations = 300
[sweep]
axis = "epsilon"
values = [0.0, 0.1]
"#;

    #[test]
    fn rows_are_canonically_ordered() {
        let cfg = parse_config(SMALL).unwrap();
        let rows = run_experiment(&cfg, None, Some(2)).unwrap();
        assert_eq!(rows.len(), cfg.planned_runs());
        let keys: Vec<(usize, usize, usize)> = rows
            .iter()
            .map(|r| {
                let e = cfg.estimators.iter().position(|&x| x == r.estimator).unwrap();
                (r.sweep_index, e, r.trial)
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn single_trial_reruns_match() {
        let cfg = parse_config(SMALL).unwrap();
        let rows = run_experiment(&cfg, None, Some(3)).unwrap();
        let point = &cfg.sweep_points()[1];
        let again = run_trial(&cfg, point, 2).unwrap();
        for row in again {
            let original = rows
                .iter()
                .find(|r| r.sweep_index == 1 && r.trial == 2 && r.estimator == row.estimator)
                .unwrap();
            assert_eq!(original.csv_line(), row.csv_line());
        }
    }

    #[test]
    fn adding_an_estimator_keeps_other_rows() {
        let cfg = parse_config(SMALL).unwrap();
        let wider = parse_config(&SMALL.replace("\"oracle\"]", "\"oracle\", \"coord_mom\"]")).unwrap();
        let a = run_experiment(&cfg, None, Some(1)).unwrap();
        let b = run_experiment(&wider, None, Some(1)).unwrap();
        for row in &a {
            let same = b
                .iter()
                .find(|r| (r.sweep_index, r.estimator, r.trial) == (row.sweep_index, row.estimator, row.trial))
                .unwrap();
            assert_eq!(same.csv_line(), row.csv_line());
        }
    }

    #[test]
    fn trace_at_zero_iterations() {
        let text = SMALL
            .replace("stage1_iterations = 300", "stage1_iterations = 0")
            .replace("[sweep]\naxis = \"epsilon\"\nvalues = [0.0, 0.1]\n", "[convex]\niterations = 0\n");
        let cfg = parse_config(&text).unwrap();
        let run = trace_trial(&cfg, 0, Some(&[0, 5])).unwrap();
        assert_eq!(run.ncvx.times, vec![0]);
        assert!(run.ncvx.values.iter().all(|&v| v == 0.0));
        assert_eq!(run.csv_lines().len(), 4);
        assert!(matches!(trace_trial(&cfg, 0, Some(&[20])), Err(CliError::Config(_))));
        assert!(matches!(trace_trial(&parse_config(SMALL).unwrap(), 0, None), Err(CliError::Config(_))));
    }

    #[test]
    fn convex_first_step_is_eta_beta() {
        let text = SMALL.replace("[sweep]\naxis = \"epsilon\"\nvalues = [0.0, 0.1]\n", "[convex]\niterations = 3\neta = 0.25\n");
        let cfg = parse_config(&text).unwrap();
        let run = trace_trial(&cfg, 1, Some(&[0, 1, 7])).unwrap();
        for c in 0..3 {
            assert_eq!(run.cvx.values[[0, c]], 0.0);
            assert_eq!(run.cvx.values[[1, c]], 0.25 * run.cvx.betas[[0, c]]);
        }
    }

    #[test]
    fn bench_rows_per_dimension() {
        let text = SMALL.replace("[sweep]\naxis = \"epsilon\"\nvalues = [0.0, 0.1]\n", "[bench]\nrepeats = 1\n");
        let cfg = parse_config(&text).unwrap();
        let rows = run_bench(&cfg, &[10]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.d == 10 && r.wall_time_ms >= 0.0));
        assert!(run_bench(&cfg, &[20, 10]).is_err());
    }
}
