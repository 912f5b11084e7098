//! Config-driven experiment runner: grid points × seeds, per-iteration
//! checkpoints, and CSV metrics.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{CostParams, EstimatorMode};
use crate::encoding::InputEncoding;
use crate::ensemble::{BootstrapEnsemble, EnsembleConfig, TrainConfig};
use crate::error::{ensure, Error, Result};
use crate::nn::{AdamConfig, Arch};
use crate::profile::Profile;
use crate::rl::{
    run_iteration, Dataset, IterationMetrics, LoopSetup, RolloutLog, ROLLOUT_LOG_FORMAT_VERSION,
};

pub const JOB_CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Crash speeds come from `speed·(cos θ, sin θ)` and can sit an ulp below the
/// nominal grid speed.
pub const SPEED_TOLERANCE: f64 = 1e-9;

pub const METRICS_COLUMNS: [&str; 12] = [
    "profile",
    "estimator",
    "lambda",
    "lambda_coll",
    "seed",
    "iteration",
    "rollouts",
    "crashes",
    "crash_speeds",
    "task_speed",
    "success_flags",
    "dataset_size",
];
pub const CRASH_SUMMARY_COLUMNS: [&str; 6] =
    ["estimator", "lambda", "lambda_coll", "threshold", "mean_crashes", "seeds"];
pub const TASK_CURVE_COLUMNS: [&str; 9] = [
    "estimator",
    "lambda",
    "lambda_coll",
    "iteration",
    "mean",
    "std",
    "min",
    "max",
    "seeds",
];

/// Crash-speed thresholds used for `crash_summary.csv`, m/s.
pub fn default_thresholds() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Experiment file contents. Omitted fields take the profile defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub horizon: Option<usize>,
    pub delta_t: Option<f64>,
    pub target_speed: Option<f64>,
    #[serde(default = "default_lambda_coll")]
    pub lambda_coll: Vec<f64>,
    #[serde(default)]
    pub lambda_std: Vec<f64>,
    #[serde(default)]
    pub lambda_const: Vec<f64>,
    pub bootstraps: Option<usize>,
    pub keep_prob: Option<f64>,
    pub eval_passes: Option<usize>,
    pub iterations: Option<usize>,
    pub rollouts_per_iteration: Option<usize>,
    pub max_steps: Option<usize>,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub sgd_iters: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    #[serde(default = "yes")]
    pub warm_start: bool,
    #[serde(default)]
    pub include_state: bool,
    #[serde(default)]
    pub task_cost_terminal_only: bool,
    /// Store every candidate cost in the rollout logs, not just the chosen one.
    #[serde(default)]
    pub log_all_costs: bool,
    /// Dataset file preloaded before the first iteration.
    pub demonstrations: Option<PathBuf>,
}

pub const DEFAULT_LAMBDA_COLL: f64 = 10.0;

fn default_lambda_coll() -> Vec<f64> {
    vec![DEFAULT_LAMBDA_COLL]
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    /// Profile defaults with the given seeds and a plain `λ_std = 0` grid.
    pub fn for_profile(profile: Profile, seeds: Vec<u64>) -> Self {
        Self {
            profile,
            horizon: None,
            delta_t: None,
            target_speed: None,
            lambda_coll: default_lambda_coll(),
            lambda_std: vec![0.0],
            lambda_const: vec![],
            bootstraps: None,
            keep_prob: None,
            eval_passes: None,
            iterations: None,
            rollouts_per_iteration: None,
            max_steps: None,
            seeds,
            output_dir: None,
            sgd_iters: None,
            batch_size: None,
            learning_rate: None,
            warm_start: true,
            include_state: false,
            task_cost_terminal_only: false,
            log_all_costs: false,
            demonstrations: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.lambda_coll.is_empty() {
            return bad("lambda_coll grid is empty".into());
        }
        if self.lambda_std.is_empty() && self.lambda_const.is_empty() {
            return bad("both lambda_std and lambda_const grids are empty".into());
        }
        for (name, grid) in [
            ("lambda_coll", &self.lambda_coll),
            ("lambda_std", &self.lambda_std),
            ("lambda_const", &self.lambda_const),
        ] {
            if grid.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
                return bad(format!("{name} values must be finite and >= 0"));
            }
        }
        if self.seeds.is_empty() {
            return bad("seeds list is empty".into());
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        let r = self.resolved();
        if r.horizon == 0 || r.iterations == 0 || r.max_steps == 0 {
            return bad("horizon, iterations and max_steps must be >= 1".into());
        }
        if !(r.delta_t > 0.0 && r.target_speed > 0.0) {
            return bad("delta_t and target_speed must be positive".into());
        }
        r.ensemble.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Every field filled in from the profile defaults.
    pub fn resolved(&self) -> Resolved {
        let p = self.profile;
        let keep_prob = self.keep_prob.unwrap_or(0.8);
        Resolved {
            profile: p,
            horizon: self.horizon.unwrap_or(p.horizon()),
            delta_t: self.delta_t.unwrap_or(p.delta_t()),
            target_speed: self.target_speed.unwrap_or(p.target_speed()),
            iterations: self.iterations.unwrap_or(p.iterations()),
            rollouts_per_iteration: self
                .rollouts_per_iteration
                .unwrap_or(p.rollouts_per_iteration()),
            max_steps: self.max_steps.unwrap_or(p.max_steps()),
            ensemble: EnsembleConfig {
                bootstraps: self.bootstraps.unwrap_or(50),
                keep_prob,
                eval_passes: self
                    .eval_passes
                    .unwrap_or(if keep_prob < 1.0 { 10 } else { 1 }),
                train: TrainConfig {
                    sgd_iters: self.sgd_iters.unwrap_or(TrainConfig::default().sgd_iters),
                    batch_size: self.batch_size.unwrap_or(TrainConfig::default().batch_size),
                    adam: AdamConfig {
                        lr: self.learning_rate.unwrap_or(AdamConfig::default().lr),
                        ..AdamConfig::default()
                    },
                    warm_start: self.warm_start,
                },
            },
            include_state: self.include_state,
            task_cost_terminal_only: self.task_cost_terminal_only,
            log_all_costs: self.log_all_costs,
            demonstrations: self.demonstrations.clone(),
        }
    }

    /// λ_coll × (risk-averse λ_std grid, then constant-penalty λ_const grid).
    pub fn grid_points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &lambda_coll in &self.lambda_coll {
            for &lambda in &self.lambda_std {
                out.push(GridPoint {
                    estimator: EstimatorMode::RiskAverse,
                    lambda,
                    lambda_coll,
                });
            }
            for &lambda in &self.lambda_const {
                out.push(GridPoint {
                    estimator: EstimatorMode::ConstPenalty,
                    lambda,
                    lambda_coll,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub profile: Profile,
    pub horizon: usize,
    pub delta_t: f64,
    pub target_speed: f64,
    pub iterations: usize,
    pub rollouts_per_iteration: usize,
    pub max_steps: usize,
    pub ensemble: EnsembleConfig,
    pub include_state: bool,
    pub task_cost_terminal_only: bool,
    pub log_all_costs: bool,
    pub demonstrations: Option<PathBuf>,
}

impl Resolved {
    pub fn cost_params(&self, point: &GridPoint) -> CostParams {
        let (lambda_std, lambda_const) = match point.estimator {
            EstimatorMode::RiskAverse => (point.lambda, 0.0),
            EstimatorMode::ConstPenalty => (0.0, point.lambda),
            EstimatorMode::Plain => (0.0, 0.0),
        };
        CostParams {
            lambda_coll: point.lambda_coll,
            lambda_std,
            lambda_const,
            target_speed: self.target_speed,
            estimator_mode: point.estimator,
            objective: self.profile.objective(),
            task_cost_terminal_only: self.task_cost_terminal_only,
        }
    }

    pub fn loop_setup(&self, point: &GridPoint) -> Result<LoopSetup> {
        let world = self.profile.world(self.delta_t);
        let encoding = InputEncoding {
            pixels: world.camera.pixel_count(),
            horizon: self.horizon,
            include_state: self.include_state,
        };
        let setup = LoopSetup {
            library: self.profile.library(self.horizon)?,
            cost: self.cost_params(point),
            encoding,
            start: self.profile.start_distribution(),
            rollouts_per_iteration: self.rollouts_per_iteration,
            max_steps: self.max_steps,
            record_candidate_costs: self.log_all_costs,
            world,
        };
        setup.validate()?;
        Ok(setup)
    }
}

/// One cell of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub estimator: EstimatorMode,
    pub lambda: f64,
    pub lambda_coll: f64,
}

impl GridPoint {
    pub fn estimator_name(&self) -> &'static str {
        match self.estimator {
            EstimatorMode::RiskAverse => "risk_averse",
            EstimatorMode::ConstPenalty => "const_penalty",
            EstimatorMode::Plain => "plain",
        }
    }

    fn key(&self) -> (&'static str, u64, u64) {
        (self.estimator_name(), self.lambda.to_bits(), self.lambda_coll.to_bits())
    }
}

impl fmt::Display for GridPoint {
    /// Directory-safe label, e.g. `risk_averse-1-coll-10`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-coll-{}", self.estimator_name(), self.lambda, self.lambda_coll)
    }
}

/// Metrics of one (grid point, seed, iteration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub profile: Profile,
    pub point: GridPoint,
    pub seed: u64,
    pub iteration: usize,
    pub crash_speeds: Vec<f64>,
    pub task_speed: f64,
    pub successes: Vec<bool>,
    pub dataset_size: usize,
}

impl MetricsRecord {
    fn new(profile: Profile, point: GridPoint, seed: u64, m: &IterationMetrics) -> Self {
        Self {
            profile,
            point,
            seed,
            iteration: m.iteration,
            crash_speeds: m.crash_speeds.clone(),
            task_speed: m.task_speed,
            successes: m.successes.clone(),
            dataset_size: m.dataset_size,
        }
    }

    /// Speeds within [`SPEED_TOLERANCE`] below `threshold` count as reaching it.
    pub fn crashes_at_or_above(&self, threshold: f64) -> usize {
        self.crash_speeds
            .iter()
            .filter(|&&s| s >= threshold - SPEED_TOLERANCE)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Purpose {
    EnsembleInit = 1,
    Iteration = 2,
}

/// Stream for one (seed, iteration, purpose); independent of the grid point
/// so that runs differing only in cost weights share their randomness.
fn derived_rng(seed: u64, iteration: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(iteration as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[24..].copy_from_slice(b"riskawar");
    ChaCha8Rng::from_seed(key)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobCheckpoint {
    format_version: u32,
    fingerprint: String,
    completed_iterations: usize,
    dataset_len: usize,
    metrics: Vec<IterationMetrics>,
    ensemble: BootstrapEnsemble,
}

fn job_dir(out: &Path, point: &GridPoint, seed: u64) -> PathBuf {
    out.join("runs").join(point.to_string()).join(format!("seed-{seed}"))
}

/// Identifies a job's configuration. The iteration count is left out so a
/// finished run can be extended by raising it.
fn fingerprint(resolved: &Resolved, point: &GridPoint, seed: u64) -> Result<String> {
    let r = Resolved {
        iterations: 0,
        ..resolved.clone()
    };
    Ok(serde_json::to_string(&(r, point, seed))?)
}

/// Runs (or resumes) the full loop for one grid point and seed.
pub fn run_job(resolved: &Resolved, point: &GridPoint, seed: u64, out: &Path) -> Result<Vec<MetricsRecord>> {
    let dir = job_dir(out, point, seed);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let ckpt_path = dir.join("checkpoint.json");
    let data_path = dir.join("dataset.jsonl");
    let setup = resolved.loop_setup(point)?;
    let print = fingerprint(resolved, point, seed)?;

    let (mut ensemble, mut dataset, mut metrics, start) = if ckpt_path.exists() {
        let bytes = std::fs::read(&ckpt_path).map_err(|e| Error::io(&ckpt_path, e))?;
        let ckpt: JobCheckpoint = serde_json::from_slice(&bytes)?;
        if ckpt.format_version != JOB_CHECKPOINT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                kind: "job checkpoint",
                found: ckpt.format_version,
                expected: JOB_CHECKPOINT_FORMAT_VERSION,
            });
        }
        ensure!(
            ckpt.fingerprint == print,
            "{} was produced by a different configuration",
            ckpt_path.display()
        );
        // Drop any samples appended after the checkpoint was taken.
        let dataset = Dataset::load(&data_path, Some(ckpt.dataset_len))?;
        dataset.save(&data_path)?;
        (ckpt.ensemble, dataset, ckpt.metrics, ckpt.completed_iterations)
    } else {
        let arch = Arch::standard(setup.encoding.input_dim())?;
        let ensemble = BootstrapEnsemble::new(
            arch,
            resolved.ensemble,
            &mut derived_rng(seed, 0, Purpose::EnsembleInit),
        )?;
        let dataset = match &resolved.demonstrations {
            Some(path) => Dataset::load(path, None)?,
            None => Dataset::new(),
        };
        dataset.save(&data_path)?;
        (ensemble, dataset, Vec::new(), 0)
    };

    for iteration in start..resolved.iterations {
        let mut rng = derived_rng(seed, iteration, Purpose::Iteration);
        let outcome = run_iteration(&setup, &mut ensemble, &mut dataset, iteration, &mut rng)?;
        Dataset::append_to(&data_path, &outcome.new_samples)?;
        RolloutLog {
            format_version: ROLLOUT_LOG_FORMAT_VERSION,
            iteration,
            world: setup.world.clone(),
            rollouts: outcome.rollouts,
        }
        .save(&dir.join(format!("rollouts_iter{iteration}.json")))?;
        metrics.push(outcome.metrics);
        let ckpt = JobCheckpoint {
            format_version: JOB_CHECKPOINT_FORMAT_VERSION,
            fingerprint: print.clone(),
            completed_iterations: iteration + 1,
            dataset_len: dataset.len(),
            metrics: metrics.clone(),
            ensemble: ensemble.clone(),
        };
        crate::io::write_atomic(&ckpt_path, &serde_json::to_vec(&ckpt)?)?;
    }
    Ok(metrics
        .iter()
        .take(resolved.iterations)
        .map(|m| MetricsRecord::new(resolved.profile, *point, seed, m))
        .collect())
}

/// Runs every grid point × seed on a pool of `jobs` threads, then writes
/// `metrics.csv`, `crash_summary.csv` and `task_curve.csv` under `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, jobs: usize) -> Result<Vec<MetricsRecord>> {
    config.validate()?;
    ensure!(jobs >= 1, "jobs must be >= 1");
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let probe = out.join(".write-probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))?;

    let resolved = config.resolved();
    let tasks: Vec<(GridPoint, u64)> = config
        .grid_points()
        .into_iter()
        .flat_map(|p| config.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<Vec<MetricsRecord>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(p, s)| run_job(&resolved, p, *s, out))
            .collect()
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    write_metrics_csv(&out.join("metrics.csv"), &records)?;
    write_crash_summary_csv(&out.join("crash_summary.csv"), &records, &default_thresholds())?;
    write_task_curve_csv(&out.join("task_curve.csv"), &records)?;
    Ok(records)
}

/// Records grouped by grid point, in first-appearance order.
pub fn group_by_point(records: &[MetricsRecord]) -> Vec<(GridPoint, Vec<&MetricsRecord>)> {
    let mut order: Vec<(GridPoint, Vec<&MetricsRecord>)> = Vec::new();
    for r in records {
        match order.iter_mut().find(|(p, _)| p.key() == r.point.key()) {
            Some((_, v)) => v.push(r),
            None => order.push((r.point, vec![r])),
        }
    }
    order
}

/// For each threshold, crashes at or above it summed over iterations and
/// averaged over seeds.
pub fn crash_speed_summary(records: &[&MetricsRecord], thresholds: &[f64]) -> Result<Vec<f64>> {
    ensure!(
        thresholds.windows(2).all(|w| w[0] <= w[1]),
        "thresholds must be sorted ascending"
    );
    let seeds: HashSet<u64> = records.iter().map(|r| r.seed).collect();
    if seeds.is_empty() {
        return Ok(vec![0.0; thresholds.len()]);
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let total: usize = records.iter().map(|r| r.crashes_at_or_above(t)).sum();
            total as f64 / seeds.len() as f64
        })
        .collect())
}

/// Crashes at or above `threshold` across all iterations, per seed.
pub fn crashes_per_seed(records: &[&MetricsRecord], threshold: f64) -> BTreeMap<u64, usize> {
    let mut out = BTreeMap::new();
    for r in records {
        *out.entry(r.seed).or_insert(0) += r.crashes_at_or_above(threshold);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean: f64,
    /// Sample standard deviation across seeds; 0 for one seed.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub seeds: usize,
}

/// Per-iteration statistics of the task speed across seeds.
pub fn task_performance_curve(records: &[&MetricsRecord]) -> Result<Vec<CurvePoint>> {
    ensure!(!records.is_empty(), "task curve needs at least one seed");
    let mut by_iter: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_iter.entry(r.iteration).or_default().push(r.task_speed);
    }
    Ok(by_iter
        .into_iter()
        .map(|(iteration, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            CurvePoint {
                iteration,
                mean,
                std,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                seeds: v.len(),
            }
        })
        .collect())
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(Error::from)
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRICS_COLUMNS)?;
    for r in records {
        w.write_record([
            r.profile.name().to_owned(),
            r.point.estimator_name().to_owned(),
            r.point.lambda.to_string(),
            r.point.lambda_coll.to_string(),
            r.seed.to_string(),
            r.iteration.to_string(),
            r.successes.len().to_string(),
            r.crash_speeds.len().to_string(),
            join(&r.crash_speeds),
            r.task_speed.to_string(),
            join(r.successes.iter().map(|&s| u8::from(s))),
            r.dataset_size.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`write_metrics_csv`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let headers = rd.headers()?.clone();
    ensure!(
        headers.iter().eq(METRICS_COLUMNS),
        "{}: unexpected metrics columns",
        path.display()
    );
    let bad = |what: &str| Error::Config(format!("{}: bad {what}", path.display()));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| f(i).parse::<f64>().map_err(|_| bad(METRICS_COLUMNS[i]));
        let int = |i: usize| f(i).parse::<u64>().map_err(|_| bad(METRICS_COLUMNS[i]));
        let list = |i: usize| -> Result<Vec<f64>> {
            f(i).split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| bad(METRICS_COLUMNS[i])))
                .collect()
        };
        let profile = match f(0) {
            "quadrotor_sim" => Profile::QuadrotorSim,
            "car_sim" => Profile::CarSim,
            _ => return Err(bad("profile")),
        };
        let estimator = match f(1) {
            "risk_averse" => EstimatorMode::RiskAverse,
            "const_penalty" => EstimatorMode::ConstPenalty,
            "plain" => EstimatorMode::Plain,
            _ => return Err(bad("estimator")),
        };
        out.push(MetricsRecord {
            profile,
            point: GridPoint {
                estimator,
                lambda: num(2)?,
                lambda_coll: num(3)?,
            },
            seed: int(4)?,
            iteration: int(5)? as usize,
            crash_speeds: list(8)?,
            task_speed: num(9)?,
            successes: list(10)?.into_iter().map(|x| x != 0.0).collect(),
            dataset_size: int(11)? as usize,
        });
    }
    Ok(out)
}

pub fn write_crash_summary_csv(path: &Path, records: &[MetricsRecord], thresholds: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CRASH_SUMMARY_COLUMNS)?;
    for (point, recs) in group_by_point(records) {
        let seeds = recs.iter().map(|r| r.seed).collect::<HashSet<_>>().len();
        for (t, c) in thresholds.iter().zip(crash_speed_summary(&recs, thresholds)?) {
            w.write_record([
                point.estimator_name().to_owned(),
                point.lambda.to_string(),
                point.lambda_coll.to_string(),
                t.to_string(),
                c.to_string(),
                seeds.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_task_curve_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TASK_CURVE_COLUMNS)?;
    for (point, recs) in group_by_point(records) {
        for c in task_performance_curve(&recs)? {
            w.write_record([
                point.estimator_name().to_owned(),
                point.lambda.to_string(),
                point.lambda_coll.to_string(),
                c.iteration.to_string(),
                c.mean.to_string(),
                c.std.to_string(),
                c.min.to_string(),
                c.max.to_string(),
                c.seeds.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
