//! Bootstrap ensemble of dropout networks and the risk-averse collision estimator.
//!
//! The stochastic output `f` is sampled by picking one of the `B` bootstrap
//! members and one dropout mask. Queries pool all `B · D_eval` samples and
//! report their mean and population standard deviation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::nn::{self, Activations, AdamConfig, AdamState, Arch, DropoutMask, MlpParams};

/// Sample statistics of the pre-activation `f` at one query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionStats {
    pub mean: f64,
    pub std: f64,
    pub sample_count: usize,
}

impl PredictionStats {
    pub fn new(mean: f64, std: f64, sample_count: usize) -> Result<Self> {
        ensure!(mean.is_finite(), "mean must be finite, got {mean}");
        ensure!(std >= 0.0 && std.is_finite(), "std must be >= 0, got {std}");
        ensure!(sample_count >= 1, "statistics need at least one sample");
        Ok(Self {
            mean,
            std,
            sample_count,
        })
    }

    /// Mean and population (divide-by-N) standard deviation.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        ensure!(!samples.is_empty(), "statistics need at least one sample");
        let n = samples.len() as f64;
        if samples.iter().all(|&s| s == samples[0]) {
            return Self::new(samples[0], 0.0, samples.len());
        }
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        Self::new(mean, var.sqrt(), samples.len())
    }
}

/// `logistic(mean + λ_std · std)`. With `λ_std = 0` this is the plain estimator.
pub fn risk_averse_prob(stats: &PredictionStats, lambda_std: f64) -> Result<f64> {
    ensure!(lambda_std >= 0.0, "lambda_std must be >= 0, got {lambda_std}");
    Ok(nn::logistic(stats.mean + lambda_std * stats.std))
}

/// Conservative baseline: the uncertainty term replaced by a constant shift.
pub fn const_penalty_prob(stats: &PredictionStats, lambda_const: f64) -> Result<f64> {
    ensure!(
        lambda_const >= 0.0,
        "lambda_const must be >= 0, got {lambda_const}"
    );
    Ok(nn::logistic(stats.mean + lambda_const))
}

/// `n` indices drawn uniformly with replacement from `0..n`.
pub fn resample_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    ensure!(n > 0, "cannot resample an empty dataset");
    Ok((0..n).map(|_| rng.random_range(0..n)).collect())
}

/// Bootstrap resample: same size as `data`, drawn with replacement.
pub fn resample<T: Clone, R: Rng + ?Sized>(data: &[T], rng: &mut R) -> Result<Vec<T>> {
    Ok(resample_indices(data.len(), rng)?
        .into_iter()
        .map(|i| data[i].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Minibatch updates per member per call to [`BootstrapEnsemble::train`].
    pub sgd_iters: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Continue from the current weights instead of re-initializing each round.
    pub warm_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sgd_iters: 300,
            batch_size: 32,
            adam: AdamConfig::default(),
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub bootstraps: usize,
    pub keep_prob: f64,
    /// Dropout passes per member per query (`D_eval`).
    pub eval_passes: usize,
    pub train: TrainConfig,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.bootstraps >= 1, "ensemble needs at least one member");
        ensure!(
            self.keep_prob > 0.0 && self.keep_prob <= 1.0,
            "keep_prob must lie in (0, 1], got {}",
            self.keep_prob
        );
        ensure!(self.eval_passes >= 1, "eval_passes must be >= 1");
        ensure!(self.train.batch_size >= 1, "batch_size must be >= 1");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Member {
    params: MlpParams,
    optimizer: AdamState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEnsemble {
    arch: Arch,
    config: EnsembleConfig,
    members: Vec<Member>,
    training_rounds: u64,
    ready: bool,
}

/// Loss trace of one training round.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Per member: minibatch losses in update order.
    pub losses: Vec<Vec<f64>>,
    /// Per member: indices of the bootstrap resample it was trained on.
    pub resampled: Vec<Vec<usize>>,
}

impl TrainReport {
    /// Mean loss over the first and the last `window` updates, per member.
    pub fn window_means(&self, window: usize) -> Vec<(f64, f64)> {
        self.losses
            .iter()
            .map(|l| {
                let w = window.min(l.len()).max(1);
                let head = l.iter().take(w).sum::<f64>() / w as f64;
                let tail = l.iter().rev().take(w).sum::<f64>() / w as f64;
                (head, tail)
            })
            .collect()
    }
}

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format_version: u32,
    ensemble: BootstrapEnsemble,
}

impl BootstrapEnsemble {
    /// `B` freshly initialized members. The ensemble refuses queries until it has
    /// been trained or [`accept_untrained_prior`](Self::accept_untrained_prior) is called.
    pub fn new<R: Rng + ?Sized>(arch: Arch, config: EnsembleConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let members = (0..config.bootstraps)
            .map(|_| Member {
                params: MlpParams::init(arch, rng),
                optimizer: AdamState::new(arch, config.train.adam),
            })
            .collect();
        Ok(Self {
            arch,
            config,
            members,
            training_rounds: 0,
            ready: false,
        })
    }

    /// Wraps explicit parameter sets; the result is immediately queryable.
    pub fn from_models(models: Vec<MlpParams>, config: EnsembleConfig) -> Result<Self> {
        ensure!(!models.is_empty(), "ensemble needs at least one member");
        let arch = models[0].arch();
        ensure!(
            models.iter().all(|m| m.arch() == arch),
            "all members must share one architecture"
        );
        let config = EnsembleConfig {
            bootstraps: models.len(),
            ..config
        };
        config.validate()?;
        let members = models
            .into_iter()
            .map(|params| Member {
                params,
                optimizer: AdamState::new(arch, config.train.adam),
            })
            .collect();
        Ok(Self {
            arch,
            config,
            members,
            training_rounds: 0,
            ready: true,
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn models(&self) -> impl Iterator<Item = &MlpParams> {
        self.members.iter().map(|m| &m.params)
    }

    pub fn training_rounds(&self) -> u64 {
        self.training_rounds
    }

    pub fn is_ready(&self) -> bool {
        self.ready
    }

    /// Allows querying the randomly initialized members before any data exists.
    pub fn accept_untrained_prior(&mut self) {
        self.ready = true;
    }

    /// One round of bootstrap training: every member gets its own resample of
    /// the data and `sgd_iters` minibatch Adam updates, with a fresh dropout
    /// mask for every forward pass.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        inputs: &[Vec<f64>],
        labels: &[f64],
        rng: &mut R,
    ) -> Result<TrainReport> {
        ensure!(!inputs.is_empty(), "training needs a nonempty dataset");
        ensure!(
            inputs.len() == labels.len(),
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        );
        for x in inputs {
            ensure!(
                x.len() == self.arch.input,
                "training input has length {}, network expects {}",
                x.len(),
                self.arch.input
            );
        }
        for &y in labels {
            ensure!(y == 0.0 || y == 1.0, "labels must be 0 or 1, got {y}");
        }

        // Member seeds are drawn up front so parallel training stays deterministic.
        let seeds: Vec<u64> = (0..self.members.len()).map(|_| rng.next_u64()).collect();
        let arch = self.arch;
        let config = self.config;
        let (losses, resampled) = self
            .members
            .par_iter_mut()
            .zip(seeds)
            .map(|(member, seed)| train_member(member, arch, &config, inputs, labels, seed))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();

        self.training_rounds += 1;
        self.ready = true;
        Ok(TrainReport { losses, resampled })
    }

    fn check_query(&self, input_len: usize) -> Result<()> {
        ensure!(
            self.ready,
            "ensemble has not been trained; predictions are undefined"
        );
        ensure!(
            input_len == self.arch.input,
            "query input has length {input_len}, network expects {}",
            self.arch.input
        );
        Ok(())
    }

    /// Mean and std of `f` over all members × `eval_passes` dropout masks.
    pub fn predict_stats<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        rng: &mut R,
    ) -> Result<PredictionStats> {
        self.check_query(input.len())?;
        let z1s = self
            .members
            .iter()
            .map(|m| nn::first_layer_partial(&m.params, input))
            .collect::<Result<Vec<_>>>()?;
        self.stats_from_first_layer(&z1s, rng)
    }

    /// Batched [`predict_stats`](Self::predict_stats) for many inputs sharing a
    /// common prefix (the observation). Query `i` is `prefix ++ suffixes[i]` and
    /// draws its dropout masks from `rng_for(i)`; each result is bit-identical
    /// to a single `predict_stats` call with that RNG.
    pub fn predict_stats_shared_prefix<S, F>(
        &self,
        prefix: &[f64],
        suffixes: &[S],
        rng_for: F,
    ) -> Result<Vec<PredictionStats>>
    where
        S: AsRef<[f64]> + Sync,
        F: Fn(usize) -> ChaCha8Rng + Sync,
    {
        for s in suffixes {
            self.check_query(prefix.len() + s.as_ref().len())?;
        }
        let partials = self
            .members
            .iter()
            .map(|m| nn::first_layer_partial(&m.params, prefix))
            .collect::<Result<Vec<_>>>()?;
        let offset = prefix.len();
        suffixes
            .par_iter()
            .enumerate()
            .map(|(i, suffix)| {
                let mut z1s = partials.clone();
                for (member, z1) in self.members.iter().zip(&mut z1s) {
                    nn::first_layer_extend(&member.params, z1, offset, suffix.as_ref())?;
                }
                self.stats_from_first_layer(&z1s, &mut rng_for(i))
            })
            .collect()
    }

    fn stats_from_first_layer<R: Rng + ?Sized>(
        &self,
        z1s: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<PredictionStats> {
        let passes = self.config.eval_passes;
        let keep = self.config.keep_prob;
        let mut samples = Vec::with_capacity(self.members.len() * passes);
        let mut acts = Activations::default();
        let mut mask = DropoutMask::all_keep(self.arch.hidden);
        for (member, z1) in self.members.iter().zip(z1s) {
            for _ in 0..passes {
                if keep < 1.0 {
                    mask = nn::sample_dropout_mask(rng, keep, self.arch.hidden)?;
                }
                samples.push(nn::forward_from_first_layer(
                    &member.params,
                    z1,
                    Some(&mask),
                    &mut acts,
                )?);
            }
        }
        PredictionStats::from_samples(&samples)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ckpt = Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            ensemble: self.clone(),
        };
        crate::io::write_atomic(path, &serde_json::to_vec(&ckpt)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                kind: "ensemble checkpoint",
                found: ckpt.format_version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        let e = ckpt.ensemble;
        e.config.validate()?;
        ensure!(
            e.members.len() == e.config.bootstraps
                && e.members.iter().all(|m| m.params.arch() == e.arch),
            "checkpoint members disagree with the recorded architecture"
        );
        Ok(e)
    }
}

fn train_member(
    member: &mut Member,
    arch: Arch,
    config: &EnsembleConfig,
    inputs: &[Vec<f64>],
    labels: &[f64],
    seed: u64,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = resample_indices(inputs.len(), &mut rng)?;
    if !config.train.warm_start {
        member.params = MlpParams::init(arch, &mut rng);
        member.optimizer = AdamState::new(arch, config.train.adam);
    }
    let bs = config.train.batch_size;
    let mut losses = Vec::with_capacity(config.train.sgd_iters);
    let mut batch: Vec<(&[f64], f64)> = Vec::with_capacity(bs);
    let mut masks = Vec::with_capacity(bs);
    for _ in 0..config.train.sgd_iters {
        batch.clear();
        masks.clear();
        for _ in 0..bs {
            let i = indices[rng.random_range(0..indices.len())];
            batch.push((inputs[i].as_slice(), labels[i]));
            masks.push(nn::sample_dropout_mask(&mut rng, config.keep_prob, arch.hidden)?);
        }
        let (loss, grads) = nn::loss_and_gradient(&member.params, &batch, &masks)?;
        nn::adam_step(&mut member.optimizer, &mut member.params, &grads)?;
        losses.push(loss);
    }
    Ok((losses, indices))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(bootstraps: usize, keep_prob: f64, eval_passes: usize) -> EnsembleConfig {
        EnsembleConfig {
            bootstraps,
            keep_prob,
            eval_passes,
            train: TrainConfig::default(),
        }
    }

    fn constant_net(arch: Arch, value: f64) -> MlpParams {
        let mut p = MlpParams::zeros(arch);
        p.set_b3(value);
        p
    }

    #[test]
    fn resample_preserves_size_and_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(resample(&["only"], &mut rng).unwrap(), vec!["only"]);
        let data: Vec<u32> = (0..57).collect();
        let r = resample(&data, &mut rng).unwrap();
        assert_eq!(r.len(), data.len());
        assert!(r.iter().all(|x| data.contains(x)));
        assert!(resample::<u32, _>(&[], &mut rng).is_err());

        let a = resample(&data, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = resample(&data, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_members_without_dropout_have_zero_std() {
        let arch = Arch::new(3, 5, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = MlpParams::init(arch, &mut rng);
        let e = BootstrapEnsemble::from_models(vec![net.clone(); 4], config(4, 1.0, 3)).unwrap();
        let s = e.predict_stats(&[0.1, 0.2, -0.3], &mut rng).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!(s.sample_count, 12);
    }

    #[test]
    fn two_point_population_statistics() {
        let arch = Arch::new(2, 4, 4).unwrap();
        let e = BootstrapEnsemble::from_models(
            vec![constant_net(arch, 1.0), constant_net(arch, -1.0)],
            config(2, 1.0, 1),
        )
        .unwrap();
        let s = e
            .predict_stats(&[3.0, 4.0], &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(s.sample_count, 2);
    }

    #[test]
    fn untrained_ensemble_refuses_queries() {
        let arch = Arch::new(2, 4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut e = BootstrapEnsemble::new(arch, config(3, 0.8, 2), &mut rng).unwrap();
        assert!(e.predict_stats(&[0.0, 1.0], &mut rng).is_err());
        e.accept_untrained_prior();
        assert!(e.predict_stats(&[0.0, 1.0], &mut rng).is_ok());
        assert!(e.predict_stats(&[0.0], &mut rng).is_err());
    }

    #[test]
    fn query_statistics_are_seed_deterministic() {
        let arch = Arch::new(4, 8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut e = BootstrapEnsemble::new(arch, config(3, 0.8, 4), &mut rng).unwrap();
        e.accept_untrained_prior();
        let x = [0.5, 0.0, -0.25, 1.0];
        let a = e.predict_stats(&x, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = e.predict_stats(&x, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shared_prefix_batch_matches_single_queries_bitwise() {
        let arch = Arch::standard(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut e = BootstrapEnsemble::new(arch, config(5, 0.8, 3), &mut rng).unwrap();
        e.accept_untrained_prior();
        let prefix = [0.0, 0.7, 0.7, 0.0, 0.2, 0.0];
        let suffixes: Vec<Vec<f64>> = (0..7)
            .map(|i| vec![i as f64 * 0.1, -0.3, 0.05 * i as f64, 1.0])
            .collect();
        let rng_for = |i: usize| ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let batched = e
            .predict_stats_shared_prefix(&prefix, &suffixes, rng_for)
            .unwrap();
        for (i, suffix) in suffixes.iter().enumerate() {
            let full: Vec<f64> = prefix.iter().chain(suffix).copied().collect();
            let single = e.predict_stats(&full, &mut rng_for(i)).unwrap();
            assert_eq!(single.mean.to_bits(), batched[i].mean.to_bits());
            assert_eq!(single.std.to_bits(), batched[i].std.to_bits());
        }
    }

    #[test]
    fn estimator_reference_values() {
        let s = |mean, std| PredictionStats::new(mean, std, 1).unwrap();
        assert_eq!(risk_averse_prob(&s(0.0, 0.0), 7.0).unwrap(), 0.5);
        assert_eq!(risk_averse_prob(&s(-2.0, 1.0), 2.0).unwrap(), 0.5);
        let st = s(1.3, 0.4);
        assert_eq!(risk_averse_prob(&st, 0.0).unwrap(), nn::logistic(1.3));
        assert!(risk_averse_prob(&st, -0.1).is_err());

        assert_eq!(const_penalty_prob(&st, 0.0).unwrap(), nn::logistic(1.3));
        assert_eq!(const_penalty_prob(&s(-100.0, 3.0), 100.0).unwrap(), 0.5);
        assert!(1.0 - const_penalty_prob(&s(0.0, 0.0), 100.0).unwrap() < 1e-20);
        assert!(const_penalty_prob(&st, -1.0).is_err());
    }

    #[test]
    fn separable_pair_is_fit_perfectly() {
        // Reference: plain logistic regression separates {(-1, 0), (+1, 1)}.
        // A two-point bootstrap may draw the same point twice, so accuracy is
        // measured on the member's own resample.
        let arch = Arch::new(1, 40, 40).unwrap();
        let inputs = vec![vec![-1.0], vec![1.0]];
        let labels = vec![0.0, 1.0];
        let mut saw_both = false;
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cfg = config(1, 1.0, 1);
            cfg.train.sgd_iters = 200;
            cfg.train.adam.lr = 1e-2;
            let mut e = BootstrapEnsemble::new(arch, cfg, &mut rng).unwrap();
            let report = e.train(&inputs, &labels, &mut rng).unwrap();
            let seen = &report.resampled[0];
            saw_both |= seen.contains(&0) && seen.contains(&1);
            for &i in seen {
                let p = risk_averse_prob(&e.predict_stats(&inputs[i], &mut rng).unwrap(), 0.0)
                    .unwrap();
                assert_eq!((p > 0.5) as u8 as f64, labels[i], "seed {seed}: p = {p}");
            }
        }
        assert!(saw_both);
    }

    #[test]
    fn single_class_data_drives_predictions_negative() {
        let arch = Arch::new(3, 40, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut e = BootstrapEnsemble::new(arch, config(4, 0.8, 5), &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 / 20.0, 0.5, -(i as f64) / 40.0])
            .collect();
        let labels = vec![0.0; 20];
        let report = e.train(&inputs, &labels, &mut rng).unwrap();
        for (head, tail) in report.window_means(30) {
            assert!(tail < head, "loss did not decrease: {head} -> {tail}");
        }
        for member in e.models() {
            for x in &inputs {
                assert!(nn::logistic(nn::forward_unmasked(member, x).unwrap()) < 0.5);
            }
        }
    }

    #[test]
    fn retraining_with_identical_seed_is_bit_identical() {
        let arch = Arch::new(5, 40, 40).unwrap();
        let inputs: Vec<Vec<f64>> = (0..30)
            .map(|i| (0..5).map(|j| ((i * 7 + j * 3) % 11) as f64 / 11.0).collect())
            .collect();
        let labels: Vec<f64> = (0..30).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            let mut e = BootstrapEnsemble::new(arch, config(3, 0.8, 2), &mut rng).unwrap();
            e.train(&inputs, &labels, &mut rng).unwrap();
            e.train(&inputs, &labels, &mut rng).unwrap();
            e
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn cold_start_reinitializes_members() {
        let arch = Arch::new(2, 6, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cfg = config(2, 1.0, 1);
        cfg.train.warm_start = false;
        cfg.train.sgd_iters = 5;
        let mut e = BootstrapEnsemble::new(arch, cfg, &mut rng).unwrap();
        let inputs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        e.train(&inputs, &[0.0, 1.0], &mut rng).unwrap();
        for m in &e.members {
            assert_eq!(m.optimizer.step, 5);
        }
        e.train(&inputs, &[0.0, 1.0], &mut rng).unwrap();
        for m in &e.members {
            assert_eq!(m.optimizer.step, 5);
        }
        assert_eq!(e.training_rounds(), 2);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ensemble.json");
        let arch = Arch::new(6, 40, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut e = BootstrapEnsemble::new(arch, config(3, 0.8, 2), &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 3.0; 6]).collect();
        let labels: Vec<f64> = (0..8).map(|i| (i > 4) as u8 as f64).collect();
        e.train(&inputs, &labels, &mut rng).unwrap();
        e.save(&path).unwrap();
        assert_eq!(BootstrapEnsemble::load(&path).unwrap(), e);

        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":2");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            BootstrapEnsemble::load(&path),
            Err(Error::FormatVersion { found: 2, .. })
        ));
    }

    #[test]
    fn training_rejects_bad_inputs() {
        let arch = Arch::new(2, 4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut e = BootstrapEnsemble::new(arch, config(1, 0.9, 1), &mut rng).unwrap();
        assert!(e.train(&[], &[], &mut rng).is_err());
        assert!(e.train(&[vec![1.0]], &[1.0], &mut rng).is_err());
        assert!(e.train(&[vec![1.0, 2.0]], &[0.3], &mut rng).is_err());
        assert!(!e.is_ready());
    }
}
