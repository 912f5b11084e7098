//! Receding-horizon MPC over a fixed library of constant-command sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{total_sequence_cost, CostParams};
use crate::encoding::InputEncoding;
use crate::ensemble::{BootstrapEnsemble, PredictionStats};
use crate::error::{ensure, Result};
use crate::profile::Profile;
use crate::sim::{roll_out, Control, Dynamics, Observation, VehicleState};

pub const QUAD_HEADINGS: usize = 19;
pub const QUAD_SPEEDS: usize = 10;
pub const CAR_STEERS: usize = 7;
pub const CAR_SPEEDS: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionLibrary {
    pub profile: Profile,
    sequences: Vec<Vec<Control>>,
}

impl ActionLibrary {
    pub fn new(profile: Profile, sequences: Vec<Vec<Control>>) -> Result<Self> {
        ensure!(!sequences.is_empty(), "action library is empty");
        let h = sequences[0].len();
        ensure!(h >= 1, "sequences need at least one control");
        ensure!(
            sequences.iter().all(|s| s.len() == h),
            "all sequences must share one horizon"
        );
        Ok(Self { profile, sequences })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.sequences[0].len()
    }

    pub fn sequences(&self) -> &[Vec<Control>] {
        &self.sequences
    }

    pub fn get(&self, i: usize) -> &[Control] {
        &self.sequences[i]
    }
}

/// `n` evenly spaced speeds in `(0, max]`: `max·k/n` for `k = 1..=n`.
fn speed_grid(n: usize, max_speed: f64) -> impl Iterator<Item = f64> {
    (1..=n).map(move |k| max_speed * k as f64 / n as f64)
}

/// `n` (odd) evenly spaced values spanning `[-half_span, half_span]`.
fn symmetric_grid(n: usize, half_span: f64) -> impl Iterator<Item = f64> {
    let mid = (n / 2) as f64;
    (0..n).map(move |k| (k as f64 - mid) / mid * half_span)
}

/// 19 headings across ±90° about +x times 10 speeds; each sequence holds one
/// velocity command for `horizon` steps. Index = heading · 10 + speed.
pub fn build_quadrotor_library(horizon: usize, max_speed: f64) -> Result<ActionLibrary> {
    ensure!(horizon >= 1, "horizon must be >= 1");
    ensure!(max_speed > 0.0, "max_speed must be positive");
    let mut sequences = Vec::with_capacity(QUAD_HEADINGS * QUAD_SPEEDS);
    for heading in symmetric_grid(QUAD_HEADINGS, std::f64::consts::FRAC_PI_2) {
        for speed in speed_grid(QUAD_SPEEDS, max_speed) {
            let u = [speed * heading.cos(), speed * heading.sin()];
            sequences.push(vec![u; horizon]);
        }
    }
    ActionLibrary::new(Profile::QuadrotorSim, sequences)
}

/// 7 steering angles across ±`max_steer` times 7 speeds, constant per sequence.
/// Index = steer · 7 + speed.
pub fn build_car_library(horizon: usize, max_speed: f64, max_steer: f64) -> Result<ActionLibrary> {
    ensure!(horizon >= 1, "horizon must be >= 1");
    ensure!(max_speed > 0.0, "max_speed must be positive");
    ensure!(
        max_steer > 0.0 && max_steer < std::f64::consts::FRAC_PI_2,
        "max_steer must lie in (0, π/2)"
    );
    let mut sequences = Vec::with_capacity(CAR_STEERS * CAR_SPEEDS);
    for steer in symmetric_grid(CAR_STEERS, max_steer) {
        for speed in speed_grid(CAR_SPEEDS, max_speed) {
            sequences.push(vec![[speed, steer]; horizon]);
        }
    }
    ActionLibrary::new(Profile::CarSim, sequences)
}

/// RNG for candidate `index` at a planning step; independent of evaluation order.
pub fn candidate_rng(step_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(step_seed);
    rng.set_stream(index as u64);
    rng
}

/// Source of collision-prediction statistics for (state, controls, observation).
pub trait CollisionModel: Sync {
    fn stats(
        &self,
        state: &VehicleState,
        seq: &[Control],
        observation: &Observation,
        rng: &mut ChaCha8Rng,
    ) -> Result<PredictionStats>;

    /// Statistics for every library sequence; candidate `i` uses
    /// [`candidate_rng`]`(step_seed, i)`.
    fn stats_batch(
        &self,
        state: &VehicleState,
        library: &ActionLibrary,
        observation: &Observation,
        step_seed: u64,
    ) -> Result<Vec<PredictionStats>> {
        library
            .sequences()
            .par_iter()
            .enumerate()
            .map(|(i, seq)| self.stats(state, seq, observation, &mut candidate_rng(step_seed, i)))
            .collect()
    }
}

/// A trained ensemble plus the input layout it was trained on.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleModel<'a> {
    pub ensemble: &'a BootstrapEnsemble,
    pub encoding: InputEncoding,
}

impl CollisionModel for EnsembleModel<'_> {
    fn stats(
        &self,
        state: &VehicleState,
        seq: &[Control],
        observation: &Observation,
        rng: &mut ChaCha8Rng,
    ) -> Result<PredictionStats> {
        let input = self.encoding.encode(state, seq, observation)?;
        self.ensemble.predict_stats(&input, rng)
    }

    fn stats_batch(
        &self,
        state: &VehicleState,
        library: &ActionLibrary,
        observation: &Observation,
        step_seed: u64,
    ) -> Result<Vec<PredictionStats>> {
        let prefix = self.encoding.prefix(state, observation)?;
        let suffixes = library
            .sequences()
            .iter()
            .map(|s| self.encoding.controls(s))
            .collect::<Result<Vec<_>>>()?;
        self.ensemble
            .predict_stats_shared_prefix(&prefix, &suffixes, |i| candidate_rng(step_seed, i))
    }
}

/// What the planner needs besides the model: candidates, costs and the known dynamics.
#[derive(Debug, Clone)]
pub struct PlannerContext<'a> {
    pub library: &'a ActionLibrary,
    pub cost: CostParams,
    pub dynamics: Dynamics,
    pub delta_t: f64,
}

fn sequence_cost(
    ctx: &PlannerContext<'_>,
    state: &VehicleState,
    seq: &[Control],
    stats: &PredictionStats,
) -> Result<f64> {
    let states = roll_out(&ctx.dynamics, state, seq, ctx.delta_t)?;
    let p_coll = ctx.cost.collision_probability(stats)?;
    total_sequence_cost(&states, seq, p_coll, &ctx.cost)
}

/// Risk-adjusted cost of one candidate: roll the dynamics, query the model once
/// for the whole sequence, and combine.
pub fn evaluate_sequence<M: CollisionModel + ?Sized>(
    ctx: &PlannerContext<'_>,
    state: &VehicleState,
    observation: &Observation,
    seq: &[Control],
    model: &M,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let stats = model.stats(state, seq, observation, rng)?;
    sequence_cost(ctx, state, seq, &stats)
}

/// Index of the smallest cost; ties go to the lowest index.
pub fn argmin_first(costs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &c) in costs.iter().enumerate() {
        if best.is_none_or(|b| c < costs[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub control: Control,
    pub index: usize,
    pub costs: Vec<f64>,
}

/// Scores every library sequence and returns the first control of the cheapest.
pub fn mpc_select<M: CollisionModel + ?Sized, R: Rng + ?Sized>(
    ctx: &PlannerContext<'_>,
    state: &VehicleState,
    observation: &Observation,
    model: &M,
    rng: &mut R,
) -> Result<Selection> {
    ensure!(!ctx.library.is_empty(), "action library is empty");
    let step_seed: u64 = rng.random();
    let stats = model.stats_batch(state, ctx.library, observation, step_seed)?;
    ensure!(
        stats.len() == ctx.library.len(),
        "model returned {} statistics for {} candidates",
        stats.len(),
        ctx.library.len()
    );
    let costs = ctx
        .library
        .sequences()
        .par_iter()
        .zip(&stats)
        .map(|(seq, st)| sequence_cost(ctx, state, seq, st))
        .collect::<Result<Vec<_>>>()?;
    ensure!(
        costs.iter().all(|c| c.is_finite()),
        "non-finite candidate cost"
    );
    let index = argmin_first(&costs).expect("library is nonempty");
    Ok(Selection {
        control: ctx.library.get(index)[0],
        index,
        costs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{task_cost, EstimatorMode, TaskObjective};
    use crate::nn::{Arch, MlpParams};
    use crate::ensemble::{EnsembleConfig, TrainConfig};
    use crate::sim::{step, Vec2};

    /// Returns fixed statistics regardless of the query.
    struct FixedStats(PredictionStats);

    impl CollisionModel for FixedStats {
        fn stats(
            &self,
            _: &VehicleState,
            _: &[Control],
            _: &Observation,
            _: &mut ChaCha8Rng,
        ) -> Result<PredictionStats> {
            Ok(self.0)
        }
    }

    /// Per-candidate statistics keyed by the first control.
    struct TableStats(Vec<(Control, PredictionStats)>);

    impl CollisionModel for TableStats {
        fn stats(
            &self,
            _: &VehicleState,
            seq: &[Control],
            _: &Observation,
            _: &mut ChaCha8Rng,
        ) -> Result<PredictionStats> {
            Ok(self.0.iter().find(|(u, _)| *u == seq[0]).expect("known control").1)
        }
    }

    fn cost_params(lambda_coll: f64) -> CostParams {
        CostParams {
            lambda_coll,
            lambda_std: 0.0,
            lambda_const: 0.0,
            target_speed: 0.5,
            estimator_mode: EstimatorMode::Plain,
            objective: TaskObjective::Forward,
            task_cost_terminal_only: false,
        }
    }

    fn blank() -> Observation {
        Observation {
            width: 1,
            height: 1,
            pixels: vec![0.0],
        }
    }

    fn stats(mean: f64, std: f64) -> PredictionStats {
        PredictionStats::new(mean, std, 1).unwrap()
    }

    #[test]
    fn quadrotor_library_shape() {
        let lib = build_quadrotor_library(6, 1.0).unwrap();
        assert_eq!(lib.len(), 190);
        assert_eq!(lib.horizon(), 6);
        let mut max = 0.0f64;
        let mut min = f64::INFINITY;
        for seq in lib.sequences() {
            assert!(seq.iter().all(|u| u == &seq[0]));
            let s = Vec2::from(seq[0]).norm();
            max = max.max(s);
            min = min.min(s);
            assert!(seq[0][0] >= -1e-12, "heading beyond ±90°");
        }
        assert!((max - 1.0).abs() < 1e-12);
        assert!(min > 0.0);
        assert!(build_quadrotor_library(0, 1.0).is_err());
        assert!(build_quadrotor_library(3, 0.0).is_err());
    }

    #[test]
    fn car_library_shape_and_symmetry() {
        let lib = build_car_library(4, 1.4, 0.4).unwrap();
        assert_eq!(lib.len(), 49);
        let steers: Vec<f64> = lib.sequences().iter().map(|s| s[0][1]).collect();
        assert_eq!(steers[3 * 7], 0.0);
        assert_eq!(steers[0], -0.4);
        assert_eq!(steers[48], 0.4);

        let dynamics = Dynamics::Unicycle { wheelbase: 0.3 };
        let start = VehicleState::at_rest(Vec2::ZERO, 0.0);
        for speed_i in 0..7 {
            let left = lib.get(6 * 7 + speed_i);
            let right = lib.get(speed_i);
            let (mut a, mut b) = (start, start);
            for (ul, ur) in left.iter().zip(right) {
                a = step(&dynamics, &a, *ul, 0.5).unwrap();
                b = step(&dynamics, &b, *ur, 0.5).unwrap();
                assert!((a.position.x - b.position.x).abs() < 1e-12);
                assert!((a.position.y + b.position.y).abs() < 1e-12);
                assert!((a.heading + b.heading).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_risk_sequence_cost_is_task_cost() {
        let lib = build_quadrotor_library(3, 1.0).unwrap();
        let ctx = PlannerContext {
            library: &lib,
            cost: cost_params(10.0),
            dynamics: Dynamics::VelocityIntegrator,
            delta_t: 0.2,
        };
        // logistic(-1e3) underflows to exactly 0.
        let model = FixedStats(stats(-1e3, 0.0));
        let state = VehicleState::at_rest(Vec2::ZERO, 0.0);
        let seq = lib.get(57);
        let c = evaluate_sequence(&ctx, &state, &blank(), seq, &model, &mut candidate_rng(0, 0))
            .unwrap();
        let traj = roll_out(&ctx.dynamics, &state, seq, 0.2).unwrap();
        let task: f64 = traj.iter().map(|s| task_cost(s, seq[0], &ctx.cost)).sum();
        assert_eq!(c, task);
    }

    #[test]
    fn certain_collision_prefers_the_slower_candidate() {
        // Two speeds symmetric about the 0.5 m/s target have equal task cost.
        let lib = ActionLibrary::new(
            Profile::QuadrotorSim,
            vec![vec![[0.7, 0.0]; 3], vec![[0.3, 0.0]; 3]],
        )
        .unwrap();
        let mut cost = cost_params(1.0);
        cost.task_cost_terminal_only = true;
        let ctx = PlannerContext {
            library: &lib,
            cost,
            dynamics: Dynamics::VelocityIntegrator,
            delta_t: 0.2,
        };
        let model = FixedStats(stats(1e3, 0.0));
        let state = VehicleState::at_rest(Vec2::ZERO, 0.0);
        let fast = evaluate_sequence(&ctx, &state, &blank(), lib.get(0), &model, &mut candidate_rng(0, 0)).unwrap();
        let slow = evaluate_sequence(&ctx, &state, &blank(), lib.get(1), &model, &mut candidate_rng(0, 1)).unwrap();
        assert!(slow < fast);
        let sel = mpc_select(&ctx, &state, &blank(), &model, &mut candidate_rng(0, 0)).unwrap();
        assert_eq!(sel.index, 1);
    }

    #[test]
    fn hand_built_candidates_match_manual_cost() {
        let seqs = vec![
            vec![[0.5, 0.0]; 2],
            vec![[0.4, 0.3]; 2],
            vec![[0.1, 0.0]; 2],
        ];
        let lib = ActionLibrary::new(Profile::QuadrotorSim, seqs).unwrap();
        let mut cost = cost_params(2.0);
        cost.estimator_mode = EstimatorMode::RiskAverse;
        cost.lambda_std = 1.5;
        let ctx = PlannerContext {
            library: &lib,
            cost,
            dynamics: Dynamics::VelocityIntegrator,
            delta_t: 0.2,
        };
        let table = TableStats(vec![
            ([0.5, 0.0], stats(0.2, 0.4)),
            ([0.4, 0.3], stats(-1.0, 0.2)),
            ([0.1, 0.0], stats(-3.0, 1.0)),
        ]);
        let l = |y: f64| 1.0 / (1.0 + (-y).exp());
        // States: rest, then the command twice. Task terms: 0.25 + 2·‖u − (0.5, 0)‖².
        let expected = [
            0.25 + 0.0 + l(0.2 + 1.5 * 0.4) * 2.0 * 0.25,
            0.25 + 2.0 * (0.01 + 0.09) + l(-1.0 + 1.5 * 0.2) * 2.0 * 0.25,
            0.25 + 2.0 * 0.16 + l(-3.0 + 1.5) * 2.0 * 0.01,
        ];
        let state = VehicleState::at_rest(Vec2::new(1.0, 1.0), 0.0);
        let sel = mpc_select(&ctx, &state, &blank(), &table, &mut candidate_rng(9, 0)).unwrap();
        for (got, want) in sel.costs.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(sel.index, argmin_first(&expected).unwrap());
    }

    #[test]
    fn single_candidate_and_ties() {
        let lib = ActionLibrary::new(Profile::QuadrotorSim, vec![vec![[0.2, 0.1]; 4]]).unwrap();
        let ctx = PlannerContext {
            library: &lib,
            cost: cost_params(1.0),
            dynamics: Dynamics::VelocityIntegrator,
            delta_t: 0.2,
        };
        let sel = mpc_select(
            &ctx,
            &VehicleState::at_rest(Vec2::ZERO, 0.0),
            &blank(),
            &FixedStats(stats(0.0, 0.0)),
            &mut candidate_rng(0, 0),
        )
        .unwrap();
        assert_eq!((sel.index, sel.control), (0, [0.2, 0.1]));

        assert_eq!(argmin_first(&[3.0, 3.0, 3.0]), Some(0));
        assert_eq!(argmin_first(&[3.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmin_first(&[]), None);
    }

    #[test]
    fn ensemble_batch_path_matches_per_candidate_queries() {
        let lib = build_quadrotor_library(2, 1.0).unwrap();
        let encoding = InputEncoding {
            pixels: 4,
            horizon: 2,
            include_state: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = Arch::standard(encoding.input_dim()).unwrap();
        let models = (0..3).map(|_| MlpParams::init(arch, &mut rng)).collect();
        let cfg = EnsembleConfig {
            bootstraps: 3,
            keep_prob: 0.8,
            eval_passes: 2,
            train: TrainConfig::default(),
        };
        let ensemble = BootstrapEnsemble::from_models(models, cfg).unwrap();
        let model = EnsembleModel {
            ensemble: &ensemble,
            encoding,
        };
        let obs = Observation {
            width: 4,
            height: 1,
            pixels: vec![0.0, 0.3, 0.6, 0.0],
        };
        let state = VehicleState::at_rest(Vec2::new(-1.0, 0.2), 0.0);
        let batch = model.stats_batch(&state, &lib, &obs, 42).unwrap();
        for (i, seq) in lib.sequences().iter().enumerate() {
            let single = model.stats(&state, seq, &obs, &mut candidate_rng(42, i)).unwrap();
            assert_eq!(single, batch[i]);
        }
    }
}
