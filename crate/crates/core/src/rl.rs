//! The outer learning loop: MPC rollouts, subsequence labeling, data
//! aggregation and ensemble retraining.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{CostParams, TaskObjective};
use crate::encoding::InputEncoding;
use crate::ensemble::{BootstrapEnsemble, TrainReport};
use crate::error::{ensure, Error, Result};
use crate::planner::{mpc_select, ActionLibrary, EnsembleModel, PlannerContext, Selection};
use crate::sim::{roll_out, Control, Observation, Vec2, VehicleState, World};

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const ROLLOUT_LOG_FORMAT_VERSION: u32 = 1;

/// Where rollouts begin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartDistribution {
    /// At rest at `(x, y)` with `y` uniform in `[y_min, y_max]`.
    Lateral {
        x: f64,
        y_min: f64,
        y_max: f64,
        heading: f64,
    },
    /// Rollout `i` starts from `states[i % len]`.
    Cycle { states: Vec<VehicleState> },
}

impl StartDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            StartDistribution::Lateral { y_min, y_max, .. } => {
                ensure!(y_min <= y_max, "start range has y_min > y_max")
            }
            StartDistribution::Cycle { states } => {
                ensure!(!states.is_empty(), "start cycle is empty")
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> VehicleState {
        match self {
            StartDistribution::Lateral {
                x,
                y_min,
                y_max,
                heading,
            } => {
                let y = if y_min == y_max {
                    *y_min
                } else {
                    rng.random_range(*y_min..=*y_max)
                };
                VehicleState::at_rest(Vec2::new(*x, y), *heading)
            }
            StartDistribution::Cycle { states } => states[index % states.len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Collision,
    /// Crossed the goal line.
    Goal,
    MaxSteps,
}

/// One closed-loop episode. `states[0]` is the start; `controls[t]` was chosen
/// from `observations[t]` and moved `states[t]` to `states[t + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub states: Vec<VehicleState>,
    pub controls: Vec<Control>,
    pub observations: Vec<Observation>,
    pub chosen: Vec<usize>,
    pub chosen_costs: Vec<f64>,
    /// Full candidate cost vectors; empty unless requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidate_costs: Vec<Vec<f64>>,
    pub collided: bool,
    /// `‖velocity‖` at the colliding state, m/s.
    pub collision_speed: Option<f64>,
    pub termination: Termination,
}

impl Rollout {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.controls.len();
        ensure!(
            self.states.len() == n + 1
                && self.observations.len() == n
                && self.chosen.len() == n
                && self.chosen_costs.len() == n
                && (self.candidate_costs.is_empty() || self.candidate_costs.len() == n),
            "rollout arrays have inconsistent lengths"
        );
        ensure!(
            self.collided == self.collision_speed.is_some()
                && self.collided == (self.termination == Termination::Collision),
            "collision flag, speed and termination disagree"
        );
        Ok(())
    }
}

/// A controller choice plus its bookkeeping.
pub type Decision = Selection;

/// Steps `policy` from `init` until a collision, the goal line, or `max_steps`.
pub fn rollout<P>(world: &World, mut policy: P, init: VehicleState, max_steps: usize) -> Result<Rollout>
where
    P: FnMut(&VehicleState, &Observation) -> Result<Decision>,
{
    ensure!(max_steps >= 1, "max_steps must be >= 1");
    let mut out = Rollout {
        states: vec![init],
        controls: Vec::new(),
        observations: Vec::new(),
        chosen: Vec::new(),
        chosen_costs: Vec::new(),
        candidate_costs: Vec::new(),
        collided: false,
        collision_speed: None,
        termination: Termination::MaxSteps,
    };
    if world.collides(&init) {
        out.collided = true;
        out.collision_speed = Some(init.speed());
        out.termination = Termination::Collision;
        return Ok(out);
    }
    let mut state = init;
    for _ in 0..max_steps {
        let obs = world.observe(&state)?;
        let decision = policy(&state, &obs)?;
        state = world.step(&state, decision.control)?;
        out.observations.push(obs);
        out.controls.push(decision.control);
        out.chosen.push(decision.index);
        out.chosen_costs.push(decision.costs[decision.index]);
        out.candidate_costs.push(decision.costs);
        out.states.push(state);
        if world.collides(&state) {
            out.collided = true;
            out.collision_speed = Some(state.speed());
            out.termination = Termination::Collision;
            break;
        }
        if world.reached_goal(&state) {
            out.termination = Termination::Goal;
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Demonstration,
    Iteration(usize),
}

/// Training tuple: (state, observation, `H` controls) → collided within `H` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledSample {
    pub state: VehicleState,
    /// `H · 2` values, step-major.
    pub controls: Vec<f64>,
    pub observation: Vec<f64>,
    pub label: u8,
    pub provenance: Provenance,
}

impl LabeledSample {
    pub fn input(&self, encoding: &InputEncoding) -> Result<Vec<f64>> {
        ensure!(
            self.observation.len() == encoding.pixels && self.controls.len() == 2 * encoding.horizon,
            "sample does not match the input encoding"
        );
        let mut out = Vec::with_capacity(encoding.input_dim());
        out.extend_from_slice(&self.observation);
        if encoding.include_state {
            let s = &self.state;
            out.extend_from_slice(&[
                s.position.x,
                s.position.y,
                s.velocity.x,
                s.velocity.y,
                s.heading,
            ]);
        }
        out.extend_from_slice(&self.controls);
        Ok(out)
    }
}

/// Slices a rollout into one sample per decision step. The label at `t` is 1
/// iff the rollout collided at a step in `(t, t + horizon]`. Windows running
/// past a collision or goal ending repeat the last executed control; windows
/// running past a `MaxSteps` ending are dropped.
pub fn extract_samples(rollout: &Rollout, horizon: usize, provenance: Provenance) -> Result<Vec<LabeledSample>> {
    ensure!(horizon >= 1, "horizon must be >= 1");
    rollout.validate()?;
    let n = rollout.steps();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let end = t + horizon;
        if end > n && rollout.termination == Termination::MaxSteps {
            break;
        }
        let last = rollout.controls[n - 1];
        let mut controls = Vec::with_capacity(2 * horizon);
        for k in t..end {
            controls.extend_from_slice(rollout.controls.get(k).unwrap_or(&last));
        }
        out.push(LabeledSample {
            state: rollout.states[t],
            controls,
            observation: rollout.observations[t].pixels.clone(),
            label: u8::from(rollout.collided && n <= end),
            provenance,
        });
    }
    Ok(out)
}

/// Append-only collection of labeled samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    format_version: u32,
    kind: String,
}

const DATASET_KIND: &str = "labeled_samples";

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn extend(&mut self, samples: impl IntoIterator<Item = LabeledSample>) {
        self.samples.extend(samples);
    }

    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.label == 1).count()
    }

    /// Encoded inputs and labels for training.
    pub fn training_arrays(&self, encoding: &InputEncoding) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let inputs = self
            .samples
            .iter()
            .map(|s| s.input(encoding))
            .collect::<Result<Vec<_>>>()?;
        let labels = self.samples.iter().map(|s| f64::from(s.label)).collect();
        Ok((inputs, labels))
    }

    /// Writes a header line followed by one JSON sample per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        write_header(&mut buf)?;
        write_samples(&mut buf, &self.samples)?;
        crate::io::write_atomic(path, &buf)
    }

    /// Appends samples to a dataset file, creating it with a header if absent.
    pub fn append_to(path: &Path, samples: &[LabeledSample]) -> Result<()> {
        let exists = path.exists();
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut buf = Vec::new();
        if !exists {
            write_header(&mut buf)?;
        }
        write_samples(&mut buf, samples)?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))?;
        file.sync_data().map_err(|e| Error::io(path, e))
    }

    /// Reads a dataset file; `limit` keeps only the first `limit` samples.
    pub fn load(path: &Path, limit: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config(format!("{}: empty dataset file", path.display())))?
            .map_err(|e| Error::io(path, e))?;
        let header: DatasetHeader = serde_json::from_str(&header)?;
        if header.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                kind: "dataset",
                found: header.format_version,
                expected: DATASET_FORMAT_VERSION,
            });
        }
        ensure!(header.kind == DATASET_KIND, "unexpected dataset kind {:?}", header.kind);
        let mut samples = Vec::new();
        for line in lines {
            if limit.is_some_and(|l| samples.len() >= l) {
                break;
            }
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let s: LabeledSample = serde_json::from_str(&line)?;
            ensure!(s.label <= 1, "labels must be 0 or 1");
            samples.push(s);
        }
        if let Some(l) = limit {
            ensure!(samples.len() == l, "dataset holds {} samples, expected {l}", samples.len());
        }
        Ok(Self { samples })
    }
}

fn write_header(buf: &mut Vec<u8>) -> Result<()> {
    serde_json::to_writer(
        &mut *buf,
        &DatasetHeader {
            format_version: DATASET_FORMAT_VERSION,
            kind: DATASET_KIND.to_owned(),
        },
    )?;
    buf.push(b'\n');
    Ok(())
}

fn write_samples(buf: &mut Vec<u8>, samples: &[LabeledSample]) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut *buf, s)?;
        buf.push(b'\n');
    }
    Ok(())
}

/// Per-iteration rollout record for replay and debugging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutLog {
    pub format_version: u32,
    pub iteration: usize,
    pub world: World,
    pub rollouts: Vec<Rollout>,
}

impl RolloutLog {
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let log: RolloutLog = serde_json::from_slice(&bytes)?;
        if log.format_version != ROLLOUT_LOG_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                kind: "rollout log",
                found: log.format_version,
                expected: ROLLOUT_LOG_FORMAT_VERSION,
            });
        }
        Ok(log)
    }

    /// Re-simulates every rollout from its start and recorded controls and
    /// checks states, collision outcome and termination. Returns the number of
    /// rollouts checked.
    pub fn verify(&self) -> Result<usize> {
        self.world.validate()?;
        for (i, r) in self.rollouts.iter().enumerate() {
            r.validate()?;
            let states = roll_out(&self.world.dynamics, &r.states[0], &r.controls, self.world.delta_t)?;
            ensure!(states == r.states, "rollout {i}: replayed states diverge");
            let first_hit = states.iter().position(|s| self.world.collides(s));
            let expected_hit = r.collided.then_some(r.steps());
            ensure!(first_hit == expected_hit, "rollout {i}: collision replay mismatch");
            let goal_hit = states[1..].iter().position(|s| self.world.reached_goal(s)).map(|k| k + 1);
            let expected_end = match r.termination {
                Termination::Goal => goal_hit == Some(r.steps()),
                _ => goal_hit.is_none(),
            };
            ensure!(expected_end, "rollout {i}: termination replay mismatch");
            if r.collided {
                ensure!(
                    r.collision_speed == Some(states[r.steps()].speed()),
                    "rollout {i}: collision speed mismatch"
                );
            }
        }
        Ok(self.rollouts.len())
    }
}

/// Fixed ingredients of the learning loop.
#[derive(Debug, Clone)]
pub struct LoopSetup {
    pub world: World,
    pub library: ActionLibrary,
    pub cost: CostParams,
    pub encoding: InputEncoding,
    pub start: StartDistribution,
    pub rollouts_per_iteration: usize,
    pub max_steps: usize,
    pub record_candidate_costs: bool,
}

impl LoopSetup {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.cost.validate()?;
        self.start.validate()?;
        ensure!(self.max_steps >= 1, "max_steps must be >= 1");
        ensure!(
            self.library.horizon() == self.encoding.horizon,
            "library horizon {} differs from encoding horizon {}",
            self.library.horizon(),
            self.encoding.horizon
        );
        ensure!(
            self.world.camera.pixel_count() == self.encoding.pixels,
            "camera produces {} pixels, encoding expects {}",
            self.world.camera.pixel_count(),
            self.encoding.pixels
        );
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub crash_speeds: Vec<f64>,
    /// Mean task-direction speed over non-colliding visited states, m/s.
    pub task_speed: f64,
    pub successes: Vec<bool>,
    pub samples_added: usize,
    pub dataset_size: usize,
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub metrics: IterationMetrics,
    pub rollouts: Vec<Rollout>,
    pub new_samples: Vec<LabeledSample>,
    pub train: Option<TrainReport>,
}

/// Task-direction speed of one state: forward component or speed magnitude.
pub fn task_direction_speed(state: &VehicleState, objective: TaskObjective) -> f64 {
    match objective {
        TaskObjective::Forward => state.velocity.x,
        TaskObjective::AnyDirection => state.speed(),
    }
}

/// Mean task-direction speed over every visited state after the start,
/// excluding colliding states. `NaN` when no such state exists.
pub fn mean_task_speed(rollouts: &[Rollout], objective: TaskObjective) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in rollouts {
        let n = r.steps() - usize::from(r.collided && r.steps() > 0);
        for s in &r.states[1..=n] {
            sum += task_direction_speed(s, objective);
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Makes an ensemble usable before the first sampling pass: train on the
/// dataset if it has data, otherwise fall back to the random initialization.
pub fn prepare_ensemble<R: Rng + ?Sized>(
    setup: &LoopSetup,
    ensemble: &mut BootstrapEnsemble,
    dataset: &Dataset,
    rng: &mut R,
) -> Result<Option<TrainReport>> {
    if ensemble.is_ready() {
        return Ok(None);
    }
    if dataset.is_empty() {
        ensemble.accept_untrained_prior();
        return Ok(None);
    }
    let (inputs, labels) = dataset.training_arrays(&setup.encoding)?;
    ensemble.train(&inputs, &labels, rng).map(Some)
}

/// One sampling-and-retraining round: `rollouts_per_iteration` MPC rollouts,
/// labeling, aggregation into `dataset`, then one training round on all data.
pub fn run_iteration<R: Rng + ?Sized>(
    setup: &LoopSetup,
    ensemble: &mut BootstrapEnsemble,
    dataset: &mut Dataset,
    iteration: usize,
    rng: &mut R,
) -> Result<IterationOutcome> {
    setup.validate()?;
    prepare_ensemble(setup, ensemble, dataset, rng)?;
    let seeds: Vec<u64> = (0..setup.rollouts_per_iteration).map(|_| rng.random()).collect();
    let train_seed: u64 = rng.random();

    let ctx = PlannerContext {
        library: &setup.library,
        cost: setup.cost,
        dynamics: setup.world.dynamics,
        delta_t: setup.world.delta_t,
    };
    let model = EnsembleModel {
        ensemble,
        encoding: setup.encoding,
    };
    let mut rollouts = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let init = setup.start.sample(i, &mut r);
            rollout(
                &setup.world,
                |s, o| mpc_select(&ctx, s, o, &model, &mut r),
                init,
                setup.max_steps,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if !setup.record_candidate_costs {
        for r in &mut rollouts {
            r.candidate_costs.clear();
        }
    }

    let mut new_samples = Vec::new();
    for r in &rollouts {
        new_samples.extend(extract_samples(r, setup.encoding.horizon, Provenance::Iteration(iteration))?);
    }
    dataset.extend(new_samples.iter().cloned());

    let train = if rollouts.is_empty() || dataset.is_empty() {
        None
    } else {
        let (inputs, labels) = dataset.training_arrays(&setup.encoding)?;
        Some(ensemble.train(&inputs, &labels, &mut ChaCha8Rng::seed_from_u64(train_seed))?)
    };

    let metrics = IterationMetrics {
        iteration,
        crash_speeds: rollouts.iter().filter_map(|r| r.collision_speed).collect(),
        task_speed: mean_task_speed(&rollouts, setup.cost.objective),
        successes: rollouts.iter().map(|r| !r.collided).collect(),
        samples_added: new_samples.len(),
        dataset_size: dataset.len(),
    };
    Ok(IterationOutcome {
        metrics,
        rollouts,
        new_samples,
        train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Camera, Circle, Dynamics, Environment, Rect};

    fn world(circles: Vec<Circle>) -> World {
        World {
            environment: Environment::new(
                Rect {
                    min: Vec2::new(-50.0, -50.0),
                    max: Vec2::new(50.0, 50.0),
                },
                circles,
                vec![],
            )
            .unwrap(),
            dynamics: Dynamics::VelocityIntegrator,
            camera: Camera {
                width: 4,
                height: 1,
                fov: 1.0,
                max_depth: 5.0,
            },
            body_radius: 0.1,
            delta_t: 0.2,
            goal_x: None,
        }
    }

    fn constant(u: Control) -> impl FnMut(&VehicleState, &Observation) -> Result<Decision> {
        move |_, _| {
            Ok(Selection {
                control: u,
                index: 0,
                costs: vec![0.0],
            })
        }
    }

    /// Synthetic rollout with `n` steps; `collided` marks the last state.
    fn synthetic(n: usize, termination: Termination) -> Rollout {
        let states: Vec<_> = (0..=n)
            .map(|k| VehicleState {
                position: Vec2::new(k as f64, 0.0),
                velocity: Vec2::new(1.0, 0.0),
                heading: 0.0,
            })
            .collect();
        let collided = termination == Termination::Collision;
        Rollout {
            states,
            controls: (0..n).map(|k| [k as f64, -(k as f64)]).collect(),
            observations: (0..n)
                .map(|k| Observation {
                    width: 1,
                    height: 1,
                    pixels: vec![k as f64],
                })
                .collect(),
            chosen: vec![0; n],
            chosen_costs: vec![0.0; n],
            candidate_costs: vec![],
            collided,
            collision_speed: collided.then_some(1.0),
            termination,
        }
    }

    #[test]
    fn collision_free_goal_rollout_gives_all_negative_samples() {
        let s = extract_samples(&synthetic(10, Termination::Goal), 4, Provenance::Iteration(0)).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|x| x.label == 0 && x.controls.len() == 8));
    }

    #[test]
    fn max_steps_tails_are_dropped() {
        let s = extract_samples(&synthetic(10, Termination::MaxSteps), 4, Provenance::Iteration(0)).unwrap();
        assert_eq!(s.len(), 7);
    }

    #[test]
    fn collision_at_step_five_labels_the_preceding_window() {
        let r = synthetic(5, Termination::Collision);
        let s = extract_samples(&r, 4, Provenance::Iteration(3)).unwrap();
        let labels: Vec<u8> = s.iter().map(|x| x.label).collect();
        assert_eq!(labels, vec![0, 1, 1, 1, 1]);
        // t = 3 sees controls 3, 4 then the padded final control twice.
        assert_eq!(s[3].controls, vec![3.0, -3.0, 4.0, -4.0, 4.0, -4.0, 4.0, -4.0]);
        assert_eq!(s[3].observation, vec![3.0]);
        assert_eq!(s[3].provenance, Provenance::Iteration(3));
    }

    #[test]
    fn unit_horizon_label_is_next_step_indicator() {
        let r = synthetic(6, Termination::Collision);
        let s = extract_samples(&r, 1, Provenance::Demonstration).unwrap();
        for (t, x) in s.iter().enumerate() {
            assert_eq!(x.label, u8::from(t + 1 == 6));
        }
    }

    #[test]
    fn start_inside_obstacle_gives_empty_rollout() {
        let w = world(vec![Circle {
            center: Vec2::ZERO,
            radius: 1.0,
        }]);
        let init = VehicleState {
            position: Vec2::ZERO,
            velocity: Vec2::new(0.3, 0.4),
            heading: 0.0,
        };
        let r = rollout(&w, constant([1.0, 0.0]), init, 10).unwrap();
        assert_eq!(r.steps(), 0);
        assert_eq!(r.collision_speed, Some(0.5));
        assert!(extract_samples(&r, 3, Provenance::Demonstration).unwrap().is_empty());
    }

    #[test]
    fn empty_world_runs_to_max_steps() {
        let r = rollout(&world(vec![]), constant([0.5, 0.1]), VehicleState::at_rest(Vec2::ZERO, 0.0), 12).unwrap();
        assert_eq!(r.steps(), 12);
        assert_eq!(r.termination, Termination::MaxSteps);
        assert!(!r.collided);
        r.validate().unwrap();
    }

    #[test]
    fn collision_step_matches_time_to_contact() {
        // Body 0.1 + circle 0.5 at x = 3 from origin at 0.8 m/s: contact at
        // distance 2.4, i.e. t = 3.0 s = 15 steps of 0.2 s.
        let w = world(vec![Circle {
            center: Vec2::new(3.0, 0.0),
            radius: 0.5,
        }]);
        let r = rollout(&w, constant([0.8, 0.0]), VehicleState::at_rest(Vec2::ZERO, 0.0), 100).unwrap();
        let contact_time = 2.4 / 0.8;
        let t_hit = r.steps() as f64 * w.delta_t;
        assert!(r.collided);
        assert!(t_hit >= contact_time - 1e-9 && t_hit < contact_time + w.delta_t);
        assert!((r.collision_speed.unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn goal_line_ends_rollout() {
        let mut w = world(vec![]);
        w.goal_x = Some(0.99);
        let r = rollout(&w, constant([0.5, 0.0]), VehicleState::at_rest(Vec2::ZERO, 0.0), 100).unwrap();
        assert_eq!(r.termination, Termination::Goal);
        assert_eq!(r.steps(), 10);
    }

    #[test]
    fn dataset_file_round_trip_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let a = extract_samples(&synthetic(5, Termination::Collision), 2, Provenance::Iteration(0)).unwrap();
        let b = extract_samples(&synthetic(3, Termination::Goal), 2, Provenance::Demonstration).unwrap();
        Dataset::append_to(&path, &a).unwrap();
        Dataset::append_to(&path, &b).unwrap();
        let d = Dataset::load(&path, None).unwrap();
        assert_eq!(d.len(), a.len() + b.len());
        assert_eq!(&d.samples()[..a.len()], &a[..]);
        assert_eq!(Dataset::load(&path, Some(2)).unwrap().len(), 2);
        assert!(Dataset::load(&path, Some(100)).is_err());

        let mut whole = Dataset::new();
        whole.extend(a.clone());
        let p2 = dir.path().join("e.jsonl");
        whole.save(&p2).unwrap();
        assert_eq!(Dataset::load(&p2, None).unwrap(), whole);

        std::fs::write(&p2, "{\"format_version\":9,\"kind\":\"labeled_samples\"}\n").unwrap();
        assert!(matches!(Dataset::load(&p2, None), Err(Error::FormatVersion { .. })));
    }

    #[test]
    fn rollout_log_replay_detects_tampering() {
        let w = world(vec![Circle {
            center: Vec2::new(2.0, 0.0),
            radius: 0.3,
        }]);
        let r = rollout(&w, constant([0.7, 0.05]), VehicleState::at_rest(Vec2::ZERO, 0.0), 40).unwrap();
        let mut log = RolloutLog {
            format_version: ROLLOUT_LOG_FORMAT_VERSION,
            iteration: 0,
            world: w,
            rollouts: vec![r],
        };
        assert_eq!(log.verify().unwrap(), 1);
        log.rollouts[0].controls[2][0] += 1e-3;
        assert!(log.verify().is_err());
    }

    #[test]
    fn lateral_starts_stay_in_range() {
        let d = StartDistribution::Lateral {
            x: -1.0,
            y_min: -0.3,
            y_max: 0.3,
            heading: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..200 {
            let s = d.sample(i, &mut rng);
            assert_eq!(s.position.x, -1.0);
            assert!(s.position.y.abs() <= 0.3);
            assert_eq!(s.speed(), 0.0);
        }
        let c = StartDistribution::Cycle {
            states: vec![VehicleState::at_rest(Vec2::ZERO, 0.0), VehicleState::at_rest(Vec2::new(1.0, 0.0), 0.0)],
        };
        assert_eq!(c.sample(3, &mut rng).position.x, 1.0);
    }
}
