//! Task cost, velocity-dependent collision cost, and the risk-adjusted MPC
//! sequence cost.

use serde::{Deserialize, Serialize};

use crate::ensemble::{const_penalty_prob, risk_averse_prob, PredictionStats};
use crate::error::{ensure, Result};
use crate::nn::logistic;
use crate::sim::{Control, Vec2, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskObjective {
    /// Track velocity `(target_speed, 0)`: fly forward along +x.
    Forward,
    /// Track the speed magnitude only, in any direction.
    AnyDirection,
}

/// How prediction statistics become a collision probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// `logistic(mean + λ_std · std)`
    RiskAverse,
    /// `logistic(mean + λ_const)`
    ConstPenalty,
    /// `logistic(mean)`
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub lambda_coll: f64,
    pub lambda_std: f64,
    pub lambda_const: f64,
    /// m/s
    pub target_speed: f64,
    pub estimator_mode: EstimatorMode,
    pub objective: TaskObjective,
    /// Charge the task cost at the last horizon state only.
    pub task_cost_terminal_only: bool,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.lambda_coll >= 0.0 && self.lambda_std >= 0.0 && self.lambda_const >= 0.0,
            "cost weights must be nonnegative (coll {}, std {}, const {})",
            self.lambda_coll,
            self.lambda_std,
            self.lambda_const
        );
        ensure!(
            self.target_speed > 0.0,
            "target speed must be positive, got {}",
            self.target_speed
        );
        Ok(())
    }

    /// Collision probability under the configured estimator.
    pub fn collision_probability(&self, stats: &PredictionStats) -> Result<f64> {
        match self.estimator_mode {
            EstimatorMode::RiskAverse => risk_averse_prob(stats, self.lambda_std),
            EstimatorMode::ConstPenalty => const_penalty_prob(stats, self.lambda_const),
            EstimatorMode::Plain => Ok(logistic(stats.mean)),
        }
    }
}

/// Squared velocity tracking error for the configured objective.
pub fn task_cost(state: &VehicleState, _control: Control, params: &CostParams) -> f64 {
    match params.objective {
        TaskObjective::Forward => (state.velocity - Vec2::new(params.target_speed, 0.0)).norm_sq(),
        TaskObjective::AnyDirection => (state.velocity.norm() - params.target_speed).powi(2),
    }
}

/// `λ_coll · ‖vel‖²`: stationary contact is free, fast impacts are expensive.
pub fn collision_cost(velocity: Vec2, lambda_coll: f64) -> Result<f64> {
    ensure!(
        lambda_coll >= 0.0,
        "lambda_coll must be >= 0, got {lambda_coll}"
    );
    Ok(lambda_coll * velocity.norm_sq())
}

/// Task cost over the `H + 1` horizon states plus `p_coll` times the collision
/// cost at the terminal state. `states[0]` is the current state; `controls[h]`
/// moves `states[h]` to `states[h + 1]`.
pub fn total_sequence_cost(
    states: &[VehicleState],
    controls: &[Control],
    p_coll: f64,
    params: &CostParams,
) -> Result<f64> {
    ensure!(
        (0.0..=1.0).contains(&p_coll),
        "collision probability must lie in [0, 1], got {p_coll}"
    );
    ensure!(
        !controls.is_empty() && states.len() == controls.len() + 1,
        "expected {} states for {} controls, got {}",
        controls.len() + 1,
        controls.len(),
        states.len()
    );
    let last = states[states.len() - 1];
    let last_control = controls[controls.len() - 1];
    let task = if params.task_cost_terminal_only {
        task_cost(&last, last_control, params)
    } else {
        states
            .iter()
            .enumerate()
            .map(|(h, s)| task_cost(s, controls[h.min(controls.len() - 1)], params))
            .sum()
    };
    Ok(task + p_coll * collision_cost(last.velocity, params.lambda_coll)?)
}
