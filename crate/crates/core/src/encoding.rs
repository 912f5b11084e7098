//! Network input layout: `[observation pixels | state (optional) | flattened controls]`.
//!
//! Everything fixed at a planning step comes first so the planner can share the
//! first-layer work across all candidate sequences.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::sim::{Control, Observation, VehicleState};

/// Position (2), velocity (2), heading (1).
pub const STATE_FEATURES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputEncoding {
    pub pixels: usize,
    pub horizon: usize,
    pub include_state: bool,
}

impl InputEncoding {
    pub fn input_dim(&self) -> usize {
        self.prefix_dim() + 2 * self.horizon
    }

    pub fn prefix_dim(&self) -> usize {
        self.pixels + if self.include_state { STATE_FEATURES } else { 0 }
    }

    /// The per-step part shared by every candidate sequence.
    pub fn prefix(&self, state: &VehicleState, observation: &Observation) -> Result<Vec<f64>> {
        ensure!(
            observation.pixels.len() == self.pixels,
            "observation has {} pixels, encoding expects {}",
            observation.pixels.len(),
            self.pixels
        );
        let mut out = Vec::with_capacity(self.input_dim());
        out.extend_from_slice(&observation.pixels);
        if self.include_state {
            out.extend_from_slice(&[
                state.position.x,
                state.position.y,
                state.velocity.x,
                state.velocity.y,
                state.heading,
            ]);
        }
        Ok(out)
    }

    pub fn controls(&self, seq: &[Control]) -> Result<Vec<f64>> {
        ensure!(
            seq.len() == self.horizon,
            "control sequence has {} steps, horizon is {}",
            seq.len(),
            self.horizon
        );
        Ok(seq.iter().flatten().copied().collect())
    }

    pub fn encode(
        &self,
        state: &VehicleState,
        seq: &[Control],
        observation: &Observation,
    ) -> Result<Vec<f64>> {
        let mut out = self.prefix(state, observation)?;
        out.extend(self.controls(seq)?);
        Ok(out)
    }
}
