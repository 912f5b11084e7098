//! The two simulated vehicle setups and their default parameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cost::TaskObjective;
use crate::error::Result;
use crate::planner::{build_car_library, build_quadrotor_library, ActionLibrary};
use crate::rl::StartDistribution;
use crate::sim::{Camera, Circle, Dynamics, Environment, Rect, Segment, Vec2, VehicleState, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Velocity-commanded quadrotor passing a single 0.2 m cylinder.
    QuadrotorSim,
    /// Speed/steering car in a walled corridor with one obstacle.
    CarSim,
}

pub const QUAD_OBSTACLE_RADIUS: f64 = 0.2;

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::QuadrotorSim => "quadrotor_sim",
            Profile::CarSim => "car_sim",
        }
    }

    pub fn horizon(self) -> usize {
        match self {
            Profile::QuadrotorSim => 6,
            Profile::CarSim => 4,
        }
    }

    pub fn delta_t(self) -> f64 {
        match self {
            Profile::QuadrotorSim => 0.2,
            Profile::CarSim => 0.5,
        }
    }

    pub fn target_speed(self) -> f64 {
        match self {
            Profile::QuadrotorSim => 0.5,
            Profile::CarSim => 1.2,
        }
    }

    pub fn objective(self) -> TaskObjective {
        match self {
            Profile::QuadrotorSim => TaskObjective::Forward,
            Profile::CarSim => TaskObjective::AnyDirection,
        }
    }

    /// Fastest command in the action library, m/s.
    pub fn max_speed(self) -> f64 {
        match self {
            Profile::QuadrotorSim => 1.0,
            Profile::CarSim => 1.4,
        }
    }

    pub fn max_steer(self) -> f64 {
        0.4
    }

    pub fn max_steps(self) -> usize {
        match self {
            Profile::QuadrotorSim => 30,
            Profile::CarSim => 10,
        }
    }

    pub fn iterations(self) -> usize {
        match self {
            Profile::QuadrotorSim => 20,
            Profile::CarSim => 10,
        }
    }

    pub fn rollouts_per_iteration(self) -> usize {
        20
    }

    pub fn library(self, horizon: usize) -> Result<ActionLibrary> {
        match self {
            Profile::QuadrotorSim => build_quadrotor_library(horizon, self.max_speed()),
            Profile::CarSim => build_car_library(horizon, self.max_speed(), self.max_steer()),
        }
    }

    pub fn world(self, delta_t: f64) -> World {
        match self {
            Profile::QuadrotorSim => World {
                environment: Environment {
                    bounds: Rect {
                        min: Vec2::new(-2.0, -2.0),
                        max: Vec2::new(2.0, 2.0),
                    },
                    circles: vec![Circle {
                        center: Vec2::ZERO,
                        radius: QUAD_OBSTACLE_RADIUS,
                    }],
                    segments: vec![],
                },
                dynamics: Dynamics::VelocityIntegrator,
                camera: Camera {
                    width: 16,
                    height: 16,
                    fov: PI / 2.0,
                    max_depth: 2.0,
                },
                body_radius: 0.05,
                delta_t,
                goal_x: Some(0.6),
            },
            Profile::CarSim => {
                let wall = |y| Segment {
                    a: Vec2::new(-1.0, y),
                    b: Vec2::new(7.0, y),
                };
                World {
                    environment: Environment {
                        bounds: Rect {
                            min: Vec2::new(-1.0, -1.0),
                            max: Vec2::new(7.0, 1.0),
                        },
                        circles: vec![Circle {
                            center: Vec2::new(3.0, 0.0),
                            radius: 0.25,
                        }],
                        segments: vec![wall(-0.8), wall(0.8)],
                    },
                    dynamics: Dynamics::Unicycle { wheelbase: 0.3 },
                    camera: Camera {
                        width: 32,
                        height: 18,
                        fov: PI / 2.0,
                        max_depth: 3.0,
                    },
                    body_radius: 0.1,
                    delta_t,
                    goal_x: Some(6.0),
                }
            }
        }
    }

    pub fn start_distribution(self) -> StartDistribution {
        match self {
            Profile::QuadrotorSim => StartDistribution::Lateral {
                x: -1.0,
                y_min: -0.6,
                y_max: 0.6,
                heading: 0.0,
            },
            Profile::CarSim => StartDistribution::Cycle {
                states: vec![
                    VehicleState::at_rest(Vec2::new(0.0, 0.0), 0.0),
                    VehicleState::at_rest(Vec2::new(0.0, 0.3), -0.1),
                    VehicleState::at_rest(Vec2::new(0.0, -0.3), 0.1),
                    VehicleState::at_rest(Vec2::new(0.0, 0.1), 0.15),
                ],
            },
        }
    }
}
