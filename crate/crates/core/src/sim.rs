//! Deterministic planar world: vehicle dynamics, obstacle map, collision
//! indicator and a raycast depth camera.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Two-component command. Velocity integrator: `(vx, vy)` m/s.
/// Unicycle: `(speed m/s, steering angle rad)`.
pub type Control = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Radians in (-π, π]. Fixed for the velocity integrator (camera yaw).
    pub heading: f64,
}

impl VehicleState {
    pub fn at_rest(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            velocity: Vec2::ZERO,
            heading: wrap_angle(heading),
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dynamics {
    /// Ideal planar velocity tracking: the command becomes the velocity.
    VelocityIntegrator,
    /// Kinematic bicycle/unicycle driven by speed and steering angle.
    Unicycle { wheelbase: f64 },
}

/// Advances the vehicle by one control period.
pub fn step(
    dynamics: &Dynamics,
    state: &VehicleState,
    control: Control,
    delta_t: f64,
) -> Result<VehicleState> {
    ensure!(
        delta_t > 0.0 && delta_t.is_finite(),
        "delta_t must be positive, got {delta_t}"
    );
    Ok(match *dynamics {
        Dynamics::VelocityIntegrator => {
            let velocity = Vec2::from(control);
            VehicleState {
                position: state.position + velocity * delta_t,
                velocity,
                heading: state.heading,
            }
        }
        Dynamics::Unicycle { wheelbase } => {
            let [speed, steer] = control;
            let heading = wrap_angle(state.heading + speed / wheelbase * steer.tan() * delta_t);
            let dir = Vec2::from_angle(heading);
            VehicleState {
                position: state.position + dir * (speed * delta_t),
                velocity: dir * speed,
                heading,
            }
        }
    })
}

/// Rolls `controls` forward from `state`; returns `controls.len() + 1` states.
pub fn roll_out(
    dynamics: &Dynamics,
    state: &VehicleState,
    controls: &[Control],
    delta_t: f64,
) -> Result<Vec<VehicleState>> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*state);
    let mut current = *state;
    for &u in controls {
        current = step(dynamics, &current, u, delta_t)?;
        states.push(current);
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let ab = self.b - self.a;
        let len_sq = ab.norm_sq();
        let t = if len_sq == 0.0 {
            0.0
        } else {
            ((p - self.a).dot(ab) / len_sq).clamp(0.0, 1.0)
        };
        (p - (self.a + ab * t)).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

/// Obstacle map: circles and wall segments inside a rectangular arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub bounds: Rect,
    #[serde(default)]
    pub circles: Vec<Circle>,
    #[serde(default)]
    pub segments: Vec<Segment>,
}

pub const ENVIRONMENT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentFile {
    format_version: u32,
    bounds: Rect,
    #[serde(default)]
    circles: Vec<Circle>,
    #[serde(default)]
    segments: Vec<Segment>,
}

impl Environment {
    pub fn new(bounds: Rect, circles: Vec<Circle>, segments: Vec<Segment>) -> Result<Self> {
        let env = Self {
            bounds,
            circles,
            segments,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.bounds.min.is_finite()
                && self.bounds.max.is_finite()
                && self.bounds.min.x < self.bounds.max.x
                && self.bounds.min.y < self.bounds.max.y,
            "arena bounds must be a nonempty rectangle"
        );
        for c in &self.circles {
            ensure!(
                c.radius > 0.0 && c.center.is_finite(),
                "obstacle radius must be positive, got {}",
                c.radius
            );
        }
        for s in &self.segments {
            ensure!(
                s.a.is_finite() && s.b.is_finite(),
                "wall endpoints must be finite"
            );
        }
        Ok(())
    }

    /// Parses the TOML environment description (see `docs/formats.md`).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: EnvironmentFile = toml::from_str(text)?;
        if file.format_version != ENVIRONMENT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                kind: "environment",
                found: file.format_version,
                expected: ENVIRONMENT_FORMAT_VERSION,
            });
        }
        Self::new(file.bounds, file.circles, file.segments)
    }

    pub fn to_toml_string(&self) -> String {
        let file = EnvironmentFile {
            format_version: ENVIRONMENT_FORMAT_VERSION,
            bounds: self.bounds,
            circles: self.circles.clone(),
            segments: self.segments.clone(),
        };
        toml::to_string(&file).expect("environment serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// True iff the vehicle disc touches an obstacle, a wall or the arena boundary.
/// Contact is closed: exact tangency counts as a collision.
pub fn check_collision(state: &VehicleState, env: &Environment, body_radius: f64) -> bool {
    let p = state.position;
    let b = &env.bounds;
    if p.x - body_radius <= b.min.x
        || p.x + body_radius >= b.max.x
        || p.y - body_radius <= b.min.y
        || p.y + body_radius >= b.max.y
    {
        return true;
    }
    env.circles
        .iter()
        .any(|c| (p - c.center).norm() <= c.radius + body_radius)
        || env
            .segments
            .iter()
            .any(|s| s.distance_to(p) <= body_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, radians.
    pub fov: f64,
    pub max_depth: f64,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.width >= 1 && self.height >= 1,
            "camera needs at least one pixel"
        );
        ensure!(
            self.fov > 0.0 && self.fov < PI,
            "field of view must lie in (0, π), got {}",
            self.fov
        );
        ensure!(self.max_depth > 0.0, "max_depth must be positive");
        Ok(())
    }

    /// Bearing of column `c` relative to the heading; column 0 is leftmost.
    pub fn column_offset(&self, c: usize) -> f64 {
        0.5 * self.fov - (c as f64 + 0.5) / self.width as f64 * self.fov
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

/// Distance along a unit ray to the nearest obstacle or wall, if any.
pub fn cast_ray(env: &Environment, origin: Vec2, dir: Vec2) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t >= 0.0 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    for c in &env.circles {
        if let Some(t) = ray_circle(origin, dir, c) {
            consider(t);
        }
    }
    for s in &env.segments {
        if let Some(t) = ray_segment(origin, dir, s) {
            consider(t);
        }
    }
    best
}

fn ray_circle(origin: Vec2, dir: Vec2, circle: &Circle) -> Option<f64> {
    let m = origin - circle.center;
    let c = m.norm_sq() - circle.radius * circle.radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = m.dot(dir);
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.b - seg.a;
    let denom = dir.cross(e);
    if denom == 0.0 {
        return None;
    }
    let w = seg.a - origin;
    let t = w.cross(e) / denom;
    let s = w.cross(dir) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

/// Depth-shaded synthetic image: one ray per column, perpendicular depth mapped
/// to `1 - min(d, max_depth) / max_depth`, replicated down every row.
pub fn render_camera(state: &VehicleState, env: &Environment, camera: &Camera) -> Result<Observation> {
    camera.validate()?;
    let column: Vec<f64> = (0..camera.width)
        .map(|c| {
            let offset = camera.column_offset(c);
            let dir = Vec2::from_angle(state.heading + offset);
            match cast_ray(env, state.position, dir) {
                Some(t) => {
                    let depth = t * offset.cos();
                    1.0 - depth.min(camera.max_depth) / camera.max_depth
                }
                None => 0.0,
            }
        })
        .collect();
    let mut pixels = Vec::with_capacity(camera.pixel_count());
    for _ in 0..camera.height {
        pixels.extend_from_slice(&column);
    }
    Ok(Observation {
        width: camera.width,
        height: camera.height,
        pixels,
    })
}

/// Everything needed to execute a rollout in one arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    pub environment: Environment,
    pub dynamics: Dynamics,
    pub camera: Camera,
    pub body_radius: f64,
    pub delta_t: f64,
    /// Crossing `x >= goal_x` ends a rollout successfully.
    #[serde(default)]
    pub goal_x: Option<f64>,
}

impl World {
    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.camera.validate()?;
        ensure!(self.body_radius >= 0.0, "body radius must be nonnegative");
        ensure!(self.delta_t > 0.0, "delta_t must be positive");
        if let Dynamics::Unicycle { wheelbase } = self.dynamics {
            ensure!(wheelbase > 0.0, "wheelbase must be positive");
        }
        Ok(())
    }

    pub fn step(&self, state: &VehicleState, control: Control) -> Result<VehicleState> {
        step(&self.dynamics, state, control, self.delta_t)
    }

    pub fn collides(&self, state: &VehicleState) -> bool {
        check_collision(state, &self.environment, self.body_radius)
    }

    pub fn observe(&self, state: &VehicleState) -> Result<Observation> {
        render_camera(state, &self.environment, &self.camera)
    }

    pub fn reached_goal(&self, state: &VehicleState) -> bool {
        self.goal_x.is_some_and(|g| state.position.x >= g)
    }
}
