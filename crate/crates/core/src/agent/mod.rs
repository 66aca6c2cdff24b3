//! Explorative navigation agent: picks random targets in a front cone,
//! follows grid-optimal paths, and mixes in random actions.

mod nav;

pub use nav::{path_cost, shortest_path, NavError, NavGrid};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Aabb, Vec2, Vec3};
use crate::ppm::{grayscale_from_counts, Image};
use crate::scene::{normalize_yaw, FloorSpec, ObjectRole, Pose, World};
use crate::Scalar;

/// Discrete action set; the byte values are the on-disk encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Action {
    Forward = 0,
    TurnLeft = 1,
    TurnRight = 2,
    Idle = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Idle];

    pub fn from_byte(b: u8) -> Option<Action> {
        Action::ALL.get(b as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Probability of a uniformly random action per step.
    pub epsilon: f64,
    pub cone_half_angle_deg: Scalar,
    pub target_r_min: Scalar,
    pub target_r_max: Scalar,
    /// Meters per second when walking forward.
    pub speed: Scalar,
    /// Degrees per second when turning.
    pub turn_rate_deg: Scalar,
    pub dt: Scalar,
    pub radius: Scalar,
    pub height: Scalar,
    pub eye_height: Scalar,
    /// Heading error below which the agent walks instead of turning.
    pub heading_tol_deg: Scalar,
    /// Distance at which a waypoint counts as reached.
    pub waypoint_radius: Scalar,
    /// Search radius when refining a raw cone sample to a walkable cell.
    pub refine_radius: Scalar,
    pub gravity: Scalar,
    /// Episode ends once the agent is this far below the floor.
    pub fall_limit: Scalar,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            cone_half_angle_deg: 60.0,
            target_r_min: 2.0,
            target_r_max: 8.0,
            speed: 2.0,
            turn_rate_deg: 90.0,
            dt: 0.1,
            radius: 0.3,
            height: 1.5,
            eye_height: 0.75,
            heading_tol_deg: 9.0,
            waypoint_radius: 0.25,
            refine_radius: 2.0,
            gravity: 9.8,
            fall_limit: 10.0,
        }
    }
}

/// What the agent can sense of the (possibly bug-modified) world this frame.
pub struct Surroundings<'a> {
    pub nav: &'a NavGrid,
    /// World boxes of collidable, non-floor objects.
    pub colliders: &'a [Aabb<Scalar>],
    pub floor: FloorSpec,
    /// Rectangles `[x0, z0, x1, z1]` where the floor has no collision.
    pub floor_holes: &'a [[Scalar; 4]],
}

impl<'a> Surroundings<'a> {
    pub fn of_world(world: &'a World, colliders: &'a [Aabb<Scalar>]) -> Self {
        Self { nav: &world.nav, colliders, floor: world.floor, floor_holes: &[] }
    }

    /// True when the floor supports a body at `(x, z)`.
    pub fn has_support(&self, x: Scalar, z: Scalar) -> bool {
        let hx = self.floor.size[0] / 2.0;
        let hz = self.floor.size[1] / 2.0;
        if x < -hx || x > hx || z < -hz || z > hz {
            return false;
        }
        !self
            .floor_holes
            .iter()
            .any(|h| x >= h[0] && x <= h[2] && z >= h[1] && z <= h[3])
    }
}

/// Collidable world boxes for building [`Surroundings`].
pub fn collect_colliders(world: &World) -> Vec<Aabb<Scalar>> {
    world
        .objects
        .iter()
        .filter(|o| o.collidable && o.role != ObjectRole::Floor)
        .map(|o| o.world_aabb())
        .collect()
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub pose: Pose,
    pub vertical_velocity: Scalar,
    /// Remaining world-space waypoints, front first.
    pub path: Vec<Vec2<Scalar>>,
    pub target: Option<Vec2<Scalar>>,
    rng: ChaCha8Rng,
    blocked_streak: u32,
}

impl AgentState {
    pub fn new(pose: Pose, seed: u64) -> Self {
        Self {
            pose,
            vertical_velocity: 0.0,
            path: Vec::new(),
            target: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            blocked_streak: 0,
        }
    }

    /// True once the agent has fallen past the configured limit.
    pub fn fell_out(&self, floor_height: Scalar, cfg: &AgentConfig) -> bool {
        self.pose.position.y < floor_height - cfg.fall_limit
    }
}

/// Raw cone sample before refinement: yaw offset uniform in the cone,
/// radius uniform in `[r_min, r_max]`.
pub fn cone_sample(state: &mut AgentState, cfg: &AgentConfig) -> Vec2<Scalar> {
    let half = cfg.cone_half_angle_deg.to_radians();
    let ang = state.pose.yaw + state.rng.gen_range(-half..=half);
    let (s, c) = crate::num::det_sincos(ang as f64);
    let dir = Vec2::new(c as Scalar, -s as Scalar);
    let r = state.rng.gen_range(cfg.target_r_min..=cfg.target_r_max);
    Vec2::new(state.pose.position.x, state.pose.position.z) + dir * r
}

/// A reachable exploration target: the walkable cell center nearest a raw
/// cone sample, resampling a bounded number of times before falling back to
/// a uniformly random walkable cell.
pub fn sample_target(state: &mut AgentState, nav: &NavGrid, cfg: &AgentConfig) -> Vec2<Scalar> {
    for _ in 0..16 {
        let raw = cone_sample(state, cfg);
        if let Some((ix, iz)) = nav.nearest_walkable(raw, cfg.refine_radius) {
            return nav.cell_center(ix, iz);
        }
    }
    let cells: Vec<_> = nav.walkable_cells().collect();
    let (ix, iz) = cells[state.rng.gen_range(0..cells.len())];
    nav.cell_center(ix, iz)
}

fn plan(state: &mut AgentState, nav: &NavGrid, target: Vec2<Scalar>) -> bool {
    let pos = Vec2::new(state.pose.position.x, state.pose.position.z);
    let from = match nav.nearest_walkable(pos, 1.0) {
        Some(c) => c,
        None => return false,
    };
    let to = match nav.cell_of(target) {
        Some(c) if nav.is_walkable(c.0, c.1) => c,
        _ => return false,
    };
    match shortest_path(nav, from, to) {
        Ok(cells) if !cells.is_empty() => {
            state.path = cells.iter().map(|&(ix, iz)| nav.cell_center(ix, iz)).collect();
            state.target = Some(target);
            true
        }
        _ => false,
    }
}

fn wrap_angle(a: Scalar) -> Scalar {
    let mut a = a % std::f32::consts::TAU;
    if a > std::f32::consts::PI {
        a -= std::f32::consts::TAU;
    }
    if a < -std::f32::consts::PI {
        a += std::f32::consts::TAU;
    }
    a
}

fn collides(pos: Vec3<Scalar>, env: &Surroundings, cfg: &AgentConfig) -> bool {
    let y_lo = pos.y + 0.05;
    let y_hi = pos.y + cfg.height;
    env.colliders.iter().any(|b| b.blocks_circle(pos.x, pos.z, cfg.radius, y_lo, y_hi))
}

/// Chooses and applies one action. With probability epsilon the action is
/// uniformly random; otherwise the agent turns toward / walks to the next
/// waypoint, replanning when the target is reached or the path is blocked.
pub fn step(state: &mut AgentState, env: &Surroundings, cfg: &AgentConfig) -> Action {
    let action = if state.rng.gen_bool(cfg.epsilon) {
        Action::ALL[state.rng.gen_range(0..4)]
    } else {
        greedy_action(state, env, cfg)
    };
    apply_action(state, env, cfg, action);
    action
}

fn greedy_action(state: &mut AgentState, env: &Surroundings, cfg: &AgentConfig) -> Action {
    let pos2 = Vec2::new(state.pose.position.x, state.pose.position.z);

    // drop reached waypoints
    while let Some(&wp) = state.path.first() {
        if (wp - pos2).length() <= cfg.waypoint_radius {
            state.path.remove(0);
        } else {
            break;
        }
    }
    // replan when the path ran out or a waypoint became unwalkable
    let need_replan = state.path.is_empty()
        || state.path.first().map(|wp| !env.nav.is_walkable_pos(*wp)).unwrap_or(true);
    if need_replan {
        state.path.clear();
        state.target = None;
        for _ in 0..4 {
            let target = sample_target(state, env.nav, cfg);
            if plan(state, env.nav, target) {
                break;
            }
        }
    }
    let wp = match state.path.first() {
        Some(&wp) => wp,
        None => return Action::Idle,
    };
    let to = wp - pos2;
    // yaw whose forward points along `to`
    let desired = crate::num::det_atan2(-to.y as f64, to.x as f64) as Scalar;
    let err = wrap_angle(desired - state.pose.yaw);
    if err.abs() > cfg.heading_tol_deg.to_radians() {
        if err > 0.0 {
            Action::TurnLeft
        } else {
            Action::TurnRight
        }
    } else {
        Action::Forward
    }
}

fn apply_action(state: &mut AgentState, env: &Surroundings, cfg: &AgentConfig, action: Action) {
    match action {
        Action::Forward => {
            let f = state.pose.forward();
            let next = state.pose.position + f * (cfg.speed * cfg.dt);
            if collides(next, env, cfg) {
                state.blocked_streak += 1;
                if state.blocked_streak >= 5 {
                    state.path.clear();
                    state.target = None;
                    state.blocked_streak = 0;
                }
            } else {
                state.pose.position = next;
                state.blocked_streak = 0;
            }
        }
        Action::TurnLeft => {
            state.pose.yaw = normalize_yaw(state.pose.yaw + cfg.turn_rate_deg.to_radians() * cfg.dt);
        }
        Action::TurnRight => {
            state.pose.yaw = normalize_yaw(state.pose.yaw - cfg.turn_rate_deg.to_radians() * cfg.dt);
        }
        Action::Idle => {}
    }

    // gravity with ground snap
    let p = state.pose.position;
    let floor_y = env.floor.height;
    if env.has_support(p.x, p.z) && p.y <= floor_y + 0.01 && state.vertical_velocity <= 0.0 {
        state.pose.position.y = floor_y;
        state.vertical_velocity = 0.0;
    } else {
        state.vertical_velocity -= cfg.gravity * cfg.dt;
        state.pose.position.y += state.vertical_velocity * cfg.dt;
        // landing back on supported ground
        if state.pose.position.y <= floor_y
            && state.pose.position.y > floor_y - 0.5
            && env.has_support(state.pose.position.x, state.pose.position.z)
        {
            state.pose.position.y = floor_y;
            state.vertical_velocity = 0.0;
        }
    }
}

/// Pose trajectory of a bug-free walk; used for coverage maps and tests.
pub fn simulate_normal(world: &World, cfg: &AgentConfig, seed: u64, steps: usize) -> Vec<Pose> {
    let colliders = collect_colliders(world);
    let env = Surroundings::of_world(world, &colliders);
    let mut state = AgentState::new(world.agent_start.pose(), seed);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        step(&mut state, &env, cfg);
        out.push(state.pose);
    }
    out
}

/// Per-cell visit counts accumulated over pose trajectories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    pub nx: usize,
    pub nz: usize,
    pub counts: Vec<u64>,
}

impl CoverageMap {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn visited_cells(&self) -> usize {
        self.counts.iter().filter(|c| **c > 0).count()
    }

    /// Fraction of the walkable cells of `nav` with at least one visit.
    pub fn fraction_of_walkable(&self, nav: &NavGrid) -> f64 {
        let visited = nav
            .walkable_cells()
            .filter(|&(ix, iz)| self.counts[iz * self.nx + ix] > 0)
            .count();
        visited as f64 / nav.walkable_count().max(1) as f64
    }

    pub fn to_image(&self) -> Image {
        grayscale_from_counts(&self.counts, self.nx, self.nz)
    }
}

/// Histogram of agent positions over one or more episodes' trajectories.
pub fn coverage_map(nav: &NavGrid, trajectories: &[Vec<Pose>]) -> CoverageMap {
    let mut counts = vec![0u64; nav.nx * nav.nz];
    for traj in trajectories {
        for pose in traj {
            if let Some((ix, iz)) = nav.cell_of(Vec2::new(pose.position.x, pose.position.z)) {
                counts[iz * nav.nx + ix] += 1;
            }
        }
    }
    CoverageMap { nx: nav.nx, nz: nav.nz, counts }
}
