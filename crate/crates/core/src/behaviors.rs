//! Low-level controllers (collision avoidance, phototaxis, antiphototaxis,
//! diffusion) and the kinematic integrator with hard-disk overlap resolution.

use log::debug;
use rand::Rng;

use crate::arena::Rect;
use crate::config::{CaTrigger, ControlParams};
use crate::geometry::{Pose, SpatialHash, Vec2};
use crate::sensing::{ring_bearing, RING_SENSORS};

/// Gauss-Seidel sweeps of the overlap projection per tick.
pub const MAX_RESOLVE_ITERATIONS: usize = 8;

/// Slack below `2 * radius` tolerated as contact rather than overlap.
pub const CONTACT_TOLERANCE: f64 = 1e-9;
/// Extra gap left by the projection so rounding and wall clamps do not
/// reintroduce contact.
pub const SEPARATION_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaxisMode {
    /// Toward the light.
    Photo,
    /// Away from the light.
    Anti,
}

impl TaxisMode {
    pub fn reverse(self) -> Self {
        match self {
            TaxisMode::Photo => TaxisMode::Anti,
            TaxisMode::Anti => TaxisMode::Photo,
        }
    }
}

/// Motion primitive requested by a strategy for one tick. Collision
/// avoidance is layered on top by [`resolve_control`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlRequest {
    Taxis(TaxisMode),
    Diffuse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// World-frame velocity (m/s).
    pub velocity: Vec2,
    pub ca_active: bool,
}

/// Sum of the ring readings weighted by the sensor unit vectors, body frame.
pub fn ring_vector(readings: &[f64; RING_SENSORS]) -> Vec2 {
    readings
        .iter()
        .enumerate()
        .fold(Vec2::ZERO, |acc, (k, &r)| acc + Vec2::from_angle(ring_bearing(k)) * r)
}

/// Unnormalized obstacle vector in the body frame.
pub fn obstacle_vector(proximity: &[f64; RING_SENSORS]) -> Vec2 {
    ring_vector(proximity)
}

/// Moves opposite to the obstacle vector at speed `s_o` when it is strong
/// enough and, with the default trigger, in front of the robot. Returns
/// `None` when the caller's own command should stand.
pub fn collision_avoidance(
    proximity: &[f64; RING_SENSORS],
    heading: f64,
    params: &ControlParams,
) -> Option<ControlOutput> {
    let v = obstacle_vector(proximity);
    let norm = v.norm();
    if norm == 0.0 || norm < params.o_lt {
        return None;
    }
    let angle = v.angle().abs();
    let triggered = match params.ca_trigger {
        CaTrigger::Ahead => angle <= params.o_at,
        CaTrigger::Outside => angle >= params.o_at,
    };
    triggered.then(|| ControlOutput {
        velocity: (v * (-params.s_o / norm)).rotate(heading),
        ca_active: true,
    })
}

/// Forward motion at the maximum speed along the current heading.
pub fn diffusion(heading: f64, params: &ControlParams) -> ControlOutput {
    ControlOutput {
        velocity: Vec2::from_angle(heading) * params.max_speed,
        ca_active: false,
    }
}

/// Moves along (`Photo`) or against (`Anti`) the light vector at speed
/// `s_l`. Falls back to diffusion when no light is sensed.
pub fn taxis(
    light: &[f64; RING_SENSORS],
    heading: f64,
    mode: TaxisMode,
    params: &ControlParams,
) -> ControlOutput {
    let v = ring_vector(light);
    let norm = v.norm();
    if norm == 0.0 {
        return diffusion(heading, params);
    }
    let sign = match mode {
        TaxisMode::Photo => 1.0,
        TaxisMode::Anti => -1.0,
    };
    ControlOutput {
        velocity: (v * (sign * params.s_l / norm)).rotate(heading),
        ca_active: false,
    }
}

/// Final command for one robot: collision avoidance when it fires, the
/// requested primitive otherwise.
pub fn resolve_control(
    request: ControlRequest,
    proximity: &[f64; RING_SENSORS],
    light: &[f64; RING_SENSORS],
    heading: f64,
    params: &ControlParams,
) -> ControlOutput {
    if let Some(ca) = collision_avoidance(proximity, heading, params) {
        return ca;
    }
    match request {
        ControlRequest::Taxis(mode) => taxis(light, heading, mode, params),
        ControlRequest::Diffuse => diffusion(heading, params),
    }
}

/// Post-avoidance random walk of one robot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Escape {
    pub ticks_left: u32,
    pub direction: Vec2,
}

impl Escape {
    /// Starts a walk in a random direction within `escape_spread` of `away`.
    pub fn start(&mut self, away: Vec2, params: &ControlParams, rng: &mut impl Rng) {
        if params.escape_ticks == 0 {
            return;
        }
        let turn = rng.random_range(-params.escape_spread..=params.escape_spread);
        self.direction = away.rotate(turn);
        self.ticks_left = rng.random_range(1..=params.escape_ticks);
    }
}

/// Whether the overlap resolution cancelled most of a commanded move.
pub fn is_blocked(commanded: Vec2, moved: Vec2, dt: f64) -> bool {
    let want = commanded.norm() * dt;
    want > 0.0 && moved.norm() < 0.25 * want
}

/// [`resolve_control`] with collision-driven direction changes: every
/// avoidance tick draws a random direction within `escape_spread` of the
/// avoidance direction and a random duration of `1..=escape_ticks` ticks,
/// during which the robot moves that way at `max_speed` instead of
/// following its request. Avoidance still takes priority throughout.
pub fn resolve_control_with_escape(
    request: ControlRequest,
    proximity: &[f64; RING_SENSORS],
    light: &[f64; RING_SENSORS],
    heading: f64,
    params: &ControlParams,
    escape: &mut Escape,
    rng: &mut impl Rng,
) -> ControlOutput {
    if let Some(ca) = collision_avoidance(proximity, heading, params) {
        if let Some(away) = ca.velocity.normalized() {
            escape.start(away, params, rng);
        }
        return ca;
    }
    if escape.ticks_left > 0 {
        escape.ticks_left -= 1;
        return ControlOutput {
            velocity: escape.direction * params.max_speed,
            ca_active: false,
        };
    }
    resolve_control(request, proximity, light, heading, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResolveReport {
    pub iterations: usize,
    /// Robots put back to their previous pose because the projection did
    /// not converge.
    pub reverted: usize,
}

fn clamp_inside(p: &mut Vec2, arena: &Rect, radius: f64) {
    p.x = p.x.clamp(arena.min.x + radius, arena.max.x - radius);
    p.y = p.y.clamp(arena.min.y + radius, arena.max.y - radius);
}

/// Pairs `(i, j)`, `i < j`, whose disks overlap by more than the tolerance.
pub fn overlapping_pairs(positions: &[Vec2], arena: &Rect, radius: f64) -> Vec<(usize, usize)> {
    let diameter = 2.0 * radius;
    let grid = SpatialHash::new(arena.width(), arena.height(), diameter, positions);
    let mut pairs = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        grid.for_each_near(*p, |j| {
            if j > i && p.distance(positions[j]) < diameter - CONTACT_TOLERANCE {
                pairs.push((i, j));
            }
        });
    }
    pairs.sort_unstable();
    pairs
}

/// Single-integrator step followed by iterative projection of disk-disk and
/// disk-wall overlaps. Robots are processed in id order.
///
/// Headings follow the commanded velocity when it is non-zero. If overlaps
/// survive [`MAX_RESOLVE_ITERATIONS`] sweeps, the robots involved are put
/// back to their previous (overlap-free) poses.
pub fn integrate_and_resolve(
    poses: &mut [Pose],
    controls: &[ControlOutput],
    dt: f64,
    arena: &Rect,
    radius: f64,
) -> ResolveReport {
    debug_assert_eq!(poses.len(), controls.len());
    let previous: Vec<Pose> = poses.to_vec();
    let mut pos: Vec<Vec2> = poses.iter().map(|p| p.position).collect();

    for (i, (p, c)) in pos.iter_mut().zip(controls).enumerate() {
        *p += c.velocity * dt;
        clamp_inside(p, arena, radius);
        if c.velocity.norm_sq() > 0.0 {
            poses[i].heading = c.velocity.angle();
        }
    }

    let diameter = 2.0 * radius;
    let mut report = ResolveReport::default();
    for _ in 0..MAX_RESOLVE_ITERATIONS {
        report.iterations += 1;
        let grid = SpatialHash::new(arena.width(), arena.height(), diameter, &pos);
        let mut moved = false;
        for i in 0..pos.len() {
            let mut near = Vec::new();
            grid.for_each_near(pos[i], |j| {
                if j > i {
                    near.push(j);
                }
            });
            near.sort_unstable();
            for j in near {
                let delta = pos[j] - pos[i];
                let d = delta.norm();
                if d >= diameter - CONTACT_TOLERANCE {
                    continue;
                }
                // coincident centers: separate along a fixed axis
                let normal = delta.normalized().unwrap_or(Vec2::new(1.0, 0.0));
                // Equal split; whatever a wall clamp removes from one side
                // is handed to the other.
                let want = diameter + SEPARATION_SLACK - d;
                let mut shift = |k: usize, sign: f64, amount: f64| {
                    let before = pos[k];
                    pos[k] += normal * (sign * amount);
                    clamp_inside(&mut pos[k], arena, radius);
                    (pos[k] - before).dot(normal) * sign
                };
                let done_i = shift(i, -1.0, 0.5 * want);
                let done_j = shift(j, 1.0, want - done_i);
                if done_i + done_j < want {
                    shift(i, -1.0, want - done_i - done_j);
                }
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    let mut pairs = overlapping_pairs(&pos, arena, radius);
    if !pairs.is_empty() {
        let mut reverted = vec![false; pos.len()];
        while !pairs.is_empty() {
            for (i, j) in pairs {
                for k in [i, j] {
                    if !reverted[k] {
                        reverted[k] = true;
                        pos[k] = previous[k].position;
                        poses[k].heading = previous[k].heading;
                    }
                }
            }
            pairs = overlapping_pairs(&pos, arena, radius);
        }
        report.reverted = reverted.iter().filter(|&&r| r).count();
        debug!(
            "overlap projection did not converge; reverted {} robots",
            report.reverted
        );
    }

    for (pose, p) in poses.iter_mut().zip(pos) {
        pose.position = p;
    }
    report
}
