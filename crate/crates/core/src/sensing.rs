//! Sensor models (ground, proximity, light, beacons) and the communication
//! neighbor graph. All functions are pure over a pose snapshot.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

use crate::arena::{World, ZoneSet};
use crate::geometry::{wrap_angle, Pose, SpatialHash, Vec2};

pub const GROUND_SENSORS: usize = 4;
pub const RING_SENSORS: usize = 8;

/// Ground sensors sit at this fraction of the radius from the center.
const GROUND_OFFSET: f64 = 0.7;

/// Body-frame bearing of ring sensor `k` (0 = front, 2 = left, 4 = back).
pub fn ring_bearing(k: usize) -> f64 {
    wrap_angle(k as f64 * FRAC_PI_4)
}

/// Ring sector whose half-open cone `[k*45 - 22.5, k*45 + 22.5)` contains
/// the body-frame bearing.
pub fn ring_sector(bearing: f64) -> usize {
    let a = wrap_angle(bearing) + FRAC_PI_8;
    (a / FRAC_PI_4).floor().rem_euclid(RING_SENSORS as f64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundReading {
    /// Front, left, back, right.
    pub values: [u8; GROUND_SENSORS],
    /// All four sensors are over zone tiles.
    pub in_zone: bool,
}

impl GroundReading {
    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / GROUND_SENSORS as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReadings {
    pub ground: GroundReading,
    pub proximity: [f64; RING_SENSORS],
    pub light: [f64; RING_SENSORS],
    pub beacons: ZoneSet,
}

pub fn read_ground(world: &World, pose: &Pose, radius: f64) -> GroundReading {
    let d = GROUND_OFFSET * radius;
    let offsets = [
        Vec2::new(d, 0.0),
        Vec2::new(0.0, d),
        Vec2::new(-d, 0.0),
        Vec2::new(0.0, -d),
    ];
    let mut values = [0u8; GROUND_SENSORS];
    let mut in_zone = true;
    for (v, off) in values.iter_mut().zip(offsets) {
        let mut p = pose.position + pose.to_world(off);
        p.x = p.x.clamp(world.arena.min.x, world.arena.max.x);
        p.y = p.y.clamp(world.arena.min.y, world.arena.max.y);
        match world.ground_color_at(p).ok().flatten() {
            Some(c) => *v = c,
            None => in_zone = false,
        }
    }
    GroundReading { values, in_zone }
}

fn reading_for_gap(gap: f64, d_max: f64) -> f64 {
    if gap >= d_max {
        0.0
    } else {
        (1.0 - gap.max(0.0) / d_max).clamp(0.0, 1.0)
    }
}

/// Proximity ring readings given the positions of nearby robots.
///
/// Each sensor reports `max(0, 1 - d / d_max)` for the closest robot surface
/// or wall inside its 45 degree cone.
pub fn proximity_from(
    world: &World,
    pose: &Pose,
    radius: f64,
    d_max: f64,
    others: impl IntoIterator<Item = Vec2>,
) -> [f64; RING_SENSORS] {
    let mut out = [0.0f64; RING_SENSORS];
    let p = pose.position;
    for q in others {
        let delta = q - p;
        let gap = delta.norm() - 2.0 * radius;
        if gap >= d_max {
            continue;
        }
        let k = ring_sector(delta.angle() - pose.heading);
        out[k] = out[k].max(reading_for_gap(gap, d_max));
    }
    let walls = [
        (std::f64::consts::PI, p.x - world.arena.min.x),
        (0.0, world.arena.max.x - p.x),
        (-FRAC_PI_2, p.y - world.arena.min.y),
        (FRAC_PI_2, world.arena.max.y - p.y),
    ];
    for (k, slot) in out.iter_mut().enumerate() {
        let center = pose.heading + ring_bearing(k);
        for &(dir, perp) in &walls {
            if perp - radius >= d_max {
                continue;
            }
            let off = (wrap_angle(dir - center).abs() - FRAC_PI_8).max(0.0);
            if off >= FRAC_PI_2 {
                continue;
            }
            let gap = perp / off.cos() - radius;
            *slot = slot.max(reading_for_gap(gap, d_max));
        }
    }
    out
}

/// Proximity readings of robot `id` against every other robot in `poses`.
pub fn read_proximity(
    world: &World,
    poses: &[Pose],
    id: usize,
    radius: f64,
    d_max: f64,
) -> [f64; RING_SENSORS] {
    let others = poses
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != id)
        .map(|(_, q)| q.position);
    proximity_from(world, &poses[id], radius, d_max, others)
}

/// Light ring readings: `(I / x)^2` scaled by the cosine between each sensor
/// and the light bearing, clamped at zero. `x` is clamped to `radius`.
pub fn read_light(world: &World, pose: &Pose, radius: f64) -> [f64; RING_SENSORS] {
    let to_light = world.light_pos - pose.position;
    let x = to_light.norm().max(radius);
    let magnitude = (world.config.light_intensity / x).powi(2);
    let bearing = to_light.angle();
    let mut out = [0.0; RING_SENSORS];
    for (k, v) in out.iter_mut().enumerate() {
        let c = (pose.heading + ring_bearing(k) - bearing).cos();
        *v = magnitude * c.max(0.0);
    }
    out
}

/// Undirected communication graph: `i` and `j` are adjacent iff their
/// centers are at most `range` apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    adjacency: Vec<Vec<usize>>,
}

impl NeighborGraph {
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Whether every robot can reach every other through the graph.
    pub fn is_connected(&self) -> bool {
        if self.adjacency.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.adjacency.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Self {
        for a in &mut adjacency {
            a.sort_unstable();
            a.dedup();
        }
        Self { adjacency }
    }
}

pub fn neighbor_graph(positions: &[Vec2], range: f64) -> NeighborGraph {
    let (w, h) = positions.iter().fold((range, range), |(w, h), p| {
        (w.max(p.x + range), h.max(p.y + range))
    });
    let min_x = positions.iter().map(|p| p.x).fold(0.0f64, f64::min);
    let min_y = positions.iter().map(|p| p.y).fold(0.0f64, f64::min);
    let shifted: Vec<Vec2> = positions
        .iter()
        .map(|p| Vec2::new(p.x - min_x, p.y - min_y))
        .collect();
    let grid = SpatialHash::new(w - min_x, h - min_y, range, &shifted);
    let mut adjacency = vec![Vec::new(); positions.len()];
    for (i, p) in shifted.iter().enumerate() {
        grid.for_each_near(*p, |j| {
            if j != i && p.distance(shifted[j]) <= range {
                adjacency[i].push(j);
            }
        });
        adjacency[i].sort_unstable();
    }
    NeighborGraph { adjacency }
}
