//! Synchronous tick loop.
//!
//! Each tick: build the communication graph from the current positions,
//! deliver the messages sent on the previous tick, sense, run every robot's
//! strategy, apply collision avoidance, integrate and resolve overlaps,
//! accumulate metrics and check convergence. Per-robot work may run in
//! parallel; results are always combined in robot id order, so runs are
//! bit-identical for a given config, strategy and seed regardless of thread
//! count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arena::{Rect, World, ZoneLabel};
use crate::behaviors::{integrate_and_resolve, is_blocked, resolve_control_with_escape, ControlOutput, Escape};
use crate::config::{SimConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::geometry::{Pose, SpatialHash, Vec2};
use crate::metrics::{finalize_and_normalize, MetricsAccumulator, MetricsRecord, RunSummary, TickWindow};
use crate::sensing::{neighbor_graph, proximity_from, read_ground, read_light, NeighborGraph, SensorReadings};
use crate::strategies::{self, Message, RobotState, StrategyContext};

/// Rejection-sampling budget for the initial placement.
pub const PLACEMENT_ATTEMPTS: usize = 100_000;

/// Called with the initial state and after every tick.
pub trait TickObserver {
    fn observe(&mut self, sim: &Simulation) -> Result<()>;
}

impl<F: FnMut(&Simulation) -> Result<()>> TickObserver for F {
    fn observe(&mut self, sim: &Simulation) -> Result<()> {
        self(sim)
    }
}

impl<W: std::io::Write> TickObserver for crate::trajectory::TrajectoryWriter<W> {
    fn observe(&mut self, sim: &Simulation) -> Result<()> {
        self.write_frame(&sim.positions(), sim.ca_active())
    }
}

/// Places `n` non-overlapping disks of `radius`.
///
/// Positions are drawn from a Gaussian centered on the Nest (standard
/// deviation a quarter of its size) and rejected unless the disk lies fully
/// inside the Nest without touching earlier ones. If that fails within
/// [`PLACEMENT_ATTEMPTS`], robots go to the sites of a jittered hexagonal
/// lattice nearest the Nest center, which may spill into the zones when the
/// Nest is too small for the swarm.
pub fn place_robots(world: &World, n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Pose>> {
    let nest = world.nest;
    let c = nest.center();
    let nx = Normal::new(c.x, nest.width() / 4.0).expect("finite sigma");
    let ny = Normal::new(c.y, nest.height() / 4.0).expect("finite sigma");
    let fits = |p: Vec2| {
        p.x >= nest.min.x + radius
            && p.x <= nest.max.x - radius
            && p.y >= nest.min.y + radius
            && p.y <= nest.max.y - radius
    };
    let min_sep = 2.0 * radius * (1.0 + 1e-6);
    let mut placed: Vec<Vec2> = Vec::with_capacity(n);
    let mut attempts = 0;
    while placed.len() < n && attempts < PLACEMENT_ATTEMPTS {
        attempts += 1;
        let p = Vec2::new(nx.sample(rng), ny.sample(rng));
        if fits(p) && placed.iter().all(|q| q.distance(p) >= min_sep) {
            placed.push(p);
        }
    }
    if placed.len() < n {
        placed = lattice_placement(&world.arena, c, n, radius, rng)?;
    }
    Ok(placed
        .into_iter()
        .map(|p| Pose::new(p.x, p.y, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)))
        .collect())
}

fn lattice_placement(arena: &Rect, center: Vec2, n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec2>> {
    let spacing = 2.0 * radius * 1.04;
    let jitter = (spacing - 2.0 * radius) / 2.0 * 0.99;
    let row_h = spacing * 3f64.sqrt() / 2.0;
    let mut sites = Vec::new();
    let mut row = 0;
    let mut y = arena.min.y + radius + jitter;
    while y <= arena.max.y - radius - jitter {
        let mut x = arena.min.x + radius + jitter + if row % 2 == 1 { spacing / 2.0 } else { 0.0 };
        while x <= arena.max.x - radius - jitter {
            sites.push(Vec2::new(x, y));
            x += spacing;
        }
        y += row_h;
        row += 1;
    }
    if sites.len() < n {
        return Err(Error::PlacementFailure { robots: n });
    }
    // Nearest sites first; ties broken randomly so layouts vary by seed.
    let mut keyed: Vec<(f64, Vec2)> = sites
        .into_iter()
        .map(|s| (s.distance(center) + rng.random_range(0.0..spacing * 0.5), s))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut chosen: Vec<Vec2> = keyed
        .into_iter()
        .take(n)
        .map(|(_, s)| s + Vec2::new(rng.random_range(-jitter..=jitter), 0.0))
        .collect();
    chosen.shuffle(rng);
    Ok(chosen)
}

/// The common opinion once every robot holds the same one.
pub fn detect_convergence(robots: &[RobotState]) -> Option<ZoneLabel> {
    let first = robots.first()?.opinion()?;
    robots
        .iter()
        .all(|r| r.opinion() == Some(first))
        .then_some(first)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub robots: usize,
    pub comm_range: f64,
    pub converged: bool,
    /// Zone the swarm agreed on; `None` iff the run timed out.
    pub winner: Option<ZoneLabel>,
    /// Seconds until convergence, or the timeout.
    pub convergence_time: f64,
    pub ticks: u64,
    pub metrics: MetricsRecord,
    pub config: SimConfig,
}

pub struct Simulation {
    config: SimConfig,
    kind: StrategyKind,
    seed: u64,
    world: World,
    ctx: StrategyContext,
    robots: Vec<RobotState>,
    motion: Vec<(Escape, ChaCha8Rng)>,
    pending: Vec<Vec<Message>>,
    ca_active: Vec<bool>,
    messages_sent: Vec<u64>,
    graph: NeighborGraph,
    tick: u64,
    winner: Option<ZoneLabel>,
    metrics: MetricsAccumulator,
}

impl Simulation {
    /// Builds the world and places the swarm. Metrics cover every tick.
    pub fn new(config: SimConfig, kind: StrategyKind, seed: u64) -> Result<Self> {
        Self::with_window(config, kind, seed, TickWindow::ALL)
    }

    pub fn with_window(config: SimConfig, kind: StrategyKind, seed: u64, window: TickWindow) -> Result<Self> {
        config.validate_for(kind)?;
        let world = World::build(&config.world)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.world.robots;
        let radius = config.world.robot_radius;
        let poses = place_robots(&world, n, radius, &mut rng)?;
        let robots: Vec<RobotState> = poses
            .into_iter()
            .enumerate()
            .map(|(i, p)| RobotState::new(i as u32, p, kind, &config.strategy))
            .collect();
        let positions: Vec<Vec2> = robots.iter().map(|r| r.pose.position).collect();
        let metrics = MetricsAccumulator::new(
            &config.metrics,
            (config.world.arena_width, config.world.arena_height),
            config.world.dt,
            window,
            &positions,
        );
        let graph = neighbor_graph(&positions, config.world.comm_range);
        let motion = (0..n)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(1 + i as u64);
                (Escape::default(), r)
            })
            .collect();
        Ok(Self {
            motion,
            ctx: StrategyContext::new(kind, &config.strategy, config.world.dt),
            kind,
            seed,
            world,
            robots,
            pending: vec![Vec::new(); n],
            ca_active: vec![false; n],
            messages_sent: vec![0; n],
            graph,
            tick: 0,
            winner: None,
            metrics,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn strategy(&self) -> StrategyKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.robots.iter().map(|r| r.pose.position).collect()
    }

    pub fn ca_active(&self) -> &[bool] {
        &self.ca_active
    }

    /// Communication graph used for the most recent tick's sends.
    pub fn graph(&self) -> &NeighborGraph {
        &self.graph
    }

    /// Messages waiting for delivery at the start of the next tick.
    pub fn pending(&self) -> &[Vec<Message>] {
        &self.pending
    }

    pub fn messages_sent(&self) -> &[u64] {
        &self.messages_sent
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.config.world.dt
    }

    pub fn winner(&self) -> Option<ZoneLabel> {
        self.winner
    }

    pub fn is_done(&self) -> bool {
        self.winner.is_some() || self.tick >= self.config.world.timeout_ticks()
    }

    pub fn metrics(&self) -> &MetricsAccumulator {
        &self.metrics
    }

    pub fn conflicts(&self) -> Vec<u64> {
        self.robots.iter().map(|r| r.store.conflict_count()).collect()
    }

    fn sense(&self, positions: &[Vec2]) -> Vec<SensorReadings> {
        let w = &self.config.world;
        let radius = w.robot_radius;
        let d_max = self.config.control.proximity_range;
        let reach = 2.0 * radius + d_max;
        let hash = SpatialHash::new(w.arena_width, w.arena_height, reach, positions);
        let world = &self.world;
        self.robots
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let mut near = Vec::new();
                hash.for_each_near(r.pose.position, |j| {
                    if j != i {
                        near.push(positions[j]);
                    }
                });
                SensorReadings {
                    ground: read_ground(world, &r.pose, radius),
                    proximity: proximity_from(world, &r.pose, radius, d_max, near),
                    light: read_light(world, &r.pose, radius),
                    beacons: world.zone_broadcasts_at(r.pose.position),
                }
            })
            .collect()
    }

    /// Advances one tick. Does nothing once the run is done.
    pub fn step(&mut self) {
        if self.is_done() {
            return;
        }
        let positions = self.positions();
        self.graph = neighbor_graph(&positions, self.config.world.comm_range);
        let inboxes = std::mem::replace(&mut self.pending, vec![Vec::new(); self.robots.len()]);
        let sensors = self.sense(&positions);

        let ctx = &self.ctx;
        let control = &self.config.control;
        let results: Vec<(ControlOutput, Vec<Message>)> = self
            .robots
            .par_iter_mut()
            .zip(self.motion.par_iter_mut())
            .zip(sensors.par_iter())
            .zip(inboxes.par_iter())
            .map(|(((robot, (escape, rng)), s), inbox)| {
                let out = strategies::tick(robot, s, inbox, ctx);
                let c = resolve_control_with_escape(
                    out.request,
                    &s.proximity,
                    &s.light,
                    robot.pose.heading,
                    control,
                    escape,
                    rng,
                );
                (c, out.outbox)
            })
            .collect();

        let controls: Vec<ControlOutput> = results.iter().map(|r| r.0).collect();
        let mut poses: Vec<Pose> = self.robots.iter().map(|r| r.pose).collect();
        let w = &self.config.world;
        integrate_and_resolve(&mut poses, &controls, w.dt, &self.world.arena, w.robot_radius);
        // A robot pushing into a jam it does not see as an obstacle ahead
        // (typically in a corner) turns away as if it had avoided it.
        for (((robot, pose), c), (escape, rng)) in
            self.robots.iter_mut().zip(poses).zip(&controls).zip(&mut self.motion)
        {
            if !c.ca_active
                && escape.ticks_left == 0
                && is_blocked(c.velocity, pose.position - robot.pose.position, w.dt)
            {
                escape.start(-c.velocity.normalized().expect("blocked implies moving"), control, rng);
            }
            robot.pose = pose;
        }
        for (flag, c) in self.ca_active.iter_mut().zip(&controls) {
            *flag = c.ca_active;
        }

        for (i, (_, outbox)) in results.into_iter().enumerate() {
            self.messages_sent[i] += outbox.len() as u64;
            for &j in self.graph.neighbors(i) {
                self.pending[j].extend(outbox.iter().cloned());
            }
        }

        self.tick += 1;
        let positions = self.positions();
        self.metrics.observe(self.tick, &positions, &self.ca_active);
        self.winner = detect_convergence(&self.robots);
    }

    /// Steps until convergence or timeout, notifying `observer` of the
    /// initial state and of every tick.
    pub fn run_to_end(&mut self, observer: &mut dyn TickObserver) -> Result<()> {
        if self.tick == 0 {
            observer.observe(self)?;
        }
        while !self.is_done() {
            self.step();
            observer.observe(self)?;
        }
        Ok(())
    }

    /// Final record of a finished (or interrupted) run.
    pub fn result(&self) -> Result<RunResult> {
        let duration = self.time();
        let converged = self.winner.is_some();
        let convergence_time = if converged { duration } else { self.config.world.timeout };
        let summary = RunSummary {
            duration,
            convergence_time,
            conflicts_per_robot: self.conflicts(),
            messages_per_robot: self.messages_sent.clone(),
        };
        let metrics = finalize_and_normalize(
            &self.metrics,
            &self.config.metrics,
            summary,
            self.config.metrics.normalization,
        )?;
        Ok(RunResult {
            strategy: self.kind,
            seed: self.seed,
            robots: self.robots.len(),
            comm_range: self.config.world.comm_range,
            converged,
            winner: self.winner,
            convergence_time,
            ticks: self.tick,
            metrics,
            config: self.config.clone(),
        })
    }
}

/// Runs one simulation to convergence or timeout.
pub fn run(config: &SimConfig, kind: StrategyKind, seed: u64) -> Result<RunResult> {
    run_observed(config, kind, seed, None)
}

/// Like [`run`], notifying `observer` of every tick of the reported pass.
///
/// A partial metrics window depends on the run length, which is only known
/// at the end. Without an observer the first pass assumes a timeout and is
/// kept if that holds; otherwise an identical second pass is made with the
/// window of the actual length.
pub fn run_observed(
    config: &SimConfig,
    kind: StrategyKind,
    seed: u64,
    observer: Option<&mut dyn TickObserver>,
) -> Result<RunResult> {
    let window_pct = config.metrics.window;
    let mut noop = |_: &Simulation| Ok(());
    if TickWindow::is_full(window_pct) {
        let mut sim = Simulation::new(config.clone(), kind, seed)?;
        sim.run_to_end(observer.unwrap_or(&mut noop))?;
        return sim.result();
    }
    let timeout = config.world.timeout_ticks();
    let mut sim = Simulation::with_window(
        config.clone(),
        kind,
        seed,
        TickWindow::from_percent(window_pct, timeout),
    )?;
    sim.run_to_end(&mut noop)?;
    if sim.tick() == timeout && observer.is_none() {
        return sim.result();
    }
    let length = sim.tick();
    let mut sim = Simulation::with_window(
        config.clone(),
        kind,
        seed,
        TickWindow::from_percent(window_pct, length),
    )?;
    sim.run_to_end(observer.unwrap_or(&mut noop))?;
    sim.result()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::overlapping_pairs;
    use crate::strategies::test_util::robot;

    fn small(robots: usize, timeout: f64) -> SimConfig {
        let mut c = SimConfig::default();
        c.world.robots = robots;
        c.world.timeout = timeout;
        c
    }

    fn world() -> World {
        World::build(&SimConfig::default().world).unwrap()
    }

    #[test]
    fn two_robots_placed_in_nest() {
        let w = world();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let poses = place_robots(&w, 2, 0.12, &mut rng).unwrap();
        assert_eq!(poses.len(), 2);
        for p in &poses {
            assert!(w.nest.contains(p.position));
        }
        assert!(poses[0].position.distance(poses[1].position) >= 0.24);
    }

    #[test]
    fn crowded_placement_falls_back_to_lattice() {
        let w = world();
        let r = SimConfig::default().world.robot_radius;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let poses = place_robots(&w, 150, r, &mut rng).unwrap();
        let pos: Vec<Vec2> = poses.iter().map(|p| p.position).collect();
        assert_eq!(pos.len(), 150);
        assert!(overlapping_pairs(&pos, &w.arena, r).is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(place_robots(&w, 2000, r, &mut rng).is_err());
    }

    #[test]
    fn convergence_needs_unanimity() {
        let mut rs: Vec<RobotState> = (0..3).map(|i| robot(i, StrategyKind::HoneyBee)).collect();
        for r in &mut rs {
            r.zone = ZoneLabel::A;
        }
        assert_eq!(detect_convergence(&rs), Some(ZoneLabel::A));
        rs[1].zone = ZoneLabel::B;
        assert_eq!(detect_convergence(&rs), None);
        assert_eq!(detect_convergence(&[]), None);
    }

    #[test]
    fn zero_timeout_ends_immediately() {
        let r = run(&small(6, 0.0), StrategyKind::Stigmergy, 5).unwrap();
        assert!(!r.converged);
        assert_eq!(r.winner, None);
        assert_eq!(r.ticks, 0);
    }

    #[test]
    fn runs_are_reproducible() {
        let c = small(12, 30.0);
        for kind in [StrategyKind::HoneyBee, StrategyKind::Stigmergy, StrategyKind::DivisionOfLabor] {
            let a = serde_json::to_string(&run(&c, kind, 11).unwrap()).unwrap();
            let b = serde_json::to_string(&run(&c, kind, 11).unwrap()).unwrap();
            assert_eq!(a, b);
            let other = serde_json::to_string(&run(&c, kind, 12).unwrap()).unwrap();
            assert_ne!(a, other);
        }
    }

    #[test]
    fn messages_arrive_next_tick_from_neighbors() {
        let mut c = small(12, 30.0);
        c.world.comm_range = 0.8;
        let mut sim = Simulation::new(c, StrategyKind::Stigmergy, 2).unwrap();
        for _ in 0..50 {
            let before = sim.messages_sent().to_vec();
            sim.step();
            let sent: Vec<u64> = sim.messages_sent().iter().zip(&before).map(|(a, b)| a - b).collect();
            for (j, inbox) in sim.pending().iter().enumerate() {
                let expected: u64 = sim.graph().neighbors(j).iter().map(|&i| sent[i]).sum();
                assert_eq!(inbox.len() as u64, expected);
            }
        }
    }

    #[test]
    fn steps_keep_robots_apart_and_inside() {
        let c = small(40, 20.0);
        let r = c.world.robot_radius;
        let mut sim = Simulation::new(c, StrategyKind::HoneyBee, 9).unwrap();
        while !sim.is_done() {
            sim.step();
            let pos = sim.positions();
            assert!(overlapping_pairs(&pos, &sim.world().arena, r).is_empty());
        }
        assert_eq!(sim.tick(), 200);
        sim.step();
        assert_eq!(sim.tick(), 200);
    }

    #[test]
    fn partial_window_matches_observed_pass() {
        let mut c = small(12, 20.0);
        c.metrics.window = [50.0, 100.0];
        let plain = run(&c, StrategyKind::DivisionOfLabor, 4).unwrap();
        let mut frames = 0;
        let mut count = |_: &Simulation| {
            frames += 1;
            Ok(())
        };
        let observed = run_observed(&c, StrategyKind::DivisionOfLabor, 4, Some(&mut count)).unwrap();
        assert_eq!(plain, observed);
        assert_eq!(frames as u64, observed.ticks + 1);
    }
}
