//! Per-robot decision state machines.
//!
//! Honey Bee and Stigmergy share one cycle: travel to the assigned zone,
//! sample it, return to the Nest, advertise, decide, repeat. Division of
//! Labor fixes a role per robot instead. Each tick is a function of the
//! robot's own state, its sensor snapshot and its inbox only.

pub mod dol;
pub mod honeybee;
pub mod stigmergy;

use std::collections::BTreeMap;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::arena::{ZoneLabel, ZoneSet};
use crate::behaviors::{ControlRequest, TaxisMode};
use crate::config::{StrategyKind, StrategyParams};
use crate::geometry::Pose;
use crate::sensing::SensorReadings;
use crate::vstig::{StigEntry, StigStore};

pub use honeybee::{honeybee_aggregate, honeybee_decide};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FsmState {
    GoToZone,
    Sample,
    Return,
    Advertise,
    /// Division of Labor networkers: stay in the Nest relaying entries.
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Sampler(ZoneLabel),
    Networker,
}

/// Averaged belief advertised by a Honey Bee robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefMessage {
    pub sender: u32,
    pub zone: ZoneLabel,
    pub avg_bel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Message {
    Belief(BeliefMessage),
    Stig(StigEntry),
}

/// Tick-converted strategy parameters shared by all robots of a run.
#[derive(Debug, Clone)]
pub struct StrategyContext {
    pub kind: StrategyKind,
    pub params: StrategyParams,
    pub dt: f64,
    pub sample_period_ticks: u32,
    pub watchdog_ticks: u64,
}

impl StrategyContext {
    pub fn new(kind: StrategyKind, params: &StrategyParams, dt: f64) -> Self {
        Self {
            kind,
            params: params.clone(),
            dt,
            sample_period_ticks: ((params.sample_period / dt).round() as u32).max(1),
            watchdog_ticks: (params.watchdog / dt).round() as u64,
        }
    }

    pub fn seconds_to_ticks(&self, seconds: f64) -> u64 {
        (seconds / self.dt).round().max(0.0) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: u32,
    pub pose: Pose,
    /// Assigned zone `Z_i`.
    pub zone: ZoneLabel,
    pub role: Option<Role>,
    pub fsm: FsmState,
    pub samples_taken: u32,
    sample_sum: f64,
    sample_clock: u32,
    /// Last ground sample.
    pub bel: f64,
    /// Mean of the last complete set of samples.
    pub avg_bel: f64,
    advertise_ticks_left: u64,
    advertise_ticks_total: u64,
    collected: BTreeMap<u32, BeliefMessage>,
    opinion: Option<ZoneLabel>,
    pub store: StigStore,
    ticks_in_state: u64,
    stuck_reported: bool,
}

impl RobotState {
    /// Initial state for robot `id` under `kind`: even/odd ids go to A/B;
    /// Division of Labor assigns `id mod 3` to sampler A, sampler B and
    /// networker.
    pub fn new(id: u32, pose: Pose, kind: StrategyKind, params: &StrategyParams) -> Self {
        let (zone, role, fsm) = match kind {
            StrategyKind::HoneyBee | StrategyKind::Stigmergy => {
                let zone = if id.is_multiple_of(2) { ZoneLabel::A } else { ZoneLabel::B };
                (zone, None, FsmState::GoToZone)
            }
            StrategyKind::DivisionOfLabor => match id % 3 {
                0 => (ZoneLabel::A, Some(Role::Sampler(ZoneLabel::A)), FsmState::GoToZone),
                1 => (ZoneLabel::B, Some(Role::Sampler(ZoneLabel::B)), FsmState::GoToZone),
                _ => (ZoneLabel::A, Some(Role::Networker), FsmState::Network),
            },
        };
        Self {
            id,
            pose,
            zone,
            role,
            fsm,
            samples_taken: 0,
            sample_sum: 0.0,
            sample_clock: 0,
            bel: 0.0,
            avg_bel: 0.0,
            advertise_ticks_left: 0,
            advertise_ticks_total: 0,
            collected: BTreeMap::new(),
            opinion: None,
            store: StigStore::new(params.broadcast_reads),
            ticks_in_state: 0,
            stuck_reported: false,
        }
    }

    /// Zone this robot currently favors. Cycle-based strategies favor their
    /// assignment; Division of Labor robots start undecided.
    pub fn opinion(&self) -> Option<ZoneLabel> {
        match self.role {
            Some(_) => self.opinion,
            None => Some(self.zone),
        }
    }

    /// Remaining advertise time in seconds.
    pub fn advertise_timer(&self, dt: f64) -> f64 {
        self.advertise_ticks_left as f64 * dt
    }

    /// Belief messages gathered in the current collection window.
    pub fn collected(&self) -> impl Iterator<Item = &BeliefMessage> {
        self.collected.values()
    }

    fn set_fsm(&mut self, next: FsmState) {
        if next != self.fsm {
            self.fsm = next;
            self.ticks_in_state = 0;
            self.stuck_reported = false;
        }
    }

    fn start_sampling(&mut self) {
        self.samples_taken = 0;
        self.sample_sum = 0.0;
        self.sample_clock = 0;
        self.set_fsm(FsmState::Sample);
    }

    fn begin_advertise(&mut self, ticks: u64) {
        let ticks = ticks.max(1);
        self.advertise_ticks_left = ticks;
        self.advertise_ticks_total = ticks;
        self.collected.clear();
        self.set_fsm(FsmState::Advertise);
    }

    fn in_collect_window(&self, fraction: f64) -> bool {
        let window = ((fraction * self.advertise_ticks_total as f64).ceil() as u64).max(1);
        self.advertise_ticks_left <= window
    }

    /// Sets the opinion to the strictly larger aggregate; ties keep it.
    fn track_opinion(&mut self, agg_a: f64, agg_b: f64) {
        if agg_a > agg_b {
            self.opinion = Some(ZoneLabel::A);
        } else if agg_b > agg_a {
            self.opinion = Some(ZoneLabel::B);
        }
    }
}

/// Records one ground sample: the mean of the four ground readings. After
/// `target` samples, `avg_bel` is their mean and `true` is returned.
pub fn sample_tick(state: &mut RobotState, ground: &[u8; 4], target: u32) -> bool {
    let bel = ground.iter().map(|&g| g as f64).sum::<f64>() / ground.len() as f64;
    state.bel = bel;
    state.sample_sum += bel;
    state.samples_taken += 1;
    if state.samples_taken >= target {
        state.avg_bel = state.sample_sum / state.samples_taken as f64;
        true
    } else {
        false
    }
}

/// Taxis that leads from the Nest to `zone` (the light is on the A side).
pub fn toward(zone: ZoneLabel) -> TaxisMode {
    match zone {
        ZoneLabel::A => TaxisMode::Photo,
        ZoneLabel::B => TaxisMode::Anti,
    }
}

/// Diffuse inside `zone`, steering back when its beacon is lost.
pub fn stay_in_zone(zone: ZoneLabel, beacons: ZoneSet) -> ControlRequest {
    if beacons.contains(zone) {
        ControlRequest::Diffuse
    } else {
        ControlRequest::Taxis(toward(zone))
    }
}

/// Diffuse inside the Nest, steering back when a zone beacon is heard.
pub fn stay_in_nest(beacons: ZoneSet) -> ControlRequest {
    if beacons.a {
        ControlRequest::Taxis(toward(ZoneLabel::B))
    } else if beacons.b {
        ControlRequest::Taxis(toward(ZoneLabel::A))
    } else {
        ControlRequest::Diffuse
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub request: ControlRequest,
    pub outbox: Vec<Message>,
}

/// GoToZone and Sample phases shared by all strategies. Returns the motion
/// request and whether a full set of samples was just completed.
fn travel_and_sample(
    state: &mut RobotState,
    sensors: &SensorReadings,
    ctx: &StrategyContext,
) -> (ControlRequest, bool) {
    match state.fsm {
        FsmState::GoToZone => {
            if sensors.beacons.contains(state.zone) {
                state.start_sampling();
                (ControlRequest::Diffuse, false)
            } else {
                if state.ticks_in_state == ctx.watchdog_ticks && !state.stuck_reported {
                    state.stuck_reported = true;
                    debug!("robot {} has not reached zone {:?}", state.id, state.zone);
                }
                (ControlRequest::Taxis(toward(state.zone)), false)
            }
        }
        FsmState::Sample => {
            let mut done = false;
            if sensors.beacons.contains(state.zone) && sensors.ground.in_zone {
                state.sample_clock += 1;
                if state.sample_clock >= ctx.sample_period_ticks {
                    state.sample_clock = 0;
                    done = sample_tick(state, &sensors.ground.values, ctx.params.sample_target);
                }
            }
            (stay_in_zone(state.zone, sensors.beacons), done)
        }
        _ => unreachable!("travel_and_sample called in {:?}", state.fsm),
    }
}

fn absorb_stig(state: &mut RobotState, inbox: &[Message]) {
    for m in inbox {
        if let Message::Stig(entry) = m {
            state.store.on_receive(*entry);
        }
    }
}

fn stig_outbox(state: &mut RobotState, outbox: &mut Vec<Message>) {
    outbox.extend(state.store.drain_outbox().into_iter().map(Message::Stig));
}

/// One state-machine step for `state` under its run's strategy.
pub fn tick(
    state: &mut RobotState,
    sensors: &SensorReadings,
    inbox: &[Message],
    ctx: &StrategyContext,
) -> TickOutput {
    let out = match ctx.kind {
        StrategyKind::HoneyBee => honeybee::tick(state, sensors, inbox, ctx),
        StrategyKind::Stigmergy => stigmergy::tick(state, sensors, inbox, ctx),
        StrategyKind::DivisionOfLabor => dol::tick(state, sensors, inbox, ctx),
    };
    state.ticks_in_state += 1;
    out
}

/// Whether `from -> to` is an edge of the state machine for this robot.
pub fn is_valid_transition(kind: StrategyKind, role: Option<Role>, from: FsmState, to: FsmState) -> bool {
    use FsmState::*;
    if from == to {
        return true;
    }
    match (kind, role) {
        (StrategyKind::DivisionOfLabor, Some(Role::Sampler(_))) => {
            matches!((from, to), (GoToZone, Sample))
        }
        (StrategyKind::DivisionOfLabor, _) => false,
        _ => matches!(
            (from, to),
            (GoToZone, Sample) | (Sample, Return) | (Return, Advertise) | (Advertise, GoToZone)
        ),
    }
}
