//! Honey Bee: beliefs are exchanged by plain local broadcast while
//! advertising in the Nest, for a time proportional to the belief.

use super::{
    stay_in_nest, toward, travel_and_sample, BeliefMessage, FsmState, Message, RobotState,
    StrategyContext, TickOutput,
};
use crate::arena::ZoneLabel;
use crate::behaviors::ControlRequest;
use crate::sensing::SensorReadings;

/// Aggregates own and neighbor beliefs into `(agg_same, agg_other)` for the
/// robot's own zone and the other zone. `agg_other` is 0.0 without evidence.
pub fn honeybee_aggregate(zone: ZoneLabel, own_avg: f64, msgs: &[BeliefMessage]) -> (f64, f64) {
    let (mut same_sum, mut same_n) = (own_avg, 1usize);
    let (mut other_sum, mut other_n) = (0.0, 0usize);
    for m in msgs {
        if m.zone == zone {
            same_sum += m.avg_bel;
            same_n += 1;
        } else {
            other_sum += m.avg_bel;
            other_n += 1;
        }
    }
    let agg_other = if other_n == 0 {
        0.0
    } else {
        other_sum / other_n as f64
    };
    (same_sum / same_n as f64, agg_other)
}

/// Switches to the other zone only if its aggregate is strictly larger.
pub fn honeybee_decide(state: &mut RobotState, agg_same: f64, agg_other: f64) {
    if agg_other > agg_same {
        state.zone = state.zone.other();
    }
    state.set_fsm(FsmState::GoToZone);
}

pub(super) fn tick(
    state: &mut RobotState,
    sensors: &SensorReadings,
    inbox: &[Message],
    ctx: &StrategyContext,
) -> TickOutput {
    let mut outbox = Vec::new();
    let request = match state.fsm {
        FsmState::GoToZone | FsmState::Sample => {
            let (request, done) = travel_and_sample(state, sensors, ctx);
            if done {
                state.set_fsm(FsmState::Return);
            }
            request
        }
        FsmState::Return => {
            if sensors.beacons.is_empty() {
                let w = ctx.params.w_base * state.avg_bel;
                state.begin_advertise(ctx.seconds_to_ticks(w));
                ControlRequest::Diffuse
            } else {
                ControlRequest::Taxis(toward(state.zone).reverse())
            }
        }
        FsmState::Advertise => {
            outbox.push(Message::Belief(BeliefMessage {
                sender: state.id,
                zone: state.zone,
                avg_bel: state.avg_bel,
            }));
            if state.in_collect_window(ctx.params.collect_fraction) {
                for m in inbox {
                    if let Message::Belief(b) = m {
                        state.collected.insert(b.sender, *b);
                    }
                }
            }
            state.advertise_ticks_left -= 1;
            if state.advertise_ticks_left == 0 {
                let msgs: Vec<BeliefMessage> = state.collected.values().copied().collect();
                let (same, other) = honeybee_aggregate(state.zone, state.avg_bel, &msgs);
                state.collected.clear();
                honeybee_decide(state, same, other);
            }
            stay_in_nest(sensors.beacons)
        }
        FsmState::Network => unreachable!("networker state in Honey Bee"),
    };
    TickOutput { request, outbox }
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::super::tick as step;
    use super::*;
    use crate::arena::ZoneSet;
    use crate::config::StrategyKind;

    fn msg(sender: u32, zone: ZoneLabel, avg_bel: f64) -> BeliefMessage {
        BeliefMessage {
            sender,
            zone,
            avg_bel,
        }
    }

    #[test]
    fn aggregate_without_neighbors() {
        assert_eq!(honeybee_aggregate(ZoneLabel::A, 0.8, &[]), (0.8, 0.0));
    }

    #[test]
    fn aggregate_same_zone_neighbor() {
        let (same, other) = honeybee_aggregate(ZoneLabel::A, 0.8, &[msg(1, ZoneLabel::A, 0.6)]);
        assert!((same - 0.7).abs() < 1e-15);
        assert_eq!(other, 0.0);
    }

    #[test]
    fn aggregate_partition() {
        let msgs = [
            msg(1, ZoneLabel::A, 0.9),
            msg(2, ZoneLabel::B, 0.2),
            msg(3, ZoneLabel::A, 0.7),
        ];
        let (same, other) = honeybee_aggregate(ZoneLabel::A, 0.8, &msgs);
        assert!((same - 0.8).abs() < 1e-15);
        assert!((other - 0.2).abs() < 1e-15);
    }

    #[test]
    fn decide_flip_rules() {
        let mut s = robot(1, StrategyKind::HoneyBee);
        s.fsm = FsmState::Advertise;
        honeybee_decide(&mut s, 0.2, 0.9);
        assert_eq!(s.zone, ZoneLabel::A);
        assert_eq!(s.fsm, FsmState::GoToZone);
        honeybee_decide(&mut s, 0.5, 0.5);
        assert_eq!(s.zone, ZoneLabel::A);
        honeybee_decide(&mut s, 0.0, 0.0);
        assert_eq!(s.zone, ZoneLabel::A);
    }

    fn run_until(s: &mut RobotState, beacons: ZoneSet, ground: [u8; 4], fsm: FsmState) -> usize {
        let ctx = ctx(StrategyKind::HoneyBee);
        for n in 0..10_000 {
            if s.fsm == fsm {
                return n;
            }
            step(s, &sensors(beacons, ground), &[], &ctx);
        }
        panic!("never reached {fsm:?}");
    }

    #[test]
    fn full_cycle_and_advertise_timer() {
        let ctx = ctx(StrategyKind::HoneyBee);
        let mut s = robot(0, StrategyKind::HoneyBee);
        let a = ZoneSet::only(ZoneLabel::A);
        run_until(&mut s, a, [1, 1, 1, 1], FsmState::Sample);
        let ticks = run_until(&mut s, a, [1, 1, 1, 1], FsmState::Return);
        // 10 samples at one per second
        assert_eq!(ticks, 100);
        assert_eq!(s.avg_bel, 1.0);
        // override the belief to check the timer scaling
        s.avg_bel = 0.9;
        let out = step(&mut s, &sensors(ZoneSet::EMPTY, [0; 4]), &[], &ctx);
        assert_eq!(out.request, ControlRequest::Diffuse);
        assert_eq!(s.fsm, FsmState::Advertise);
        assert!((s.advertise_timer(ctx.dt) - 27.0).abs() < 1e-9);
    }

    #[test]
    fn advertise_collects_only_near_the_end() {
        let ctx = ctx(StrategyKind::HoneyBee);
        let mut s = robot(1, StrategyKind::HoneyBee);
        s.avg_bel = 0.1;
        s.begin_advertise(100);
        let other = [Message::Belief(msg(7, ZoneLabel::A, 0.9))];
        // first 80 ticks: not collecting
        for _ in 0..80 {
            let out = step(&mut s, &sensors(ZoneSet::EMPTY, [0; 4]), &other, &ctx);
            assert_eq!(out.outbox.len(), 1);
        }
        assert_eq!(s.collected().count(), 0);
        step(&mut s, &sensors(ZoneSet::EMPTY, [0; 4]), &other, &ctx);
        assert_eq!(s.collected().count(), 1);
        for _ in 0..19 {
            step(&mut s, &sensors(ZoneSet::EMPTY, [0; 4]), &[], &ctx);
        }
        // decided with 0.9 from A over own 0.1
        assert_eq!(s.fsm, FsmState::GoToZone);
        assert_eq!(s.zone, ZoneLabel::A);
    }

    #[test]
    fn return_uses_opposite_taxis() {
        let ctx = ctx(StrategyKind::HoneyBee);
        let mut s = robot(0, StrategyKind::HoneyBee);
        s.set_fsm(FsmState::Return);
        let out = step(&mut s, &sensors(ZoneSet::only(ZoneLabel::A), [0; 4]), &[], &ctx);
        assert_eq!(
            out.request,
            ControlRequest::Taxis(crate::behaviors::TaxisMode::Anti)
        );
    }
}
