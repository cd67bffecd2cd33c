//! Division of Labor: permanent sampler and networker roles over the
//! virtual stigmergy. No robot ever changes role or zone.

use super::{
    absorb_stig, stay_in_nest, stig_outbox, travel_and_sample, FsmState, Message, Role,
    RobotState, StrategyContext, TickOutput,
};
use crate::sensing::SensorReadings;
use crate::vstig::StigKey;

pub(super) fn tick(
    state: &mut RobotState,
    sensors: &SensorReadings,
    inbox: &[Message],
    ctx: &StrategyContext,
) -> TickOutput {
    absorb_stig(state, inbox);
    let request = match state.role {
        Some(Role::Sampler(zone)) => {
            let (request, done) = travel_and_sample(state, sensors, ctx);
            if done {
                let a = state.store.get(StigKey::AggA, state.id);
                let b = state.store.get(StigKey::AggB, state.id);
                state.track_opinion(a, b);
                state.store.update_belief(
                    StigKey::for_zone(zone),
                    state.avg_bel,
                    ctx.params.stig_weight,
                    state.id,
                );
                state.start_sampling();
            }
            request
        }
        Some(Role::Networker) => {
            debug_assert_eq!(state.fsm, FsmState::Network);
            let a = state.store.get(StigKey::AggA, state.id);
            let b = state.store.get(StigKey::AggB, state.id);
            state.track_opinion(a, b);
            stay_in_nest(sensors.beacons)
        }
        None => unreachable!("Division of Labor robot without a role"),
    };
    let mut outbox = Vec::new();
    stig_outbox(state, &mut outbox);
    TickOutput { request, outbox }
}
