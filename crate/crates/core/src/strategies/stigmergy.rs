//! Stigmergy: the Honey Bee cycle with zone aggregates kept in the virtual
//! stigmergy and a constant advertise time.

use super::{
    absorb_stig, stay_in_nest, stig_outbox, toward, travel_and_sample, FsmState, Message,
    RobotState, StrategyContext, TickOutput,
};
use crate::behaviors::ControlRequest;
use crate::sensing::SensorReadings;
use crate::vstig::StigKey;

pub(super) fn tick(
    state: &mut RobotState,
    sensors: &SensorReadings,
    inbox: &[Message],
    ctx: &StrategyContext,
) -> TickOutput {
    absorb_stig(state, inbox);
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
                let key = StigKey::for_zone(state.zone);
                state
                    .store
                    .update_belief(key, state.avg_bel, ctx.params.stig_weight, state.id);
                state.begin_advertise(ctx.seconds_to_ticks(ctx.params.w_const));
                ControlRequest::Diffuse
            } else {
                ControlRequest::Taxis(toward(state.zone).reverse())
            }
        }
        FsmState::Advertise => {
            // Both aggregates are read every tick; with broadcast reads this
            // is what disseminates them while advertising.
            let same = state.store.get(StigKey::for_zone(state.zone), state.id);
            let other = state.store.get(StigKey::for_zone(state.zone.other()), state.id);
            state.advertise_ticks_left -= 1;
            if state.advertise_ticks_left == 0 {
                super::honeybee_decide(state, same, other);
            }
            stay_in_nest(sensors.beacons)
        }
        FsmState::Network => unreachable!("networker state in Stigmergy"),
    };
    let mut outbox = Vec::new();
    stig_outbox(state, &mut outbox);
    TickOutput { request, outbox }
}
