//! Deterministic 2D swarm simulator for studying movement and communication
//! congestion in binary collective decision-making.
//!
//! A swarm of kinematic disk robots samples two zones of different quality
//! (fraction of white floor tiles) and has to agree on the better one. Three
//! decision strategies are provided:
//!
//! - **Honey Bee**: robots shuttle between the zones and the Nest, advertising
//!   their averaged beliefs by local broadcast for a time proportional to the
//!   perceived quality.
//! - **Stigmergy**: the same cycle, but beliefs are aggregated in a versioned,
//!   Lamport-clocked tuple space ([`vstig`]) kept consistent by gossip.
//! - **Division of Labor**: fixed sampler and networker roles on top of the
//!   same tuple space.
//!
//! The [`engine`] runs the synchronous tick loop, [`metrics`] accumulates the
//! collision-avoidance time, conflict counts, stagnation heatmaps and
//! movement-change grids, and [`cli`] drives single runs and sweeps.

pub mod arena;
pub mod behaviors;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod sensing;
pub mod strategies;
pub mod trajectory;
pub mod vstig;

pub use config::{SimConfig, StrategyKind};
pub use engine::{run, RunResult, Simulation};
pub use error::{Error, Result};
pub use geometry::Vec2;
