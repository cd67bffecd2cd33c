//! Run configuration. Every tunable has a default; a TOML file (see the
//! README for the schema) can override any subset of them.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Footprint of a robot in square meters.
pub const ROBOT_FOOTPRINT: f64 = 0.045;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    #[serde(rename = "honeybee")]
    HoneyBee,
    Stigmergy,
    #[serde(rename = "dol")]
    DivisionOfLabor,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::HoneyBee,
        StrategyKind::Stigmergy,
        StrategyKind::DivisionOfLabor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::HoneyBee => "honeybee",
            StrategyKind::Stigmergy => "stigmergy",
            StrategyKind::DivisionOfLabor => "dol",
        }
    }

    pub fn min_robots(self) -> usize {
        match self {
            StrategyKind::DivisionOfLabor => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "honeybee" | "honey_bee" | "hb" => Ok(StrategyKind::HoneyBee),
            "stigmergy" | "stig" => Ok(StrategyKind::Stigmergy),
            "dol" | "division_of_labor" => Ok(StrategyKind::DivisionOfLabor),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Arena geometry, zone qualities, light, beacons and swarm size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub arena_width: f64,
    pub arena_height: f64,
    pub nest_width: f64,
    pub rho_a: f64,
    pub rho_b: f64,
    pub tile_size: f64,
    pub light_pos: Vec2,
    pub light_intensity: f64,
    pub beacon_count_per_zone: usize,
    pub beacon_range: f64,
    /// Replace beacon broadcasts with exact geometric zone membership.
    pub zone_oracle: bool,
    pub comm_range: f64,
    pub robot_radius: f64,
    pub robots: usize,
    pub dt: f64,
    pub timeout: f64,
    /// Seed of the floor tile layout. Robot placement uses the run seed.
    pub rng_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            arena_width: 4.0,
            arena_height: 4.0,
            nest_width: 2.0,
            rho_a: 0.9,
            rho_b: 0.1,
            tile_size: 0.1,
            light_pos: Vec2::new(4.0, 2.0),
            light_intensity: 1.0,
            beacon_count_per_zone: 5,
            beacon_range: 1.2,
            zone_oracle: false,
            comm_range: 0.8,
            robot_radius: (ROBOT_FOOTPRINT / std::f64::consts::PI).sqrt(),
            robots: 20,
            dt: 0.1,
            timeout: 6000.0,
            rng_seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn zone_width(&self) -> f64 {
        (self.arena_width - self.nest_width) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let positive = [
            ("arena_width", self.arena_width),
            ("arena_height", self.arena_height),
            ("nest_width", self.nest_width),
            ("tile_size", self.tile_size),
            ("light_intensity", self.light_intensity),
            ("beacon_range", self.beacon_range),
            ("comm_range", self.comm_range),
            ("robot_radius", self.robot_radius),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.nest_width >= self.arena_width {
            return bad("nest_width must be smaller than arena_width".into());
        }
        for (name, v) in [("rho_a", self.rho_a), ("rho_b", self.rho_b)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.beacon_count_per_zone == 0 {
            return bad("beacon_count_per_zone must be at least 1".into());
        }
        if !(self.timeout.is_finite() && self.timeout >= 0.0) {
            return bad(format!("timeout must be non-negative, got {}", self.timeout));
        }
        let steps = self.timeout / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return bad(format!(
                "timeout {} is not a multiple of dt {}",
                self.timeout, self.dt
            ));
        }
        Ok(())
    }

    /// Number of ticks before a run is cut off.
    pub fn timeout_ticks(&self) -> u64 {
        (self.timeout / self.dt).round() as u64
    }
}

/// Which obstacle bearings trigger collision avoidance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaTrigger {
    /// Obstacle vector within `o_at` of the heading.
    Ahead,
    /// Obstacle vector outside the `o_at` cone.
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlParams {
    /// Collision-avoidance speed (m/s).
    pub s_o: f64,
    /// Phototaxis speed (m/s).
    pub s_l: f64,
    /// Minimum obstacle-vector norm for collision avoidance.
    pub o_lt: f64,
    /// Angular threshold for collision avoidance (radians).
    pub o_at: f64,
    /// Diffusion speed and global speed cap (m/s).
    pub max_speed: f64,
    /// Proximity sensor range, measured from the robot surface (m).
    pub proximity_range: f64,
    pub ca_trigger: CaTrigger,
    /// After a collision-avoidance tick, move for up to this many ticks in a
    /// random direction away from the obstacle. 0 disables it.
    pub escape_ticks: u32,
    /// Half-width of the escape direction cone around the avoidance
    /// direction (radians).
    pub escape_spread: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            s_o: 0.15,
            s_l: 0.15,
            o_lt: 0.1,
            o_at: std::f64::consts::FRAC_PI_4,
            max_speed: 0.15,
            proximity_range: 0.25,
            ca_trigger: CaTrigger::Ahead,
            escape_ticks: 20,
            escape_spread: std::f64::consts::FRAC_PI_2,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s_o", self.s_o),
            ("s_l", self.s_l),
            ("o_lt", self.o_lt),
            ("o_at", self.o_at),
            ("proximity_range", self.proximity_range),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.max_speed.is_finite() && self.max_speed >= 0.0) {
            return Err(Error::InvalidConfig("max_speed must be non-negative".into()));
        }
        if !(self.escape_spread.is_finite() && (0.0..=std::f64::consts::FRAC_PI_2).contains(&self.escape_spread)) {
            return Err(Error::InvalidConfig("escape_spread must be in [0, pi/2]".into()));
        }
        if self.s_o > self.max_speed || self.s_l > self.max_speed {
            return Err(Error::InvalidConfig(
                "s_o and s_l must not exceed max_speed".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    /// Samples per sampling trip.
    pub sample_target: u32,
    /// Seconds between two ground samples.
    pub sample_period: f64,
    /// Honey Bee advertise time for a belief of 1.0 (s).
    pub w_base: f64,
    /// Constant advertise time used by the tuple-space strategies (s).
    pub w_const: f64,
    /// Trailing fraction of the advertise period spent collecting beliefs.
    pub collect_fraction: f64,
    /// Weight of a new belief in the aggregate update.
    pub stig_weight: f64,
    /// Broadcast the stored entry on reads as well as writes.
    pub broadcast_reads: bool,
    /// Time after which a robot that has not reached its zone is reported.
    pub watchdog: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            sample_target: 10,
            sample_period: 1.0,
            w_base: 30.0,
            w_const: 10.0,
            collect_fraction: 0.2,
            stig_weight: 0.3,
            broadcast_reads: true,
            watchdog: 600.0,
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        if self.sample_target == 0 {
            return Err(Error::InvalidConfig("sample_target must be >= 1".into()));
        }
        if !(self.stig_weight > 0.0 && self.stig_weight <= 1.0) {
            return Err(Error::InvalidConfig("stig_weight must be in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.collect_fraction) {
            return Err(Error::InvalidConfig(
                "collect_fraction must be in [0, 1]".into(),
            ));
        }
        for (name, v) in [
            ("sample_period", self.sample_period),
            ("w_base", self.w_base),
            ("w_const", self.w_const),
            ("watchdog", self.watchdog),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StagnationMode {
    /// Accumulate the time spent in a cell beyond the threshold.
    TimeBeyondThreshold,
    /// Count one event each time a robot's residence crosses the threshold.
    ThresholdCrossings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsParams {
    pub cell_size: f64,
    /// Residence time after which a robot counts as stagnating (s).
    pub stagnation_threshold: f64,
    /// `[start, end]` of the analysis window, percent of the run length.
    pub window: [f64; 2],
    pub stagnation_mode: StagnationMode,
    pub normalization: f64,
}

impl Default for MetricsParams {
    fn default() -> Self {
        Self {
            cell_size: 0.2,
            stagnation_threshold: 1.0,
            window: [0.0, 100.0],
            stagnation_mode: StagnationMode::TimeBeyondThreshold,
            normalization: 1.0,
        }
    }
}

impl MetricsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::InvalidConfig("cell_size must be positive".into()));
        }
        let [s, f] = self.window;
        if !(0.0 <= s && s <= f && f <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "window [{s}, {f}] must satisfy 0 <= start <= end <= 100"
            )));
        }
        if self.normalization == 0.0 {
            return Err(Error::ZeroNormalization);
        }
        Ok(())
    }
}

/// Everything needed to reproduce a run, apart from strategy and seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub world: WorldConfig,
    pub control: ControlParams,
    pub strategy: StrategyParams,
    pub metrics: MetricsParams,
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.control.validate()?;
        self.strategy.validate()?;
        self.metrics.validate()
    }

    /// Validates the config together with the strategy-specific swarm size.
    pub fn validate_for(&self, strategy: StrategyKind) -> Result<()> {
        self.validate()?;
        if self.world.robots < strategy.min_robots() {
            return Err(Error::InvalidConfig(format!(
                "{strategy} needs at least {} robots, got {}",
                strategy.min_robots(),
                self.world.robots
            )));
        }
        Ok(())
    }
}
