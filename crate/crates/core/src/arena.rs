//! Static world model: the arena split into Zone B, Nest and Zone A (left to
//! right), tiled floor quality in the two sampling zones, the light source and
//! the zone beacons.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::WorldConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ZoneLabel {
    A,
    B,
}

impl ZoneLabel {
    pub fn other(self) -> ZoneLabel {
        match self {
            ZoneLabel::A => ZoneLabel::B,
            ZoneLabel::B => ZoneLabel::A,
        }
    }
}

/// Region of the arena a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Zone(ZoneLabel),
    Nest,
}

/// Set of zone labels heard from beacons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ZoneSet {
    pub a: bool,
    pub b: bool,
}

impl ZoneSet {
    pub const EMPTY: ZoneSet = ZoneSet { a: false, b: false };

    pub fn only(zone: ZoneLabel) -> Self {
        let mut s = Self::EMPTY;
        s.insert(zone);
        s
    }

    pub fn insert(&mut self, zone: ZoneLabel) {
        match zone {
            ZoneLabel::A => self.a = true,
            ZoneLabel::B => self.b = true,
        }
    }

    pub fn contains(&self, zone: ZoneLabel) -> bool {
        match zone {
            ZoneLabel::A => self.a,
            ZoneLabel::B => self.b,
        }
    }

    /// No beacon heard: the robot considers itself in the Nest.
    pub fn is_empty(&self) -> bool {
        !self.a && !self.b
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Floor tiles of one sampling zone: 0 = black, 1 = white, row-major with
/// row 0 at the bottom. Tiles on the far edges are clipped to the zone.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid {
    pub origin: Vec2,
    pub tile_size: f64,
    pub cols: usize,
    pub rows: usize,
    pub cells: Vec<u8>,
}

impl TileGrid {
    fn generate(rect: Rect, tile_size: f64, rho: f64, rng: &mut ChaCha8Rng) -> Self {
        let cols = ((rect.width() / tile_size) - 1e-9).ceil().max(1.0) as usize;
        let rows = ((rect.height() / tile_size) - 1e-9).ceil().max(1.0) as usize;
        let n = cols * rows;
        let whites = (rho * n as f64).round() as usize;
        // Exactly `whites` white tiles at seeded positions.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut cells = vec![0u8; n];
        for &i in &order[..whites] {
            cells[i] = 1;
        }
        Self {
            origin: rect.min,
            tile_size,
            cols,
            rows,
            cells,
        }
    }

    pub fn white_fraction(&self) -> f64 {
        self.cells.iter().map(|&c| c as usize).sum::<usize>() as f64 / self.cells.len() as f64
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.cells[row * self.cols + col]
    }

    /// Tile index containing `p`; points on the far edge map to the last tile.
    pub fn index_of(&self, p: Vec2) -> (usize, usize) {
        let col = ((p.x - self.origin.x) / self.tile_size).floor().max(0.0) as usize;
        let row = ((p.y - self.origin.y) / self.tile_size).floor().max(0.0) as usize;
        (col.min(self.cols - 1), row.min(self.rows - 1))
    }

    pub fn color_at(&self, p: Vec2) -> u8 {
        let (c, r) = self.index_of(p);
        self.get(c, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    pub position: Vec2,
    pub zone: ZoneLabel,
    pub range: f64,
}

/// Immutable world built from a [`WorldConfig`].
#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub arena: Rect,
    pub zone_a: Rect,
    pub nest: Rect,
    pub zone_b: Rect,
    pub tiles_a: TileGrid,
    pub tiles_b: TileGrid,
    pub beacons: Vec<Beacon>,
    pub light_pos: Vec2,
}

impl World {
    pub fn build(config: &WorldConfig) -> Result<Self> {
        config.validate()?;
        let u = config.arena_width;
        let v = config.arena_height;
        let zw = config.zone_width();
        let arena = Rect {
            min: Vec2::ZERO,
            max: Vec2::new(u, v),
        };
        let zone_b = Rect {
            min: Vec2::ZERO,
            max: Vec2::new(zw, v),
        };
        let nest = Rect {
            min: Vec2::new(zw, 0.0),
            max: Vec2::new(zw + config.nest_width, v),
        };
        let zone_a = Rect {
            min: Vec2::new(zw + config.nest_width, 0.0),
            max: Vec2::new(u, v),
        };

        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let tiles_a = TileGrid::generate(zone_a, config.tile_size, config.rho_a, &mut rng);
        let tiles_b = TileGrid::generate(zone_b, config.tile_size, config.rho_b, &mut rng);

        let k = config.beacon_count_per_zone;
        let mut beacons = Vec::with_capacity(2 * k);
        for (zone, x) in [(ZoneLabel::A, zone_a.min.x), (ZoneLabel::B, zone_b.max.x)] {
            for i in 0..k {
                beacons.push(Beacon {
                    position: Vec2::new(x, v * (i as f64 + 0.5) / k as f64),
                    zone,
                    range: config.beacon_range,
                });
            }
        }

        Ok(Self {
            config: config.clone(),
            arena,
            zone_a,
            nest,
            zone_b,
            tiles_a,
            tiles_b,
            beacons,
            light_pos: config.light_pos,
        })
    }

    pub fn zone_rect(&self, zone: ZoneLabel) -> Rect {
        match zone {
            ZoneLabel::A => self.zone_a,
            ZoneLabel::B => self.zone_b,
        }
    }

    pub fn tiles(&self, zone: ZoneLabel) -> &TileGrid {
        match zone {
            ZoneLabel::A => &self.tiles_a,
            ZoneLabel::B => &self.tiles_b,
        }
    }

    /// Geometric region of a point. The zone/Nest boundaries belong to the
    /// zones.
    pub fn region_of(&self, p: Vec2) -> Region {
        if p.x >= self.zone_a.min.x {
            Region::Zone(ZoneLabel::A)
        } else if p.x <= self.zone_b.max.x {
            Region::Zone(ZoneLabel::B)
        } else {
            Region::Nest
        }
    }

    fn check_inside(&self, p: Vec2) -> Result<()> {
        if self.arena.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds { x: p.x, y: p.y })
        }
    }

    /// Floor color under `p`: `Some(0)` black, `Some(1)` white, `None` in the
    /// Nest, which has no quality tiles.
    pub fn ground_color_at(&self, p: Vec2) -> Result<Option<u8>> {
        self.check_inside(p)?;
        Ok(match self.region_of(p) {
            Region::Zone(z) => Some(self.tiles(z).color_at(p)),
            Region::Nest => None,
        })
    }

    /// Zone labels broadcast by the beacons audible at `p`.
    ///
    /// Beacons sit on the zone/Nest boundary and cover only their own zone's
    /// side of it, so an empty set means the robot is in the Nest.
    pub fn zone_broadcasts_at(&self, p: Vec2) -> ZoneSet {
        if self.config.zone_oracle {
            return match self.region_of(p) {
                Region::Zone(z) => ZoneSet::only(z),
                Region::Nest => ZoneSet::EMPTY,
            };
        }
        let mut heard = ZoneSet::EMPTY;
        for b in &self.beacons {
            let on_side = match b.zone {
                ZoneLabel::A => p.x >= b.position.x,
                ZoneLabel::B => p.x <= b.position.x,
            };
            if on_side && p.distance(b.position) <= b.range {
                heard.insert(b.zone);
            }
        }
        heard
    }
}
