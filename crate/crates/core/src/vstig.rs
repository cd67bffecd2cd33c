//! Virtual stigmergy: a per-robot, versioned key-value store kept consistent
//! by local gossip.
//!
//! Every entry carries a Lamport clock and the id of the robot that wrote
//! it. Newer entries replace older ones; two different entries with the same
//! clock are a *conflict*, resolved in favor of the larger value (ties
//! broken by the larger writer id) and counted.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arena::ZoneLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StigKey {
    /// Aggregated belief about zone A.
    AggA,
    /// Aggregated belief about zone B.
    AggB,
}

impl StigKey {
    pub fn for_zone(zone: ZoneLabel) -> Self {
        match zone {
            ZoneLabel::A => StigKey::AggA,
            ZoneLabel::B => StigKey::AggB,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            StigKey::AggA => 0,
            StigKey::AggB => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(StigKey::AggA),
            1 => Some(StigKey::AggB),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StigEntry {
    pub key: StigKey,
    pub value: f64,
    pub lamport: u64,
    pub writer: u32,
}

impl StigEntry {
    /// Size of an encoded entry on the simulated wire.
    pub const WIRE_SIZE: usize = 1 + 8 + 8 + 4;

    /// Precedence used for merging: clock first, then value, then writer.
    pub fn precedence(&self, other: &StigEntry) -> Ordering {
        self.lamport
            .cmp(&other.lamport)
            .then(self.value.total_cmp(&other.value))
            .then(self.writer.cmp(&other.writer))
    }

    /// The entry that survives when both are known.
    pub fn merge(self, other: StigEntry) -> StigEntry {
        if other.precedence(&self) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    /// Little-endian `key:u8, value:f64, lamport:u64, writer:u32`.
    pub fn encode(&self) -> [u8; Self::WIRE_SIZE] {
        let mut out = [0u8; Self::WIRE_SIZE];
        out[0] = self.key.code();
        out[1..9].copy_from_slice(&self.value.to_le_bytes());
        out[9..17].copy_from_slice(&self.lamport.to_le_bytes());
        out[17..21].copy_from_slice(&self.writer.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::WIRE_SIZE {
            return Err(Error::InvalidConfig(format!(
                "stigmergy entry must be {} bytes, got {}",
                Self::WIRE_SIZE,
                bytes.len()
            )));
        }
        let key = StigKey::from_code(bytes[0])
            .ok_or_else(|| Error::InvalidConfig(format!("unknown key code {}", bytes[0])))?;
        let value = f64::from_le_bytes(bytes[1..9].try_into().unwrap());
        let lamport = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
        let writer = u32::from_le_bytes(bytes[17..21].try_into().unwrap());
        Ok(Self {
            key,
            value,
            lamport,
            writer,
        })
    }
}

/// One robot's local replica of the tuple space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StigStore {
    entries: BTreeMap<StigKey, StigEntry>,
    conflicts: u64,
    outbox: Vec<StigEntry>,
    broadcast_reads: bool,
}

impl Default for StigStore {
    fn default() -> Self {
        Self::new(true)
    }
}

impl StigStore {
    pub fn new(broadcast_reads: bool) -> Self {
        Self {
            entries: BTreeMap::new(),
            conflicts: 0,
            outbox: Vec::new(),
            broadcast_reads,
        }
    }

    pub fn entry(&self, key: StigKey) -> Option<&StigEntry> {
        self.entries.get(&key)
    }

    pub fn entries(&self) -> impl Iterator<Item = &StigEntry> {
        self.entries.values()
    }

    pub fn conflict_count(&self) -> u64 {
        self.conflicts
    }

    /// Pending broadcasts, in the order they were produced.
    pub fn outbox(&self) -> &[StigEntry] {
        &self.outbox
    }

    /// Value without touching the network (observer access).
    pub fn peek(&self, key: StigKey) -> f64 {
        self.entries.get(&key).map_or(0.0, |e| e.value)
    }

    /// Writes `value` with the next clock for `key` and broadcasts it.
    pub fn put(&mut self, key: StigKey, value: f64, self_id: u32) -> StigEntry {
        debug_assert!(value.is_finite());
        let lamport = self.entries.get(&key).map_or(0, |e| e.lamport) + 1;
        let entry = StigEntry {
            key,
            value,
            lamport,
            writer: self_id,
        };
        self.entries.insert(key, entry);
        self.outbox.push(entry);
        entry
    }

    /// Reads `key`. Unless read broadcasting is disabled, the entry is
    /// broadcast; an absent key reads as the lamport-0 default
    /// `(0.0, 0, self_id)`, whose broadcast asks neighbors holding a real
    /// version to send it.
    pub fn get(&mut self, key: StigKey, self_id: u32) -> f64 {
        let entry = self.entries.get(&key).copied().unwrap_or(StigEntry {
            key,
            value: 0.0,
            lamport: 0,
            writer: self_id,
        });
        if self.broadcast_reads {
            self.outbox.push(entry);
        }
        entry.value
    }

    /// Handles an entry received from a neighbor.
    ///
    /// Lamport-0 entries carry no write: they are never stored and never
    /// conflict, but still get the sender repaired.
    pub fn on_receive(&mut self, incoming: StigEntry) {
        let Some(local) = self.entries.get(&incoming.key).copied() else {
            if incoming.lamport > 0 {
                self.entries.insert(incoming.key, incoming);
                self.outbox.push(incoming);
            }
            return;
        };
        match incoming.lamport.cmp(&local.lamport) {
            Ordering::Greater => {
                self.entries.insert(incoming.key, incoming);
                self.outbox.push(incoming);
            }
            Ordering::Less => self.outbox.push(local),
            Ordering::Equal if incoming.writer == local.writer => {}
            Ordering::Equal => {
                self.conflicts += 1;
                let winner = local.merge(incoming);
                self.entries.insert(winner.key, winner);
                self.outbox.push(winner);
            }
        }
    }

    /// Moves `agg` toward `avg_bel` by weight `w` and writes it back.
    pub fn update_belief(&mut self, key: StigKey, avg_bel: f64, w: f64, self_id: u32) -> f64 {
        let old = self.get(key, self_id);
        let new = old + w * (avg_bel - old);
        self.put(key, new, self_id);
        new
    }

    /// Drains the outbox, keeping only the last entry produced for each key.
    pub fn drain_outbox(&mut self) -> Vec<StigEntry> {
        let mut last: BTreeMap<StigKey, StigEntry> = BTreeMap::new();
        for e in self.outbox.drain(..) {
            last.insert(e.key, e);
        }
        last.into_values().collect()
    }
}
