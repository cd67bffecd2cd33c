//! Congestion metrics: per-robot collision-avoidance time, communication
//! conflicts, the stagnation heatmap and the movement-change grid.
//!
//! Spatial metrics use square cells anchored at the arena origin; a robot
//! belongs to the cell containing its center. They are accumulated only for
//! ticks inside the analysis window, given as percentages of the run length.

use serde::{Deserialize, Serialize};

use crate::config::{MetricsParams, StagnationMode};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
}

impl GridSpec {
    pub fn covering(width: f64, height: f64, cell_size: f64) -> Self {
        let n = |len: f64| (((len / cell_size) - 1e-9).ceil().max(1.0)) as usize;
        Self {
            cell_size,
            cols: n(width),
            rows: n(height),
        }
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major cell index (row 0 at y = 0).
    pub fn cell_of(&self, p: Vec2) -> usize {
        let col = ((p.x / self.cell_size).floor().max(0.0) as usize).min(self.cols - 1);
        let row = ((p.y / self.cell_size).floor().max(0.0) as usize).min(self.rows - 1);
        row * self.cols + col
    }

    pub fn cell_center(&self, index: usize) -> Vec2 {
        let (col, row) = (index % self.cols, index / self.cols);
        Vec2::new(
            (col as f64 + 0.5) * self.cell_size,
            (row as f64 + 0.5) * self.cell_size,
        )
    }
}

/// Ticks `t` with `lo < t <= hi` are inside the window. Position samples
/// `lo..=hi` are therefore covered, and the displacement ending at `t` is
/// attributed to the window containing `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickWindow {
    pub lo: u64,
    pub hi: u64,
}

impl TickWindow {
    pub const ALL: TickWindow = TickWindow { lo: 0, hi: u64::MAX };

    pub fn from_percent(window: [f64; 2], run_ticks: u64) -> Self {
        let at = |pct: f64| ((pct * run_ticks as f64) / 100.0 + 1e-9).floor() as u64;
        Self {
            lo: at(window[0]),
            hi: at(window[1]).min(run_ticks),
        }
    }

    pub fn contains(&self, tick: u64) -> bool {
        tick > self.lo && tick <= self.hi
    }

    pub fn is_full(window: [f64; 2]) -> bool {
        window[0] <= 0.0 && window[1] >= 100.0
    }
}

/// Per-robot residence in the current cell, counted in ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct StagnationTracker {
    cell: Vec<usize>,
    residence: Vec<u64>,
}

impl StagnationTracker {
    pub fn new(grid: &GridSpec, positions: &[Vec2]) -> Self {
        Self {
            cell: positions.iter().map(|p| grid.cell_of(*p)).collect(),
            residence: vec![0; positions.len()],
        }
    }

    /// Advances robot `i` to its new position; returns its cell and the
    /// number of consecutive ticks it has now spent there.
    pub fn advance(&mut self, grid: &GridSpec, i: usize, p: Vec2) -> (usize, u64) {
        let c = grid.cell_of(p);
        if c == self.cell[i] {
            self.residence[i] += 1;
        } else {
            self.cell[i] = c;
            self.residence[i] = 0;
        }
        (c, self.residence[i])
    }

    pub fn residence_ticks(&self, i: usize) -> u64 {
        self.residence[i]
    }
}

/// Online accumulator fed once per tick by the engine (or by a trajectory
/// replay).
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    dt: f64,
    grid: GridSpec,
    mode: StagnationMode,
    threshold_ticks: u64,
    window: TickWindow,
    ca_ticks: Vec<u64>,
    tracker: StagnationTracker,
    stagnation: Vec<u64>,
    move_sum: Vec<Vec2>,
    move_count: Vec<u64>,
    previous: Vec<Vec2>,
    ticks: u64,
}

impl MetricsAccumulator {
    pub fn new(
        params: &MetricsParams,
        arena: (f64, f64),
        dt: f64,
        window: TickWindow,
        initial: &[Vec2],
    ) -> Self {
        let grid = GridSpec::covering(arena.0, arena.1, params.cell_size);
        Self {
            dt,
            grid,
            mode: params.stagnation_mode,
            threshold_ticks: (params.stagnation_threshold / dt).round() as u64,
            window,
            ca_ticks: vec![0; initial.len()],
            tracker: StagnationTracker::new(&grid, initial),
            stagnation: vec![0; grid.len()],
            move_sum: vec![Vec2::ZERO; grid.len()],
            move_count: vec![0; grid.len()],
            previous: initial.to_vec(),
            ticks: 0,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn window(&self) -> TickWindow {
        self.window
    }

    pub fn accumulate_ca_time(&mut self, robot: usize, ca_active: bool) {
        if ca_active {
            self.ca_ticks[robot] += 1;
        }
    }

    /// Tracks residence for every robot; inside the window, adds one tick to
    /// the cell of each robot that has stayed beyond the threshold (or one
    /// event at the crossing, in crossing mode).
    pub fn accumulate_stagnation(&mut self, tick: u64, positions: &[Vec2]) {
        let in_window = self.window.contains(tick);
        for (i, p) in positions.iter().enumerate() {
            let (cell, residence) = self.tracker.advance(&self.grid, i, *p);
            if !in_window {
                continue;
            }
            let hit = match self.mode {
                StagnationMode::TimeBeyondThreshold => residence > self.threshold_ticks,
                StagnationMode::ThresholdCrossings => residence == self.threshold_ticks + 1,
            };
            if hit {
                self.stagnation[cell] += 1;
            }
        }
    }

    /// Adds `x(t) - x(t-1)` of every robot to the cell containing `x(t-1)`.
    pub fn accumulate_movement(&mut self, tick: u64, positions: &[Vec2]) {
        if self.window.contains(tick) {
            for (prev, cur) in self.previous.iter().zip(positions) {
                let c = self.grid.cell_of(*prev);
                self.move_sum[c] += *cur - *prev;
                self.move_count[c] += 1;
            }
        }
        self.previous.copy_from_slice(positions);
    }

    /// Feeds the state after tick `tick` (1-based).
    pub fn observe(&mut self, tick: u64, positions: &[Vec2], ca_active: &[bool]) {
        debug_assert_eq!(tick, self.ticks + 1);
        for (i, &a) in ca_active.iter().enumerate() {
            self.accumulate_ca_time(i, a);
        }
        self.accumulate_stagnation(tick, positions);
        self.accumulate_movement(tick, positions);
        self.ticks = tick;
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn ca_time(&self) -> Vec<f64> {
        self.ca_ticks.iter().map(|&t| t as f64 * self.dt).collect()
    }

    /// Raw stagnation accumulator: seconds beyond the threshold, or events.
    pub fn stagnation_grid(&self) -> Vec<f64> {
        match self.mode {
            StagnationMode::TimeBeyondThreshold => {
                self.stagnation.iter().map(|&t| t as f64 * self.dt).collect()
            }
            StagnationMode::ThresholdCrossings => {
                self.stagnation.iter().map(|&t| t as f64).collect()
            }
        }
    }

    pub fn movement_sums(&self) -> (&[Vec2], &[u64]) {
        (&self.move_sum, &self.move_count)
    }

    pub fn movement_grid(&self) -> Vec<[f64; 2]> {
        self.move_sum
            .iter()
            .zip(&self.move_count)
            .map(|(s, &n)| {
                if n == 0 {
                    [0.0, 0.0]
                } else {
                    [s.x / n as f64, s.y / n as f64]
                }
            })
            .collect()
    }
}

/// Everything a run reports; serialized as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema_version: u32,
    pub robots: usize,
    pub dt: f64,
    pub duration: f64,
    pub convergence_time: f64,
    pub ca_time_per_robot: Vec<f64>,
    pub mean_ca_time: f64,
    pub conflicts_per_robot: Vec<u64>,
    pub mean_conflicts: f64,
    pub messages_per_robot: Vec<u64>,
    pub window: [f64; 2],
    pub window_ticks: [u64; 2],
    pub grid: GridSpec,
    pub stagnation_threshold: f64,
    pub stagnation_mode: StagnationMode,
    pub normalization: f64,
    /// Row-major, `grid.rows x grid.cols`.
    pub stagnation_grid: Vec<f64>,
    /// Row-major mean displacement per cell.
    pub movement_grid: Vec<[f64; 2]>,
    pub movement_counts: Vec<u64>,
}

fn mean<T: Copy + Into<f64>>(v: &[T]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|&x| x.into()).sum::<f64>() / v.len() as f64
    }
}

/// Inputs to [`finalize_and_normalize`] that do not come from the
/// accumulator.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub duration: f64,
    pub convergence_time: f64,
    pub conflicts_per_robot: Vec<u64>,
    pub messages_per_robot: Vec<u64>,
}

/// Builds the serializable record, dividing the stagnation grid by
/// `normalization`.
pub fn finalize_and_normalize(
    acc: &MetricsAccumulator,
    params: &MetricsParams,
    summary: RunSummary,
    normalization: f64,
) -> Result<MetricsRecord> {
    if normalization == 0.0 {
        return Err(Error::ZeroNormalization);
    }
    let ca = acc.ca_time();
    let window = acc.window();
    Ok(MetricsRecord {
        schema_version: SCHEMA_VERSION,
        robots: ca.len(),
        dt: acc.dt,
        duration: summary.duration,
        convergence_time: summary.convergence_time,
        mean_ca_time: mean(&ca),
        ca_time_per_robot: ca,
        mean_conflicts: mean(
            &summary
                .conflicts_per_robot
                .iter()
                .map(|&c| c as f64)
                .collect::<Vec<_>>(),
        ),
        conflicts_per_robot: summary.conflicts_per_robot,
        messages_per_robot: summary.messages_per_robot,
        window: params.window,
        window_ticks: [window.lo, window.hi.min(acc.ticks())],
        grid: acc.grid(),
        stagnation_threshold: params.stagnation_threshold,
        stagnation_mode: params.stagnation_mode,
        normalization,
        stagnation_grid: acc
            .stagnation_grid()
            .into_iter()
            .map(|v| v / normalization)
            .collect(),
        movement_grid: acc.movement_grid(),
        movement_counts: acc.movement_sums().1.to_vec(),
    })
}

/// Cell-wise mean of several grids of equal shape.
pub fn mean_grid(grids: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = grids.first() else {
        return Vec::new();
    };
    let mut out = vec![0.0; first.len()];
    for g in grids {
        for (o, v) in out.iter_mut().zip(g) {
            *o += v;
        }
    }
    let n = grids.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Cell-wise mean of several movement grids of equal shape.
pub fn mean_vector_grid(grids: &[Vec<[f64; 2]>]) -> Vec<[f64; 2]> {
    let xs: Vec<Vec<f64>> = grids.iter().map(|g| g.iter().map(|v| v[0]).collect()).collect();
    let ys: Vec<Vec<f64>> = grids.iter().map(|g| g.iter().map(|v| v[1]).collect()).collect();
    mean_grid(&xs)
        .into_iter()
        .zip(mean_grid(&ys))
        .map(|(x, y)| [x, y])
        .collect()
}

/// Recomputes the accumulators from a trajectory log, with the window
/// taken as percentages of the recorded run length.
pub fn replay(path: &std::path::Path, params: &MetricsParams) -> Result<MetricsAccumulator> {
    let ticks = crate::trajectory::recorded_ticks(path)?;
    let mut reader = crate::trajectory::TrajectoryReader::open(path)?;
    let h = reader.header();
    let first = reader
        .next_frame()?
        .ok_or_else(|| Error::TrajectoryFormat("no frames".into()))?;
    let window = if TickWindow::is_full(params.window) {
        TickWindow::ALL
    } else {
        TickWindow::from_percent(params.window, ticks)
    };
    let mut acc = MetricsAccumulator::new(
        params,
        (h.arena_width, h.arena_height),
        h.dt,
        window,
        &first.positions,
    );
    let mut t = 0;
    while let Some(frame) = reader.next_frame()? {
        t += 1;
        acc.observe(t, &frame.positions, &frame.ca_active);
    }
    Ok(acc)
}
