//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarmdec::arena::ZoneLabel;
use swarmdec::behaviors::{collision_avoidance, taxis, TaxisMode};
use swarmdec::config::{ControlParams, SimConfig, StrategyKind};
use swarmdec::engine::{run, run_observed, Simulation, TickObserver};
use swarmdec::metrics::replay;
use swarmdec::strategies::{honeybee_aggregate, BeliefMessage};
use swarmdec::trajectory::{TrajectoryHeader, TrajectoryWriter};
use swarmdec::vstig::{StigEntry, StigKey, StigStore};
use swarmdec::{Result, RunResult};

const REL_TOL: f64 = 1e-12;
const EQ_CASES: usize = 20;
const SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1e-300) || a == b
}

fn vec_close(got: swarmdec::Vec2, want: (f64, f64)) -> bool {
    (got.x - want.0).hypot(got.y - want.1) <= REL_TOL * want.0.hypot(want.1)
}

fn config(robots: usize, range: f64) -> SimConfig {
    let mut c = SimConfig::default();
    c.world.robots = robots;
    c.world.comm_range = range;
    c
}

fn runs(c: &SimConfig, kind: StrategyKind, seeds: &[u64]) -> Vec<RunResult> {
    seeds.iter().map(|&s| run(c, kind, s).unwrap()).collect()
}

// Criterion 1: equation oracles.

fn ca_oracle(prox: &[f64; 8], heading: f64, p: &ControlParams) -> Option<(f64, f64)> {
    let (mut bx, mut by) = (0.0, 0.0);
    for (k, r) in prox.iter().enumerate() {
        let a = k as f64 * PI / 4.0;
        bx += r * a.cos();
        by += r * a.sin();
    }
    let norm = bx.hypot(by);
    if norm == 0.0 || norm < p.o_lt || by.atan2(bx).abs() > p.o_at {
        return None;
    }
    let (wx, wy) = (
        bx * heading.cos() - by * heading.sin(),
        bx * heading.sin() + by * heading.cos(),
    );
    Some((-p.s_o * wx / norm, -p.s_o * wy / norm))
}

fn taxis_oracle(light: &[f64; 8], heading: f64, sign: f64, p: &ControlParams) -> (f64, f64) {
    let (mut wx, mut wy) = (0.0, 0.0);
    for (k, r) in light.iter().enumerate() {
        let a = heading + k as f64 * PI / 4.0;
        wx += r * a.cos();
        wy += r * a.sin();
    }
    let norm = wx.hypot(wy);
    (sign * p.s_l * wx / norm, sign * p.s_l * wy / norm)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p = ControlParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut fails = Vec::new();

    // collision avoidance: fixed cases plus random sparse rings
    let mut rings: Vec<[f64; 8]> = vec![[0.0; 8], {
        let mut r = [0.0; 8];
        r[0] = 1.0;
        r
    }];
    let mut triggered = 0;
    while rings.len() < 4 * EQ_CASES {
        let mut r = [0.0; 8];
        for v in r.iter_mut() {
            if rng.random_bool(0.4) {
                *v = rng.random_range(0.0..1.0);
            }
        }
        // skip rings sitting on the trigger cone edge
        let (x, y) = r.iter().enumerate().fold((0.0, 0.0), |(x, y), (k, v)| {
            let a = k as f64 * PI / 4.0;
            (x + v * a.cos(), y + v * a.sin())
        });
        if (y.atan2(x).abs() - p.o_at).abs() > 1e-9 {
            rings.push(r);
        }
    }
    for ring in &rings {
        let h = rng.random_range(-PI..PI);
        let got = collision_avoidance(ring, h, &p);
        match (got, ca_oracle(ring, h, &p)) {
            (None, None) => {}
            (Some(g), Some(want)) if vec_close(g.velocity, want) && g.ca_active => {
                triggered += 1
            }
            _ => fails.push(format!("collision avoidance {ring:?}")),
        }
    }
    if triggered < EQ_CASES {
        fails.push(format!("only {triggered} triggered collision-avoidance cases"));
    }

    for i in 0..EQ_CASES {
        let mut light = [0.0; 8];
        for v in light.iter_mut() {
            *v = rng.random_range(0.0..0.5);
        }
        if i == 0 {
            light = [0.25, 0.25 * (PI / 4.0).cos(), 0.0, 0.0, 0.0, 0.0, 0.0, 0.25 * (PI / 4.0).cos()];
        }
        let h = if i == 0 { 0.0 } else { rng.random_range(-PI..PI) };
        for (mode, sign) in [(TaxisMode::Photo, 1.0), (TaxisMode::Anti, -1.0)] {
            let g = taxis(&light, h, mode, &p);
            let (x, y) = taxis_oracle(&light, h, sign, &p);
            if !vec_close(g.velocity, (x, y)) {
                fails.push(format!("taxis {mode:?} {light:?}"));
            }
        }
    }

    let fixed = [
        (0.8, vec![], (0.8, 0.0)),
        (0.8, vec![(ZoneLabel::A, 0.6)], (0.7, 0.0)),
    ];
    let mut agg_cases: Vec<(f64, Vec<(ZoneLabel, f64)>, Option<(f64, f64)>)> =
        fixed.into_iter().map(|(o, m, e)| (o, m, Some(e))).collect();
    while agg_cases.len() < EQ_CASES {
        let n = rng.random_range(0..12);
        let msgs = (0..n)
            .map(|_| {
                let z = if rng.random_bool(0.5) { ZoneLabel::A } else { ZoneLabel::B };
                (z, rng.random_range(0.0..=1.0))
            })
            .collect();
        agg_cases.push((rng.random_range(0.0..=1.0), msgs, None));
    }
    for (own, msgs, expected) in &agg_cases {
        let beliefs: Vec<BeliefMessage> = msgs
            .iter()
            .enumerate()
            .map(|(i, &(zone, avg_bel))| BeliefMessage {
                sender: i as u32 + 1,
                zone,
                avg_bel,
            })
            .collect();
        let got = honeybee_aggregate(ZoneLabel::A, *own, &beliefs);
        let same: Vec<f64> = std::iter::once(*own)
            .chain(msgs.iter().filter(|m| m.0 == ZoneLabel::A).map(|m| m.1))
            .collect();
        let other: Vec<f64> = msgs.iter().filter(|m| m.0 == ZoneLabel::B).map(|m| m.1).collect();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let want = expected.unwrap_or((mean(&same), mean(&other)));
        if !(rel_close(got.0, want.0) && rel_close(got.1, want.1)) {
            fails.push(format!("aggregation own {own} msgs {msgs:?}: {got:?} vs {want:?}"));
        }
    }

    let mut updates = vec![(Some(0.5), 0.5, 0.9, 0.7), (None, 0.3, 0.9, 0.27), (Some(0.5), 0.3, 0.9, 0.62)];
    while updates.len() < EQ_CASES {
        let old = rng.random_bool(0.8).then(|| rng.random_range(0.0..=1.0));
        let w = rng.random_range(0.0..=1.0);
        let avg = rng.random_range(0.0..=1.0);
        let o = old.unwrap_or(0.0);
        updates.push((old, w, avg, (1.0 - w) * o + w * avg));
    }
    for &(old, w, avg, want) in &updates {
        let mut s = StigStore::new(false);
        if let Some(o) = old {
            s.put(StigKey::AggA, o, 1);
        }
        let got = s.update_belief(StigKey::AggA, avg, w, 2);
        if !(rel_close(got, want) || (got - want).abs() < 1e-15) || s.peek(StigKey::AggA) != got {
            fails.push(format!("stigmergy update old {old:?} w {w} avg {avg}: {got} vs {want}"));
        }
    }

    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        fails.push(format!("took {elapsed:?}"));
    }
    outcome(
        fails.is_empty(),
        if fails.is_empty() {
            format!("{} collision-avoidance, {} taxis, {} aggregation, {} stigmergy-update cases in {elapsed:.2?}", rings.len(), 2 * EQ_CASES, agg_cases.len(), updates.len())
        } else {
            fails.join("; ")
        },
    )
}

// Criterion 2: eventual consistency on static connected graphs.

fn random_connected_graph(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    let link = |a: usize, b: usize, adj: &mut Vec<Vec<usize>>| {
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        link(i, j, &mut adj);
    }
    for _ in 0..rng.random_range(0..=n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        link(a, b, &mut adj);
    }
    adj
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut rounds_max = 0;
    for g in 0..200 {
        let n = rng.random_range(1..=30);
        let adj = random_connected_graph(n, &mut rng);
        let mut stores: Vec<StigStore> = (0..n).map(|_| StigStore::new(false)).collect();
        let mut written: Vec<StigEntry> = Vec::new();
        let puts = rng.random_range(1..40);
        let mut rounds = 0;
        let mut puts_done = 0;
        loop {
            if puts_done < puts {
                for _ in 0..rng.random_range(1..4) {
                    let i = rng.random_range(0..n);
                    let key = if rng.random_bool(0.5) { StigKey::AggA } else { StigKey::AggB };
                    written.push(stores[i].put(key, rng.random_range(0.0..=1.0), i as u32));
                    puts_done += 1;
                }
            }
            let outboxes: Vec<Vec<StigEntry>> = stores.iter_mut().map(|s| s.drain_outbox()).collect();
            if puts_done >= puts && outboxes.iter().all(|o| o.is_empty()) {
                break;
            }
            for (i, out) in outboxes.iter().enumerate() {
                for &j in &adj[i] {
                    for &e in out {
                        stores[j].on_receive(e);
                    }
                }
            }
            rounds += 1;
            if rounds > 10_000 {
                return outcome(false, format!("graph {g}: no fixpoint after 10000 rounds"));
            }
        }
        rounds_max = rounds_max.max(rounds);
        // Flooding every written entry everywhere leaves each key at its
        // greatest (clock, value, writer) entry.
        let mut oracle: BTreeMap<StigKey, (u64, f64, u32)> = BTreeMap::new();
        for e in &written {
            let cand = (e.lamport, e.value, e.writer);
            let slot = oracle.entry(e.key).or_insert(cand);
            if (cand.0, cand.1.to_bits(), cand.2) > (slot.0, slot.1.to_bits(), slot.2) {
                *slot = cand;
            }
        }
        for (i, s) in stores.iter().enumerate() {
            let local: BTreeMap<StigKey, (u64, f64, u32)> =
                s.entries().map(|e| (e.key, (e.lamport, e.value, e.writer))).collect();
            if local != oracle {
                return outcome(false, format!("graph {g} node {i}: {local:?} vs oracle {oracle:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        elapsed < Duration::from_secs(30),
        format!("200 graphs agree with the flood oracle, max {rounds_max} rounds, {elapsed:.2?}"),
    )
}

// Criterion 3: merge order independence.

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut multiset = Vec::new();
    for lamport in 1..=4u64 {
        for writer in 0..5u32 {
            // same clock, different writers; some share a value
            let value = if writer % 2 == 0 { 0.5 } else { rng.random_range(0.0..=1.0) };
            multiset.push(StigEntry {
                key: StigKey::AggA,
                value,
                lamport,
                writer,
            });
        }
    }
    let reference = multiset.iter().copied().reduce(StigEntry::merge).unwrap();
    for _ in 0..1000 {
        let mut perm = multiset.clone();
        perm.shuffle(&mut rng);
        let folded = perm.iter().copied().reduce(StigEntry::merge).unwrap();
        // pairwise tree merge
        let mut layer = perm.clone();
        while layer.len() > 1 {
            layer = layer.chunks(2).map(|c| c.iter().copied().reduce(StigEntry::merge).unwrap()).collect();
        }
        let mut store = StigStore::new(false);
        for &e in &perm {
            store.on_receive(e);
        }
        let stored = *store.entry(StigKey::AggA).unwrap();
        if folded != reference || layer[0] != reference || stored != reference {
            return outcome(false, format!("{perm:?} gave {folded:?}/{:?}/{stored:?}", layer[0]));
        }
    }
    outcome(true, format!("1000 permutations of {} entries agree", multiset.len()))
}

// Criterion 4: correct decision.

fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for kind in [StrategyKind::Stigmergy, StrategyKind::DivisionOfLabor] {
        for n in [6, 12, 24] {
            let rs = runs(&config(n, 0.8), kind, &SEEDS);
            let ok = rs.iter().filter(|r| r.winner == Some(ZoneLabel::A)).count();
            pass &= ok >= 9;
            lines.push(format!("{kind} N={n} {ok}/10"));
        }
    }
    outcome(pass, lines.join(", "))
}

// Criterion 5: Division of Labor is less congested than Honey Bee.

fn criterion_5() -> Outcome {
    let c = config(60, 0.4);
    let dol = runs(&c, StrategyKind::DivisionOfLabor, &SEEDS);
    let hb = runs(&c, StrategyKind::HoneyBee, &SEEDS);
    let ca = |rs: &[RunResult]| median(rs.iter().map(|r| r.metrics.mean_ca_time).collect());
    let conv = |rs: &[RunResult]| median(rs.iter().map(|r| r.convergence_time).collect());
    let (ca_d, ca_h, t_d, t_h) = (ca(&dol), ca(&hb), conv(&dol), conv(&hb));
    outcome(
        ca_d < ca_h && t_d < t_h,
        format!("median CA time DoL {ca_d:.1} s vs HB {ca_h:.1} s, convergence DoL {t_d:.1} s vs HB {t_h:.1} s"),
    )
}

// Criterion 6: Stigmergy conflicts grow with the range.

fn criterion_6() -> Outcome {
    let meds: Vec<f64> = [0.4, 0.8, 1.2]
        .iter()
        .map(|&r| {
            let rs = runs(&config(60, r), StrategyKind::Stigmergy, &SEEDS);
            median(rs.iter().map(|r| r.metrics.mean_conflicts).collect())
        })
        .collect();
    outcome(
        meds.windows(2).all(|w| w[0] <= w[1]),
        format!("median conflicts per robot at R=0.4/0.8/1.2: {:.3} / {:.3} / {:.3}", meds[0], meds[1], meds[2]),
    )
}

// Criterion 7: stagnation barrier at the zone A boundary.

const BARRIER_SEEDS: [u64; 3] = [0, 1, 2];
const BARRIER_RATIO: f64 = 2.0;

fn criterion_7() -> Outcome {
    let mut c = config(100, 0.4);
    c.metrics.window = [85.0, 100.0];
    let (mut band, mut center) = (0.0, 0.0);
    for &seed in &BARRIER_SEEDS {
        let r = run(&c, StrategyKind::HoneyBee, seed).unwrap();
        let g = &r.metrics.grid;
        for (i, v) in r.metrics.stagnation_grid.iter().enumerate() {
            let x = (i % g.cols) as f64 * g.cell_size + g.cell_size / 2.0;
            if x > 2.6 && x < 3.0 {
                band += v;
            }
            if x > 1.8 && x < 2.2 {
                center += v;
            }
        }
    }
    let ratio = band / center;
    outcome(
        ratio >= BARRIER_RATIO,
        format!("boundary band {band:.1} vs center band {center:.1}, ratio {ratio:.2} (need >= {BARRIER_RATIO})"),
    )
}

// Criterion 8: determinism across repeats and worker counts.

fn criterion_8() -> Outcome {
    let mut c = config(30, 0.4);
    c.world.timeout = 300.0;
    c.metrics.window = [50.0, 100.0];
    let mut pass = true;
    for kind in [StrategyKind::HoneyBee, StrategyKind::Stigmergy, StrategyKind::DivisionOfLabor] {
        let json = |threads: Option<usize>| {
            let go = || serde_json::to_vec_pretty(&run(&c, kind, 17).unwrap()).unwrap();
            match threads {
                None => go(),
                Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(go),
            }
        };
        let outs = [json(None), json(Some(1)), json(Some(4))];
        pass &= outs.iter().all(|o| o == &outs[0]);
    }
    outcome(pass, "3 strategies x (default, 1, 4 workers) byte-identical")
}

// Criterion 9: safety invariants over a full N=150 run.

struct Invariants {
    radius: f64,
    width: f64,
    height: f64,
    ticks: u64,
    violations: Vec<String>,
}

impl TickObserver for Invariants {
    fn observe(&mut self, sim: &Simulation) -> Result<()> {
        let pos = sim.positions();
        let r = self.radius;
        for (i, p) in pos.iter().enumerate() {
            if p.x < r || p.x > self.width - r || p.y < r || p.y > self.height - r {
                self.violations.push(format!("tick {}: robot {i} in wall", sim.tick()));
            }
            for (j, q) in pos.iter().enumerate().skip(i + 1) {
                if p.distance(*q) < 2.0 * r - 1e-6 {
                    self.violations.push(format!("tick {}: robots {i},{j} overlap", sim.tick()));
                }
            }
        }
        for robot in sim.robots() {
            let values = [robot.bel, robot.avg_bel].into_iter().chain(robot.store.entries().map(|e| e.value));
            for v in values {
                if !(0.0..=1.0).contains(&v) {
                    self.violations.push(format!("tick {}: robot {} value {v}", sim.tick(), robot.id));
                }
            }
        }
        self.ticks = sim.tick();
        Ok(())
    }
}

fn criterion_9() -> Outcome {
    let c = config(150, 0.4);
    let mut inv = Invariants {
        radius: c.world.robot_radius,
        width: c.world.arena_width,
        height: c.world.arena_height,
        ticks: 0,
        violations: Vec::new(),
    };
    let mut sim = Simulation::new(c, StrategyKind::Stigmergy, 0).unwrap();
    sim.run_to_end(&mut inv).unwrap();
    let n = inv.violations.len();
    outcome(
        n == 0,
        format!("{} ticks checked, {n} violations {:?}", inv.ticks, inv.violations.iter().take(3).collect::<Vec<_>>()),
    )
}

// Criterion 10: replaying a trajectory reproduces the metrics.

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for (kind, window) in [(StrategyKind::HoneyBee, [0.0, 100.0]), (StrategyKind::DivisionOfLabor, [85.0, 100.0])] {
        let mut c = config(40, 0.4);
        c.world.timeout = 600.0;
        c.metrics.window = window;
        let path = dir.path().join(format!("{kind}.traj"));
        let header = TrajectoryHeader {
            robots: c.world.robots as u32,
            dt: c.world.dt,
            arena_width: c.world.arena_width,
            arena_height: c.world.arena_height,
        };
        let mut writer = TrajectoryWriter::create(&path, header).unwrap();
        let result = run_observed(&c, kind, 3, Some(&mut writer)).unwrap();
        writer.finish().unwrap();
        let acc = replay(&path, &c.metrics).unwrap();
        let same = acc.ca_time() == result.metrics.ca_time_per_robot
            && acc.stagnation_grid() == result.metrics.stagnation_grid
            && acc.movement_grid() == result.metrics.movement_grid
            && acc.movement_sums().1 == result.metrics.movement_counts.as_slice();
        pass &= same;
        details.push(format!("{kind} window {window:?} over {} ticks: {}", result.ticks, if same { "exact" } else { "differs" }));
    }
    outcome(pass, details.join(", "))
}

fn main() {
    // `cargo test` passes harness flags such as --nocapture; only a name
    // filter is honored.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("equation oracles", criterion_1),
        ("stigmergy eventual consistency", criterion_2),
        ("conflict merge algebra", criterion_3),
        ("correct collective decision", criterion_4),
        ("congestion trend: DoL vs Honey Bee", criterion_5),
        ("congestion trend: conflicts vs range", criterion_6),
        ("stagnation barrier signature", criterion_7),
        ("determinism", criterion_8),
        ("safety invariants at N=150", criterion_9),
        ("metrics replay", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {}", i + 1);
        if filter.as_ref().is_some_and(|flt| !label.contains(flt.as_str()) && !name.contains(flt.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        println!(
            "{label} [{}] {name}: {} ({:.1?})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
