//! Python bindings: configs, single runs, step-by-step simulations and the
//! virtual stigmergy store.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use swarmdec::arena::ZoneLabel;
use swarmdec::behaviors;
use swarmdec::config::{SimConfig, StrategyKind};
use swarmdec::strategies::{self, BeliefMessage};
use swarmdec::vstig::{StigEntry, StigKey, StigStore as CoreStore};

fn err(e: swarmdec::Error) -> PyErr {
    match e {
        swarmdec::Error::InvalidConfig(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn strategy(name: &str) -> PyResult<StrategyKind> {
    name.parse().map_err(err)
}

fn zone(name: &str) -> PyResult<ZoneLabel> {
    match name {
        "A" | "a" => Ok(ZoneLabel::A),
        "B" | "b" => Ok(ZoneLabel::B),
        _ => Err(PyValueError::new_err(format!("unknown zone `{name}`"))),
    }
}

fn zone_name(z: ZoneLabel) -> &'static str {
    match z {
        ZoneLabel::A => "A",
        ZoneLabel::B => "B",
    }
}

fn key(name: &str) -> PyResult<StigKey> {
    Ok(StigKey::for_zone(zone(name)?))
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Simulation configuration. Defaults match the reference setup.
#[pyclass(module = "swarmdec", from_py_object)]
#[derive(Clone, Default)]
pub struct Config {
    inner: SimConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (robots=None, comm_range=None, timeout=None, window=None))]
    fn new(robots: Option<usize>, comm_range: Option<f64>, timeout: Option<f64>, window: Option<(f64, f64)>) -> PyResult<Self> {
        let mut inner = SimConfig::default();
        if let Some(n) = robots {
            inner.world.robots = n;
        }
        if let Some(r) = comm_range {
            inner.world.comm_range = r;
        }
        if let Some(t) = timeout {
            inner.world.timeout = t;
        }
        if let Some((lo, hi)) = window {
            inner.metrics.window = [lo, hi];
        }
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    /// Parses a TOML config; missing fields take their defaults.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: SimConfig::from_toml_str(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    #[getter]
    fn robots(&self) -> usize {
        self.inner.world.robots
    }

    #[setter]
    fn set_robots(&mut self, n: usize) {
        self.inner.world.robots = n;
    }

    #[getter]
    fn comm_range(&self) -> f64 {
        self.inner.world.comm_range
    }

    #[setter]
    fn set_comm_range(&mut self, r: f64) {
        self.inner.world.comm_range = r;
    }

    #[getter]
    fn timeout(&self) -> f64 {
        self.inner.world.timeout
    }

    #[setter]
    fn set_timeout(&mut self, t: f64) {
        self.inner.world.timeout = t;
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.world.dt
    }

    #[getter]
    fn robot_radius(&self) -> f64 {
        self.inner.world.robot_radius
    }

    #[getter]
    fn window(&self) -> (f64, f64) {
        (self.inner.metrics.window[0], self.inner.metrics.window[1])
    }

    #[setter]
    fn set_window(&mut self, w: (f64, f64)) {
        self.inner.metrics.window = [w.0, w.1];
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(robots={}, comm_range={}, timeout={})",
            self.inner.world.robots, self.inner.world.comm_range, self.inner.world.timeout
        )
    }
}

/// Outcome and metrics of a finished run.
#[pyclass(module = "swarmdec", frozen)]
pub struct RunResult {
    inner: swarmdec::RunResult,
}

#[pymethods]
impl RunResult {
    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn winner(&self) -> Option<&'static str> {
        self.inner.winner.map(zone_name)
    }

    #[getter]
    fn convergence_time(&self) -> f64 {
        self.inner.convergence_time
    }

    #[getter]
    fn ticks(&self) -> u64 {
        self.inner.ticks
    }

    #[getter]
    fn mean_ca_time(&self) -> f64 {
        self.inner.metrics.mean_ca_time
    }

    #[getter]
    fn mean_conflicts(&self) -> f64 {
        self.inner.metrics.mean_conflicts
    }

    #[getter]
    fn ca_time_per_robot(&self) -> Vec<f64> {
        self.inner.metrics.ca_time_per_robot.clone()
    }

    /// Stagnation heatmap as rows of cells (row 0 at y = 0).
    #[getter]
    fn stagnation_grid(&self) -> Vec<Vec<f64>> {
        let g = &self.inner.metrics.grid;
        self.inner.metrics.stagnation_grid.chunks(g.cols).map(<[f64]>::to_vec).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(strategy={}, robots={}, converged={}, winner={}, convergence_time={})",
            self.inner.strategy,
            self.inner.robots,
            if self.inner.converged { "True" } else { "False" },
            self.inner.winner.map_or("None".to_string(), |z| format!("'{}'", zone_name(z))),
            self.inner.convergence_time
        )
    }
}

/// A simulation advanced tick by tick.
#[pyclass(module = "swarmdec")]
pub struct Simulation {
    inner: swarmdec::Simulation,
}

#[pymethods]
impl Simulation {
    #[new]
    fn new(config: &Config, strategy_name: &str, seed: u64) -> PyResult<Self> {
        let kind = strategy(strategy_name)?;
        Ok(Self {
            inner: swarmdec::Simulation::new(config.inner.clone(), kind, seed).map_err(err)?,
        })
    }

    /// Advances `n` ticks, stopping early once the run is done.
    #[pyo3(signature = (n=1))]
    fn step(&mut self, py: Python<'_>, n: u64) {
        py.detach(|| {
            for _ in 0..n {
                if self.inner.is_done() {
                    break;
                }
                self.inner.step();
            }
        })
    }

    fn run_to_end(&mut self, py: Python<'_>) -> PyResult<()> {
        py.detach(|| self.inner.run_to_end(&mut |_: &swarmdec::Simulation| Ok(())))
            .map_err(err)
    }

    fn result(&self) -> PyResult<RunResult> {
        Ok(RunResult {
            inner: self.inner.result().map_err(err)?,
        })
    }

    #[getter]
    fn tick(&self) -> u64 {
        self.inner.tick()
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    #[getter]
    fn winner(&self) -> Option<&'static str> {
        self.inner.winner().map(zone_name)
    }

    #[getter]
    fn positions(&self) -> Vec<(f64, f64)> {
        self.inner.positions().iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn ca_active(&self) -> Vec<bool> {
        self.inner.ca_active().to_vec()
    }

    #[getter]
    fn opinions(&self) -> Vec<Option<&'static str>> {
        self.inner.robots().iter().map(|r| r.opinion().map(zone_name)).collect()
    }

    #[getter]
    fn conflicts(&self) -> Vec<u64> {
        self.inner.conflicts()
    }
}

/// One robot's replica of the virtual stigmergy. Entries are
/// `(key, value, lamport, writer)` tuples with key `"A"` or `"B"`.
#[pyclass(module = "swarmdec")]
pub struct StigStore {
    inner: CoreStore,
}

type EntryTuple = (&'static str, f64, u64, u32);

fn entry_tuple(e: &StigEntry) -> EntryTuple {
    let z = match e.key {
        StigKey::AggA => "A",
        StigKey::AggB => "B",
    };
    (z, e.value, e.lamport, e.writer)
}

#[pymethods]
impl StigStore {
    #[new]
    #[pyo3(signature = (broadcast_reads=true))]
    fn new(broadcast_reads: bool) -> Self {
        Self {
            inner: CoreStore::new(broadcast_reads),
        }
    }

    fn put(&mut self, key_name: &str, value: f64, writer: u32) -> PyResult<EntryTuple> {
        Ok(entry_tuple(&self.inner.put(key(key_name)?, value, writer)))
    }

    fn get(&mut self, key_name: &str, reader: u32) -> PyResult<f64> {
        Ok(self.inner.get(key(key_name)?, reader))
    }

    fn peek(&self, key_name: &str) -> PyResult<f64> {
        Ok(self.inner.peek(key(key_name)?))
    }

    fn entry(&self, key_name: &str) -> PyResult<Option<EntryTuple>> {
        Ok(self.inner.entry(key(key_name)?).map(entry_tuple))
    }

    fn on_receive(&mut self, key_name: &str, value: f64, lamport: u64, writer: u32) -> PyResult<()> {
        self.inner.on_receive(StigEntry {
            key: key(key_name)?,
            value,
            lamport,
            writer,
        });
        Ok(())
    }

    fn update_belief(&mut self, key_name: &str, avg_bel: f64, w: f64, writer: u32) -> PyResult<f64> {
        Ok(self.inner.update_belief(key(key_name)?, avg_bel, w, writer))
    }

    fn drain_outbox(&mut self) -> Vec<EntryTuple> {
        self.inner.drain_outbox().iter().map(entry_tuple).collect()
    }

    #[getter]
    fn conflicts(&self) -> u64 {
        self.inner.conflict_count()
    }
}

/// Runs one simulation to convergence or timeout.
#[pyfunction]
#[pyo3(name = "run")]
fn run_py(py: Python<'_>, config: &Config, strategy_name: &str, seed: u64) -> PyResult<RunResult> {
    let kind = strategy(strategy_name)?;
    let cfg = config.inner.clone();
    let inner = py.detach(|| swarmdec::run(&cfg, kind, seed)).map_err(err)?;
    Ok(RunResult { inner })
}

/// Body-frame obstacle vector of eight proximity readings (front first,
/// counter-clockwise).
#[pyfunction]
fn obstacle_vector(readings: [f64; 8]) -> (f64, f64) {
    let v = behaviors::obstacle_vector(&readings);
    (v.x, v.y)
}

/// Same-zone and other-zone averages of `own_avg` and `(zone, avg_bel)`
/// neighbor beliefs.
#[pyfunction]
fn honeybee_aggregate(zone_name: &str, own_avg: f64, messages: Vec<(String, f64)>) -> PyResult<(f64, f64)> {
    let msgs = messages
        .iter()
        .enumerate()
        .map(|(i, (z, b))| {
            Ok(BeliefMessage {
                sender: i as u32,
                zone: zone(z)?,
                avg_bel: *b,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(strategies::honeybee_aggregate(zone(zone_name)?, own_avg, &msgs))
}

#[pymodule(name = "swarmdec")]
fn swarmdec_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<RunResult>()?;
    m.add_class::<Simulation>()?;
    m.add_class::<StigStore>()?;
    m.add_function(wrap_pyfunction!(run_py, m)?)?;
    m.add_function(wrap_pyfunction!(obstacle_vector, m)?)?;
    m.add_function(wrap_pyfunction!(honeybee_aggregate, m)?)?;
    m.add("STRATEGIES", StrategyKind::ALL.map(StrategyKind::name).to_vec())?;
    Ok(())
}
