//! Python bindings for the gbdeer simulator.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gbdeer::engine::{run_with, RunOptions, RunOutput};
use gbdeer::grid::GridLayout;
use gbdeer::model::{Flow, Level, NodeId, NodeState, Protocol, ScenarioConfig, Vec2};
use gbdeer::power::{self, Direction, PowerTable};
use gbdeer::{election, mobility, routing, Error, Metrics};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn table(ranges: (f64, f64, f64)) -> PyResult<PowerTable> {
    PowerTable::new(ranges.0, ranges.1, ranges.2).map_err(py_err)
}

/// Scenario configuration. Load it from TOML or start from the defaults
/// and adjust fields.
#[pyclass(name = "Config", module = "gbdeer", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        PyConfig { inner: ScenarioConfig::default() }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ScenarioConfig::from_toml_str(text).map(|inner| PyConfig { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ScenarioConfig::load(path).map(|inner| PyConfig { inner }).map_err(py_err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    /// Returns the normalized config or raises ValueError naming the
    /// violated invariant.
    fn validate(&self) -> PyResult<Self> {
        gbdeer::model::validate_config(self.inner.clone()).map(|inner| PyConfig { inner }).map_err(py_err)
    }

    #[pyo3(signature = (src, dst, interval, start, stop, packet_size_bits=1024))]
    fn add_flow(&mut self, src: u32, dst: u32, interval: f64, start: f64, stop: f64, packet_size_bits: u64) {
        self.inner.traffic.push(Flow { src: NodeId(src), dst: NodeId(dst), packet_size_bits, interval, start, stop });
    }

    fn set_mobility(&mut self, v_min: f64, v_max: f64, pause: f64) {
        self.inner.mobility = gbdeer::model::MobilityParams { v_min, v_max, pause };
    }

    #[getter]
    fn protocol(&self) -> &'static str {
        self.inner.protocol.name()
    }

    #[setter]
    fn set_protocol(&mut self, name: &str) -> PyResult<()> {
        self.inner.protocol = name.parse::<Protocol>().map_err(py_err)?;
        Ok(())
    }

    #[getter]
    fn n_nodes(&self) -> u32 {
        self.inner.n_nodes
    }

    #[setter]
    fn set_n_nodes(&mut self, v: u32) {
        self.inner.n_nodes = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[setter]
    fn set_duration(&mut self, v: f64) {
        self.inner.duration = v;
    }

    #[getter]
    fn area(&self) -> (f64, f64) {
        (self.inner.area_w, self.inner.area_h)
    }

    #[setter]
    fn set_area(&mut self, wh: (f64, f64)) {
        (self.inner.area_w, self.inner.area_h) = wh;
    }

    #[getter]
    fn e_init(&self) -> f64 {
        self.inner.e_init
    }

    #[setter]
    fn set_e_init(&mut self, v: f64) {
        self.inner.e_init = v;
    }

    #[getter]
    fn handover_threshold(&self) -> f64 {
        self.inner.handover_threshold
    }

    #[setter]
    fn set_handover_threshold(&mut self, v: f64) {
        self.inner.handover_threshold = v;
    }

    #[getter]
    fn maintenance_interval(&self) -> f64 {
        self.inner.maintenance_interval
    }

    #[setter]
    fn set_maintenance_interval(&mut self, v: f64) {
        self.inner.maintenance_interval = v;
    }

    #[getter]
    fn control_packet_bits(&self) -> u64 {
        self.inner.control_packet_bits
    }

    #[setter]
    fn set_control_packet_bits(&mut self, v: u64) {
        self.inner.control_packet_bits = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(protocol={:?}, n_nodes={}, duration={}, seed={}, flows={})",
            self.inner.protocol.name(),
            self.inner.n_nodes,
            self.inner.duration,
            self.inner.seed,
            self.inner.traffic.len()
        )
    }
}

/// Outcome of one simulation run.
#[pyclass(name = "RunResult", module = "gbdeer")]
struct PyRunResult {
    out: RunOutput,
}

fn metrics_dict<'py>(py: Python<'py>, m: &Metrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("delivered", m.delivered)?;
    d.set_item("dropped", m.dropped)?;
    d.set_item("retransmissions", m.retransmissions)?;
    d.set_item("delivery_ratio", m.delivery_ratio)?;
    d.set_item("mean_e2e_delay", m.mean_e2e_delay)?;
    d.set_item("energy_total", m.energy_total)?;
    d.set_item("energy_per_node", m.energy_per_node.clone())?;
    d.set_item("first_death_t", m.first_death_t)?;
    d.set_item("network_lifetime_t", m.network_lifetime_t)?;
    d.set_item("partition_count", m.partition_count)?;
    d.set_item("handover_count", m.handover_count)?;
    d.set_item("rediscovery_count", m.rediscovery_count)?;
    d.set_item("segment_count", m.segment_count)?;
    d.set_item("bits_transmitted", m.bits_transmitted)?;
    Ok(d)
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        metrics_dict(py, &self.out.metrics)
    }

    /// The metrics document exactly as the CLI writes it.
    fn metrics_document(&self) -> String {
        self.out.metrics.to_document()
    }

    fn trace_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.out.trace.write_csv(&mut buf).map_err(py_err)?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn ledger_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.out.ledger.write_csv(&mut buf).map_err(py_err)?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn count(&self, kind: &str) -> usize {
        self.out.trace.count(kind)
    }

    #[getter]
    fn trace_len(&self) -> usize {
        self.out.trace.len()
    }

    fn ledger_total(&self) -> f64 {
        self.out.ledger.total()
    }

    /// `(id, x, y, e_res, alive)` for every node at the end of the run.
    fn nodes(&self) -> Vec<(u32, f64, f64, f64, bool)> {
        self.out.nodes.iter().map(|n| (n.id.0, n.pos.x, n.pos.y, n.e_res, n.alive)).collect()
    }

    /// Final route of each flow as a list of node ids, or None.
    fn routes(&self) -> Vec<Option<Vec<u32>>> {
        self.out.routes.iter().map(|r| r.as_ref().map(|p| p.hops.iter().map(|h| h.0).collect())).collect()
    }

    #[getter]
    fn violations(&self) -> Vec<String> {
        self.out.violations.clone()
    }
}

/// Runs a scenario. With `check_invariants`, per-event invariant breaches
/// are collected in `RunResult.violations`.
#[pyfunction]
#[pyo3(signature = (config, check_invariants=false))]
fn run(py: Python<'_>, config: &PyConfig, check_invariants: bool) -> PyResult<PyRunResult> {
    let cfg = config.inner.clone();
    let out = py.detach(move || run_with(&cfg, RunOptions { check_invariants })).map_err(py_err)?;
    Ok(PyRunResult { out })
}

#[pyfunction]
fn cell_size(radio_range: f64) -> PyResult<f64> {
    gbdeer::grid::cell_size(radio_range).map_err(py_err)
}

#[pyfunction]
fn cell_of(x: f64, y: f64, radio_range: f64, area_w: f64, area_h: f64) -> PyResult<(u32, u32)> {
    let layout = GridLayout::new(radio_range, area_w, area_h).map_err(py_err)?;
    let c = layout.cell_of(Vec2::new(x, y)).map_err(py_err)?;
    Ok((c.ix, c.iy))
}

type Edge = (u32, u32, f64);

/// Euclidean MST over `points`. Returns `(edges, total_length)` with edges as
/// `(i, j, length)` indices into `points`.
#[pyfunction]
fn build_mst(points: Vec<(f64, f64)>) -> PyResult<(Vec<Edge>, f64)> {
    let sups: Vec<(NodeId, Vec2)> = points.iter().enumerate().map(|(i, &(x, y))| (NodeId(i as u32), Vec2::new(x, y))).collect();
    let tree = routing::build_mst(&sups).map_err(py_err)?;
    let edges = tree.edges.iter().map(|e| (e.u.0, e.v.0, e.length)).collect();
    Ok((edges, tree.total_length()))
}

/// Listen_ctrl escalation at distance `d`: `(level, attempts)`, or None when
/// even Tmax falls short.
#[pyfunction]
#[pyo3(signature = (d, ranges=(80.0, 160.0, 250.0)))]
fn handshake(d: f64, ranges: (f64, f64, f64)) -> PyResult<Option<(&'static str, usize)>> {
    let t = table(ranges)?;
    Ok(power::handshake_at_distance(d, &t).ok().map(|hs| (hs.level.level.name(), hs.attempts)))
}

/// `(range, level, saturated)` after moving `speed * time` toward or away.
#[pyfunction]
#[pyo3(signature = (base, speed, time, direction, ranges=(80.0, 160.0, 250.0)))]
fn adjust_range(base: f64, speed: f64, time: f64, direction: &str, ranges: (f64, f64, f64)) -> PyResult<(f64, &'static str, bool)> {
    let dir = match direction {
        "toward" => Direction::Toward,
        "away" => Direction::Away,
        other => return Err(PyValueError::new_err(format!("direction must be 'toward' or 'away', got {other:?}"))),
    };
    let adj = power::adjust_range(base, speed, time, dir, &table(ranges)?);
    Ok((adj.range, adj.level.level.name(), adj.saturated))
}

#[pyfunction]
fn mutual_separation(speed_s: f64, time_s: f64, speed_d: f64, time_d: f64) -> f64 {
    power::mutual_separation(speed_s, time_s, speed_d, time_d)
}

/// Election weight of a node with the given energy and speed.
#[pyfunction]
fn weight(e_res: f64, e_init: f64, speed: f64, v_max: f64) -> f64 {
    let mut n = NodeState::new(NodeId(0), Vec2::ZERO, e_init);
    n.e_res = e_res;
    n.vel = Vec2::new(speed, 0.0);
    election::weight(&n, v_max)
}

/// Seconds until straight-line motion leaves the node's current cell.
#[pyfunction]
fn depart_time(x: f64, y: f64, vx: f64, vy: f64, radio_range: f64, area_w: f64, area_h: f64) -> PyResult<Option<f64>> {
    let layout = GridLayout::new(radio_range, area_w, area_h).map_err(py_err)?;
    let mut n = NodeState::new(NodeId(0), Vec2::new(x, y), 1.0);
    n.vel = Vec2::new(vx, vy);
    let cell = layout.cell_of(n.pos).map_err(py_err)?;
    Ok(mobility::depart_time(&n, cell, &layout))
}

#[pyfunction]
fn tx_cost(level: &str, bits: u64, ranges: (f64, f64, f64)) -> PyResult<f64> {
    let lvl = Level::ALL
        .into_iter()
        .find(|l| l.name() == level)
        .ok_or_else(|| PyValueError::new_err(format!("unknown level {level:?}")))?;
    Ok(gbdeer::energy::tx_cost(table(ranges)?.get(lvl), bits, &Default::default()))
}

#[pymodule]
#[pyo3(name = "gbdeer")]
fn gbdeer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add("PROTOCOLS", Protocol::ALL.iter().map(|p| p.name()).collect::<Vec<_>>())?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(cell_size, m)?)?;
    m.add_function(wrap_pyfunction!(cell_of, m)?)?;
    m.add_function(wrap_pyfunction!(build_mst, m)?)?;
    m.add_function(wrap_pyfunction!(handshake, m)?)?;
    m.add_function(wrap_pyfunction!(adjust_range, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_separation, m)?)?;
    m.add_function(wrap_pyfunction!(weight, m)?)?;
    m.add_function(wrap_pyfunction!(depart_time, m)?)?;
    m.add_function(wrap_pyfunction!(tx_cost, m)?)?;
    Ok(())
}
