//! Python bindings: a thin parameter class plus free functions over the
//! simulator core. Errors surface as ValueError with the core's message.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mcsim::channel::{expected_received, sample_arrivals, ChannelParams};
use mcsim::experiment::Scheme;
use mcsim::modulation::{compute_bounds_max, compute_bounds_min, SchemeTimes};
use mcsim::params::{derive, SystemParams};
use mcsim::tx::{chin_equilibrium, chin_threshold, integrate, TxState, TxTrajectory};

fn err(e: mcsim::McError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Simulation parameter set. Starts at the tabulated defaults; fields are
/// set by name, mirroring the CLI's --set.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Params {
    inner: SystemParams,
}

#[pymethods]
impl Params {
    #[new]
    fn new() -> Params {
        Params { inner: SystemParams::default() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Params> {
        Ok(Params { inner: SystemParams::from_json_str(text).map_err(err)? })
    }

    fn set(&mut self, key: &str, value: f64) -> PyResult<()> {
        self.inner.set_field(key, value).map_err(err)?;
        self.inner.validate().map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Params({})", self.inner.to_json().replace(['\n', ' '], ""))
    }
}

fn scheme_of(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(err)
}

fn signal_for(p: &SystemParams, scheme: Scheme, bits: &[u8]) -> PyResult<mcsim::modulation::LedSignal> {
    let times = if scheme.needs_bounds() {
        Some(compute_bounds_min(p, mcsim::modulation::DEFAULT_EPSILON).map_err(err)?)
    } else {
        None
    };
    scheme.signal(bits, p, times.as_ref()).map_err(err)
}

fn run_tx(p: &SystemParams, scheme: &str, bits: Vec<u8>, decimation: usize) -> PyResult<TxTrajectory> {
    let scheme = scheme_of(scheme)?;
    let led = signal_for(p, scheme, &bits)?;
    let horizon = bits.len() as f64 * p.t_bit;
    integrate(p, &led, horizon, TxState::initial(p), decimation).map_err(err)
}

/// Derived quantities: interior volume, channel alpha, hitting probability,
/// total messenger payload.
#[pyfunction]
fn derived(py: Python<'_>, params: &Params) -> PyResult<Py<PyDict>> {
    let d = derive(&params.inner);
    let out = PyDict::new(py);
    out.set_item("v_in", d.v_in)?;
    out.set_item("alpha", d.alpha)?;
    out.set_item("p_hit_inf", d.p_hit_inf)?;
    out.set_item("n_sm_total", d.n_sm_total)?;
    Ok(out.into())
}

/// Interior proton concentration at steady state with the LED held on or off.
#[pyfunction]
fn equilibrium(params: &Params, led_on: bool) -> PyResult<f64> {
    chin_equilibrium(&params.inner, led_on).map_err(err)
}

/// Proton concentration at which the symporter activates.
#[pyfunction]
fn threshold(params: &Params) -> PyResult<f64> {
    chin_threshold(params.inner.hill_n, params.inner.km_h).map_err(err)
}

fn times_dict(py: Python<'_>, t: &SchemeTimes) -> PyResult<Py<PyDict>> {
    let out = PyDict::new(py);
    out.set_item("t_load", t.t_load)?;
    out.set_item("t_deload", t.t_deload)?;
    out.set_item("iterations_load", t.iterations_load)?;
    out.set_item("iterations_deload", t.iterations_deload)?;
    out.set_item("converged", t.converged)?;
    Ok(out.into())
}

/// Steady-state-aware loading/deloading durations (Gauss-Seidel fixed point).
#[pyfunction]
#[pyo3(signature = (params, epsilon = 1e-4))]
fn bounds_min(py: Python<'_>, params: &Params, epsilon: f64) -> PyResult<Py<PyDict>> {
    times_dict(py, &compute_bounds_min(&params.inner, epsilon).map_err(err)?)
}

/// Worst-case loading/deloading durations (full swings from rest).
#[pyfunction]
fn bounds_max(py: Python<'_>, params: &Params) -> PyResult<Py<PyDict>> {
    times_dict(py, &compute_bounds_max(&params.inner).map_err(err)?)
}

/// Integrate the transmitter for a bit pattern; returns columnar arrays.
#[pyfunction]
#[pyo3(signature = (params, scheme, bits, decimation = 100))]
fn simulate(
    py: Python<'_>,
    params: &Params,
    scheme: &str,
    bits: Vec<u8>,
    decimation: usize,
) -> PyResult<Py<PyDict>> {
    let traj = run_tx(&params.inner, scheme, bits, decimation)?;
    let led: Vec<u8> = traj.grid.iter().map(|&t| traj.led.value_at(t)).collect();
    let out = PyDict::new(py);
    out.set_item("t", &traj.grid)?;
    out.set_item("c_h_in", traj.states.iter().map(|s| s.c_h_in).collect::<Vec<_>>())?;
    out.set_item("c_sm_in", traj.states.iter().map(|s| s.c_sm_in).collect::<Vec<_>>())?;
    out.set_item("released_sym", traj.states.iter().map(|s| s.released_sym).collect::<Vec<_>>())?;
    out.set_item("released_leak", traj.states.iter().map(|s| s.released_leak).collect::<Vec<_>>())?;
    out.set_item("led", led)?;
    out.set_item("clamp_events", traj.clamp_events)?;
    Ok(out.into())
}

/// Expected cumulative arrivals at the receiver for a bit pattern.
#[pyfunction]
fn received(params: &Params, scheme: &str, bits: Vec<u8>, sample_times: Vec<f64>) -> PyResult<Vec<f64>> {
    let p = &params.inner;
    let traj = run_tx(p, scheme, bits, (1e-3 / p.dt).round().max(1.0) as usize)?;
    let ch = ChannelParams::from_system(p).map_err(err)?;
    expected_received(&traj, &ch, &sample_times, p.avogadro).map_err(err)
}

/// One stochastic realization of cumulative arrival counts.
#[pyfunction]
fn arrivals(
    params: &Params,
    scheme: &str,
    bits: Vec<u8>,
    sample_times: Vec<f64>,
    seed: u64,
) -> PyResult<Vec<u64>> {
    let p = &params.inner;
    let traj = run_tx(p, scheme, bits, (1e-3 / p.dt).round().max(1.0) as usize)?;
    let ch = ChannelParams::from_system(p).map_err(err)?;
    sample_arrivals(&traj, &ch, &sample_times, seed, p.avogadro).map_err(err)
}

#[pymodule]
fn mcsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_function(wrap_pyfunction!(derived, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(bounds_min, m)?)?;
    m.add_function(wrap_pyfunction!(bounds_max, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(received, m)?)?;
    m.add_function(wrap_pyfunction!(arrivals, m)?)?;
    Ok(())
}
