//! LED waveform construction for the four schemes (OOK, OOK-GI, MAM, MEM)
//! and the loading/deloading-duration solvers: upper bounds from the reduced
//! finite-difference dynamics, lower bounds from the alternating-sequence
//! Gauss–Seidel iteration.

use std::io::Write;

use crate::csvfmt::fmt_e12;
use crate::error::{McError, Result};
use crate::params::SystemParams;
use crate::tx::{chin_equilibrium, chin_threshold, hplus_relax, hplus_time_to};

/// Piecewise-constant binary waveform: `value_at` is right-continuous, flips
/// at each toggle, and holds its last value at and beyond the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LedSignal {
    pub toggles: Vec<f64>,
    pub initial_value: u8,
    pub horizon: f64,
}

impl LedSignal {
    pub fn new(toggles: Vec<f64>, initial_value: u8, horizon: f64) -> Result<LedSignal> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(McError::Validation(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if initial_value > 1 {
            return Err(McError::Validation(format!(
                "initial_value must be 0 or 1, got {initial_value}"
            )));
        }
        let mut prev = -1.0f64;
        for &t in &toggles {
            if !t.is_finite() || t < 0.0 || t >= horizon {
                return Err(McError::Validation(format!(
                    "toggle {t} outside [0, {horizon})"
                )));
            }
            if t <= prev {
                return Err(McError::Validation(format!(
                    "toggles must be strictly increasing, got {prev} then {t}"
                )));
            }
            prev = t;
        }
        Ok(LedSignal {
            toggles,
            initial_value,
            horizon,
        })
    }

    pub fn constant(value: u8, horizon: f64) -> Result<LedSignal> {
        LedSignal::new(Vec::new(), value, horizon)
    }

    /// l(t); right-continuous, clamped to the final value for t >= horizon.
    pub fn value_at(&self, t: f64) -> u8 {
        let flips = self.toggles.partition_point(|&tau| tau <= t);
        self.initial_value ^ (flips as u8 & 1)
    }

    /// Maximal ON intervals [start, end), in order.
    pub fn on_intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut value = self.initial_value;
        let mut start = 0.0;
        for &tau in &self.toggles {
            if value == 1 {
                out.push((start, tau));
            }
            value ^= 1;
            start = tau;
        }
        if value == 1 {
            out.push((start, self.horizon));
        }
        out
    }

    pub fn total_on_time(&self) -> f64 {
        self.on_intervals().iter().map(|(s, e)| e - s).sum()
    }

    /// Builds a signal from ON intervals, clamping to [0, horizon], dropping
    /// empty intervals, and merging neighbors separated by at most
    /// `merge_tol` (adjacent per-bit pulses must fuse without micro-toggles).
    pub fn from_on_intervals(intervals: &[(f64, f64)], horizon: f64, merge_tol: f64) -> Result<LedSignal> {
        let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for &(s, e) in intervals {
            if !(s.is_finite() && e.is_finite()) {
                return Err(McError::Validation(format!(
                    "non-finite ON interval ({s}, {e})"
                )));
            }
            let s = s.max(0.0);
            let e = e.min(horizon);
            if e > s {
                sorted.push((s, e));
            }
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite interval endpoints"));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (s, e) in sorted {
            match merged.last_mut() {
                Some(last) if s - last.1 <= merge_tol => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        let mut initial_value = 0u8;
        let mut toggles = Vec::with_capacity(2 * merged.len());
        for (s, e) in merged {
            if s == 0.0 {
                initial_value = 1;
            } else {
                toggles.push(s);
            }
            if e < horizon {
                toggles.push(e);
            }
        }
        LedSignal::new(toggles, initial_value, horizon)
    }
}

fn check_bits(bits: &[u8]) -> Result<()> {
    if bits.is_empty() {
        return Err(McError::EmptyInput("bit sequence is empty".into()));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(McError::Validation("bits must be 0 or 1".into()));
    }
    Ok(())
}

fn check_t_bit(t_bit: f64) -> Result<()> {
    if !(t_bit.is_finite() && t_bit > 0.0) {
        return Err(McError::Validation(format!(
            "t_bit must be positive and finite, got {t_bit}"
        )));
    }
    Ok(())
}

/// OOK: l(t) = 1 on [i·T_b, (i+1)·T_b) for every 1-bit.
pub fn ook_signal(bits: &[u8], t_bit: f64) -> Result<LedSignal> {
    check_bits(bits)?;
    check_t_bit(t_bit)?;
    let horizon = bits.len() as f64 * t_bit;
    let intervals: Vec<(f64, f64)> = bits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == 1)
        .map(|(i, _)| (i as f64 * t_bit, (i + 1) as f64 * t_bit))
        .collect();
    LedSignal::from_on_intervals(&intervals, horizon, t_bit * 1e-12)
}

/// OOK with a trailing guard interval: each 1-bit excites only the first
/// T_b − T_g of its bit interval.
pub fn ook_gi_signal(bits: &[u8], t_bit: f64, t_guard: f64) -> Result<LedSignal> {
    check_bits(bits)?;
    check_t_bit(t_bit)?;
    if !(t_guard >= 0.0 && t_guard < t_bit) {
        return Err(McError::Infeasible(format!(
            "guard interval t_guard = {t_guard} must satisfy 0 <= t_guard < t_bit = {t_bit}"
        )));
    }
    let horizon = bits.len() as f64 * t_bit;
    let intervals: Vec<(f64, f64)> = bits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == 1)
        .map(|(i, _)| (i as f64 * t_bit, i as f64 * t_bit + (t_bit - t_guard)))
        .collect();
    LedSignal::from_on_intervals(&intervals, horizon, t_bit * 1e-12)
}

/// How loading/deloading durations were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    MinBound,
    MaxBound,
}

/// Loading/deloading durations for MAM and MEM. Iteration counts are the
/// number of crossing-time evaluations per direction (0 for the max bound,
/// which needs no iteration).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeTimes {
    pub t_load: f64,
    pub t_deload: f64,
    pub method: BoundMethod,
    pub iterations_load: u32,
    pub iterations_deload: u32,
    pub converged: bool,
}

fn check_times(times: &SchemeTimes, t_bit: f64) -> Result<()> {
    if !(times.t_load > 0.0 && times.t_load < t_bit && times.t_deload > 0.0 && times.t_deload < t_bit) {
        return Err(McError::Infeasible(format!(
            "scheme times (t_load = {}, t_deload = {}) must lie strictly inside (0, t_bit = {t_bit})",
            times.t_load, times.t_deload
        )));
    }
    Ok(())
}

/// MAM: switches are prepared only around bit transitions. Equal neighbors
/// keep the plain OOK pulse; a 1→0 transition deloads for T_d before the
/// boundary; a 0→1 transition loads for T_l before the boundary. The final
/// bit has no successor and keeps its OOK pulse.
pub fn mam_signal(bits: &[u8], t_bit: f64, times: &SchemeTimes) -> Result<LedSignal> {
    check_bits(bits)?;
    check_t_bit(t_bit)?;
    check_times(times, t_bit)?;
    let horizon = bits.len() as f64 * t_bit;
    let last = bits.len() - 1;
    let mut intervals = Vec::with_capacity(bits.len());
    for (i, &b) in bits.iter().enumerate() {
        let start = i as f64 * t_bit;
        let end = (i + 1) as f64 * t_bit;
        if i == last {
            if b == 1 {
                intervals.push((start, end));
            }
            continue;
        }
        match (b, bits[i + 1]) {
            (1, 1) => intervals.push((start, end)),
            (1, 0) => intervals.push((start, start + (t_bit - times.t_deload))),
            (0, 1) => intervals.push((start + (t_bit - times.t_load), end)),
            _ => {}
        }
    }
    LedSignal::from_on_intervals(&intervals, horizon, t_bit * 1e-12)
}

/// MEM: the threshold state is re-established at the start of every bit
/// interval — 1-bits excite for T_b − T_d, 0-bits excite for the final T_l.
pub fn mem_signal(bits: &[u8], t_bit: f64, times: &SchemeTimes) -> Result<LedSignal> {
    check_bits(bits)?;
    check_t_bit(t_bit)?;
    check_times(times, t_bit)?;
    let horizon = bits.len() as f64 * t_bit;
    let mut intervals = Vec::with_capacity(bits.len());
    for (i, &b) in bits.iter().enumerate() {
        let start = i as f64 * t_bit;
        let end = (i + 1) as f64 * t_bit;
        if b == 1 {
            intervals.push((start, start + (t_bit - times.t_deload)));
        } else {
            intervals.push((start + (t_bit - times.t_load), end));
        }
    }
    LedSignal::from_on_intervals(&intervals, horizon, t_bit * 1e-12)
}

/// Time cap for crossing searches; generous against the slowest buffered
/// dynamics while still bounding a misconfigured run.
const CROSSING_CAP: f64 = 1e4;

fn operation_interval(p: &SystemParams) -> Result<(f64, f64)> {
    let xi = chin_threshold(p.hill_n, p.km_h)?;
    let eq_on = chin_equilibrium(p, true)?;
    if !(p.c_h_in_0 < xi && xi < eq_on) {
        return Err(McError::Validation(format!(
            "operation interval violated: need c_h_in_0 = {} < threshold = {xi} < led-on equilibrium = {eq_on}",
            p.c_h_in_0
        )));
    }
    Ok((xi, eq_on))
}

/// Upper bounds: crossing times of the reduced led-on trajectory from
/// C_in,0 up to the threshold (load) and of the led-off trajectory from the
/// led-on equilibrium down to it (deload). Independent of t_bit.
pub fn compute_bounds_max(p: &SystemParams) -> Result<SchemeTimes> {
    p.validate()?;
    let (xi, eq_on) = operation_interval(p)?;
    let t_load = hplus_time_to(p, p.c_h_in_0, true, xi, CROSSING_CAP)?;
    let t_deload = hplus_time_to(p, eq_on, false, xi, CROSSING_CAP)?;
    Ok(SchemeTimes {
        t_load,
        t_deload,
        method: BoundMethod::MaxBound,
        iterations_load: 0,
        iterations_deload: 0,
        converged: true,
    })
}

/// One Gauss–Seidel fixed point: crossing time under `led_find`, then
/// relaxation from the threshold under the opposite LED state for the rest
/// of the bit interval, until successive crossing times differ by <= epsilon.
fn gauss_seidel(p: &SystemParams, c_start: f64, led_find: bool, xi: f64, epsilon: f64) -> Result<(f64, u32)> {
    let direction = if led_find { "loading" } else { "deloading" };
    let mut c = c_start;
    let mut t_prev: Option<f64> = None;
    for j in 0..100u32 {
        let t = hplus_time_to(p, c, led_find, xi, CROSSING_CAP)?;
        if t >= p.t_bit {
            return Err(McError::Infeasible(format!(
                "{direction} duration {t} does not fit into t_bit = {} (c_buf = {})",
                p.t_bit, p.c_buf
            )));
        }
        if let Some(tp) = t_prev {
            if (t - tp).abs() <= epsilon {
                return Ok((t, j + 1));
            }
        }
        t_prev = Some(t);
        c = hplus_relax(p, xi, !led_find, p.t_bit - t);
    }
    Err(McError::NonConvergence(format!(
        "{direction} Gauss-Seidel iteration did not settle within 100 rounds (epsilon = {epsilon})"
    )))
}

/// Default Gauss–Seidel stopping tolerance on successive crossing times [s].
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Lower bounds under the alternating-sequence assumption: the boundary
/// concentration is pinned at the threshold, so each direction alternates a
/// crossing search with a (T_b − t) relaxation from the threshold.
pub fn compute_bounds_min(p: &SystemParams, epsilon: f64) -> Result<SchemeTimes> {
    p.validate()?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(McError::Validation(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let (xi, eq_on) = operation_interval(p)?;
    let (t_load, iterations_load) = gauss_seidel(p, p.c_h_in_0, true, xi, epsilon)?;
    let (t_deload, iterations_deload) = gauss_seidel(p, eq_on, false, xi, epsilon)?;
    Ok(SchemeTimes {
        t_load,
        t_deload,
        method: BoundMethod::MinBound,
        iterations_load,
        iterations_deload,
        converged: true,
    })
}

/// One sweep point of the T_b / C₀ grid. Min-bound fields are None when the
/// durations do not fit into the bit interval.
#[derive(Debug, Clone, Copy)]
pub struct TimesRow {
    pub t_bit: f64,
    pub c_buf: f64,
    pub t_load_min: Option<f64>,
    pub t_load_max: f64,
    pub t_deload_min: Option<f64>,
    pub t_deload_max: f64,
    pub iters_load: u32,
    pub iters_deload: u32,
}

/// Bounds over a (t_bit, c_buf) grid; infeasible minima are recorded, not
/// fatal. The guard interval tracks t_bit/2 so the parameter set stays valid.
pub fn sweep_times(
    base: &SystemParams,
    t_bits: &[f64],
    molarities: &[f64],
    epsilon: f64,
) -> Result<Vec<TimesRow>> {
    let mut rows = Vec::with_capacity(t_bits.len() * molarities.len());
    for &c_buf in molarities {
        for &t_bit in t_bits {
            let mut p = base.clone();
            p.t_bit = t_bit;
            p.t_guard = 0.5 * t_bit;
            p.c_buf = c_buf;
            p.validate()?;
            let max = compute_bounds_max(&p)?;
            let row = match compute_bounds_min(&p, epsilon) {
                Ok(min) => TimesRow {
                    t_bit,
                    c_buf,
                    t_load_min: Some(min.t_load),
                    t_load_max: max.t_load,
                    t_deload_min: Some(min.t_deload),
                    t_deload_max: max.t_deload,
                    iters_load: min.iterations_load,
                    iters_deload: min.iterations_deload,
                },
                Err(McError::Infeasible(_)) => TimesRow {
                    t_bit,
                    c_buf,
                    t_load_min: None,
                    t_load_max: max.t_load,
                    t_deload_min: None,
                    t_deload_max: max.t_deload,
                    iters_load: 0,
                    iters_deload: 0,
                },
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// CSV export:
/// `t_bit,c_buf,t_load_min,t_load_max,t_deload_min,t_deload_max,iters_load,iters_deload`.
pub fn write_times_csv<W: Write>(rows: &[TimesRow], out: &mut W) -> Result<()> {
    writeln!(
        out,
        "t_bit,c_buf,t_load_min,t_load_max,t_deload_min,t_deload_max,iters_load,iters_deload"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_e12(r.t_bit),
            fmt_e12(r.c_buf),
            fmt_e12(r.t_load_min.unwrap_or(f64::NAN)),
            fmt_e12(r.t_load_max),
            fmt_e12(r.t_deload_min.unwrap_or(f64::NAN)),
            fmt_e12(r.t_deload_max),
            r.iters_load,
            r.iters_deload
        )?;
    }
    Ok(())
}
