//! Transmitter kinetics: flux laws of the pump, symporter, and leakage
//! pathways, the coupled H⁺/SM ODE with buffer attenuation, the forward-Euler
//! integrator, and the equilibrium/threshold solvers.

use std::io::Write;

use num_complex::Complex64;

use crate::csvfmt::fmt_e12;
use crate::error::{McError, Result};
use crate::modulation::LedSignal;
use crate::params::{derive, SystemParams};

/// Instantaneous transmitter state. Release tallies are in moles; multiply
/// by N_A for molecule counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxState {
    pub t: f64,
    pub c_h_in: f64,
    pub c_sm_in: f64,
    pub released_sym: f64,
    pub released_leak: f64,
}

impl TxState {
    pub fn initial(p: &SystemParams) -> TxState {
        TxState {
            t: 0.0,
            c_h_in: p.c_h_in_0,
            c_sm_in: p.c_sm_in_0,
            released_sym: 0.0,
            released_leak: 0.0,
        }
    }
}

/// Decimated Euler solution. `grid[i] == states[i].t`; the producing LED
/// signal rides along so exports can reprint l(t).
#[derive(Debug, Clone)]
pub struct TxTrajectory {
    pub grid: Vec<f64>,
    pub states: Vec<TxState>,
    pub led: LedSignal,
    /// Number of negative-concentration clamps applied; nonzero means the
    /// step size was too coarse for these parameters.
    pub clamp_events: u64,
}

impl TxTrajectory {
    pub fn final_state(&self) -> &TxState {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Light-driven pump influx l·(C_out/C_out,0)·γ_P. The bath is held constant
/// in this model, so the ratio is 1 in every internal caller.
pub fn pump_flux(c_h_out: f64, c_h_out_0: f64, gamma_p: f64, led: u8) -> f64 {
    c_h_out / c_h_out_0 * gamma_p * f64::from(led)
}

/// Passive H⁺ leakage γ_L·(C_in − C_out); positive means out of the vesicle.
pub fn leak_flux_h(c_h_in: f64, c_h_out: f64, gamma_l_h: f64) -> f64 {
    gamma_l_h * (c_h_in - c_h_out)
}

/// Passive SM leakage, same law with γ_L^SM.
pub fn leak_flux_sm(c_sm_in: f64, c_sm_out: f64, gamma_l_sm: f64) -> f64 {
    gamma_l_sm * (c_sm_in - c_sm_out)
}

#[inline]
pub fn hill_fraction(c_h: f64, kmh_pow: f64, n: i32) -> f64 {
    let cn = c_h.powi(n);
    cn / (cn + kmh_pow)
}

/// Symporter H⁺ flux: γ_Sym · SM saturation · Hill activation.
pub fn symporter_flux_h(c_h_in: f64, c_sm_in: f64, p: &SystemParams) -> f64 {
    let sm_frac = c_sm_in / (c_sm_in + p.km);
    p.gamma_sym * sm_frac * hill_fraction(c_h_in, p.km_h.powi(p.hill_n as i32), p.hill_n as i32)
}

/// SM counterpart: one SM per ν_Sym protons.
pub fn symporter_flux_sm(c_h_in: f64, c_sm_in: f64, p: &SystemParams) -> f64 {
    symporter_flux_h(c_h_in, c_sm_in, p) / p.nu_sym
}

/// Buffer attenuation ϑ = k_D·C₀/(C_H + k_D)²; divides the free-H⁺ rate.
pub fn buffer_attenuation(c_h_in: f64, k_d: f64, c_buf: f64) -> f64 {
    let s = c_h_in + k_d;
    k_d * c_buf / (s * s)
}

/// Time derivatives returned by [`ode_rhs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeRhs {
    pub d_c_h_in: f64,
    pub d_c_sm_in: f64,
    pub d_released_sym: f64,
    pub d_released_leak: f64,
}

/// Precomputed constants for the hot Euler loop.
struct Stepper {
    gamma_p: f64,
    gamma_l_h: f64,
    gamma_l_sm: f64,
    gamma_sym: f64,
    inv_nu: f64,
    km: f64,
    kmh_pow: f64,
    n: i32,
    k_d: f64,
    kd_cbuf: f64,
    c_h_out_0: f64,
    v_in: f64,
}

impl Stepper {
    fn new(p: &SystemParams) -> Stepper {
        Stepper {
            gamma_p: p.gamma_p,
            gamma_l_h: p.gamma_l_h,
            gamma_l_sm: p.gamma_l_sm,
            gamma_sym: p.gamma_sym,
            inv_nu: 1.0 / p.nu_sym,
            km: p.km,
            kmh_pow: p.km_h.powi(p.hill_n as i32),
            n: p.hill_n as i32,
            k_d: p.k_d,
            kd_cbuf: p.k_d * p.c_buf,
            c_h_out_0: p.c_h_out_0,
            v_in: derive(p).v_in,
        }
    }

    #[inline]
    fn rhs(&self, c_h: f64, c_sm: f64, led_on: bool) -> OdeRhs {
        let i_e = if led_on { self.gamma_p } else { 0.0 };
        let i_l_h = self.gamma_l_h * (c_h - self.c_h_out_0);
        let i_r_h = self.gamma_sym * (c_sm / (c_sm + self.km)) * hill_fraction(c_h, self.kmh_pow, self.n);
        let i_r_sm = i_r_h * self.inv_nu;
        let i_l_sm = self.gamma_l_sm * c_sm;
        let s = c_h + self.k_d;
        let theta = self.kd_cbuf / (s * s);
        OdeRhs {
            d_c_h_in: (i_e - i_l_h - i_r_h) / (self.v_in * (1.0 + theta)),
            d_c_sm_in: -(i_r_sm + i_l_sm) / self.v_in,
            d_released_sym: i_r_sm,
            d_released_leak: i_l_sm.max(0.0),
        }
    }

    /// H⁺ rate with the SM concentration frozen at its initial value; the
    /// reduced dynamics used by all loading/deloading computations.
    #[inline]
    fn hplus_rate(&self, c_h: f64, c_sm_frozen: f64, led_on: bool) -> f64 {
        let i_e = if led_on { self.gamma_p } else { 0.0 };
        let i_l_h = self.gamma_l_h * (c_h - self.c_h_out_0);
        let i_r_h =
            self.gamma_sym * (c_sm_frozen / (c_sm_frozen + self.km)) * hill_fraction(c_h, self.kmh_pow, self.n);
        let s = c_h + self.k_d;
        let theta = self.kd_cbuf / (s * s);
        (i_e - i_l_h - i_r_h) / (self.v_in * (1.0 + theta))
    }
}

/// Full right-hand side of the transmitter ODE at one state.
pub fn ode_rhs(state: &TxState, led: u8, p: &SystemParams) -> OdeRhs {
    Stepper::new(p).rhs(state.c_h_in, state.c_sm_in, led != 0)
}

/// Forward-Euler integration from `initial` to `t_end` under the given LED
/// waveform. Toggle times are snapped to the nearest Δt grid point; two
/// toggles landing on the same grid point cannot be represented and raise a
/// grid-alignment error. States are stored at every `decimation`-th step plus
/// the final step.
pub fn integrate(
    p: &SystemParams,
    led: &LedSignal,
    t_end: f64,
    initial: TxState,
    decimation: usize,
) -> Result<TxTrajectory> {
    p.validate()?;
    if decimation == 0 {
        return Err(McError::Validation("decimation must be >= 1".into()));
    }
    if !(t_end > initial.t) {
        return Err(McError::Validation(format!(
            "t_end = {t_end} must exceed the initial time {}",
            initial.t
        )));
    }
    let dt = p.dt;
    if t_end > led.horizon + 0.5 * dt {
        return Err(McError::Validation(format!(
            "LED horizon {} does not cover t_end = {t_end}",
            led.horizon
        )));
    }
    let n_steps = ((t_end - initial.t) / dt).round() as u64;
    if n_steps == 0 {
        return Err(McError::Validation(
            "t_end - initial.t is below half an integrator step".into(),
        ));
    }

    // Snap toggles to step indices relative to the start time.
    let mut toggle_idx: Vec<u64> = Vec::with_capacity(led.toggles.len());
    for &tau in &led.toggles {
        if tau <= initial.t {
            continue; // folded into the starting value below
        }
        let k = ((tau - initial.t) / dt).round() as u64;
        if k > n_steps {
            break; // beyond the integration window
        }
        if let Some(&prev) = toggle_idx.last() {
            if k <= prev {
                return Err(McError::GridAlignment(format!(
                    "LED toggles near t = {tau} collapse onto one Δt = {dt} grid point"
                )));
            }
        }
        toggle_idx.push(k);
    }

    let stepper = Stepper::new(p);
    let mut cur_led = led.value_at(initial.t) != 0;
    let mut c_h = initial.c_h_in;
    let mut c_sm = initial.c_sm_in;
    let mut rel_sym = initial.released_sym;
    let mut rel_leak = initial.released_leak;
    let mut clamp_events: u64 = 0;

    let cap = (n_steps as usize / decimation) + 3;
    let mut grid = Vec::with_capacity(cap);
    let mut states = Vec::with_capacity(cap);
    let push = |k: u64, c_h: f64, c_sm: f64, rs: f64, rl: f64, grid: &mut Vec<f64>, states: &mut Vec<TxState>| {
        let t = initial.t + k as f64 * dt;
        grid.push(t);
        states.push(TxState {
            t,
            c_h_in: c_h,
            c_sm_in: c_sm,
            released_sym: rs,
            released_leak: rl,
        });
    };
    push(0, c_h, c_sm, rel_sym, rel_leak, &mut grid, &mut states);

    let mut next_toggle = 0usize;
    for k in 0..n_steps {
        if next_toggle < toggle_idx.len() && toggle_idx[next_toggle] == k {
            cur_led = !cur_led;
            next_toggle += 1;
        }
        let r = stepper.rhs(c_h, c_sm, cur_led);
        c_h += dt * r.d_c_h_in;
        c_sm += dt * r.d_c_sm_in;
        rel_sym += dt * r.d_released_sym;
        rel_leak += dt * r.d_released_leak;
        if c_h < 0.0 {
            c_h = 0.0;
            clamp_events += 1;
        }
        if c_sm < 0.0 {
            c_sm = 0.0;
            clamp_events += 1;
        }
        let done = k + 1 == n_steps;
        if (k + 1) % decimation as u64 == 0 || done {
            push(k + 1, c_h, c_sm, rel_sym, rel_leak, &mut grid, &mut states);
        }
    }

    Ok(TxTrajectory {
        grid,
        states,
        led: led.clone(),
        clamp_events,
    })
}

/// CSV export: `t,c_h_in,c_sm_in,released_sym_molecules,released_leak_molecules,led`.
pub fn write_trajectory_csv<W: Write>(traj: &TxTrajectory, avogadro: f64, out: &mut W) -> Result<()> {
    writeln!(
        out,
        "t,c_h_in,c_sm_in,released_sym_molecules,released_leak_molecules,led"
    )?;
    for s in &traj.states {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_e12(s.t),
            fmt_e12(s.c_h_in),
            fmt_e12(s.c_sm_in),
            fmt_e12(s.released_sym * avogadro),
            fmt_e12(s.released_leak * avogadro),
            traj.led.value_at(s.t)
        )?;
    }
    Ok(())
}

/// dC_H/dt at `c_h` with C_SM frozen at c_sm_in_0.
pub fn hplus_rate(c_h: f64, led_on: bool, p: &SystemParams) -> f64 {
    Stepper::new(p).hplus_rate(c_h, p.c_sm_in_0, led_on)
}

/// First time the frozen-SM Euler trajectory from `c_start` crosses `target`
/// under a constant LED state, refined by linear interpolation between the
/// bracketing steps. Errors if the crossing does not happen within `cap`.
pub fn hplus_time_to(p: &SystemParams, c_start: f64, led_on: bool, target: f64, cap: f64) -> Result<f64> {
    let stepper = Stepper::new(p);
    let dt = p.dt;
    let up = c_start < target;
    let n_max = (cap / dt).round() as u64;
    let mut c = c_start;
    let mut k: u64 = 0;
    while k < n_max {
        let cn = c + dt * stepper.hplus_rate(c, p.c_sm_in_0, led_on);
        k += 1;
        if (up && cn >= target) || (!up && cn <= target) {
            let frac = (target - c) / (cn - c);
            return Ok(((k - 1) as f64 + frac) * dt);
        }
        c = cn;
    }
    Err(McError::NonReaching(format!(
        "threshold {target} not crossed from {c_start} (led {}) within {cap} s",
        if led_on { "on" } else { "off" }
    )))
}

/// Frozen-SM Euler relaxation from `c_start` for `duration` (rounded to whole
/// steps) under a constant LED state.
pub fn hplus_relax(p: &SystemParams, c_start: f64, led_on: bool, duration: f64) -> f64 {
    let stepper = Stepper::new(p);
    let dt = p.dt;
    let n = (duration / dt).round() as u64;
    let mut c = c_start;
    for _ in 0..n {
        c += dt * stepper.hplus_rate(c, p.c_sm_in_0, led_on);
    }
    c
}

/// Net membrane H⁺ flux whose root is the equilibrium concentration; the SM
/// concentration is held at its initial value. The buffer never appears, so
/// equilibria are buffer-independent.
fn net_flux(c: f64, led: f64, p: &SystemParams) -> f64 {
    led * p.gamma_p + p.gamma_l_h * (p.c_h_out_0 - c) - symporter_flux_h(c, p.c_sm_in_0, p)
}

/// Equilibrium intravesicular H⁺ concentration for a constant LED state, by
/// bisection to relative tolerance 1e-10 on the bracket (0, C_out,0 + l·γ_P/γ_L].
pub fn chin_equilibrium(p: &SystemParams, led_on: bool) -> Result<f64> {
    p.validate()?;
    let led = if led_on { 1.0 } else { 0.0 };
    if p.gamma_l_h <= 0.0 {
        return Err(McError::Bracket(
            "gamma_l_h = 0 leaves the net flux without a finite upper bracket".into(),
        ));
    }
    let mut lo = 0.0f64;
    let mut hi = p.c_h_out_0 + led * p.gamma_p / p.gamma_l_h;
    let mut f_lo = net_flux(lo, led, p);
    let f_hi = net_flux(hi, led, p);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo * f_hi > 0.0 {
        return Err(McError::Bracket(format!(
            "net H+ flux has no sign change on (0, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = net_flux(mid, led, p);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
        if hi - lo <= 1e-10 * mid.abs() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form equilibrium evaluation result. `value` is the selected root
/// (or the numeric root when `fell_back`); `discrepancy` means a real
/// nonnegative candidate exists but disagrees with the numeric root by more
/// than relative 1e-6. The numeric root stays authoritative either way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormEq {
    pub value: f64,
    pub discrepancy: bool,
    pub fell_back: bool,
}

/// Literal evaluation of the published quartic-root expression for the
/// led-on equilibrium at n = 3. The expression is evaluated in complex
/// arithmetic exactly as printed (including its suspect 2³/(X₁³·3) vs
/// 2³/(X₁³·3a) terms); candidates that come out real and nonnegative are
/// compared against the bisection root.
pub fn chin_eq_closed_form_n3(p: &SystemParams) -> Result<ClosedFormEq> {
    if p.hill_n != 3 {
        return Err(McError::UnsupportedOrder(p.hill_n));
    }
    p.validate()?;
    let numeric = chin_equilibrium(p, true)?;

    let a = -p.gamma_l_h;
    let b = p.gamma_p + p.gamma_l_h * p.c_h_out_0;
    let x1 = p.gamma_sym * p.c_sm_in_0 / (p.c_sm_in_0 + p.km);
    let x2 = p.km_h.powi(3);

    if x1 == 0.0 {
        // Degenerate symporter: the affine part's root is exact.
        let value = -b / a;
        let discrepancy = (value - numeric).abs() > 1e-6 * numeric.abs();
        return Ok(ClosedFormEq {
            value,
            discrepancy,
            fell_back: false,
        });
    }

    let disc_arg = 729.0 * x2 * x2 * (b.powi(3) + 2.0 * b * b * x1 + b * x1 * x1 + a.powi(3) * x2).powi(2)
        - 4.0 * (9.0 * a * b * x2 - 3.0 * a * x1 * x2).powi(3);
    let sq = Complex64::new(disc_arg, 0.0).sqrt();
    let x1c = Complex64::new(-27.0 * b * (b + x1) * (b + x1) * x2 - 27.0 * a.powi(3) * x2 * x2, 0.0) + sq;
    let x2c = Complex64::new((3.0 * b - x1) * x2, 0.0) / (x1c * 8.0);
    let x3 = (b + x1) / a;

    let x1c_cubed = x1c * x1c * x1c;
    let r1 = (Complex64::new(x3 * x3 / 4.0, 0.0) - x2c - Complex64::new(8.0, 0.0) / (x1c_cubed * 3.0)).sqrt();
    let inner =
        (Complex64::new(x3 * x3 / 4.0, 0.0) - x2c - Complex64::new(8.0, 0.0) / (x1c_cubed * (3.0 * a))).sqrt();
    let r2_arg = Complex64::new(x3 * x3 / 2.0, 0.0)
        + x2c
        + Complex64::new(8.0, 0.0) / (x1c_cubed * (3.0 * a))
        + Complex64::new(x3 * x3 * x3 + 8.0 * x2, 0.0) / (inner * 4.0);
    let r2 = r2_arg.sqrt();

    let mut best: Option<f64> = None;
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let c = -x3 / 4.0 + s1 * 0.5 * r1.re + s2 * 0.5 * r2.re;
            let im = s1 * 0.5 * r1.im + s2 * 0.5 * r2.im;
            if im.abs() <= 1e-9 * c.abs().max(1.0) && c >= 0.0 {
                let better = match best {
                    None => true,
                    Some(prev) => (c - numeric).abs() < (prev - numeric).abs(),
                };
                if better {
                    best = Some(c);
                }
            }
        }
    }
    match best {
        Some(value) => Ok(ClosedFormEq {
            value,
            discrepancy: (value - numeric).abs() > 1e-6 * numeric.abs(),
            fell_back: false,
        }),
        None => Ok(ClosedFormEq {
            value: numeric,
            discrepancy: false,
            fell_back: true,
        }),
    }
}

/// Soft-activation threshold: the smaller positive root of the third
/// derivative of the Hill fraction, i.e. of
/// (n+1)(n+2)·u² − 4(n²−1)·u + (n−1)(n−2) = 0 with u = (x/K_m,H+)ⁿ,
/// found by bisection on (0, vertex]. n = 2 degenerates to u = 1 exactly.
pub fn chin_threshold(hill_n: u32, km_h: f64) -> Result<f64> {
    if !(km_h.is_finite() && km_h > 0.0) {
        return Err(McError::Validation(format!(
            "km_h must be strictly positive, got {km_h}"
        )));
    }
    if hill_n < 2 {
        return Err(McError::UnsupportedOrder(hill_n));
    }
    if hill_n == 2 {
        // Quadratic term pair vanishes: 12u(u - 1) = 0, positive root u = 1.
        return Ok(km_h);
    }
    let n = hill_n as f64;
    let qa = (n + 1.0) * (n + 2.0);
    let qb = -4.0 * (n * n - 1.0);
    let qc = (n - 1.0) * (n - 2.0);
    let q = |u: f64| (qa * u + qb) * u + qc;
    // The two positive roots straddle the vertex; Q(0) = qc > 0 for n >= 3.
    let mut lo = 0.0f64;
    let mut hi = -qb / (2.0 * qa);
    debug_assert!(q(lo) > 0.0 && q(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let qm = q(mid);
        if qm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if qm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * mid {
            break;
        }
    }
    let u = 0.5 * (lo + hi);
    Ok(km_h * u.powf(1.0 / n))
}
