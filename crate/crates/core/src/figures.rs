//! CSV data surfaces behind the plotting notebooks: each kind emits one flat
//! table that an external plot script can consume without touching the
//! simulator.

use std::io::Write;
use std::str::FromStr;

use crate::channel::{aggregate_release, expected_from_pulses, ChannelParams, DEFAULT_AGG_DT};
use crate::csvfmt::fmt_e12;
use crate::error::{McError, Result};
use crate::experiment::{run_ber, BerExperimentConfig, Scheme};
use crate::modulation::{compute_bounds_min, sweep_times, write_times_csv, DEFAULT_EPSILON};
use crate::params::SystemParams;
use crate::tx::{buffer_attenuation, hill_fraction, integrate, TxState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Symporter activation fraction vs proton concentration for several
    /// Hill orders, including the hard-threshold limit.
    Hill,
    /// Buffer attenuation factor vs proton concentration for several
    /// buffer molarities.
    Attenuation,
    /// Demo-sequence transmitter trajectories for all four schemes.
    Trajectory,
    /// Loading/deloading time bounds over a (t_bit, molarity) grid.
    Times,
    /// Expected received signal for the demo sequence, per scheme.
    Received,
    /// Desk-scale BER report (full-scale with `full = true`).
    Ber,
}

impl FromStr for FigureKind {
    type Err = McError;

    fn from_str(s: &str) -> Result<FigureKind> {
        match s.to_ascii_lowercase().as_str() {
            "hill" => Ok(FigureKind::Hill),
            "attenuation" => Ok(FigureKind::Attenuation),
            "trajectory" => Ok(FigureKind::Trajectory),
            "times" => Ok(FigureKind::Times),
            "received" => Ok(FigureKind::Received),
            "ber" => Ok(FigureKind::Ber),
            other => Err(McError::Config(format!(
                "unknown figure kind '{other}' (expected hill, attenuation, trajectory, times, received, or ber)"
            ))),
        }
    }
}

/// Demo bit pattern shared by the trajectory and received-signal figures.
pub const DEMO_BITS: [u8; 8] = [1, 0, 1, 1, 0, 0, 1, 0];

/// Log-spaced grid with exact endpoints plus `extra` points spliced in.
fn log_grid(lo: f64, hi: f64, per_decade: usize, extra: &[f64]) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    let mut g: Vec<f64> = (0..=n)
        .map(|i| lo * 10f64.powf(decades * i as f64 / n as f64))
        .collect();
    g.extend(extra.iter().copied().filter(|x| *x >= lo && *x <= hi));
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    g
}

fn emit_hill(p: &SystemParams, out: &mut impl Write) -> Result<()> {
    writeln!(out, "c_h,n,activity")?;
    let grid = log_grid(1e-5, 1e-1, 60, &[p.km_h]);
    for n in [1i32, 2, 3, 4] {
        let kmh_pow = p.km_h.powi(n);
        for &c in &grid {
            writeln!(out, "{},{},{}", fmt_e12(c), n, fmt_e12(hill_fraction(c, kmh_pow, n)))?;
        }
    }
    // hard-threshold limit of the Hill curve
    for &c in &grid {
        let a = if c < p.km_h {
            0.0
        } else if c > p.km_h {
            1.0
        } else {
            0.5
        };
        writeln!(out, "{},inf,{}", fmt_e12(c), fmt_e12(a))?;
    }
    Ok(())
}

fn emit_attenuation(p: &SystemParams, out: &mut impl Write) -> Result<()> {
    writeln!(out, "c_h,c_buf,theta")?;
    let grid = log_grid(1e-5, 1e-1, 60, &[p.c_h_in_0, p.k_d]);
    for c_buf in [0.0, 5.0, 20.0] {
        for &c in &grid {
            writeln!(
                out,
                "{},{},{}",
                fmt_e12(c),
                fmt_e12(c_buf),
                fmt_e12(buffer_attenuation(c, p.k_d, c_buf))
            )?;
        }
    }
    Ok(())
}

fn demo_signals(p: &SystemParams) -> Result<Vec<(Scheme, crate::modulation::LedSignal)>> {
    let times = compute_bounds_min(p, DEFAULT_EPSILON)?;
    Scheme::ALL
        .iter()
        .map(|&s| Ok((s, s.signal(&DEMO_BITS, p, Some(&times))?)))
        .collect()
}

fn emit_trajectory(p: &SystemParams, out: &mut impl Write) -> Result<()> {
    writeln!(
        out,
        "scheme,t,c_h_in,c_sm_in,released_sym_molecules,released_leak_molecules,led"
    )?;
    let horizon = DEMO_BITS.len() as f64 * p.t_bit;
    let decimation = (0.01 / p.dt).round().max(1.0) as usize;
    for (scheme, led) in demo_signals(p)? {
        let traj = integrate(p, &led, horizon, TxState::initial(p), decimation)?;
        for (t, s) in traj.grid.iter().zip(&traj.states) {
            writeln!(
                out,
                "{scheme},{},{},{},{},{},{}",
                fmt_e12(*t),
                fmt_e12(s.c_h_in),
                fmt_e12(s.c_sm_in),
                fmt_e12(s.released_sym * p.avogadro),
                fmt_e12(s.released_leak * p.avogadro),
                led.value_at(*t)
            )?;
        }
    }
    Ok(())
}

fn emit_times(p: &SystemParams, out: &mut impl Write) -> Result<()> {
    let rows = sweep_times(p, &[0.25, 0.5, 1.0, 2.0, 4.0], &[0.0, 5.0, 20.0], DEFAULT_EPSILON)?;
    write_times_csv(&rows, out)
}

fn emit_received(p: &SystemParams, out: &mut impl Write) -> Result<()> {
    writeln!(out, "scheme,t,r")?;
    let horizon = DEMO_BITS.len() as f64 * p.t_bit;
    let ch = ChannelParams::from_system(p)?;
    let decimation = (DEFAULT_AGG_DT / p.dt).round().max(1.0) as usize;
    let sample_dt = 0.05;
    let n = (horizon / sample_dt).floor() as usize;
    let sample_times: Vec<f64> = (0..=n).map(|i| i as f64 * sample_dt).collect();
    for (scheme, led) in demo_signals(p)? {
        let traj = integrate(p, &led, horizon, TxState::initial(p), decimation)?;
        let pulses = aggregate_release(&traj, p.avogadro, DEFAULT_AGG_DT)?;
        let r = expected_from_pulses(&pulses, &ch, &sample_times);
        for (t, v) in sample_times.iter().zip(&r) {
            writeln!(out, "{scheme},{},{}", fmt_e12(*t), fmt_e12(*v))?;
        }
    }
    Ok(())
}

fn emit_ber(p: &SystemParams, seed: u64, full: bool, out: &mut impl Write) -> Result<()> {
    let cfg = if full {
        BerExperimentConfig::full_scale(seed)
    } else {
        BerExperimentConfig::desk_scale(seed)
    };
    run_ber(p, &cfg)?.write_csv(out)
}

pub fn emit_figure(
    kind: FigureKind,
    p: &SystemParams,
    seed: u64,
    full: bool,
    out: &mut impl Write,
) -> Result<()> {
    p.validate()?;
    match kind {
        FigureKind::Hill => emit_hill(p, out),
        FigureKind::Attenuation => emit_attenuation(p, out),
        FigureKind::Trajectory => emit_trajectory(p, out),
        FigureKind::Times => emit_times(p, out),
        FigureKind::Received => emit_received(p, out),
        FigureKind::Ber => emit_ber(p, seed, full, out),
    }
}
