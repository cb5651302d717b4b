//! End-to-end BER experiment: for each (bit rate, buffer molarity, scheme)
//! setting, draw random bit sequences, integrate the transmitter once per
//! sequence, Monte-Carlo sample receiver counts, and line-search the
//! detection threshold.
//!
//! Seeding is a pure function of (master seed, setting, sequence index,
//! realization index), so reports are byte-identical across runs and thread
//! counts.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use crate::channel::{aggregate_release, sample_arrivals_from_pulses, ChannelParams, DEFAULT_AGG_DT};
use crate::csvfmt::fmt_e12;
use crate::detection::IncrementHistograms;
use crate::error::{McError, Result};
use crate::modulation::{
    compute_bounds_min, mam_signal, mem_signal, ook_gi_signal, ook_signal, LedSignal, SchemeTimes,
    DEFAULT_EPSILON,
};
use crate::params::SystemParams;
use crate::rng::{mix, stream};
use crate::tx::{integrate, TxState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Ook,
    OokGi,
    Mam,
    Mem,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Ook, Scheme::OokGi, Scheme::Mam, Scheme::Mem];

    /// Stable id used in the seeding tree; never reorder.
    fn id(self) -> u64 {
        match self {
            Scheme::Ook => 0,
            Scheme::OokGi => 1,
            Scheme::Mam => 2,
            Scheme::Mem => 3,
        }
    }

    pub fn needs_bounds(self) -> bool {
        matches!(self, Scheme::Mam | Scheme::Mem)
    }

    pub fn signal(self, bits: &[u8], p: &SystemParams, times: Option<&SchemeTimes>) -> Result<LedSignal> {
        match self {
            Scheme::Ook => ook_signal(bits, p.t_bit),
            Scheme::OokGi => ook_gi_signal(bits, p.t_bit, p.t_guard),
            Scheme::Mam | Scheme::Mem => {
                let times = times.ok_or_else(|| {
                    McError::Validation(format!("{self} needs precomputed load/deload times"))
                })?;
                if self == Scheme::Mam {
                    mam_signal(bits, p.t_bit, times)
                } else {
                    mem_signal(bits, p.t_bit, times)
                }
            }
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::Ook => "OOK",
            Scheme::OokGi => "OOK-GI",
            Scheme::Mam => "MAM",
            Scheme::Mem => "MEM",
        };
        f.write_str(s)
    }
}

impl FromStr for Scheme {
    type Err = McError;

    fn from_str(s: &str) -> Result<Scheme> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ook" => Ok(Scheme::Ook),
            "ook-gi" | "ookgi" => Ok(Scheme::OokGi),
            "mam" => Ok(Scheme::Mam),
            "mem" => Ok(Scheme::Mem),
            other => Err(McError::Config(format!(
                "unknown scheme '{other}' (expected ook, ook-gi, mam, or mem)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BerExperimentConfig {
    /// Bit rates in 1/s; t_bit = 1/rate, t_guard = t_bit/2.
    pub rates: Vec<f64>,
    /// Buffer molarities (mol/m^3) applied as c_buf.
    pub buffer_molarities: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub n_sequences: usize,
    pub seq_length: usize,
    /// Total receiver realizations per setting, split evenly over sequences.
    pub n_realizations_total: usize,
    pub master_seed: u64,
    /// Pool increment histograms across sequences and pick one threshold per
    /// setting instead of one per sequence.
    pub pool_threshold: bool,
    /// Gauss-Seidel tolerance for MAM/MEM load/deload times.
    pub epsilon: f64,
    pub agg_dt: f64,
}

impl BerExperimentConfig {
    pub fn desk_scale(master_seed: u64) -> BerExperimentConfig {
        BerExperimentConfig {
            rates: vec![0.25, 0.5, 1.0, 2.0],
            buffer_molarities: vec![0.0, 20.0],
            schemes: Scheme::ALL.to_vec(),
            n_sequences: 20,
            seq_length: 50,
            n_realizations_total: 2000,
            master_seed,
            pool_threshold: false,
            epsilon: DEFAULT_EPSILON,
            agg_dt: DEFAULT_AGG_DT,
        }
    }

    pub fn full_scale(master_seed: u64) -> BerExperimentConfig {
        BerExperimentConfig {
            seq_length: 200,
            n_realizations_total: 50_000,
            ..BerExperimentConfig::desk_scale(master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(McError::Config("rates must be nonempty".into()));
        }
        if self.rates.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(McError::Config("rates must be positive and finite".into()));
        }
        if self.buffer_molarities.is_empty() {
            return Err(McError::Config("buffer_molarities must be nonempty".into()));
        }
        if self.buffer_molarities.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(McError::Config("buffer molarities must be finite and >= 0".into()));
        }
        if self.schemes.is_empty() {
            return Err(McError::Config("schemes must be nonempty".into()));
        }
        if self.n_sequences == 0 {
            return Err(McError::Config("n_sequences must be >= 1".into()));
        }
        if self.seq_length < 2 {
            return Err(McError::Config("seq_length must be >= 2".into()));
        }
        if self.n_realizations_total < self.n_sequences
            || self.n_realizations_total % self.n_sequences != 0
        {
            return Err(McError::Config(format!(
                "n_realizations_total ({}) must be a positive multiple of n_sequences ({})",
                self.n_realizations_total, self.n_sequences
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(McError::Config("epsilon must be > 0".into()));
        }
        if !(self.agg_dt > 0.0) {
            return Err(McError::Config("agg_dt must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub sequence: usize,
    pub seed: u64,
    pub threshold: u64,
    pub ber: f64,
    pub n_realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SettingStatus {
    Ok,
    /// The scheme's load/deload bounds do not fit inside t_bit; nothing was
    /// simulated for this setting, but it is still reported.
    Infeasible(String),
}

#[derive(Debug, Clone)]
pub struct SettingResult {
    pub rate: f64,
    pub c_buf: f64,
    pub scheme: Scheme,
    pub setting_seed: u64,
    pub status: SettingStatus,
    pub times: Option<SchemeTimes>,
    pub sequences: Vec<SequenceResult>,
    /// Realization-weighted mean BER over sequences (uniform split makes it
    /// the plain mean).
    pub aggregate_ber: Option<f64>,
    pub pooled_threshold: Option<u64>,
}

impl SettingResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, SettingStatus::Ok)
    }

    /// Standard error of the per-sequence BERs (sample std / sqrt(n)).
    pub fn ber_standard_error(&self) -> Option<f64> {
        let n = self.sequences.len();
        if n < 2 {
            return None;
        }
        let mean = self.sequences.iter().map(|s| s.ber).sum::<f64>() / n as f64;
        let var = self
            .sequences
            .iter()
            .map(|s| (s.ber - mean).powi(2))
            .sum::<f64>()
            / (n as f64 - 1.0);
        Some((var / n as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct BerReport {
    pub settings: Vec<SettingResult>,
}

impl BerReport {
    pub fn find(&self, rate: f64, c_buf: f64, scheme: Scheme) -> Option<&SettingResult> {
        self.settings
            .iter()
            .find(|s| s.rate == rate && s.c_buf == c_buf && s.scheme == scheme)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "rate,c_buf,scheme,sequence,status,threshold,ber,n_realizations,seed")?;
        for s in &self.settings {
            let prefix = format!("{},{},{}", fmt_e12(s.rate), fmt_e12(s.c_buf), s.scheme);
            match &s.status {
                SettingStatus::Infeasible(_) => {
                    writeln!(out, "{prefix},agg,infeasible,,,0,{}", s.setting_seed)?;
                }
                SettingStatus::Ok => {
                    for seq in &s.sequences {
                        writeln!(
                            out,
                            "{prefix},{},ok,{},{},{},{}",
                            seq.sequence,
                            seq.threshold,
                            fmt_e12(seq.ber),
                            seq.n_realizations,
                            seq.seed
                        )?;
                    }
                    let total: usize = s.sequences.iter().map(|q| q.n_realizations).sum();
                    writeln!(
                        out,
                        "{prefix},agg,ok,,{},{},{}",
                        fmt_e12(s.aggregate_ber.unwrap_or(f64::NAN)),
                        total,
                        s.setting_seed
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Stable per-setting tag from the physical knobs; mixing f64 bit patterns
/// keeps distinct grid points on distinct streams.
fn setting_tag(rate: f64, c_buf: f64, scheme: Scheme) -> u64 {
    mix(mix(rate.to_bits(), c_buf.to_bits()), scheme.id())
}

fn draw_bits(seed: u64, len: usize) -> Vec<u8> {
    let mut rng = stream(seed);
    (0..len).map(|_| (rng.next_u32() & 1) as u8).collect()
}

struct SequenceOutcome {
    result: SequenceResult,
    hist: IncrementHistograms,
}

fn run_sequence(
    p: &SystemParams,
    cfg: &BerExperimentConfig,
    ch: &ChannelParams,
    scheme: Scheme,
    times: Option<&SchemeTimes>,
    seq_index: usize,
    seq_seed: u64,
) -> Result<SequenceOutcome> {
    let bits = draw_bits(mix(seq_seed, 0), cfg.seq_length);
    let led = scheme.signal(&bits, p, times)?;
    let horizon = cfg.seq_length as f64 * p.t_bit;
    let decimation = (cfg.agg_dt / p.dt).round().max(1.0) as usize;
    let traj = integrate(p, &led, horizon, TxState::initial(p), decimation)?;
    let pulses = aggregate_release(&traj, p.avogadro, cfg.agg_dt)?;
    drop(traj);
    let sample_times: Vec<f64> = (1..=cfg.seq_length).map(|i| i as f64 * p.t_bit).collect();

    let per_seq = cfg.n_realizations_total / cfg.n_sequences;
    let realizations: Vec<Vec<u64>> = (0..per_seq)
        .into_par_iter()
        .map(|r| {
            let counts =
                sample_arrivals_from_pulses(&pulses, ch, &sample_times, mix(seq_seed, 1 + r as u64))?;
            let mut full = Vec::with_capacity(counts.len() + 1);
            full.push(0);
            full.extend(counts);
            Ok(full)
        })
        .collect::<Result<_>>()?;

    let hist = IncrementHistograms::from_realizations(&bits, &realizations)?;
    let (threshold, errs) = hist.best_threshold();
    let ber = errs as f64 / hist.decisions() as f64;
    Ok(SequenceOutcome {
        result: SequenceResult {
            sequence: seq_index,
            seed: seq_seed,
            threshold,
            ber,
            n_realizations: per_seq,
        },
        hist,
    })
}

fn run_setting(
    base: &SystemParams,
    cfg: &BerExperimentConfig,
    rate: f64,
    c_buf: f64,
    scheme: Scheme,
) -> Result<SettingResult> {
    let mut p = base.clone();
    p.t_bit = 1.0 / rate;
    p.t_guard = 0.5 * p.t_bit;
    p.c_buf = c_buf;
    p.validate()?;
    let setting_seed = mix(cfg.master_seed, setting_tag(rate, c_buf, scheme));

    let times = if scheme.needs_bounds() {
        match compute_bounds_min(&p, cfg.epsilon) {
            Ok(t) => Some(t),
            Err(McError::Infeasible(msg)) => {
                return Ok(SettingResult {
                    rate,
                    c_buf,
                    scheme,
                    setting_seed,
                    status: SettingStatus::Infeasible(msg),
                    times: None,
                    sequences: Vec::new(),
                    aggregate_ber: None,
                    pooled_threshold: None,
                });
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let ch = ChannelParams::from_system(&p)?;
    let outcomes: Vec<SequenceOutcome> = (0..cfg.n_sequences)
        .into_par_iter()
        .map(|s| run_sequence(&p, cfg, &ch, scheme, times.as_ref(), s, mix(setting_seed, s as u64)))
        .collect::<Result<_>>()?;

    let mut sequences: Vec<SequenceResult> = outcomes.iter().map(|o| o.result.clone()).collect();
    let mut pooled_threshold = None;
    if cfg.pool_threshold {
        let mut pooled = IncrementHistograms::default();
        for o in &outcomes {
            pooled.merge(&o.hist);
        }
        let (xi, _) = pooled.best_threshold();
        pooled_threshold = Some(xi);
        for (seq, o) in sequences.iter_mut().zip(&outcomes) {
            seq.threshold = xi;
            seq.ber = o.hist.errors_at(xi) as f64 / o.hist.decisions() as f64;
        }
    }

    let total: usize = sequences.iter().map(|s| s.n_realizations).sum();
    let aggregate = sequences
        .iter()
        .map(|s| s.ber * s.n_realizations as f64)
        .sum::<f64>()
        / total as f64;

    Ok(SettingResult {
        rate,
        c_buf,
        scheme,
        setting_seed,
        status: SettingStatus::Ok,
        times,
        sequences,
        aggregate_ber: Some(aggregate),
        pooled_threshold,
    })
}

/// Runs the full grid. Infeasible (rate, molarity, scheme) combinations are
/// reported with their status rather than dropped; real errors abort.
pub fn run_ber(base: &SystemParams, cfg: &BerExperimentConfig) -> Result<BerReport> {
    cfg.validate()?;
    base.validate()?;
    let mut grid = Vec::new();
    for &rate in &cfg.rates {
        for &c_buf in &cfg.buffer_molarities {
            for &scheme in &cfg.schemes {
                grid.push((rate, c_buf, scheme));
            }
        }
    }
    let settings: Vec<SettingResult> = grid
        .par_iter()
        .map(|&(rate, c_buf, scheme)| run_setting(base, cfg, rate, c_buf, scheme))
        .collect::<Result<_>>()?;
    Ok(BerReport { settings })
}
