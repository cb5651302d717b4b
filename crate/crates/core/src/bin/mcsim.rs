use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use mcsim::channel::{hitting_cdf, hitting_density, expected_received, ChannelParams};
use mcsim::csvfmt::fmt_e12;
use mcsim::error::{McError, Result};
use mcsim::experiment::{run_ber, BerExperimentConfig, Scheme};
use mcsim::figures::{emit_figure, FigureKind};
use mcsim::modulation::{compute_bounds_min, sweep_times, write_times_csv, SchemeTimes, DEFAULT_EPSILON};
use mcsim::params::SystemParams;
use mcsim::tx::{integrate, write_trajectory_csv, TxState};

/// Vesicular molecular-communication transmitter simulator.
#[derive(Parser)]
#[command(name = "mcsim", version, about)]
struct Cli {
    /// JSON config file with parameter overrides
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Single parameter override, repeatable (e.g. --set c_buf=20)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output CSV path (stdout when absent)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Master seed for stochastic commands
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Run the full-scale experiment instead of the desk-scale default
    #[arg(long, global = true)]
    full: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the transmitter for one bit pattern and emit the trajectory
    Simulate {
        /// Modulation scheme: ook, ook-gi, mam, or mem
        #[arg(long, default_value = "ook")]
        scheme: String,
        /// Bit pattern, e.g. 10110010
        #[arg(long, default_value = "10110010")]
        bits: String,
        /// End time in seconds (defaults to the full pattern duration)
        #[arg(long)]
        t_end: Option<f64>,
        /// Store every k-th Euler step
        #[arg(long, default_value_t = 100)]
        decimation: usize,
    },
    /// Loading/deloading time bounds over a (t_bit, molarity) grid
    Times {
        /// Bit intervals in seconds, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 1.0, 2.0, 4.0])]
        t_bits: Vec<f64>,
        /// Buffer molarities in mol/m^3, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 5.0, 20.0])]
        molarities: Vec<f64>,
    },
    /// First-passage density and CDF of the diffusive link
    Channel {
        /// Largest tabulated time in seconds
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        /// Number of grid intervals
        #[arg(long, default_value_t = 500)]
        points: usize,
    },
    /// Expected received signal for one bit pattern
    Received {
        #[arg(long, default_value = "ook")]
        scheme: String,
        #[arg(long, default_value = "10110010")]
        bits: String,
        /// Receiver sampling interval in seconds
        #[arg(long, default_value_t = 0.05)]
        sample_dt: f64,
    },
    /// Monte-Carlo BER over a (rate, molarity, scheme) grid
    Ber {
        /// Bit rates in 1/s, comma separated (defaults to the built-in grid)
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        /// Buffer molarities in mol/m^3, comma separated
        #[arg(long, value_delimiter = ',')]
        molarities: Option<Vec<f64>>,
        /// Schemes, comma separated (defaults to all four)
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        /// One detection threshold per setting instead of per sequence
        #[arg(long)]
        pool_threshold: bool,
    },
    /// Flat CSV surfaces for plotting
    Figure {
        /// hill, attenuation, trajectory, times, received, or ber
        #[arg(long)]
        kind: String,
    },
}

fn load_params(cli: &Cli) -> Result<SystemParams> {
    let mut p = match &cli.config {
        Some(path) => SystemParams::load_config(path)?,
        None => SystemParams::default(),
    };
    for pair in &cli.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            McError::Config(format!("--set expects KEY=VALUE, got '{pair}'"))
        })?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| McError::Config(format!("value '{value}' for {key} is not a number")))?;
        p.set_field(key.trim(), v)?;
    }
    p.validate()?;
    Ok(p)
}

fn open_out(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn parse_bits(s: &str) -> Result<Vec<u8>> {
    if s.is_empty() {
        return Err(McError::Config("bit pattern is empty".into()));
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(McError::Config(format!("bit pattern must be 0s and 1s, got '{other}'"))),
        })
        .collect()
}

fn scheme_times(p: &SystemParams, scheme: Scheme) -> Result<Option<SchemeTimes>> {
    if scheme.needs_bounds() {
        Ok(Some(compute_bounds_min(p, DEFAULT_EPSILON)?))
    } else {
        Ok(None)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let p = load_params(cli)?;
    let mut out = open_out(cli)?;
    match &cli.cmd {
        Cmd::Simulate { scheme, bits, t_end, decimation } => {
            let scheme: Scheme = scheme.parse()?;
            let bits = parse_bits(bits)?;
            let times = scheme_times(&p, scheme)?;
            let led = scheme.signal(&bits, &p, times.as_ref())?;
            let t_end = t_end.unwrap_or(bits.len() as f64 * p.t_bit);
            let traj = integrate(&p, &led, t_end, TxState::initial(&p), *decimation)?;
            write_trajectory_csv(&traj, p.avogadro, &mut out)?;
        }
        Cmd::Times { t_bits, molarities } => {
            let rows = sweep_times(&p, t_bits, molarities, DEFAULT_EPSILON)?;
            write_times_csv(&rows, &mut out)?;
        }
        Cmd::Channel { t_max, points } => {
            if !(*t_max > 0.0) || *points == 0 {
                return Err(McError::Config("channel table needs t_max > 0 and points >= 1".into()));
            }
            let ch = ChannelParams::from_system(&p)?;
            writeln!(out, "t,h,F")?;
            for i in 0..=*points {
                let t = t_max * i as f64 / *points as f64;
                writeln!(
                    out,
                    "{},{},{}",
                    fmt_e12(t),
                    fmt_e12(hitting_density(t, &ch)),
                    fmt_e12(hitting_cdf(t, &ch))
                )?;
            }
        }
        Cmd::Received { scheme, bits, sample_dt } => {
            if !(*sample_dt > 0.0) {
                return Err(McError::Config("sample_dt must be > 0".into()));
            }
            let scheme: Scheme = scheme.parse()?;
            let bits = parse_bits(bits)?;
            let times = scheme_times(&p, scheme)?;
            let led = scheme.signal(&bits, &p, times.as_ref())?;
            let horizon = bits.len() as f64 * p.t_bit;
            let decimation = (mcsim::channel::DEFAULT_AGG_DT / p.dt).round().max(1.0) as usize;
            let traj = integrate(&p, &led, horizon, TxState::initial(&p), decimation)?;
            let ch = ChannelParams::from_system(&p)?;
            let n = (horizon / sample_dt).floor() as usize;
            let sample_times: Vec<f64> = (0..=n).map(|i| i as f64 * sample_dt).collect();
            let r = expected_received(&traj, &ch, &sample_times, p.avogadro)?;
            writeln!(out, "t,r")?;
            for (t, v) in sample_times.iter().zip(&r) {
                writeln!(out, "{},{}", fmt_e12(*t), fmt_e12(*v))?;
            }
        }
        Cmd::Ber { rates, molarities, schemes, pool_threshold } => {
            let mut cfg = if cli.full {
                BerExperimentConfig::full_scale(cli.seed)
            } else {
                BerExperimentConfig::desk_scale(cli.seed)
            };
            if let Some(rates) = rates {
                cfg.rates = rates.clone();
            }
            if let Some(molarities) = molarities {
                cfg.buffer_molarities = molarities.clone();
            }
            if let Some(schemes) = schemes {
                cfg.schemes = schemes
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<Vec<Scheme>>>()?;
            }
            cfg.pool_threshold = *pool_threshold;
            run_ber(&p, &cfg)?.write_csv(&mut out)?;
        }
        Cmd::Figure { kind } => {
            let kind: FigureKind = kind.parse()?;
            emit_figure(kind, &p, cli.seed, cli.full, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        // a closed stdout pipe (e.g. piping into head) is not a failure
        if let McError::Io(io) = &e {
            if io.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
