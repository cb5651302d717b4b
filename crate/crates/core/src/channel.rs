//! First-passage diffusive channel: point source to a fully absorbing
//! sphere. Converts release trajectories into expected cumulative arrivals
//! and samples stochastic arrival realizations.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{McError, Result};
use crate::params::{derive, SystemParams};
use crate::rng::stream;
use crate::tx::TxTrajectory;

/// Release-increment aggregation grid [s]; keeps the superposition sum and
/// the per-realization draw count bounded.
pub const DEFAULT_AGG_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// (d − r_rx)/√(4·D_SM) [s^½].
    pub alpha: f64,
    /// Asymptotic hitting probability r_rx/d.
    pub p_hit_inf: f64,
}

impl ChannelParams {
    pub fn new(alpha: f64, p_hit_inf: f64) -> Result<ChannelParams> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(McError::Validation(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(p_hit_inf > 0.0 && p_hit_inf < 1.0) {
            return Err(McError::Validation(format!(
                "p_hit_inf must lie in (0, 1), got {p_hit_inf}"
            )));
        }
        Ok(ChannelParams { alpha, p_hit_inf })
    }

    pub fn from_system(p: &SystemParams) -> Result<ChannelParams> {
        let d = derive(p);
        ChannelParams::new(d.alpha, d.p_hit_inf)
    }
}

/// Hitting-probability CDF F(t) = p_hit_inf · erfc(alpha/√t); F(0) = 0.
pub fn hitting_cdf(t: f64, ch: &ChannelParams) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    ch.p_hit_inf * erfc(ch.alpha / t.sqrt())
}

/// First-passage density h(t) = dF/dt = p_hit_inf·alpha·t^(−3/2)·e^(−alpha²/t)/√π,
/// with h(0) = 0 by continuity.
pub fn hitting_density(t: f64, ch: &ChannelParams) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    ch.p_hit_inf * ch.alpha * t.powf(-1.5) * (-ch.alpha * ch.alpha / t).exp()
        / std::f64::consts::PI.sqrt()
}

/// Aggregated instantaneous release: `molecules[k]` (possibly fractional)
/// leave the transmitter at `times[k]`.
#[derive(Debug, Clone, Default)]
pub struct ReleasePulses {
    pub times: Vec<f64>,
    pub molecules: Vec<f64>,
}

impl ReleasePulses {
    pub fn total(&self) -> f64 {
        self.molecules.iter().sum()
    }
}

/// Collapses a trajectory's cumulative release (symporter + leakage, in
/// moles) into molecule pulses on the aggregation grid, stamped on the right
/// edge of each bin. Zero-increment bins produce no pulse, so downstream
/// draw sequences skip them deterministically.
pub fn aggregate_release(traj: &TxTrajectory, avogadro: f64, agg_dt: f64) -> Result<ReleasePulses> {
    if !(agg_dt.is_finite() && agg_dt > 0.0) {
        return Err(McError::Validation(format!(
            "aggregation step must be positive, got {agg_dt}"
        )));
    }
    let grid = &traj.grid;
    let t0 = grid[0];
    let t_last = *grid.last().expect("trajectory is never empty");
    let cumulative =
        |i: usize| (traj.states[i].released_sym + traj.states[i].released_leak) * avogadro;
    let tol = 1e-6 * agg_dt;

    let mut pulses = ReleasePulses::default();
    let mut last_emitted = cumulative(0);
    let mut i = 0usize;
    let mut j = 1u64;
    loop {
        let tau = t0 + j as f64 * agg_dt;
        if tau > t_last + tol {
            break;
        }
        while i + 1 < grid.len() && grid[i + 1] <= tau + tol {
            i += 1;
        }
        let m = cumulative(i);
        let dm = m - last_emitted;
        if dm > 0.0 {
            pulses.times.push(tau);
            pulses.molecules.push(dm);
            last_emitted = m;
        }
        j += 1;
    }
    // remainder of a partial trailing bin
    let m_end = cumulative(grid.len() - 1);
    if m_end - last_emitted > 0.0 {
        pulses.times.push(t_last);
        pulses.molecules.push(m_end - last_emitted);
    }
    Ok(pulses)
}

/// Expected cumulative arrivals at each sample time for a pulse train:
/// r(t) = Σ_k ΔN_k · F(t − τ_k).
pub fn expected_from_pulses(pulses: &ReleasePulses, ch: &ChannelParams, sample_times: &[f64]) -> Vec<f64> {
    sample_times
        .iter()
        .map(|&t| {
            pulses
                .times
                .iter()
                .zip(&pulses.molecules)
                .take_while(|&(&tau, _)| tau < t)
                .map(|(&tau, &m)| m * hitting_cdf(t - tau, ch))
                // fold from +0.0: an empty f64 Sum yields -0.0
                .fold(0.0, |acc, x| acc + x)
        })
        .collect()
}

fn check_sample_times(traj: &TxTrajectory, sample_times: &[f64]) -> Result<()> {
    let t_last = *traj.grid.last().expect("trajectory is never empty");
    for &t in sample_times {
        if !t.is_finite() || t < 0.0 || t > t_last * (1.0 + 1e-12) + 1e-12 {
            return Err(McError::Range(format!(
                "sample time {t} outside the trajectory horizon [0, {t_last}]"
            )));
        }
    }
    Ok(())
}

/// Expected cumulative received signal of a transmitter trajectory, using
/// the default aggregation grid.
pub fn expected_received(
    traj: &TxTrajectory,
    ch: &ChannelParams,
    sample_times: &[f64],
    avogadro: f64,
) -> Result<Vec<f64>> {
    check_sample_times(traj, sample_times)?;
    let pulses = aggregate_release(traj, avogadro, DEFAULT_AGG_DT)?;
    Ok(expected_from_pulses(&pulses, ch, sample_times))
}

/// One stochastic realization of cumulative arrival counts for a pulse
/// train. Per pulse: fractional molecules are resolved by stochastic
/// rounding, hits are Binomial(n, p_hit_inf), and each hit's arrival time is
/// drawn by inverting the conditional first-passage CDF. The expectation
/// over realizations equals `expected_from_pulses` exactly.
pub fn sample_arrivals_from_pulses(
    pulses: &ReleasePulses,
    ch: &ChannelParams,
    sample_times: &[f64],
    seed: u64,
) -> Result<Vec<u64>> {
    for w in sample_times.windows(2) {
        if w[1] <= w[0] {
            return Err(McError::Validation(format!(
                "sample times must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let mut rng = stream(seed);
    let mut bins = vec![0u64; sample_times.len() + 1];
    for (&tau, &m) in pulses.times.iter().zip(&pulses.molecules) {
        let floor = m.floor();
        let frac = m - floor;
        let mut n = floor as u64;
        if frac > 0.0 && rng.random::<f64>() < frac {
            n += 1;
        }
        if n == 0 {
            continue;
        }
        let hits = Binomial::new(n, ch.p_hit_inf)
            .map_err(|e| McError::Validation(format!("binomial draw: {e}")))?
            .sample(&mut rng);
        for _ in 0..hits {
            let v: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let z = erfc_inv(v);
            let arrival = tau + ch.alpha * ch.alpha / (z * z);
            let idx = sample_times.partition_point(|&s| s < arrival);
            bins[idx] += 1; // idx == len: arrival after the last sample time
        }
    }
    let mut counts = Vec::with_capacity(sample_times.len());
    let mut acc = 0u64;
    for &b in bins.iter().take(sample_times.len()) {
        acc += b;
        counts.push(acc);
    }
    Ok(counts)
}

/// Stochastic arrivals for a transmitter trajectory (see
/// [`sample_arrivals_from_pulses`]).
pub fn sample_arrivals(
    traj: &TxTrajectory,
    ch: &ChannelParams,
    sample_times: &[f64],
    seed: u64,
    avogadro: f64,
) -> Result<Vec<u64>> {
    check_sample_times(traj, sample_times)?;
    let pulses = aggregate_release(traj, avogadro, DEFAULT_AGG_DT)?;
    sample_arrivals_from_pulses(&pulses, ch, sample_times, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::LedSignal;
    use crate::params::SystemParams;
    use crate::tx::{integrate, TxState};
    use approx::assert_relative_eq;

    fn ch() -> ChannelParams {
        ChannelParams::from_system(&SystemParams::default()).unwrap()
    }

    #[test]
    fn channel_constants() {
        let c = ch();
        assert_relative_eq!(c.alpha, 0.09486832980505137, max_relative = 1e-12);
        assert_eq!(c.p_hit_inf, 0.1);
        assert!(ChannelParams::new(0.0, 0.1).is_err());
        assert!(ChannelParams::new(1.0, 1.0).is_err());
    }

    #[test]
    fn cdf_values() {
        let c = ch();
        assert_eq!(hitting_cdf(0.0, &c), 0.0);
        assert_relative_eq!(hitting_cdf(1.0, &c), 0.08932728301422119, max_relative = 1e-12);
        // long-time limit approached from below
        let f6 = hitting_cdf(1e6 * c.alpha * c.alpha, &c);
        assert!((f6 - 0.1).abs() / 0.1 <= 1.2e-3);
        let f9 = hitting_cdf(1e9 * c.alpha * c.alpha, &c);
        assert!((f9 - 0.1).abs() / 0.1 <= 1e-4);
        // monotone
        let mut prev = 0.0;
        for k in 1..100 {
            let f = hitting_cdf(k as f64 * 0.01, &c);
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn density_peak_and_positivity() {
        let c = ch();
        assert_eq!(hitting_density(0.0, &c), 0.0);
        let t_star = 2.0 / 3.0 * c.alpha * c.alpha;
        assert_relative_eq!(t_star, 6.0e-3, max_relative = 1e-12);
        // numeric argmax on a fine grid sits at the analytic peak
        let mut best_t = 0.0;
        let mut best_h = 0.0;
        let mut t = 1e-4;
        while t < 0.05 {
            let h = hitting_density(t, &c);
            assert!(h >= 0.0);
            if h > best_h {
                best_h = h;
                best_t = t;
            }
            t += 1e-5;
        }
        assert!((best_t - t_star).abs() <= 0.01 * t_star, "argmax {best_t}");
        assert!(hitting_density(t_star, &c) > hitting_density(t_star * 0.8, &c));
        assert!(hitting_density(t_star, &c) > hitting_density(t_star * 1.25, &c));
    }

    #[test]
    fn density_quadrature_matches_cdf() {
        // substitute t = u²: ∫h dt = ∫ 2u·h(u²) du, a smooth bounded integrand
        let c = ch();
        let t_end = 50.0f64;
        let u_end = t_end.sqrt();
        let n = 200_000usize;
        let du = u_end / n as f64;
        let g = |u: f64| {
            if u <= 0.0 {
                0.0
            } else {
                2.0 * u * hitting_density(u * u, &c)
            }
        };
        // Simpson rule
        let mut sum = g(0.0) + g(u_end);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * g(k as f64 * du);
        }
        let integral = sum * du / 3.0;
        assert_relative_eq!(integral, hitting_cdf(t_end, &c), max_relative = 1e-6);
    }

    fn release_traj() -> (SystemParams, TxTrajectory) {
        let p = SystemParams::default();
        let led = LedSignal::constant(1, 2.0).unwrap();
        let traj = integrate(&p, &led, 2.0, TxState::initial(&p), 100).unwrap();
        (p, traj)
    }

    #[test]
    fn aggregation_preserves_totals_and_order() {
        let (p, traj) = release_traj();
        let pulses = aggregate_release(&traj, p.avogadro, DEFAULT_AGG_DT).unwrap();
        let end = traj.final_state();
        let total = (end.released_sym + end.released_leak) * p.avogadro;
        assert_relative_eq!(pulses.total(), total, max_relative = 1e-9);
        for w in pulses.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(pulses.molecules.iter().all(|&m| m > 0.0));
        // right-edge stamps on the aggregation grid
        assert_relative_eq!(pulses.times[0], DEFAULT_AGG_DT, max_relative = 1e-9);
    }

    #[test]
    fn aggregation_coarse_grid() {
        let (p, traj) = release_traj();
        let fine = aggregate_release(&traj, p.avogadro, DEFAULT_AGG_DT).unwrap();
        let coarse = aggregate_release(&traj, p.avogadro, 0.25).unwrap();
        assert_relative_eq!(fine.total(), coarse.total(), max_relative = 1e-9);
        assert!(coarse.times.len() <= 8 + 1);
    }

    #[test]
    fn expected_received_single_impulse() {
        let c = ch();
        let pulses = ReleasePulses {
            times: vec![0.5],
            molecules: vec![250.0],
        };
        let r = expected_from_pulses(&pulses, &c, &[0.25, 0.5, 1.5, 3.5]);
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], 0.0, "pulse at the sample time has not arrived yet");
        assert_relative_eq!(r[2], 250.0 * hitting_cdf(1.0, &c), max_relative = 1e-12);
        assert_relative_eq!(r[3], 250.0 * hitting_cdf(3.0, &c), max_relative = 1e-12);
    }

    #[test]
    fn expected_received_superposition_and_monotonicity() {
        let c = ch();
        let a = ReleasePulses {
            times: vec![0.1, 0.4],
            molecules: vec![100.0, 50.0],
        };
        let b = ReleasePulses {
            times: vec![0.2],
            molecules: vec![75.0],
        };
        let both = ReleasePulses {
            times: vec![0.1, 0.2, 0.4],
            molecules: vec![100.0, 75.0, 50.0],
        };
        let ts: Vec<f64> = (1..40).map(|k| k as f64 * 0.1).collect();
        let ra = expected_from_pulses(&a, &c, &ts);
        let rb = expected_from_pulses(&b, &c, &ts);
        let rc = expected_from_pulses(&both, &c, &ts);
        for i in 0..ts.len() {
            assert_relative_eq!(rc[i], ra[i] + rb[i], max_relative = 1e-12);
            if i > 0 {
                assert!(rc[i] >= rc[i - 1]);
            }
        }
        // bounded by p_hit_inf × total released
        assert!(*rc.last().unwrap() <= c.p_hit_inf * both.total());
    }

    #[test]
    fn long_horizon_limit() {
        let c = ch();
        let pulses = ReleasePulses {
            times: vec![0.0],
            molecules: vec![1.0],
        };
        let t_end = 1e4 * c.alpha * c.alpha;
        let r = expected_from_pulses(&pulses, &c, &[t_end]);
        // erfc leaves a 2α/√(πt) ≈ 1.13e-2 relative gap at this horizon
        assert!((r[0] - c.p_hit_inf).abs() / c.p_hit_inf <= 1.2e-2);
    }

    #[test]
    fn sample_times_outside_horizon_error() {
        let (p, traj) = release_traj();
        let c = ch();
        let err = expected_received(&traj, &c, &[2.5], p.avogadro).unwrap_err();
        assert!(matches!(err, McError::Range(_)), "{err:?}");
    }

    #[test]
    fn sampling_is_deterministic_and_monotone() {
        let (p, traj) = release_traj();
        let c = ch();
        let ts = [0.5, 1.0, 1.5, 2.0];
        let a = sample_arrivals(&traj, &c, &ts, 42, p.avogadro).unwrap();
        let b = sample_arrivals(&traj, &c, &ts, 42, p.avogadro).unwrap();
        assert_eq!(a, b);
        let other = sample_arrivals(&traj, &c, &ts, 43, p.avogadro).unwrap();
        assert_ne!(a, other, "different seeds should differ at these counts");
        for w in a.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn zero_release_samples_to_zero() {
        let c = ch();
        let pulses = ReleasePulses::default();
        let counts = sample_arrivals_from_pulses(&pulses, &c, &[1.0, 2.0], 7).unwrap();
        assert_eq!(counts, vec![0, 0]);
    }

    #[test]
    fn sampling_mean_matches_expectation() {
        let c = ch();
        let pulses = ReleasePulses {
            times: vec![0.0, 0.3],
            molecules: vec![400.0, 350.5],
        };
        let ts = [0.5, 2.0];
        let expect = expected_from_pulses(&pulses, &c, &ts);
        let n = 3000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for seed in 0..n {
            let counts = sample_arrivals_from_pulses(&pulses, &c, &ts, seed as u64).unwrap();
            let x = counts[1] as f64;
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - expect[1]).abs() <= 3.0 * se,
            "mean {mean} vs expectation {} (se {se})",
            expect[1]
        );
    }
}
