//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).
//! Reference values are recomputed here with independent implementations
//! where the criterion calls for it, not read back from the library.

use rand::RngCore;

use mcsim::channel::{
    expected_from_pulses, hitting_cdf, hitting_density, sample_arrivals_from_pulses,
    ChannelParams, ReleasePulses,
};
use mcsim::experiment::{run_ber, BerExperimentConfig, Scheme};
use mcsim::modulation::{compute_bounds_max, compute_bounds_min, mem_signal, ook_signal, DEFAULT_EPSILON};
use mcsim::params::{derive, SystemParams};
use mcsim::rng::{mix, stream};
use mcsim::tx::{chin_eq_closed_form_n3, chin_equilibrium, chin_threshold, integrate, TxState};

fn report(name: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("acceptance {name}: PASS");
    } else {
        println!("acceptance {name}: FAIL");
        for f in &failures {
            println!("  - {f}");
        }
        panic!("acceptance {name} failed with {} issue(s)", failures.len());
    }
}

fn check(failures: &mut Vec<String>, ok: bool, msg: String) {
    if !ok {
        failures.push(msg);
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Independent steady-state solver: the net proton flux is rewritten here
/// from scratch and the root is found by plain interval halving on an
/// absolute grid, none of it shared with the library path.
fn reference_equilibrium(p: &SystemParams, led_on: bool) -> f64 {
    let net = |c: f64| {
        let pump = if led_on { p.gamma_p } else { 0.0 };
        let leak = p.gamma_l_h * (c - p.c_h_out_0);
        let cn = c.powi(p.hill_n as i32);
        let sym = p.gamma_sym * (p.c_sm_in_0 / (p.c_sm_in_0 + p.km)) * cn
            / (cn + p.km_h.powi(p.hill_n as i32));
        pump - leak - sym
    };
    let mut lo = 0.0;
    let mut hi = p.c_h_out_0 + p.gamma_p / p.gamma_l_h;
    assert!(net(lo) >= 0.0 && net(hi) <= 0.0, "reference bracket");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if net(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_1_equilibria() {
    let mut failures = Vec::new();
    let p = SystemParams::default();

    let off = chin_equilibrium(&p, false).unwrap();
    let on = chin_equilibrium(&p, true).unwrap();
    let ref_off = reference_equilibrium(&p, false);
    let ref_on = reference_equilibrium(&p, true);
    check(&mut failures, rel(off, ref_off) < 1e-8, format!("dark equilibrium {off:e} vs reference {ref_off:e}"));
    check(&mut failures, rel(on, ref_on) < 1e-8, format!("lit equilibrium {on:e} vs reference {ref_on:e}"));
    // at rest the vesicle sits essentially at the exterior concentration
    check(&mut failures, rel(off, p.c_h_out_0) < 0.02, format!("dark equilibrium {off:e} deviates more than 2% from exterior {:e}", p.c_h_out_0));
    check(&mut failures, on > off, format!("lit equilibrium {on:e} not above dark {off:e}"));

    // the quartic closed form must agree with the numeric root or say that
    // it could not (the published radical expressions do not evaluate to a
    // real admissible root at this operating point, so the fallback flag is
    // the expected honest outcome)
    let cf = chin_eq_closed_form_n3(&p).unwrap();
    check(
        &mut failures,
        cf.fell_back || cf.discrepancy || rel(cf.value, on) < 1e-6,
        format!("closed form {:e} silently disagrees with numeric {on:e}", cf.value),
    );
    check(&mut failures, rel(cf.value, on) < 1e-9, format!("closed-form path returned {:e}, expected the numeric root {on:e}", cf.value));
    report("1/8 equilibria", failures);
}

#[test]
fn criterion_2_activation_threshold() {
    let mut failures = Vec::new();
    let p = SystemParams::default();

    // independent closed form: the inflection-tangent condition reduces to a
    // quadratic in u = (x/K)^n with the smaller positive root
    let n = p.hill_n as f64;
    let u = (2.0 * (n * n - 1.0) - n * (3.0 * (n * n - 1.0)).sqrt()) / ((n + 1.0) * (n + 2.0));
    let x_ref = p.km_h * u.powf(1.0 / n);

    let xi = chin_threshold(p.hill_n, p.km_h).unwrap();
    check(&mut failures, rel(xi, x_ref) < 1e-10, format!("threshold {xi:e} vs analytic {x_ref:e}"));
    // the rounded tabulated value is matched to about a tenth of a percent
    check(&mut failures, rel(xi, 2.014e-3) < 1.1e-3, format!("threshold {xi:e} vs tabulated 2.014e-3"));

    let on = chin_equilibrium(&p, true).unwrap();
    check(&mut failures, p.c_h_in_0 < xi && xi < on, format!("ordering violated: {:e} < {xi:e} < {on:e}", p.c_h_in_0));
    report("2/8 activation threshold", failures);
}

#[test]
fn criterion_3_mass_and_buffer() {
    let mut failures = Vec::new();
    let p = SystemParams::default();
    let bits: Vec<u8> = vec![1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 0];
    let led = ook_signal(&bits, p.t_bit).unwrap();
    let traj = integrate(&p, &led, 20.0, TxState::initial(&p), 100).unwrap();
    let d = derive(&p);
    let s = traj.final_state();
    let total = s.c_sm_in * d.v_in + s.released_sym + s.released_leak;
    let initial = p.c_sm_in_0 * d.v_in;
    check(&mut failures, rel(total, initial) < 1e-6, format!("messenger balance after 20 s: {total:e} vs {initial:e}"));
    check(&mut failures, traj.clamp_events == 0, format!("{} negative-concentration clamps", traj.clamp_events));

    // proton equilibria and the activation threshold ignore buffering: the
    // buffer scales the transient, not the fixed points
    let mut q = p.clone();
    let mut values = Vec::new();
    for c_buf in [0.0, 5.0, 20.0] {
        q.c_buf = c_buf;
        values.push((
            chin_equilibrium(&q, true).unwrap(),
            chin_equilibrium(&q, false).unwrap(),
            chin_threshold(q.hill_n, q.km_h).unwrap(),
        ));
    }
    check(&mut failures, values.windows(2).all(|w| w[0] == w[1]), format!("buffer changed the fixed points: {values:?}"));
    report("3/8 mass conservation and buffer invariance", failures);
}

#[test]
fn criterion_4_switching_time_bounds() {
    let mut failures = Vec::new();
    let base = SystemParams::default();
    for c_buf in [0.0, 20.0] {
        for t_bit in [0.25, 0.5, 1.0, 2.0] {
            let mut p = base.clone();
            p.c_buf = c_buf;
            p.t_bit = t_bit;
            p.t_guard = 0.5 * t_bit;
            let max = compute_bounds_max(&p).unwrap();
            let min = compute_bounds_min(&p, DEFAULT_EPSILON);
            let expect_infeasible = c_buf == 20.0 && t_bit < 1.0;
            match min {
                Err(mcsim::McError::Infeasible(_)) => {
                    check(&mut failures, expect_infeasible, format!("(c_buf {c_buf}, t_bit {t_bit}) unexpectedly infeasible"));
                }
                Err(e) => failures.push(format!("(c_buf {c_buf}, t_bit {t_bit}) failed: {e}")),
                Ok(min) => {
                    check(&mut failures, !expect_infeasible, format!("(c_buf {c_buf}, t_bit {t_bit}) unexpectedly feasible"));
                    check(&mut failures, min.converged, format!("(c_buf {c_buf}, t_bit {t_bit}) did not converge"));
                    check(
                        &mut failures,
                        min.iterations_load <= 100 && min.iterations_deload <= 100,
                        format!("(c_buf {c_buf}, t_bit {t_bit}) iterations {} / {}", min.iterations_load, min.iterations_deload),
                    );
                    // steady-state-aware times never exceed the worst-case
                    // ones beyond the fixed-point tolerance
                    check(
                        &mut failures,
                        min.t_load <= max.t_load + 1e-4 && min.t_deload <= max.t_deload + 1e-4,
                        format!(
                            "(c_buf {c_buf}, t_bit {t_bit}) min bounds ({:e}, {:e}) exceed max bounds ({:e}, {:e})",
                            min.t_load, min.t_deload, max.t_load, max.t_deload
                        ),
                    );
                    check(&mut failures, min.t_load > 0.0 && min.t_load < t_bit && min.t_deload > 0.0 && min.t_deload < t_bit,
                        format!("(c_buf {c_buf}, t_bit {t_bit}) times outside (0, t_bit)"));
                    if c_buf == 20.0 {
                        // worst-case loading spans the full swing from rest
                        // and is the slow leg under heavy buffering
                        check(&mut failures, max.t_deload < max.t_load, format!("(c_buf {c_buf}, t_bit {t_bit}) worst-case deload {:e} not faster than load {:e}", max.t_deload, max.t_load));
                    }
                }
            }
        }
    }
    report("4/8 switching time bounds", failures);
}

#[test]
fn criterion_5_channel_statistics() {
    let mut failures = Vec::new();
    let p = SystemParams::default();
    let ch = ChannelParams::from_system(&p).unwrap();
    let a2 = ch.alpha * ch.alpha;

    // long-time saturation at the hitting probability; the erfc tail decays
    // like 2a/sqrt(pi t), so full convergence needs very long horizons
    check(
        &mut failures,
        rel(hitting_cdf(1e6 * a2, &ch), ch.p_hit_inf) < 1.2e-3,
        format!("F at 1e6 a^2 = {:e}", hitting_cdf(1e6 * a2, &ch)),
    );
    check(
        &mut failures,
        rel(hitting_cdf(1e9 * a2, &ch), ch.p_hit_inf) < 1e-4,
        format!("F at 1e9 a^2 = {:e}", hitting_cdf(1e9 * a2, &ch)),
    );

    // density peaks at 2a^2/3 = 6 ms for the tabulated geometry
    let t_peak = 2.0 * a2 / 3.0;
    check(&mut failures, rel(t_peak, 6.0e-3) < 1e-12, format!("analytic peak {t_peak:e}"));
    let mut best = (0.0, 0.0);
    let mut t = 1e-4;
    while t < 0.05 {
        let h = hitting_density(t, &ch);
        if h > best.1 {
            best = (t, h);
        }
        t += 1e-5;
    }
    check(&mut failures, rel(best.0, 6.0e-3) < 0.01, format!("grid argmax {:e}", best.0));

    // integral of the density reproduces the CDF (Simpson in u = sqrt(t))
    let t_end = 2.0f64;
    let n = 100_000;
    let u_end = t_end.sqrt();
    let du = u_end / n as f64;
    let g = |u: f64| if u <= 0.0 { 0.0 } else { 2.0 * u * hitting_density(u * u, &ch) };
    let mut integral = g(0.0) + g(u_end);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        integral += w * g(i as f64 * du);
    }
    integral *= du / 3.0;
    check(&mut failures, rel(integral, hitting_cdf(t_end, &ch)) < 1e-6, format!("quadrature {integral:e} vs F {:e}", hitting_cdf(t_end, &ch)));

    // Monte-Carlo sampler is unbiased against the analytic expectation
    let pulses = ReleasePulses { times: vec![0.0, 0.3], molecules: vec![400.0, 350.5] };
    let sample_times = [0.5, 1.0, 2.0];
    let expected = expected_from_pulses(&pulses, &ch, &sample_times);
    let n_seeds = 10_000u64;
    let mut sums = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for seed in 0..n_seeds {
        let counts = sample_arrivals_from_pulses(&pulses, &ch, &sample_times, mix(1000, seed)).unwrap();
        for (i, &c) in counts.iter().enumerate() {
            sums[i] += c as f64;
            sq[i] += (c as f64) * (c as f64);
        }
    }
    for i in 0..3 {
        let mean = sums[i] / n_seeds as f64;
        let var = (sq[i] / n_seeds as f64 - mean * mean).max(0.0);
        let se = (var / n_seeds as f64).sqrt();
        check(
            &mut failures,
            (mean - expected[i]).abs() <= 3.0 * se.max(1e-9),
            format!("MC mean {mean:.4} vs expected {:.4} at t {} (3 SE = {:.4})", expected[i], sample_times[i], 3.0 * se),
        );
    }
    report("5/8 channel statistics", failures);
}

#[test]
fn criterion_6_mem_boundary_pinning() {
    let mut failures = Vec::new();
    let mut p = SystemParams::default();
    p.c_buf = 20.0;
    let times = compute_bounds_min(&p, DEFAULT_EPSILON).unwrap();
    let xi = chin_threshold(p.hill_n, p.km_h).unwrap();

    let mut rng = stream(mix(7, 0));
    let bits: Vec<u8> = (0..40).map(|_| (rng.next_u32() & 1) as u8).collect();
    let led = mem_signal(&bits, p.t_bit, &times).unwrap();
    let horizon = bits.len() as f64 * p.t_bit;
    let traj = integrate(&p, &led, horizon, TxState::initial(&p), 100).unwrap();

    let mut pinned = 0usize;
    let interior = bits.len() - 1;
    let mut worst: f64 = 0.0;
    for i in 1..bits.len() {
        let t = i as f64 * p.t_bit;
        let k = traj.grid.partition_point(|&g| g < t - 1e-9).min(traj.grid.len() - 1);
        let c = traj.states[k].c_h_in;
        let err = rel(c, xi);
        worst = worst.max(err);
        if err <= 0.10 {
            pinned += 1;
        }
    }
    let frac = pinned as f64 / interior as f64;
    check(
        &mut failures,
        frac >= 0.90,
        format!("only {pinned}/{interior} boundaries within 10% of the threshold (worst {worst:.3})"),
    );
    report("6/8 MEM boundary pinning", failures);
}

#[test]
fn criterion_7_desk_ber_orderings() {
    let mut failures = Vec::new();
    let p = SystemParams::default();
    let mut cfg = BerExperimentConfig::desk_scale(1);
    cfg.rates = vec![0.25, 0.5, 1.0];
    cfg.buffer_molarities = vec![20.0];
    let report_data = run_ber(&p, &cfg).unwrap();

    let get = |rate: f64, scheme: Scheme| {
        let s = report_data.find(rate, 20.0, scheme).unwrap();
        assert!(s.is_feasible(), "{scheme} at rate {rate} infeasible");
        (s.aggregate_ber.unwrap(), s.ber_standard_error().unwrap())
    };

    // at the fastest rate, dropping ON time (guard interval) costs errors
    // and pinning boundaries to the threshold (MAM) saves them
    let (ook, se_ook) = get(1.0, Scheme::Ook);
    let (gi, se_gi) = get(1.0, Scheme::OokGi);
    let (mam, se_mam) = get(1.0, Scheme::Mam);
    let se_pair = |a: f64, b: f64| (a * a + b * b).sqrt();
    check(
        &mut failures,
        gi - ook > 2.0 * se_pair(se_ook, se_gi),
        format!("OOK-GI {gi:.4} not above OOK {ook:.4} by 2 SE ({:.4})", se_pair(se_ook, se_gi)),
    );
    check(
        &mut failures,
        ook - mam > 2.0 * se_pair(se_ook, se_mam),
        format!("MAM {mam:.4} not below OOK {ook:.4} by 2 SE ({:.4})", se_pair(se_ook, se_mam)),
    );

    // faster signaling never helps: BER is nondecreasing in rate up to noise
    for scheme in Scheme::ALL {
        let mut prev: Option<(f64, f64)> = None;
        for &rate in &cfg.rates {
            let (ber, se) = get(rate, scheme);
            if let Some((pber, pse)) = prev {
                check(
                    &mut failures,
                    ber >= pber - 2.0 * se_pair(se, pse),
                    format!("{scheme}: BER {ber:.4} at rate {rate} drops below {pber:.4} at the slower rate"),
                );
            }
            prev = Some((ber, se));
        }
    }
    report("7/8 desk-scale BER orderings", failures);
}

#[test]
fn criterion_8_determinism() {
    let mut failures = Vec::new();
    let p = SystemParams::default();
    let cfg = BerExperimentConfig {
        rates: vec![2.0],
        buffer_molarities: vec![0.0],
        schemes: vec![Scheme::Ook, Scheme::Mem],
        n_sequences: 4,
        seq_length: 12,
        n_realizations_total: 80,
        master_seed: 9,
        pool_threshold: false,
        epsilon: DEFAULT_EPSILON,
        agg_dt: 1e-3,
    };
    let csv = |r: &mcsim::experiment::BerReport| {
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        buf
    };
    let a = csv(&run_ber(&p, &cfg).unwrap());
    let b = csv(&run_ber(&p, &cfg).unwrap());
    check(&mut failures, a == b, "repeated runs differ".into());

    for threads in [1usize, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let c = pool.install(|| csv(&run_ber(&p, &cfg).unwrap()));
        check(&mut failures, a == c, format!("{threads}-thread run differs"));
    }
    check(&mut failures, !a.is_empty(), "empty report".into());
    report("8/8 determinism", failures);
}
