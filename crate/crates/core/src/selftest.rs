//! Property checks that can run against any configuration.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::required_average_snr_uncoded;
use crate::codes::FixedRateCode;
use crate::config::ExperimentConfig;
use crate::energy::{
    bch_decoder_energy, crossover_distance, total_energy, transmit_energy_per_symbol, ModulationConfig,
};
use crate::error::Result;
use crate::lt::{degree_stats, encode_block, BipartiteGraph, TernaryDecoder};
use crate::montecarlo::{lt_rate_pmf, rate_vs_crossover_profile, RateProfile};
use crate::optimizer::{optimize_scheme_at_distance, Scheme};
use crate::rng::{stream, Lane};
use crate::units::db_to_linear;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn breakdown_sums(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let (sys, ch) = (cfg.system_params(), cfg.channel_spec());
    let mut worst: f64 = 0.0;
    let mut negative = 0;
    for _ in 0..500 {
        let m = 1u32 << rng.gen_range(1..=6);
        let modc = ModulationConfig::new(m, &sys)?;
        let d = 10f64.powf(rng.gen_range(-1.0..2.5));
        let rate = rng.gen_range(0.1..=1.0);
        let gain = db_to_linear(rng.gen_range(-5.0..30.0));
        let dec = rng.gen_range(0.0..1e-6);
        let e = total_energy(&sys, &modc, &ch, d, 1e-3, rate, gain, dec)?;
        let parts = [e.radiated, e.tx_circuit, e.rx_circuit, e.transient, e.decoder];
        negative += parts.iter().filter(|&&x| x < 0.0).count();
        worst = worst.max(rel(parts.iter().sum(), e.total));
    }
    Ok(outcome(
        "energy breakdown sums to total",
        worst <= 1e-12 && negative == 0,
        format!("max relative error {worst:.1e}, negative parts {negative}"),
    ))
}

fn radiated_scaling(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let (sys, ch) = (cfg.system_params(), cfg.channel_spec());
    let mut worst: f64 = 0.0;
    let mut circuit_moved = false;
    for _ in 0..200 {
        let m = 1u32 << rng.gen_range(1..=6);
        let modc = ModulationConfig::new(m, &sys)?;
        let d = 10f64.powf(rng.gen_range(-1.0..2.0));
        let a = total_energy(&sys, &modc, &ch, d, 1e-3, 0.5, 2.0, 0.0)?;
        let b = total_energy(&sys, &modc, &ch, 2.0 * d, 1e-3, 0.5, 2.0, 0.0)?;
        worst = worst.max(rel(b.radiated, a.radiated * 2f64.powf(ch.eta)));
        circuit_moved |= a.tx_circuit != b.tx_circuit || a.rx_circuit != b.rx_circuit || a.transient != b.transient;
    }
    Ok(outcome(
        "radiated energy scales as d^eta",
        worst <= 1e-12 && !circuit_moved,
        format!("max relative error {worst:.1e}"),
    ))
}

fn per_symbol_monotone(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let (sys, ch) = (cfg.system_params(), cfg.channel_spec());
    let mut ok = true;
    for m in [2u32, 4, 8, 16, 32, 64] {
        let modc = ModulationConfig::new(m, &sys)?;
        let mut last = f64::INFINITY;
        for pb in [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1] {
            let e = transmit_energy_per_symbol(&modc, pb, 1e9, &ch, &sys)?;
            ok &= e < last;
            last = e;
        }
        let near = transmit_energy_per_symbol(&modc, 1e-3, 1e9, &ch, &sys)?;
        let far = transmit_energy_per_symbol(&modc, 1e-3, 2e9, &ch, &sys)?;
        ok &= far > near;
    }
    Ok(outcome("per-symbol energy monotone in BER and path loss", ok, String::new()))
}

fn degenerate_code(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let ctx = cfg.link_context();
    let ident = Scheme::fixed_rate("identity", vec![FixedRateCode::identity(&[ctx.target_ber])]);
    let mut same = true;
    for d in [0.3, 1.0, 7.0, 40.0, 120.0, 200.0] {
        let u = optimize_scheme_at_distance(d, &Scheme::uncoded(), &ctx)?;
        let c = optimize_scheme_at_distance(d, &ident, &ctx)?;
        same &= u.m == c.m && u.energy == c.energy;
    }
    Ok(outcome("rate-1, 0 dB code equals uncoded", same, String::new()))
}

fn closed_form_crossovers(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let ctx = cfg.link_context();
    let (sys, ch) = (&ctx.sys, &ctx.ch);
    let mut checked = 0;
    let mut bad = Vec::new();
    for code in &cfg.codes {
        for m in [2u32, 4, 8, 16, 32, 64] {
            let Ok(gain_db) = code.gain_db(m, ctx.target_ber) else { continue };
            let gain = db_to_linear(gain_db);
            if gain * code.rate <= 1.0 {
                continue;
            }
            let modc = ModulationConfig::new(m, sys)?;
            let d = crossover_distance(sys, &modc, ch, ctx.target_ber, code.rate, gain)?;
            let diff = |x: f64| -> Result<f64> {
                Ok(total_energy(sys, &modc, ch, x, ctx.target_ber, code.rate, gain, 0.0)?.total
                    - total_energy(sys, &modc, ch, x, ctx.target_ber, 1.0, 1.0, 0.0)?.total)
            };
            checked += 1;
            if !(diff(0.9 * d)? > 0.0 && diff(1.1 * d)? < 0.0) {
                bad.push(format!("{}@M={m}", code.name));
            }
        }
    }
    Ok(outcome(
        "closed-form crossover is a sign change",
        bad.is_empty() && checked > 0,
        format!("{checked} (code, M) pairs, failures {bad:?}"),
    ))
}

fn bch_negligible(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let ctx = cfg.link_context();
    let mut worst: f64 = 0.0;
    for code in &cfg.codes {
        let Some(p) = code.bch else { continue };
        let dec = bch_decoder_energy(p.n, p.k, p.t, ctx.sys.payload_bits, ctx.e_add, ctx.e_mult)?;
        let modc = ModulationConfig::new(2, &ctx.sys)?;
        let e = total_energy(&ctx.sys, &modc, &ctx.ch, 1.0, ctx.target_ber, code.rate, 1.0, 0.0)?;
        worst = worst.max(dec / (e.tx_circuit + e.rx_circuit));
    }
    Ok(outcome(
        "BCH decoder energy negligible against circuit energy",
        worst < 1e-3,
        format!("largest ratio {worst:.2e}"),
    ))
}

fn encoder_determinism(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let sc = cfg.session_config();
    let mut rng = stream(cfg.seed, 0, Lane::Selftest);
    let msg: Vec<u8> = (0..sc.k).map(|_| rng.gen_range(0..2)).collect();
    let a: Vec<u8> = encode_block(&msg, &sc.dist, 99).take(10_000).map(|c| c.bit).collect();
    let b: Vec<u8> = encode_block(&msg, &sc.dist, 99).take(10_000).map(|c| c.bit).collect();
    let mut graphs_match = true;
    let mut identity_holds = true;
    for seed in 0..100u64 {
        let n = sc.k + (seed as usize * 7) % sc.k;
        let mut from_encoder = BipartiteGraph::new(sc.k);
        for c in encode_block(&msg, &sc.dist, seed).take(n) {
            from_encoder.push(&c.neighbors);
        }
        let rebuilt = BipartiteGraph::from_seed(&sc.dist, sc.k, n, seed);
        graphs_match &= from_encoder == rebuilt;
        let r = degree_stats(&sc.dist, Some(&rebuilt))
            .realized
            .expect("graph given");
        let degree_sum: usize = (0..n).map(|j| rebuilt.neighbors(j).len()).sum();
        identity_holds &= r.edges == degree_sum as u64
            && (r.k as f64 * r.i_ave - r.edges as f64).abs() < 1e-9
            && (r.n as f64 * r.o_ave - r.edges as f64).abs() < 1e-9;
    }
    Ok(outcome(
        "encoder determinism and graph reconstruction",
        a == b && graphs_match && identity_holds,
        "10^4 bits twice, 100 seeds rebuilt".into(),
    ))
}

/// Block success counts on a `(p, n)` grid, with every cell of a trial
/// sharing message, graph prefix and noise draws.
pub fn decoder_success_grid(
    cfg: &ExperimentConfig,
    ps: &[f64],
    rates: &[f64],
    trials: usize,
) -> Result<Vec<Vec<usize>>> {
    let sc = cfg.session_config();
    let ns: Vec<usize> = rates.iter().map(|&r| sc.bits_for_rate(r)).collect();
    let n_max = *ns.iter().max().unwrap_or(&0);
    let mut success = vec![vec![0usize; ns.len()]; ps.len()];
    let mut decoder = TernaryDecoder::new();
    for t in 0..trials as u64 {
        let mut mrng = stream(cfg.seed, t, Lane::Message);
        let msg: Vec<u8> = (0..sc.k).map(|_| mrng.gen_range(0..2)).collect();
        let full = BipartiteGraph::from_seed(&sc.dist, sc.k, n_max, crate::rng::derived_seed(cfg.seed, t, Lane::Graph));
        let clean = full.encode(&msg);
        let mut nrng = stream(cfg.seed, t, Lane::Noise);
        let u: Vec<f64> = (0..n_max).map(|_| nrng.gen()).collect();
        for (pi, &p) in ps.iter().enumerate() {
            let rx: Vec<u8> = clean.iter().zip(&u).map(|(&b, &x)| b ^ (x < p) as u8).collect();
            for (ni, &n) in ns.iter().enumerate() {
                let g = full.prefix(n);
                let out = decoder.decode(&rx[..n], &g, p, sc.max_iters)?;
                success[pi][ni] += (out.bits.as_deref() == Some(&msg[..])) as usize;
            }
        }
    }
    Ok(success)
}

/// Allowed excess of one Monte Carlo success fraction over another that
/// should dominate it: three binomial standard errors, at least one trial.
pub fn mc_slack(fraction: f64, trials: usize) -> f64 {
    let n = trials as f64;
    (3.0 * (fraction * (1.0 - fraction) / n).sqrt()).max(1.0 / n)
}

fn exceeds(worse: usize, better: usize, trials: usize) -> bool {
    let (w, b) = (worse as f64 / trials as f64, better as f64 / trials as f64);
    w - b > mc_slack(w.max(b), trials) + 1e-12
}

fn decoder_monotone(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let ps = [0.0, 0.005, 0.01, 0.02, 0.04];
    let rates = [0.95, 0.85, 0.75, 0.65, 0.55];
    let trials = 200;
    let grid = decoder_success_grid(cfg, &ps, &rates, trials)?;
    let mut violations = Vec::new();
    for pi in 0..ps.len() {
        for ni in 0..rates.len() {
            if pi + 1 < ps.len() && exceeds(grid[pi + 1][ni], grid[pi][ni], trials) {
                violations.push(format!("p {}->{} at R={}", ps[pi], ps[pi + 1], rates[ni]));
            }
            if ni + 1 < rates.len() && exceeds(grid[pi][ni], grid[pi][ni + 1], trials) {
                violations.push(format!("R {}->{} at p={}", rates[ni], rates[ni + 1], ps[pi]));
            }
        }
    }
    Ok(outcome(
        "decode success monotone in p and n within Monte Carlo error",
        violations.is_empty(),
        format!("successes/{trials}: {grid:?}; violations {violations:?}"),
    ))
}

/// The profile used by the pmf checks: few trials, coarse grid.
pub fn small_profile(cfg: &ExperimentConfig) -> Result<RateProfile> {
    let ps = [0.0, 1e-4, 1e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.49];
    rate_vs_crossover_profile(&cfg.session_config(), &ps, 100, cfg.seed)
}

fn profile_properties(profile: &RateProfile) -> CheckOutcome {
    let mut bad = Vec::new();
    for idx in 1..profile.p_grid.len() {
        let (a, b) = (profile.success_cdf(idx - 1), profile.success_cdf(idx));
        let n = profile.trials;
        if a.iter().zip(&b).any(|(x, y)| y - x > mc_slack(x.max(*y), n) + 1e-12) {
            bad.push(profile.p_grid[idx]);
        }
    }
    let achievable = profile.counts.iter().all(|c| c.len() == profile.bins());
    outcome(
        "profile columns stochastically ordered in p within Monte Carlo error",
        bad.is_empty() && achievable,
        format!("columns out of order at p = {bad:?}"),
    )
}

fn pmf_properties(cfg: &ExperimentConfig, profile: &RateProfile) -> Result<Vec<CheckOutcome>> {
    let q = cfg.quadrature();
    let mut worst_norm: f64 = 0.0;
    let mut negative = false;
    let mut dominance = Vec::new();
    let mut rate_not_rising = Vec::new();
    for snr in [6.0, 10.0, 16.0, 20.0, 26.0] {
        let mut prev: Option<Vec<f64>> = None;
        for m in [2u32, 4, 8, 16, 32, 64] {
            let pmf = lt_rate_pmf(snr, m, profile, &q)?;
            worst_norm = worst_norm.max((pmf.mass.iter().sum::<f64>() - 1.0).abs());
            negative |= pmf.mass.iter().any(|&x| x < 0.0);
            let mut acc = 0.0;
            let cdf: Vec<f64> = pmf.mass.iter().map(|x| {
                acc += x;
                acc
            }).collect();
            if let Some(p) = &prev {
                if cdf.iter().zip(p).any(|(c, pc)| *c > pc + 1e-12) {
                    dominance.push(format!("M={m} @ {snr} dB"));
                }
            }
            prev = Some(cdf);
        }
    }
    for m in [2u32, 8, 64] {
        let mut last = -1.0;
        for snr in (0..=40).step_by(2) {
            let r = lt_rate_pmf(snr as f64, m, profile, &q)?.average_rate();
            if r <= last {
                rate_not_rising.push(format!("M={m} @ {snr} dB"));
            }
            last = r;
        }
    }
    Ok(vec![
        outcome(
            "rate pmf normalised",
            worst_norm <= 1e-9 && !negative,
            format!("max |sum - 1| = {worst_norm:.1e}"),
        ),
        outcome(
            "larger M shifts rate mass down",
            dominance.is_empty(),
            format!("violations {dominance:?}"),
        ),
        outcome(
            "average LT rate rises with SNR",
            rate_not_rising.is_empty(),
            format!("violations {rate_not_rising:?}"),
        ),
    ])
}

fn required_snr_closed_form() -> Result<CheckOutcome> {
    let v = required_average_snr_uncoded(2, 1e-3)?;
    Ok(outcome(
        "binary required SNR equals 1/P_b - 2",
        (v - 998.0).abs() < 1e-9,
        format!("{v}"),
    ))
}

/// Runs every check. `profile` defaults to [`small_profile`].
pub fn run_selftest(cfg: &ExperimentConfig, profile: Option<&RateProfile>) -> Result<Vec<CheckOutcome>> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = vec![
        breakdown_sums(cfg, &mut rng)?,
        radiated_scaling(cfg, &mut rng)?,
        per_symbol_monotone(cfg)?,
        degenerate_code(cfg)?,
        closed_form_crossovers(cfg)?,
        bch_negligible(cfg)?,
        required_snr_closed_form()?,
        encoder_determinism(cfg)?,
        decoder_monotone(cfg)?,
    ];
    let owned;
    let profile = match profile {
        Some(p) => p,
        None => {
            owned = small_profile(cfg)?;
            &owned
        }
    };
    out.push(profile_properties(profile));
    out.extend(pmf_properties(cfg, profile)?);
    log::info!("selftest finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(out)
}
