//! Monte Carlo estimates of the LT rate distribution.
//!
//! The expensive part, a table of session outcomes against BSC crossover
//! probability, does not depend on the constellation. Fading and the
//! modulation only enter when a crossover probability is assigned to each
//! SNR, so one profile serves every `(M, average SNR)` pair.

use std::fmt::Write as _;
use std::io::BufRead;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{crossover_for_snr, required_average_snr_uncoded};
use crate::error::{domain, invalid, Error, Result};
use crate::lt::{run_session, SessionConfig};
use crate::rng::{derived_seed, stream, Lane};
use crate::units::{db_to_linear, linear_to_db};
use rand::Rng;

/// `0` followed by `points` log-spaced values from `lo` to `hi`.
pub fn default_p_grid(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    if points == 1 {
        grid.push(lo);
    } else {
        let (a, b) = (lo.ln(), hi.ln());
        grid.extend((0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()));
    }
    grid
}

/// Session outcome counts per crossover probability.
///
/// Bin `i < rate_grid.len()` counts sessions that stopped at
/// `rate_grid[i]`; the last bin counts failures.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    pub p_grid: Vec<f64>,
    pub rate_grid: Vec<f64>,
    pub trials: usize,
    pub counts: Vec<Vec<u32>>,
}

/// Bumped whenever a decoder change alters session outcomes, so stale
/// caches are rebuilt.
pub const DECODER_REVISION: u32 = 2;

/// Identifies what a cached profile was computed from.
pub fn profile_key(cfg: &SessionConfig, p_grid: &[f64], trials: usize, seed: u64) -> String {
    let mut key = format!(
        "decoder={} k={} batch={} max_iters={} trials={} seed={} dist=",
        DECODER_REVISION,
        cfg.k, cfg.batch, cfg.max_iters, trials, seed
    );
    for (d, p) in cfg.dist.entries() {
        let _ = write!(key, "{d}:{p:e};");
    }
    key.push_str(" rates=");
    for r in &cfg.rate_grid {
        let _ = write!(key, "{r:e};");
    }
    key.push_str(" p=");
    for p in p_grid {
        let _ = write!(key, "{p:e};");
    }
    key
}

/// Runs `trials` sessions at every crossover probability in `p_grid`.
///
/// Trial `t` draws its message, graph seed and noise stream from `seed`
/// alone and reuses them at every `p`, so a coded bit flips at `p` only if
/// it also flips at every larger `p`. Trials run in parallel; the result
/// does not depend on the thread count.
pub fn rate_vs_crossover_profile(
    cfg: &SessionConfig,
    p_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<RateProfile> {
    cfg.validate()?;
    if trials < 100 {
        return Err(invalid("lt.trials", "need at least 100 trials"));
    }
    if p_grid.is_empty() || p_grid.iter().any(|p| !(0.0..0.5).contains(p)) {
        return Err(invalid("lt.p_grid", "crossover probabilities must lie in [0, 0.5)"));
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("lt.p_grid", "must be strictly ascending"));
    }
    let rates = &cfg.rate_grid;
    let bin_of = |rate: f64| rates.iter().position(|&r| r == rate).unwrap_or(rates.len());

    let outcomes: Vec<Vec<u16>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<u16>> {
            let mut msg_rng = stream(seed, t, Lane::Message);
            let message: Vec<u8> = (0..cfg.k).map(|_| msg_rng.gen_range(0..2u8)).collect();
            let graph_seed = derived_seed(seed, t, Lane::Graph);
            p_grid
                .iter()
                .map(|&p| {
                    let mut noise = stream(seed, t, Lane::Noise);
                    let res = run_session(&message, cfg, graph_seed, p, &mut noise)?;
                    Ok(bin_of(res.achieved_rate) as u16)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut counts = vec![vec![0u32; rates.len() + 1]; p_grid.len()];
    for row in &outcomes {
        for (col, &bin) in counts.iter_mut().zip(row) {
            col[bin as usize] += 1;
        }
    }
    Ok(RateProfile {
        p_grid: p_grid.to_vec(),
        rate_grid: rates.clone(),
        trials,
        counts,
    })
}

impl RateProfile {
    pub fn bins(&self) -> usize {
        self.rate_grid.len() + 1
    }

    /// Empirical outcome distribution at grid point `idx`.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.counts[idx].iter().map(|&c| c as f64 / self.trials as f64).collect()
    }

    /// Probability of decoding at rate `rate_grid[bin]` or higher.
    pub fn success_cdf(&self, idx: usize) -> Vec<f64> {
        let mut acc = 0.0;
        self.column(idx)[..self.rate_grid.len()]
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }

    /// Outcome distribution at an arbitrary `p`: log-linear interpolation
    /// between positive grid points, linear between 0 and the first
    /// positive point, clamped at both ends.
    pub fn distribution_at(&self, p: f64) -> Vec<f64> {
        let grid = &self.p_grid;
        let last = grid.len() - 1;
        if p <= grid[0] {
            return self.column(0);
        }
        if p >= grid[last] {
            return self.column(last);
        }
        let hi = grid.partition_point(|&g| g <= p);
        let lo = hi - 1;
        let w = if grid[lo] > 0.0 {
            (p.ln() - grid[lo].ln()) / (grid[hi].ln() - grid[lo].ln())
        } else {
            (p - grid[lo]) / (grid[hi] - grid[lo])
        };
        let (a, b) = (&self.counts[lo], &self.counts[hi]);
        let n = self.trials as f64;
        a.iter()
            .zip(b)
            .map(|(&x, &y)| ((1.0 - w) * x as f64 + w * y as f64) / n)
            .collect()
    }

    /// Text form: a `# key` line, a header, then one row per `p`.
    pub fn to_csv(&self, key: &str) -> String {
        let mut s = format!("# {key}\np");
        for r in &self.rate_grid {
            let _ = write!(s, ",{r:.2}");
        }
        s.push_str(",fail\n");
        for (p, row) in self.p_grid.iter().zip(&self.counts) {
            let _ = write!(s, "{p:e}");
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses [`RateProfile::to_csv`] output; `Ok(None)` if the stored key
    /// differs from `key`.
    pub fn from_csv<R: BufRead>(reader: R, key: &str, rate_grid: &[f64], trials: usize) -> Result<Option<Self>> {
        let mut lines = reader.lines().enumerate();
        let parse_err = |line: usize, msg: &str| Error::Parse { line: line + 1, msg: msg.to_string() };
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i, l)),
                Some((i, Err(e))) => Err(parse_err(i, &e.to_string())),
                None => Err(parse_err(0, &format!("missing {what}"))),
            }
        };
        let (_, first) = next("key line")?;
        if first.strip_prefix("# ") != Some(key) {
            return Ok(None);
        }
        next("header")?;
        let mut p_grid = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| parse_err(i, &e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let p: f64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| parse_err(i, "bad crossover probability"))?;
            let row: Vec<u32> = fields
                .map(|f| f.parse().map_err(|_| parse_err(i, "bad count")))
                .collect::<Result<_>>()?;
            if row.len() != rate_grid.len() + 1 || row.iter().map(|&c| c as usize).sum::<usize>() != trials {
                return Err(parse_err(i, "row does not match the rate grid or trial count"));
            }
            p_grid.push(p);
            counts.push(row);
        }
        if p_grid.is_empty() {
            return Err(parse_err(0, "no profile rows"));
        }
        Ok(Some(RateProfile {
            p_grid,
            rate_grid: rate_grid.to_vec(),
            trials,
            counts,
        }))
    }
}

/// Rate distribution at one `(M, average SNR)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePmf {
    pub avg_snr_db: f64,
    pub m: u32,
    /// Descending grid rates followed by the failure rate 0.
    pub rates: Vec<f64>,
    pub mass: Vec<f64>,
}

impl RatePmf {
    pub fn average_rate(&self) -> f64 {
        self.rates.iter().zip(&self.mass).map(|(r, m)| r * m).sum()
    }

    pub fn mass_at(&self, rate: f64) -> f64 {
        self.rates
            .iter()
            .position(|&r| (r - rate).abs() < 1e-9)
            .map(|i| self.mass[i])
            .unwrap_or(0.0)
    }

    pub fn failure_mass(&self) -> f64 {
        *self.mass.last().unwrap_or(&0.0)
    }
}

/// Node layout for averaging over Rayleigh fading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfQuadrature {
    /// Uniform nodes over `[0, range_factor * mean SNR]`.
    pub nodes: usize,
    pub range_factor: f64,
}

impl Default for PmfQuadrature {
    fn default() -> Self {
        PmfQuadrature {
            nodes: 400,
            range_factor: 16.2,
        }
    }
}

/// SNR at which the NC-MFSK bit error probability equals `p`.
pub fn snr_for_crossover(p: f64, m: u32) -> f64 {
    if p >= 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while crossover_for_snr(hi, m) > p {
        hi *= 2.0;
        if hi > 1e6 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if crossover_for_snr(mid, m) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Averages the profile over exponentially distributed SNR.
///
/// Each interval `[a, b]` contributes `(F(b) - F(a)) (g(a) + g(b)) / 2`,
/// with `F` the SNR distribution function and `g` the outcome distribution
/// at the interval ends. Besides the uniform nodes, the SNRs that map onto
/// the profile's crossover grid are used as nodes, so that the steep part
/// of `g` is resolved at high mean SNR. The mass beyond the last node is
/// assigned to it.
pub fn lt_rate_pmf(avg_snr_db: f64, m: u32, profile: &RateProfile, quad: &PmfQuadrature) -> Result<RatePmf> {
    crate::channel::check_constellation(m)?;
    if !avg_snr_db.is_finite() {
        return Err(domain("average SNR must be finite"));
    }
    if quad.nodes < 2 || !(quad.range_factor > 0.0) {
        return Err(domain("quadrature needs at least 2 nodes and a positive range"));
    }
    let mean = db_to_linear(avg_snr_db);
    let top = quad.range_factor * mean;
    let tail = (-quad.range_factor).exp();
    if tail > 1e-6 {
        warn!("SNR quadrature truncates {tail:.2e} of the fading distribution; folded into the last node");
    }

    let mut nodes: Vec<f64> = (0..quad.nodes).map(|i| top * i as f64 / (quad.nodes - 1) as f64).collect();
    nodes.extend(
        profile
            .p_grid
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| snr_for_crossover(p, m))
            .filter(|&g| g > 0.0 && g < top),
    );
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    let cdf = |g: f64| -(-g / mean).exp_m1();
    let bins = profile.bins();
    let mut mass = vec![0.0; bins];
    let mut prev = profile.distribution_at(crossover_for_snr(nodes[0], m));
    for w in nodes.windows(2) {
        let next = profile.distribution_at(crossover_for_snr(w[1], m));
        let weight = cdf(w[1]) - cdf(w[0]);
        for ((acc, a), b) in mass.iter_mut().zip(&prev).zip(&next) {
            *acc += weight * 0.5 * (a + b);
        }
        prev = next;
    }
    let rest = 1.0 - cdf(top);
    for (acc, g) in mass.iter_mut().zip(&prev) {
        *acc += rest * g;
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|x| *x /= total);

    let mut rates = profile.rate_grid.clone();
    rates.push(0.0);
    Ok(RatePmf {
        avg_snr_db,
        m,
        rates,
        mass,
    })
}

/// Average rate and the SNR saving, in dB, against uncoded NC-MFSK at the
/// same target BER.
pub fn lt_average_rate_and_gain(pmf: &RatePmf, m: u32, target_ber: f64) -> Result<(f64, f64)> {
    let required = required_average_snr_uncoded(m, target_ber)?;
    Ok((pmf.average_rate(), linear_to_db(required) - pmf.avg_snr_db))
}

/// One row of a per-constellation LT table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LtTableRow {
    pub avg_snr_db: f64,
    pub avg_rate: f64,
    pub gain_db: f64,
}

/// Average rate and gain against average SNR for one constellation size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtTable {
    pub m: u32,
    pub rows: Vec<LtTableRow>,
}

/// LT tables for every `m` on the given SNR rows.
pub fn build_lt_tables(
    profile: &RateProfile,
    ms: &[u32],
    snr_db_rows: &[f64],
    target_ber: f64,
    quad: &PmfQuadrature,
) -> Result<Vec<LtTable>> {
    ms.iter()
        .map(|&m| {
            let rows = snr_db_rows
                .iter()
                .map(|&snr| {
                    let pmf = lt_rate_pmf(snr, m, profile, quad)?;
                    let (avg_rate, gain_db) = lt_average_rate_and_gain(&pmf, m, target_ber)?;
                    Ok(LtTableRow {
                        avg_snr_db: snr,
                        avg_rate,
                        gain_db,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(LtTable { m, rows })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_profile() -> RateProfile {
        // two rates; columns at p = 0, 1e-3, 1e-1
        RateProfile {
            p_grid: vec![0.0, 1e-3, 1e-1],
            rate_grid: vec![0.9, 0.5],
            trials: 100,
            counts: vec![vec![100, 0, 0], vec![50, 50, 0], vec![0, 0, 100]],
        }
    }

    #[test]
    fn p_grid_layout() {
        let g = default_p_grid(40, 1e-5, 0.49);
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-5).abs() < 1e-18);
        assert!((g[40] - 0.49).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn interpolation_rules() {
        let pr = toy_profile();
        assert_eq!(pr.distribution_at(0.0), vec![1.0, 0.0, 0.0]);
        assert_eq!(pr.distribution_at(0.3), vec![0.0, 0.0, 1.0]);
        let mid = pr.distribution_at(5e-4);
        assert!((mid[0] - 0.75).abs() < 1e-12);
        // log-midpoint of 1e-3 and 1e-1
        let lm = pr.distribution_at(1e-2);
        assert!((lm[0] - 0.25).abs() < 1e-12 && (lm[2] - 0.5).abs() < 1e-12);
        for p in [0.0, 1e-6, 3e-4, 0.02, 0.2] {
            assert!((pr.distribution_at(p).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_and_key_mismatch() {
        let pr = toy_profile();
        let text = pr.to_csv("abc");
        let back = RateProfile::from_csv(text.as_bytes(), "abc", &pr.rate_grid, 100).unwrap();
        assert_eq!(back, Some(pr.clone()));
        assert_eq!(RateProfile::from_csv(text.as_bytes(), "xyz", &pr.rate_grid, 100).unwrap(), None);
        let broken = text.replace(",50,50,", ",50,x,");
        assert!(matches!(
            RateProfile::from_csv(broken.as_bytes(), "abc", &pr.rate_grid, 100),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn snr_inversion() {
        for m in [2u32, 8, 64] {
            for p in [1e-5, 1e-3, 0.1, 0.4] {
                let g = snr_for_crossover(p, m);
                assert!((crossover_for_snr(g, m) - p).abs() < 1e-9 * p, "M={m} p={p}");
            }
        }
        assert!((snr_for_crossover(1e-3, 2) - 2.0 * 500f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn pmf_normalised_and_monotone_in_snr() {
        let pr = toy_profile();
        let q = PmfQuadrature::default();
        let mut last_top = 0.0;
        for snr in [0.0, 6.0, 12.0, 20.0, 30.0] {
            let pmf = lt_rate_pmf(snr, 2, &pr, &q).unwrap();
            assert!((pmf.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(pmf.mass.iter().all(|&x| x >= 0.0));
            assert!(pmf.mass[0] > last_top);
            last_top = pmf.mass[0];
        }
    }

    #[test]
    fn degenerate_pmf_average() {
        let pmf = RatePmf {
            avg_snr_db: 10.0,
            m: 2,
            rates: vec![1.0, 0.0],
            mass: vec![1.0, 0.0],
        };
        assert_eq!(pmf.average_rate(), 1.0);
        let (rate, gain) = lt_average_rate_and_gain(&pmf, 2, 1e-3).unwrap();
        assert_eq!(rate, 1.0);
        assert!((gain - (linear_to_db(998.0) - 10.0)).abs() < 1e-9);
    }
}
