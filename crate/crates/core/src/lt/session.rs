use rand::Rng;

use super::decoder::TernaryDecoder;
use super::degree::DegreeDistribution;
use super::encoder::LtEncoder;
use super::graph::BipartiteGraph;
use crate::error::{invalid, Result};

/// Highest rate a session can report.
pub const RATE_CAP: f64 = 0.95;

/// `0.95, 0.90, ..., 0.10`; the failure bin 0 is implicit.
pub fn default_rate_grid() -> Vec<f64> {
    (0..18).map(|i| (95 - 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub k: usize,
    pub dist: DegreeDistribution,
    /// Strictly descending, within `(0, RATE_CAP]`.
    pub rate_grid: Vec<f64>,
    /// Bit counts at decode attempts are rounded up to a multiple of this.
    pub batch: usize,
    pub max_iters: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            k: 1000,
            dist: DegreeDistribution::bsc_optimized(),
            rate_grid: default_rate_grid(),
            batch: 1,
            max_iters: 50,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(invalid("lt.k", "must be at least 2"));
        }
        if self.batch == 0 {
            return Err(invalid("lt.batch", "must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(invalid("lt.max_iters", "must be at least 1"));
        }
        let g = &self.rate_grid;
        if g.is_empty() || g.iter().any(|&r| !(r > 0.0 && r <= RATE_CAP + 1e-12)) {
            return Err(invalid("lt.rate_grid", format!("rates must lie in (0, {RATE_CAP}]")));
        }
        if g.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("lt.rate_grid", "must be strictly descending"));
        }
        Ok(())
    }

    /// Coded bits needed before attempting to decode at `rate`.
    pub fn bits_for_rate(&self, rate: f64) -> usize {
        let n = (self.k as f64 / rate - 1e-9).ceil() as usize;
        n.div_ceil(self.batch) * self.batch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtSessionResult {
    /// Grid rate of the first successful attempt, 0 on failure.
    pub achieved_rate: f64,
    pub bits_sent: usize,
    /// Decoder iterations summed over all attempts.
    pub decode_iterations: u32,
    pub success: bool,
}

/// Sends coded bits of `message` over a BSC until the sink decodes it.
///
/// Every coded bit is flipped iff a uniform draw from `noise` falls below
/// `crossover_p`, so sessions sharing a noise stream are coupled across `p`.
/// An attempt counts as a success only if the decoder reports a consistent
/// estimate and that estimate equals `message`.
pub fn run_session<R: Rng + ?Sized>(
    message: &[u8],
    cfg: &SessionConfig,
    graph_seed: u64,
    crossover_p: f64,
    noise: &mut R,
) -> Result<LtSessionResult> {
    cfg.validate()?;
    if message.len() != cfg.k {
        return Err(invalid("lt.k", format!("message has {} bits, expected {}", message.len(), cfg.k)));
    }
    let mut encoder = LtEncoder::new(message, &cfg.dist, graph_seed);
    let mut graph = BipartiteGraph::new(cfg.k);
    let mut received = Vec::new();
    let mut decoder = TernaryDecoder::new();
    let mut neighbors = Vec::new();
    let mut iterations = 0;

    for &rate in &cfg.rate_grid {
        let target = cfg.bits_for_rate(rate);
        while received.len() < target {
            let bit = encoder.next_into(&mut neighbors);
            graph.push(&neighbors);
            let flip = noise.gen::<f64>() < crossover_p;
            received.push(bit ^ flip as u8);
        }
        let out = decoder.decode(&received, &graph, crossover_p, cfg.max_iters)?;
        iterations += out.iterations;
        if out.bits.as_deref() == Some(message) {
            return Ok(LtSessionResult {
                achieved_rate: rate,
                bits_sent: received.len(),
                decode_iterations: iterations,
                success: true,
            });
        }
    }
    Ok(LtSessionResult {
        achieved_rate: 0.0,
        bits_sent: received.len(),
        decode_iterations: iterations,
        success: false,
    })
}
