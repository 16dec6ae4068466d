//! Hard-decision ternary message passing.
//!
//! Messages live on edges and take values in {-1, 0, +1}, where +1 stands
//! for bit 0, -1 for bit 1 and 0 for an erasure. LT input nodes carry no
//! channel observation of their own, so the input-side channel term is an
//! erasure and the channel weight has nothing to scale; received bits enter
//! only through the output nodes.

use super::graph::BipartiteGraph;
use crate::error::{domain, Result};

/// Result of one decode attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    /// Decoded bits, or `None` if some input stayed erased or the estimate
    /// was inconsistent with the received word.
    pub bits: Option<Vec<u8>>,
    pub iterations: u32,
    /// Received bits that disagree with the re-encoded estimate; 0 while
    /// some input is still erased.
    pub mismatches: usize,
}

impl DecodeOutcome {
    pub fn success(&self) -> bool {
        self.bits.is_some()
    }
}

/// Chance, under a Poisson model of the channel flips, that a correct
/// estimate is rejected by the consistency check.
pub const FALSE_REJECT: f64 = 1e-6;

/// Largest number of received bits allowed to disagree with the re-encoded
/// estimate: at least `2pn`, and large enough that a correct estimate, which
/// disagrees exactly where the channel flipped a bit, is rejected with
/// probability at most [`FALSE_REJECT`]. Exactly zero when `p = 0`.
pub fn consistency_tolerance(n: usize, crossover_p: f64) -> usize {
    let mean = crossover_p * n as f64;
    if mean <= 0.0 {
        return 0;
    }
    let floor = (2.0 * mean).floor() as usize;
    // walk the Poisson(mean) pmf in log space until the upper tail is small
    let mut log_pmf = -mean;
    let mut cdf = log_pmf.exp();
    let mut t = 0usize;
    while 1.0 - cdf > FALSE_REJECT && t < 10 * n + 10 {
        t += 1;
        log_pmf += mean.ln() - (t as f64).ln();
        cdf += log_pmf.exp();
    }
    t.max(floor)
}

/// Past `max_iters` the decoder keeps going only while every iteration
/// sets a new low in erased inputs, up to this multiple of the cap.
pub const EXTENSION_FACTOR: u32 = 4;

#[inline]
fn sign(x: i32) -> i8 {
    x.signum() as i8
}

/// Decoder with reusable scratch buffers.
///
/// Input-to-output messages are never stored: the message on edge `e` into
/// output `j` is `sign(total(i) - m_e)`, where `total(i)` sums every
/// output-to-input message at input `i` and `m_e` is the one on `e`. Both
/// passes then stream over the edge list in output order.
#[derive(Debug, Default, Clone)]
pub struct TernaryDecoder {
    to_input: Vec<i8>,
    totals: Vec<i32>,
    decision: Vec<i8>,
    prev_decision: Vec<i8>,
    prev_to_input: Vec<i8>,
}

impl TernaryDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn decode(
        &mut self,
        received: &[u8],
        graph: &BipartiteGraph,
        crossover_p: f64,
        max_iters: u32,
    ) -> Result<DecodeOutcome> {
        if received.len() != graph.n() {
            return Err(domain(format!(
                "received word has {} bits but the graph has {} outputs",
                received.len(),
                graph.n()
            )));
        }
        if !(0.0..0.5).contains(&crossover_p) {
            return Err(domain(format!("crossover probability {crossover_p} outside [0, 0.5)")));
        }
        let k = graph.k();
        let offsets = graph.offsets();
        let inputs = graph.edge_inputs();
        self.to_input.clear();
        self.to_input.resize(inputs.len(), 0);
        self.prev_to_input.clear();
        self.prev_to_input.resize(inputs.len(), 0);
        self.totals.clear();
        self.totals.resize(k, 0);
        self.decision.clear();
        self.decision.resize(k, 0);
        self.prev_decision.clear();
        self.prev_decision.resize(k, 0);

        let tolerance = consistency_tolerance(received.len(), crossover_p);
        let mut iterations = 0;
        let mut verdict = None;
        let hard_cap = max_iters.saturating_mul(EXTENSION_FACTOR);
        let mut fewest_erased = k;
        let mut resolving = true;
        while iterations < max_iters || (resolving && iterations < hard_cap) {
            iterations += 1;

            // outputs -> inputs: parity vote, erased if any other input is erased
            for j in 0..graph.n() {
                let (lo, hi) = (offsets[j] as usize, offsets[j + 1] as usize);
                let msgs = &mut self.to_input[lo..hi];
                let mut parity = received[j];
                let mut zeros = 0u32;
                for (m, &i) in msgs.iter_mut().zip(&inputs[lo..hi]) {
                    let v = sign(self.totals[i as usize] - *m as i32);
                    zeros += (v == 0) as u32;
                    parity ^= (v as u8) >> 7;
                    *m = v;
                }
                let prod = 1 - 2 * parity as i8;
                match zeros {
                    0 => {
                        if prod < 0 {
                            msgs.iter_mut().for_each(|m| *m = -*m);
                        }
                    }
                    1 => msgs.iter_mut().for_each(|m| *m = if *m == 0 { prod } else { 0 }),
                    _ => msgs.fill(0),
                }
            }
            let changed = self.to_input != self.prev_to_input;
            if changed {
                self.prev_to_input.copy_from_slice(&self.to_input);
            }

            // inputs: total vote and decision
            self.totals.fill(0);
            for (&i, &m) in inputs.iter().zip(&self.to_input) {
                self.totals[i as usize] += m as i32;
            }
            for (d, &t) in self.decision.iter_mut().zip(&self.totals) {
                *d = sign(t);
            }

            let fixed_point = !changed;
            let now_erased = self.decision.iter().filter(|&&d| d == 0).count();
            resolving = now_erased < fewest_erased;
            fewest_erased = fewest_erased.min(now_erased);
            let all_decided = now_erased == 0;
            let stable = self.decision == self.prev_decision;
            if all_decided && (stable || fixed_point) {
                let mismatches = self.mismatches(received, graph);
                if mismatches <= tolerance {
                    verdict = Some(mismatches);
                    break;
                }
            }
            if fixed_point {
                break;
            }
            self.prev_decision.copy_from_slice(&self.decision);
        }

        let all_decided = self.decision.iter().all(|&d| d != 0);
        let mismatches = match verdict {
            Some(m) => m,
            None if all_decided => self.mismatches(received, graph),
            None => 0,
        };
        let bits = (all_decided && mismatches <= tolerance)
            .then(|| self.decision.iter().map(|&d| (d < 0) as u8).collect());
        Ok(DecodeOutcome {
            bits,
            iterations,
            mismatches,
        })
    }

    fn mismatches(&self, received: &[u8], graph: &BipartiteGraph) -> usize {
        (0..graph.n())
            .filter(|&j| {
                let bit = graph
                    .neighbors(j)
                    .iter()
                    .fold(0u8, |acc, &i| acc ^ (self.decision[i as usize] < 0) as u8);
                bit != received[j]
            })
            .count()
    }
}

/// One-shot ternary decode with fresh buffers.
pub fn decode_ternary(
    received: &[u8],
    graph: &BipartiteGraph,
    crossover_p: f64,
    max_iters: u32,
) -> Result<DecodeOutcome> {
    TernaryDecoder::new().decode(received, graph, crossover_p, max_iters)
}
