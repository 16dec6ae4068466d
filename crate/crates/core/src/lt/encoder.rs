use super::degree::DegreeDistribution;
use super::graph::GraphStream;

/// One emitted coded bit together with the inputs it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedBit {
    pub bit: u8,
    pub neighbors: Vec<u32>,
}

/// Rateless encoder: an endless stream of coded bits for one `k`-bit block.
#[derive(Debug, Clone)]
pub struct LtEncoder<'a> {
    message: &'a [u8],
    graph: GraphStream,
}

impl<'a> LtEncoder<'a> {
    pub fn new(message: &'a [u8], dist: &DegreeDistribution, seed: u64) -> Self {
        assert!(message.len() >= 2, "LT block needs k >= 2");
        LtEncoder {
            message,
            graph: GraphStream::new(dist.clone(), message.len(), seed),
        }
    }

    /// Emits the next bit, writing its neighbourhood into `neighbors`.
    pub fn next_into(&mut self, neighbors: &mut Vec<u32>) -> u8 {
        self.graph.next_into(neighbors);
        neighbors.iter().fold(0u8, |acc, &i| acc ^ self.message[i as usize])
    }
}

impl Iterator for LtEncoder<'_> {
    type Item = CodedBit;
    fn next(&mut self) -> Option<CodedBit> {
        let mut neighbors = Vec::new();
        let bit = self.next_into(&mut neighbors);
        Some(CodedBit { bit, neighbors })
    }
}

/// Lazily encodes `message` (bits as 0/1 bytes) under `seed`.
pub fn encode_block<'a>(message: &'a [u8], dist: &DegreeDistribution, seed: u64) -> LtEncoder<'a> {
    LtEncoder::new(message, dist, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lt::BipartiteGraph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_message_encodes_to_zero() {
        let d = DegreeDistribution::bsc_optimized();
        let msg = vec![0u8; 300];
        for seed in [0, 1, 99] {
            assert!(encode_block(&msg, &d, seed).take(500).all(|c| c.bit == 0));
        }
    }

    #[test]
    fn bits_are_xor_of_neighbors() {
        let d = DegreeDistribution::bsc_optimized();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let msg: Vec<u8> = (0..200).map(|_| rng.gen_range(0..2)).collect();
        for c in encode_block(&msg, &d, 8).take(400) {
            let x = c.neighbors.iter().fold(0, |a, &i| a ^ msg[i as usize]);
            assert_eq!(c.bit, x);
        }
    }

    #[test]
    fn deterministic_stream_and_graph_from_seed_alone() {
        let d = DegreeDistribution::bsc_optimized();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let msg: Vec<u8> = (0..1000).map(|_| rng.gen_range(0..2)).collect();
        let a: Vec<u8> = encode_block(&msg, &d, 123).take(10_000).map(|c| c.bit).collect();
        let b: Vec<u8> = encode_block(&msg, &d, 123).take(10_000).map(|c| c.bit).collect();
        assert_eq!(a, b);

        for seed in 0..100u64 {
            let mut from_encoder = BipartiteGraph::new(1000);
            for c in encode_block(&msg, &d, seed).take(300) {
                from_encoder.push(&c.neighbors);
            }
            assert_eq!(from_encoder, BipartiteGraph::from_seed(&d, 1000, 300, seed));
        }
    }
}
