use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

use super::degree::DegreeDistribution;

/// Lazily generates output-node neighbourhoods from a shared seed.
///
/// Encoder and decoder each run their own `GraphStream` with the same
/// `(dist, k, seed)` and obtain the same graph without exchanging it. A
/// sampled degree above `k` is clamped to `k`.
#[derive(Debug, Clone)]
pub struct GraphStream {
    dist: DegreeDistribution,
    k: usize,
    rng: ChaCha8Rng,
}

impl GraphStream {
    pub fn new(dist: DegreeDistribution, k: usize, seed: u64) -> Self {
        assert!(k >= 1, "LT block needs at least one input");
        GraphStream {
            dist,
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Writes the next neighbourhood (sorted, distinct) into `out`.
    pub fn next_into(&mut self, out: &mut Vec<u32>) {
        let degree = (self.dist.sample(&mut self.rng) as usize).min(self.k);
        out.clear();
        out.extend(index::sample(&mut self.rng, self.k, degree).into_iter().map(|i| i as u32));
        out.sort_unstable();
    }
}

impl Iterator for GraphStream {
    type Item = Vec<u32>;
    fn next(&mut self) -> Option<Vec<u32>> {
        let mut v = Vec::new();
        self.next_into(&mut v);
        Some(v)
    }
}

/// Sparse bipartite graph, outputs to inputs, in compressed-row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    k: usize,
    offsets: Vec<u32>,
    inputs: Vec<u32>,
}

impl BipartiteGraph {
    pub fn new(k: usize) -> Self {
        BipartiteGraph {
            k,
            offsets: vec![0],
            inputs: Vec::new(),
        }
    }

    /// The first `n` outputs of the seed's graph stream.
    pub fn from_seed(dist: &DegreeDistribution, k: usize, n: usize, seed: u64) -> Self {
        let mut stream = GraphStream::new(dist.clone(), k, seed);
        let mut g = BipartiteGraph::new(k);
        let mut buf = Vec::new();
        for _ in 0..n {
            stream.next_into(&mut buf);
            g.push(&buf);
        }
        g
    }

    /// Appends one output node. `neighbors` must be sorted, distinct, `< k`.
    pub fn push(&mut self, neighbors: &[u32]) {
        debug_assert!(!neighbors.is_empty());
        debug_assert!(neighbors.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(neighbors.iter().all(|&i| (i as usize) < self.k));
        self.inputs.extend_from_slice(neighbors);
        self.offsets.push(self.inputs.len() as u32);
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The subgraph of the first `n` outputs.
    pub fn prefix(&self, n: usize) -> BipartiteGraph {
        let offsets = self.offsets[..=n].to_vec();
        let inputs = self.inputs[..offsets[n] as usize].to_vec();
        BipartiteGraph { k: self.k, offsets, inputs }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn neighbors(&self, out_idx: usize) -> &[u32] {
        &self.inputs[self.offsets[out_idx] as usize..self.offsets[out_idx + 1] as usize]
    }

    pub(crate) fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    pub(crate) fn edge_inputs(&self) -> &[u32] {
        &self.inputs
    }

    /// XOR of each output's neighbourhood over `message`.
    pub fn encode(&self, message: &[u8]) -> Vec<u8> {
        (0..self.n())
            .map(|j| self.neighbors(j).iter().fold(0u8, |acc, &i| acc ^ message[i as usize]))
            .collect()
    }

    /// Inputs with no incident edge.
    pub fn uncovered_inputs(&self) -> usize {
        let mut seen = vec![false; self.k];
        for &i in &self.inputs {
            seen[i as usize] = true;
        }
        seen.iter().filter(|s| !**s).count()
    }

    /// One line per output: `out_idx: in_idx,in_idx,...`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for j in 0..self.n() {
            let _ = write!(s, "{j}: ");
            for (pos, i) in self.neighbors(j).iter().enumerate() {
                if pos > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{i}");
            }
            s.push('\n');
        }
        s
    }
}
