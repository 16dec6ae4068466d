use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::BipartiteGraph;
use crate::error::{invalid, Result};

/// Output-node degree distribution `O(x) = sum_i mu_i x^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct DegreeDistribution {
    entries: Vec<(u32, f64)>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl DegreeDistribution {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("lt.degree_dist", "empty distribution"));
        }
        if entries[0].0 < 1 || entries.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid("lt.degree_dist", "degrees must be >= 1 and strictly increasing"));
        }
        if entries.iter().any(|&(_, p)| !(p >= 0.0)) {
            return Err(invalid("lt.degree_dist", "probabilities must be >= 0"));
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("lt.degree_dist", format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = entries
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Ok(DegreeDistribution { entries, cumulative })
    }

    /// Distribution optimised for a BSC under ternary hard-decision decoding.
    pub fn bsc_optimized() -> Self {
        Self::new(vec![
            (1, 0.00466),
            (2, 0.55545),
            (3, 0.09743),
            (5, 0.17506),
            (8, 0.03774),
            (14, 0.08202),
            (33, 0.01775),
            (100, 0.02989),
        ])
        .expect("coefficients sum to one")
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn max_degree(&self) -> u32 {
        self.entries.last().map(|e| e.0).unwrap_or(1)
    }

    /// `O'(1) = sum_i i mu_i`.
    pub fn mean_degree(&self) -> f64 {
        self.entries.iter().map(|&(d, p)| d as f64 * p).sum()
    }

    /// Inverse-CDF draw from the support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.entries[idx.min(self.entries.len() - 1)].0
    }
}

impl TryFrom<Vec<(u32, f64)>> for DegreeDistribution {
    type Error = crate::Error;
    fn try_from(v: Vec<(u32, f64)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DegreeDistribution> for Vec<(u32, f64)> {
    fn from(d: DegreeDistribution) -> Self {
        d.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeStats {
    /// Mean output degree from the polynomial.
    pub o_ave: f64,
    pub realized: Option<RealizedDegrees>,
}

/// Edge counts of one realised graph. `k * i_ave == n * o_ave` holds exactly
/// because both equal the integer edge count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizedDegrees {
    pub k: usize,
    pub n: usize,
    pub edges: u64,
    pub o_ave: f64,
    pub i_ave: f64,
    /// `O_ave / I_ave`, which for a realised graph is `k / n`.
    pub asymptotic_rate: f64,
}

pub fn degree_stats(dist: &DegreeDistribution, graph: Option<&BipartiteGraph>) -> DegreeStats {
    let realized = graph.map(|g| {
        let edges = g.edge_count() as u64;
        let o_ave = edges as f64 / g.n() as f64;
        let i_ave = edges as f64 / g.k() as f64;
        RealizedDegrees {
            k: g.k(),
            n: g.n(),
            edges,
            o_ave,
            i_ave,
            asymptotic_rate: o_ave / i_ave,
        }
    });
    DegreeStats {
        o_ave: dist.mean_degree(),
        realized,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn support_and_mean() {
        let d = DegreeDistribution::bsc_optimized();
        let support: Vec<u32> = d.entries().iter().map(|e| e.0).collect();
        assert_eq!(support, vec![1, 2, 3, 5, 8, 14, 33, 100]);
        // 0.00466 + 2*0.55545 + 3*0.09743 + 5*0.17506 + 8*0.03774
        //   + 14*0.08202 + 33*0.01775 + 100*0.02989
        let oracle = 0.00466 + 1.1109 + 0.29229 + 0.8753 + 0.30192 + 1.14828 + 0.58575 + 2.989;
        assert!((d.mean_degree() - oracle).abs() < 1e-12);
        assert!((d.mean_degree() - 7.3081).abs() < 1e-4);
    }

    #[test]
    fn empirical_frequencies() {
        let d = DegreeDistribution::bsc_optimized();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let (mut twos, mut sum) = (0usize, 0u64);
        for _ in 0..n {
            let x = d.sample(&mut rng);
            if x == 2 {
                twos += 1;
            }
            sum += x as u64;
        }
        assert!((twos as f64 / n as f64 - 0.55545).abs() < 0.002);
        assert!((sum as f64 / n as f64 - d.mean_degree()).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(DegreeDistribution::new(vec![]).is_err());
        assert!(DegreeDistribution::new(vec![(1, 0.5), (2, 0.4)]).is_err());
        assert!(DegreeDistribution::new(vec![(2, 0.5), (2, 0.5)]).is_err());
        assert!(DegreeDistribution::new(vec![(0, 1.0)]).is_err());
    }

    #[test]
    fn degenerate_repetition_code() {
        let d = DegreeDistribution::new(vec![(1, 1.0)]).unwrap();
        let g = BipartiteGraph::from_seed(&d, 50, 120, 3);
        let s = degree_stats(&d, Some(&g));
        assert_eq!(s.o_ave, 1.0);
        let r = s.realized.unwrap();
        assert_eq!(r.edges, 120);
        assert!((r.asymptotic_rate - 1.0 / r.i_ave).abs() < 1e-15);
    }
}
