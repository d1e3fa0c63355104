//! Synthetic corpora and planted-partition networks for tests and fixtures,
//! plus naive reference implementations (`oracle`) used to cross-check the
//! main code paths.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CurationLabel, DisciplineTaxonomy, MentionRecord};
use crate::error::{Error, Result};
use crate::proximity::ProximityNetwork;
use crate::scalefit::sample_discrete_power_law;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub n_blocks: usize,
    /// Popularity multiplier for tools in a discipline's own block.
    pub affinity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_disciplines: usize,
    pub n_tools: usize,
    pub n_papers: usize,
    pub blocks: Option<BlockSpec>,
    /// Tool popularity drawn from a discrete power law with this exponent.
    pub tail_exponent: Option<f64>,
    pub seed: u64,
    pub first_year: i32,
    pub last_year: i32,
    pub mean_tools_per_paper: f64,
    /// Probability that a paper carries a second discipline code.
    pub second_code_prob: f64,
    /// Share of mention records perturbed into case variants, recoverable
    /// `not_curated` labels, or rejected labels.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_disciplines: 8,
            n_tools: 40,
            n_papers: 200,
            blocks: Some(BlockSpec {
                n_blocks: 2,
                affinity: 6.0,
            }),
            tail_exponent: None,
            seed: 42,
            first_year: 2004,
            last_year: 2021,
            mean_tools_per_paper: 3.0,
            second_code_prob: 0.15,
            noise: 0.1,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let divisions = DisciplineTaxonomy::default().divisions().len();
        if self.n_disciplines == 0 || self.n_disciplines > divisions {
            return Err(Error::InvalidArgument(format!(
                "n_disciplines must lie in 1..={divisions}"
            )));
        }
        if self.n_tools == 0 {
            return Err(Error::InvalidArgument("n_tools must be at least 1".into()));
        }
        if self.first_year > self.last_year {
            return Err(Error::InvalidArgument("first_year after last_year".into()));
        }
        if let Some(b) = &self.blocks {
            if b.n_blocks == 0 || !(b.affinity > 0.0) {
                return Err(Error::InvalidArgument("block spec needs n_blocks >= 1 and affinity > 0".into()));
            }
        }
        if let Some(a) = self.tail_exponent {
            if !(a > 1.0) {
                return Err(Error::InvalidArgument("tail exponent must exceed 1".into()));
            }
        }
        if !(self.mean_tools_per_paper >= 1.0) {
            return Err(Error::InvalidArgument("mean_tools_per_paper must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn tool_name(t: usize) -> String {
    format!("Tool{t:04}")
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = (-lambda).exp();
    let mut k = 0;
    let mut p = rng.gen::<f64>();
    while p > limit {
        k += 1;
        p *= rng.gen::<f64>();
    }
    k
}

/// Papers pick a discipline, then distinct tools with probability
/// proportional to popularity times block affinity. Deterministic in the seed.
pub fn generate_corpus(c: &SynthConfig) -> Result<Vec<MentionRecord>> {
    c.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let codes: Vec<String> = DisciplineTaxonomy::default()
        .divisions()
        .keys()
        .take(c.n_disciplines)
        .cloned()
        .collect();
    let popularity: Vec<f64> = (0..c.n_tools)
        .map(|_| match c.tail_exponent {
            Some(alpha) => sample_discrete_power_law(&mut rng, alpha, 1) as f64,
            None => 1.0,
        })
        .collect();
    let samplers: Vec<WeightedIndex<f64>> = (0..c.n_disciplines)
        .map(|d| {
            let weights: Vec<f64> = popularity
                .iter()
                .enumerate()
                .map(|(t, &w)| match &c.blocks {
                    Some(b) if t % b.n_blocks == d % b.n_blocks => w * b.affinity,
                    _ => w,
                })
                .collect();
            WeightedIndex::new(weights).expect("positive weights")
        })
        .collect();

    let mut out = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    for p in 0..c.n_papers {
        let paper_id = format!("P{p:06}");
        let d = rng.gen_range(0..c.n_disciplines);
        let mut paper_codes = vec![codes[d].clone()];
        if c.n_disciplines > 1 && rng.gen::<f64>() < c.second_code_prob {
            let mut e = rng.gen_range(0..c.n_disciplines - 1);
            if e >= d {
                e += 1;
            }
            paper_codes.push(codes[e].clone());
        }
        let year = rng.gen_range(c.first_year..=c.last_year);
        let want = (1 + poisson(&mut rng, c.mean_tools_per_paper - 1.0)).min(c.n_tools);
        chosen.clear();
        let mut attempts = 0;
        while chosen.len() < want && attempts < 50 * want {
            attempts += 1;
            let t = samplers[d].sample(&mut rng);
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            let mut name = tool_name(t);
            let mut label = CurationLabel::Software;
            let roll = rng.gen::<f64>();
            if roll < c.noise / 3.0 {
                name = name.to_lowercase();
            } else if roll < 2.0 * c.noise / 3.0 {
                label = CurationLabel::NotCurated;
            }
            out.push(MentionRecord {
                paper_id: paper_id.clone(),
                raw_name: name,
                label,
                doi: Some(format!("10.5555/synth.{p}")),
                year,
                discipline_codes: paper_codes.clone(),
            });
        }
        if rng.gen::<f64>() < c.noise {
            let label = if rng.gen::<bool>() {
                CurationLabel::NotSoftware
            } else {
                CurationLabel::Unclear
            };
            out.push(MentionRecord {
                paper_id: paper_id.clone(),
                raw_name: format!("Figure {}", rng.gen_range(1..9)),
                label,
                doi: Some(format!("10.5555/synth.{p}")),
                year,
                discipline_codes: paper_codes.clone(),
            });
        }
    }
    Ok(out)
}

/// Planted-partition graph: `n_blocks` blocks of `block_size` nodes, edges
/// independently with `p_in` inside blocks and `p_out` across, unit weight.
/// Returns the network and the planted labels.
pub fn planted_partition(
    n_blocks: usize,
    block_size: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(ProximityNetwork, Vec<usize>)> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::InvalidArgument("edge probabilities must lie in [0,1]".into()));
    }
    let n = n_blocks * block_size;
    let labels: Vec<usize> = (0..n).map(|i| i / block_size.max(1)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    let names = (0..n).map(|i| format!("v{i:04}")).collect();
    Ok((ProximityNetwork::new(names, edges)?, labels))
}

/// Deliberately naive reference computations, size-capped.
pub mod oracle {
    use std::collections::{HashMap, HashSet};

    use crate::error::{Error, Result};

    pub const MAX_MATRIX: usize = 8;
    pub const MAX_TREE_NODES: usize = 8;
    pub const MAX_ENTITIES: usize = 64;

    /// Scalar evaluation of RCA per cell; `None` where undefined.
    pub fn oracle_rca(counts: &[Vec<u64>]) -> Result<Vec<Vec<Option<f64>>>> {
        let rows = counts.len();
        let cols = counts.first().map_or(0, Vec::len);
        if rows > MAX_MATRIX || cols > MAX_MATRIX {
            return Err(Error::InvalidArgument(format!("oracle_rca limited to {MAX_MATRIX}x{MAX_MATRIX}")));
        }
        let mut out = vec![vec![None; cols]; rows];
        for d in 0..rows {
            for s in 0..cols {
                let mut in_row = 0.0;
                for x in 0..cols {
                    in_row += counts[d][x] as f64;
                }
                let mut in_col = 0.0;
                for y in 0..rows {
                    in_col += counts[y][s] as f64;
                }
                let mut grand = 0.0;
                for row in counts {
                    for &v in row {
                        grand += v as f64;
                    }
                }
                if in_row > 0.0 && in_col > 0.0 {
                    let share_in_discipline = counts[d][s] as f64 / in_row;
                    let share_overall = in_col / grand;
                    out[d][s] = Some(share_in_discipline / share_overall);
                }
            }
        }
        Ok(out)
    }

    /// Minimum of the two conditional co-specialization probabilities, from
    /// per-entity sets of specializing disciplines.
    pub fn oracle_proximity(bases: &[HashSet<usize>]) -> Result<Vec<Vec<f64>>> {
        if bases.len() > MAX_ENTITIES {
            return Err(Error::InvalidArgument(format!("oracle_proximity limited to {MAX_ENTITIES} entities")));
        }
        let n = bases.len();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    out[i][j] = if bases[i].is_empty() { 0.0 } else { 1.0 };
                    continue;
                }
                let both = bases[i].intersection(&bases[j]).count() as f64;
                let p_i_given_j = if bases[j].is_empty() { 0.0 } else { both / bases[j].len() as f64 };
                let p_j_given_i = if bases[i].is_empty() { 0.0 } else { both / bases[i].len() as f64 };
                out[i][j] = p_i_given_j.min(p_j_given_i);
            }
        }
        Ok(out)
    }

    /// Node-local disparity p-values `(1 - w/s)^(k-1)` for every edge, in
    /// input order, by rescanning the edge list per endpoint.
    pub fn oracle_disparity(edges: &[(usize, usize, f64)]) -> Vec<(f64, f64)> {
        let at = |node: usize, w: f64| {
            let incident: Vec<f64> = edges
                .iter()
                .filter(|e| e.0 == node || e.1 == node)
                .map(|e| e.2)
                .collect();
            let k = incident.len();
            if k < 2 {
                return 1.0;
            }
            let s: f64 = incident.iter().sum();
            let mut p = 1.0;
            for _ in 0..(k - 1) {
                p *= 1.0 - w / s;
            }
            p
        };
        edges.iter().map(|&(a, b, w)| (at(a, w), at(b, w))).collect()
    }

    fn component_count(n: usize, edges: &[(usize, usize, f64)]) -> usize {
        let mut label: Vec<usize> = (0..n).collect();
        let mut changed = true;
        while changed {
            changed = false;
            for &(a, b, _) in edges {
                let m = label[a].min(label[b]);
                if label[a] != m || label[b] != m {
                    label[a] = m;
                    label[b] = m;
                    changed = true;
                }
            }
        }
        label.iter().collect::<HashSet<_>>().len()
    }

    fn creates_cycle(n: usize, chosen: &[(usize, usize, f64)], e: (usize, usize, f64)) -> bool {
        // Reachability from e.0 to e.1 through chosen edges.
        let mut seen = vec![false; n];
        let mut stack = vec![e.0];
        seen[e.0] = true;
        while let Some(v) = stack.pop() {
            if v == e.1 {
                return true;
            }
            for &(a, b, _) in chosen {
                let u = if a == v { b } else if b == v { a } else { continue };
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        false
    }

    /// Maximum total weight over all spanning forests, by recursive edge
    /// inclusion/exclusion.
    pub fn oracle_mst(n: usize, edges: &[(usize, usize, f64)]) -> Result<f64> {
        if n > MAX_TREE_NODES {
            return Err(Error::InvalidArgument(format!("oracle_mst limited to {MAX_TREE_NODES} nodes")));
        }
        let target = n - component_count(n, edges);
        let mut best = f64::NEG_INFINITY;
        let mut chosen = Vec::new();
        fn recurse(
            n: usize,
            edges: &[(usize, usize, f64)],
            i: usize,
            target: usize,
            chosen: &mut Vec<(usize, usize, f64)>,
            best: &mut f64,
        ) {
            if chosen.len() == target {
                let w: f64 = chosen.iter().map(|e| e.2).sum();
                if w > *best {
                    *best = w;
                }
                return;
            }
            if i == edges.len() || edges.len() - i < target - chosen.len() {
                return;
            }
            if !creates_cycle(n, chosen, edges[i]) {
                chosen.push(edges[i]);
                recurse(n, edges, i + 1, target, chosen, best);
                chosen.pop();
            }
            recurse(n, edges, i + 1, target, chosen, best);
        }
        recurse(n, edges, 0, target, &mut chosen, &mut best);
        Ok(if target == 0 { 0.0 } else { best })
    }

    /// HHI from the community of each specialized tool.
    pub fn oracle_hhi(communities: &[usize]) -> Result<Option<f64>> {
        if communities.len() > 100_000 {
            return Err(Error::InvalidArgument("oracle_hhi input too large".into()));
        }
        if communities.is_empty() {
            return Ok(None);
        }
        let mut tally: HashMap<usize, usize> = HashMap::new();
        for &c in communities {
            *tally.entry(c).or_insert(0) += 1;
        }
        let total = communities.len() as f64;
        let mut keys: Vec<_> = tally.keys().copied().collect();
        keys.sort_unstable();
        Ok(Some(keys.iter().map(|k| {
            let share = tally[k] as f64 / total;
            share * share
        }).sum()))
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;

    #[test]
    fn zero_papers_is_empty() {
        let c = SynthConfig {
            n_papers: 0,
            ..Default::default()
        };
        assert!(generate_corpus(&c).unwrap().is_empty());
    }

    #[test]
    fn generator_is_deterministic() {
        let c = SynthConfig::default();
        assert_eq!(generate_corpus(&c).unwrap(), generate_corpus(&c).unwrap());
        let other = SynthConfig { seed: 7, ..c.clone() };
        assert_ne!(generate_corpus(&c).unwrap(), generate_corpus(&other).unwrap());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for c in [
            SynthConfig { n_disciplines: 0, ..Default::default() },
            SynthConfig { n_disciplines: 23, ..Default::default() },
            SynthConfig { n_tools: 0, ..Default::default() },
            SynthConfig { tail_exponent: Some(1.0), ..Default::default() },
        ] {
            assert!(generate_corpus(&c).is_err());
        }
    }

    #[test]
    fn oracle_rca_uniform_is_ones() {
        let r = oracle_rca(&vec![vec![3; 3]; 3]).unwrap();
        assert!(r.iter().flatten().all(|v| *v == Some(1.0)));
        assert!(oracle_rca(&vec![vec![1; 9]; 2]).is_err());
    }

    #[test]
    fn oracle_mst_triangle() {
        let w = oracle_mst(3, &[(0, 1, 0.9), (1, 2, 0.8), (0, 2, 0.1)]).unwrap();
        assert!((w - 1.7).abs() < 1e-15);
        assert!(oracle_mst(9, &[]).is_err());
    }

    #[test]
    fn oracle_hhi_cases() {
        assert_eq!(oracle_hhi(&[2, 2, 2]).unwrap(), Some(1.0));
        assert_eq!(oracle_hhi(&[0, 0, 0, 1]).unwrap(), Some(0.625));
        assert_eq!(oracle_hhi(&[]).unwrap(), None);
    }

    #[test]
    fn planted_partition_shape() {
        let (g, labels) = planted_partition(4, 25, 0.3, 0.02, 0).unwrap();
        assert_eq!(g.num_nodes(), 100);
        assert_eq!(labels.iter().filter(|&&l| l == 3).count(), 25);
        let inside = g.edges().iter().filter(|e| labels[e.source] == labels[e.target]).count();
        assert!(inside > g.num_edges() / 2);
    }
}
