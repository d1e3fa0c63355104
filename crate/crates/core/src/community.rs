//! Community detection with a flat degree-corrected stochastic block model,
//! fitted by minimising its microcanonical description length.
//!
//! For an undirected multigraph with `N` nodes, `E` edges, degrees `k_i`,
//! multiplicities `A_ij`, a partition into `B` nonempty blocks of sizes
//! `n_r`, inter-block edge counts `e_rs` (`r != s`), intra-block edge counts
//! `m_rr` and block degree sums `e_r`, the description length in nats is
//!
//! ```text
//! DL = -ln P(A | k, e, b) - ln P(k | e, b) - ln P(e) - ln P(b)
//!
//! -ln P(A | k, e, b) = -sum_{r<s} ln e_rs! - sum_r (ln m_rr! + m_rr ln 2)
//!                      - sum_i ln k_i! + sum_r ln e_r! + sum_{i<j} ln A_ij!
//! -ln P(k | e, b)    =  sum_r ln multiset(n_r, e_r)
//! -ln P(e)           =  ln multiset(B(B+1)/2, E)
//! -ln P(b)           =  ln N + ln C(N-1, B-1) + ln N! - sum_r ln n_r!
//! ```
//!
//! with `multiset(n, m) = C(n + m - 1, m)`. All priors are uniform. Edges
//! are the positive-proximity pairs with multiplicity 1 (binarized) or
//! `ceil(phi * Q)`.
//!
//! The fit starts from one block per node and agglomerates: each level
//! merges the cheapest sampled block pairs until the block count has shrunk
//! by `merge_ratio`, then relaxes with single-node move sweeps. Early merges
//! of singletons usually raise the DL, so levels are not required to
//! improve; the best level is kept. A final greedy refinement from that
//! state accepts only merges and moves that strictly lower the DL, and its
//! trace is what [`SbmFit::trace`] records.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CountMatrix;
use crate::error::{Error, Result};
use crate::io;
use crate::proximity::ProximityNetwork;
use crate::specialization::community_rca;

pub const MODEL_NAME: &str = "flat degree-corrected SBM, microcanonical description length, uniform priors";

/// Tool -> community id, ids contiguous from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityAssignment {
    names: Vec<String>,
    labels: Vec<usize>,
    num_blocks: usize,
    description_length: Option<f64>,
    seed: Option<u64>,
    index: HashMap<String, usize>,
}

impl CommunityAssignment {
    pub fn from_labels(names: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if names.len() != labels.len() {
            return Err(Error::InvalidArgument("names and labels differ in length".into()));
        }
        let num_blocks = labels.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; num_blocks];
        for &l in &labels {
            used[l] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidArgument("community ids are not contiguous from 0".into()));
        }
        let index: HashMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        if index.len() != names.len() {
            return Err(Error::InvalidArgument("duplicate tool in community assignment".into()));
        }
        Ok(CommunityAssignment {
            names,
            labels,
            num_blocks,
            description_length: None,
            seed: None,
            index,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn description_length(&self) -> Option<f64> {
        self.description_length
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn label_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).map(|&i| self.labels[i])
    }

    pub fn label_map(&self) -> HashMap<String, usize> {
        self.names
            .iter()
            .cloned()
            .zip(self.labels.iter().copied())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_blocks];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = io::writer(path)?;
        w.write_record(["tool", "community_id"])?;
        for (n, l) in self.names.iter().zip(&self.labels) {
            w.write_record([n, &l.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = io::reader(path)?;
        let mut names = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Data(format!("short community row {rec:?}")));
            }
            names.push(rec[0].to_string());
            labels.push(
                rec[1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Data(format!("bad community id {:?}", &rec[1])))?,
            );
        }
        Self::from_labels(names, labels).map_err(|e| Error::Data(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    /// Use multiplicity 1 for every positive-proximity pair.
    pub binarize: bool,
    /// Multiplicity scale `Q` for `ceil(phi * Q)` when not binarized.
    pub multiplicity_scale: u32,
    /// Maximum node-move sweeps per relaxation.
    pub sweeps: usize,
    /// Target blocks sampled through random neighbours per node move;
    /// nodes with at most this many neighbours try every neighbour block.
    pub move_candidates: usize,
    /// Candidate partner blocks sampled per block when proposing merges.
    pub merge_candidates: usize,
    /// Block count shrinks by this factor per agglomeration level.
    pub merge_ratio: f64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            binarize: true,
            multiplicity_scale: 10,
            sweeps: 10,
            move_candidates: 8,
            merge_candidates: 10,
            merge_ratio: 1.3,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.merge_ratio > 1.0 && self.merge_ratio.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "merge ratio must exceed 1, got {}",
                self.merge_ratio
            )));
        }
        if !self.binarize && self.multiplicity_scale == 0 {
            return Err(Error::InvalidArgument("multiplicity scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmFit {
    pub assignment: CommunityAssignment,
    /// Block count and DL after relaxing each agglomeration level.
    pub levels: Vec<(usize, f64)>,
    /// DL after each accepted merge or move of the final greedy refinement,
    /// starting from the best agglomeration level.
    pub trace: Vec<f64>,
}

const ACCEPT_EPS: f64 = 1e-9;

struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    fn new(size: usize) -> Self {
        let mut table = Vec::with_capacity(size + 1);
        table.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..=size {
            acc += (k as f64).ln();
            table.push(acc);
        }
        LnFactorial { table }
    }

    fn get(&self, n: u64) -> f64 {
        match self.table.get(n as usize) {
            Some(&v) => v,
            None => {
                // Stirling series; the table covers small n.
                let x = n as f64 + 1.0;
                (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
                    - 1.0 / (360.0 * x.powi(3))
                    + 1.0 / (1260.0 * x.powi(5))
            }
        }
    }

    fn ln_binom(&self, n: u64, k: u64) -> f64 {
        if k > n {
            return 0.0;
        }
        self.get(n) - self.get(k) - self.get(n - k)
    }
}

/// Multigraph view of a network used by the block model.
#[derive(Debug, Clone)]
struct Multigraph {
    n: usize,
    adj: Vec<Vec<(usize, u64)>>,
    degree: Vec<u64>,
    num_edges: u64,
    /// `sum_{i<j} ln A_ij!`; zero when every multiplicity is 1.
    ln_mult: f64,
}

impl Multigraph {
    fn from_network(net: &ProximityNetwork, config: &SbmConfig) -> Result<Self> {
        if net.num_nodes() == 0 {
            return Err(Error::InvalidArgument("block model on an empty network".into()));
        }
        if !config.binarize && config.multiplicity_scale == 0 {
            return Err(Error::InvalidArgument("multiplicity scale must be positive".into()));
        }
        let n = net.num_nodes();
        let mut adj = vec![Vec::new(); n];
        let mut degree = vec![0u64; n];
        let mut num_edges = 0u64;
        let mut mults = Vec::with_capacity(net.num_edges());
        for e in net.edges() {
            let m = if config.binarize {
                1
            } else {
                ((e.weight * config.multiplicity_scale as f64).ceil() as u64).max(1)
            };
            adj[e.source].push((e.target, m));
            adj[e.target].push((e.source, m));
            degree[e.source] += m;
            degree[e.target] += m;
            num_edges += m;
            mults.push(m);
        }
        let lf = LnFactorial::new(mults.iter().copied().max().unwrap_or(1) as usize);
        let ln_mult = mults.iter().map(|&m| lf.get(m)).sum();
        Ok(Multigraph {
            n,
            adj,
            degree,
            num_edges,
            ln_mult,
        })
    }
}

/// Incremental block-model state.
struct BlockState<'g> {
    g: &'g Multigraph,
    lf: LnFactorial,
    labels: Vec<usize>,
    size: Vec<u64>,
    /// Dense block x block edge counts; diagonal holds `m_rr`.
    e: Vec<u64>,
    deg: Vec<u64>,
    active: Vec<usize>,
    active_pos: Vec<usize>,
    dl: f64,
    /// Scratch: neighbour-block multiplicities for one node.
    scratch: Vec<u64>,
    touched: Vec<usize>,
}

impl<'g> BlockState<'g> {
    fn new(g: &'g Multigraph, labels: Vec<usize>) -> Self {
        let n = g.n;
        let edges = g.num_edges;
        let pairs = (n as u64) * (n as u64 + 1) / 2;
        let table = (pairs + edges).max(n as u64 + 2 * edges) as usize + 2;
        let lf = LnFactorial::new(table.min(1 << 24));
        let mut st = BlockState {
            g,
            lf,
            labels,
            size: vec![0; n],
            e: vec![0; n * n],
            deg: vec![0; n],
            active: Vec::new(),
            active_pos: vec![usize::MAX; n],
            dl: 0.0,
            scratch: vec![0; n],
            touched: Vec::new(),
        };
        st.rebuild();
        st
    }

    fn rebuild(&mut self) {
        let n = self.g.n;
        self.size.iter_mut().for_each(|v| *v = 0);
        self.e.iter_mut().for_each(|v| *v = 0);
        self.deg.iter_mut().for_each(|v| *v = 0);
        for (i, &r) in self.labels.iter().enumerate() {
            self.size[r] += 1;
            self.deg[r] += self.g.degree[i];
            for &(j, m) in &self.g.adj[i] {
                if i < j {
                    let s = self.labels[j];
                    if r == s {
                        self.e[r * n + r] += m;
                    } else {
                        self.e[r * n + s] += m;
                        self.e[s * n + r] += m;
                    }
                }
            }
        }
        self.active.clear();
        self.active_pos.iter_mut().for_each(|p| *p = usize::MAX);
        for r in 0..n {
            if self.size[r] > 0 {
                self.active_pos[r] = self.active.len();
                self.active.push(r);
            }
        }
        self.dl = self.full_dl();
    }

    fn pair(&self, r: usize, s: usize) -> u64 {
        self.e[r * self.g.n + s]
    }

    fn block_term(&self, n_r: u64, e_r: u64, m_rr: u64) -> f64 {
        if n_r == 0 {
            return 0.0;
        }
        // ln e_r! from the likelihood cancels against the degree prior.
        -(self.lf.get(m_rr) + m_rr as f64 * std::f64::consts::LN_2) + self.lf.get(n_r + e_r - 1)
            - self.lf.get(n_r - 1)
            - self.lf.get(n_r)
    }

    fn global_term(&self, b: usize) -> f64 {
        let n = self.g.n as u64;
        let b = b as u64;
        let pairs = b * (b + 1) / 2;
        let edge_prior = self.lf.ln_binom(pairs + self.g.num_edges - 1, self.g.num_edges);
        edge_prior + self.lf.ln_binom(n - 1, b - 1)
    }

    fn constant_term(&self) -> f64 {
        let n = self.g.n as u64;
        let ln_k: f64 = self.g.degree.iter().map(|&k| self.lf.get(k)).sum();
        -ln_k + self.g.ln_mult + (n as f64).ln() + self.lf.get(n)
    }

    fn full_dl(&self) -> f64 {
        let mut dl = self.constant_term() + self.global_term(self.active.len());
        for (a, &r) in self.active.iter().enumerate() {
            dl += self.block_term(self.size[r], self.deg[r], self.pair(r, r));
            for &s in &self.active[a + 1..] {
                dl -= self.lf.get(self.pair(r, s));
            }
        }
        dl
    }

    fn collect_neighbour_blocks(&mut self, i: usize) {
        for &t in &self.touched {
            self.scratch[t] = 0;
        }
        self.touched.clear();
        for &(j, m) in &self.g.adj[i] {
            let t = self.labels[j];
            if self.scratch[t] == 0 {
                self.touched.push(t);
            }
            self.scratch[t] += m;
        }
    }

    /// Change in DL from moving node `i` to block `s`. Requires
    /// `collect_neighbour_blocks(i)` to have run.
    fn move_delta(&self, i: usize, s: usize) -> f64 {
        let r = self.labels[i];
        debug_assert_ne!(r, s);
        let k = self.g.degree[i];
        let d = |t: usize| self.scratch[t];
        let lf = &self.lf;
        let mut delta = 0.0;
        for &t in &self.touched {
            if t == r || t == s {
                continue;
            }
            let (ert, est, dt) = (self.pair(r, t), self.pair(s, t), d(t));
            delta -= lf.get(ert - dt) - lf.get(ert);
            delta -= lf.get(est + dt) - lf.get(est);
        }
        let ers = self.pair(r, s);
        delta -= lf.get(ers + d(r) - d(s)) - lf.get(ers);

        let (nr, ns) = (self.size[r], self.size[s]);
        delta += self.block_term(nr - 1, self.deg[r] - k, self.pair(r, r) - d(r))
            - self.block_term(nr, self.deg[r], self.pair(r, r));
        delta += self.block_term(ns + 1, self.deg[s] + k, self.pair(s, s) + d(s))
            - self.block_term(ns, self.deg[s], self.pair(s, s));
        if nr == 1 {
            let b = self.active.len();
            delta += self.global_term(b - 1) - self.global_term(b);
        }
        delta
    }

    fn apply_move(&mut self, i: usize, s: usize, delta: f64) {
        let n = self.g.n;
        let r = self.labels[i];
        let k = self.g.degree[i];
        for idx in 0..self.touched.len() {
            let t = self.touched[idx];
            let dt = self.scratch[t];
            if t != r && t != s {
                self.e[r * n + t] -= dt;
                self.e[t * n + r] -= dt;
                self.e[s * n + t] += dt;
                self.e[t * n + s] += dt;
            }
        }
        let (dr, ds) = (self.scratch[r], self.scratch[s]);
        let ers = self.e[r * n + s] + dr - ds;
        self.e[r * n + s] = ers;
        self.e[s * n + r] = ers;
        self.e[r * n + r] -= dr;
        self.e[s * n + s] += ds;
        self.deg[r] -= k;
        self.deg[s] += k;
        self.size[r] -= 1;
        self.size[s] += 1;
        self.labels[i] = s;
        if self.size[r] == 0 {
            self.deactivate(r);
        }
        self.dl += delta;
        // Neighbour-block cache is stale now.
        for &t in &self.touched {
            self.scratch[t] = 0;
        }
        self.touched.clear();
    }

    fn deactivate(&mut self, r: usize) {
        let pos = self.active_pos[r];
        let last = *self.active.last().expect("active block");
        self.active.swap_remove(pos);
        if last != r {
            self.active_pos[last] = pos;
        }
        self.active_pos[r] = usize::MAX;
    }

    fn is_active(&self, r: usize) -> bool {
        self.active_pos[r] != usize::MAX
    }

    /// Change in DL from merging block `r` into block `s`.
    fn merge_delta(&self, r: usize, s: usize) -> f64 {
        let lf = &self.lf;
        let mut delta = 0.0;
        for &t in &self.active {
            if t == r || t == s {
                continue;
            }
            let (ert, est) = (self.pair(r, t), self.pair(s, t));
            if ert == 0 {
                continue;
            }
            delta -= lf.get(ert + est) - lf.get(ert) - lf.get(est);
        }
        let ers = self.pair(r, s);
        delta += lf.get(ers);
        delta += self.block_term(
            self.size[r] + self.size[s],
            self.deg[r] + self.deg[s],
            self.pair(r, r) + self.pair(s, s) + ers,
        ) - self.block_term(self.size[r], self.deg[r], self.pair(r, r))
            - self.block_term(self.size[s], self.deg[s], self.pair(s, s));
        let b = self.active.len();
        delta + self.global_term(b - 1) - self.global_term(b)
    }

    fn apply_merge(&mut self, r: usize, s: usize, delta: f64) {
        let n = self.g.n;
        let ers = self.e[r * n + s];
        for idx in 0..self.active.len() {
            let t = self.active[idx];
            if t == r || t == s {
                continue;
            }
            let ert = self.e[r * n + t];
            if ert > 0 {
                self.e[s * n + t] += ert;
                self.e[t * n + s] += ert;
                self.e[r * n + t] = 0;
                self.e[t * n + r] = 0;
            }
        }
        self.e[s * n + s] += self.e[r * n + r] + ers;
        self.e[r * n + r] = 0;
        self.e[r * n + s] = 0;
        self.e[s * n + r] = 0;
        self.size[s] += self.size[r];
        self.deg[s] += self.deg[r];
        self.size[r] = 0;
        self.deg[r] = 0;
        for l in self.labels.iter_mut() {
            if *l == r {
                *l = s;
            }
        }
        self.deactivate(r);
        self.dl += delta;
    }
}

struct Fitter<'g> {
    st: BlockState<'g>,
    rng: ChaCha8Rng,
    config: SbmConfig,
}

impl<'g> Fitter<'g> {
    /// One pass of single-node moves in random order; only strictly
    /// improving moves are applied. Each accepted move's DL goes to `trace`.
    fn sweep(&mut self, trace: &mut Vec<f64>) -> usize {
        let n = self.st.g.n;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let mut moved = 0;
        let mut candidates: Vec<usize> = Vec::new();
        for i in order {
            if self.st.active.len() < 2 {
                break;
            }
            let r = self.st.labels[i];
            self.st.collect_neighbour_blocks(i);
            candidates.clear();
            let adj = &self.st.g.adj[i];
            if adj.len() <= self.config.move_candidates {
                candidates.extend(self.st.touched.iter().copied().filter(|&t| t != r));
            } else {
                for _ in 0..self.config.move_candidates {
                    let s = self.st.labels[adj[self.rng.gen_range(0..adj.len())].0];
                    if s != r && !candidates.contains(&s) {
                        candidates.push(s);
                    }
                }
            }
            let random = self.st.active[self.rng.gen_range(0..self.st.active.len())];
            if random != r && !candidates.contains(&random) {
                candidates.push(random);
            }
            let mut best: Option<(f64, usize)> = None;
            for &s in &candidates {
                let d = self.st.move_delta(i, s);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, s));
                }
            }
            match best {
                Some((d, s)) if d < -ACCEPT_EPS => {
                    self.st.apply_move(i, s, d);
                    trace.push(self.st.dl);
                    moved += 1;
                }
                _ => {}
            }
        }
        moved
    }

    fn sweeps(&mut self, trace: &mut Vec<f64>) {
        for _ in 0..self.config.sweeps {
            if self.sweep(trace) == 0 {
                break;
            }
        }
    }

    /// Best sampled merge partner for every active block, cheapest first.
    fn merge_proposals(&mut self) -> Vec<(f64, usize, usize)> {
        let n = self.st.g.n;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, &r) in self.st.labels.iter().enumerate() {
            members[r].push(i);
        }
        let blocks = self.st.active.clone();
        let mut proposals = Vec::with_capacity(blocks.len());
        let mut tried: Vec<usize> = Vec::new();
        for &r in &blocks {
            tried.clear();
            for _ in 0..self.config.merge_candidates.max(1) {
                let v = members[r][self.rng.gen_range(0..members[r].len())];
                let adj = &self.st.g.adj[v];
                let s = if !adj.is_empty() && self.rng.gen_bool(0.9) {
                    self.st.labels[adj[self.rng.gen_range(0..adj.len())].0]
                } else {
                    blocks[self.rng.gen_range(0..blocks.len())]
                };
                if s != r && !tried.contains(&s) {
                    tried.push(s);
                }
            }
            let best = tried
                .iter()
                .map(|&s| (self.st.merge_delta(r, s), s))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((d, s)) = best {
                proposals.push((d, r, s));
            }
        }
        proposals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        proposals
    }

    /// Merges the cheapest proposals until `target` blocks remain, whether
    /// or not each merge lowers the DL.
    fn shrink_to(&mut self, target: usize) {
        while self.st.active.len() > target {
            let mut merged = 0;
            for (_, r, s) in self.merge_proposals() {
                if self.st.active.len() <= target {
                    break;
                }
                if !self.st.is_active(r) || !self.st.is_active(s) {
                    continue;
                }
                let d = self.st.merge_delta(r, s);
                self.st.apply_merge(r, s, d);
                merged += 1;
            }
            if merged == 0 {
                break;
            }
        }
    }

    /// Strictly improving merges only.
    fn improving_merges(&mut self, trace: &mut Vec<f64>) -> usize {
        let mut merged = 0;
        for (_, r, s) in self.merge_proposals() {
            if self.st.active.len() < 2 {
                break;
            }
            if !self.st.is_active(r) || !self.st.is_active(s) {
                continue;
            }
            let d = self.st.merge_delta(r, s);
            if d < -ACCEPT_EPS {
                self.st.apply_merge(r, s, d);
                trace.push(self.st.dl);
                merged += 1;
            }
        }
        merged
    }

    /// Agglomerative descent from one block per node to one block, shrinking
    /// the block count by `merge_ratio` per level and relaxing with node
    /// moves at every level. Returns the DL at each level and the labels of
    /// the best level.
    fn agglomerate(&mut self) -> (Vec<(usize, f64)>, Vec<usize>) {
        let mut scratch = Vec::new();
        self.sweeps(&mut scratch);
        let mut levels = vec![(self.st.active.len(), self.st.dl)];
        let mut best = (self.st.dl, self.st.labels.clone());
        while self.st.active.len() > 1 {
            let b = self.st.active.len();
            let target = ((b as f64 / self.config.merge_ratio).floor() as usize).clamp(1, b - 1);
            self.shrink_to(target);
            scratch.clear();
            self.sweeps(&mut scratch);
            levels.push((self.st.active.len(), self.st.dl));
            if self.st.dl < best.0 - ACCEPT_EPS {
                best = (self.st.dl, self.st.labels.clone());
            }
        }
        (levels, best.1)
    }

    /// Greedy descent from the current state; every accepted merge or move
    /// strictly lowers the DL.
    fn refine(&mut self) -> Vec<f64> {
        let mut trace = vec![self.st.dl];
        loop {
            let merged = self.improving_merges(&mut trace);
            let before = trace.len();
            self.sweeps(&mut trace);
            if merged == 0 && trace.len() == before {
                break;
            }
        }
        trace
    }
}

/// Relabels blocks to 0..B-1, largest block first, ties by smallest member.
fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut info: HashMap<usize, (usize, usize)> = HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        let entry = info.entry(l).or_insert((0, i));
        entry.0 += 1;
    }
    let mut blocks: Vec<(usize, usize, usize)> = info.into_iter().map(|(l, (n, first))| (l, n, first)).collect();
    blocks.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let remap: HashMap<usize, usize> = blocks.iter().enumerate().map(|(new, b)| (b.0, new)).collect();
    labels.iter().map(|l| remap[l]).collect()
}

/// Description length of `labels` (any integer block ids) on `net`.
pub fn description_length(net: &ProximityNetwork, labels: &[usize], config: &SbmConfig) -> Result<f64> {
    if labels.len() != net.num_nodes() {
        return Err(Error::InvalidArgument("one label per node required".into()));
    }
    let g = Multigraph::from_network(net, config)?;
    let compact = canonical_labels(labels);
    Ok(BlockState::new(&g, compact).dl)
}

/// Fits the block model with a single seed.
pub fn fit_sbm(net: &ProximityNetwork, seed: u64, config: &SbmConfig) -> Result<SbmFit> {
    config.validate()?;
    let g = Multigraph::from_network(net, config)?;
    let mut fitter = Fitter {
        st: BlockState::new(&g, (0..g.n).collect()),
        rng: ChaCha8Rng::seed_from_u64(seed),
        config: config.clone(),
    };
    let (levels, best) = fitter.agglomerate();
    fitter.st.labels = best;
    fitter.st.rebuild();
    let trace = fitter.refine();
    let labels = canonical_labels(&fitter.st.labels);
    let dl = BlockState::new(&g, labels.clone()).dl;
    let drift = (dl - fitter.st.dl).abs();
    if drift > 1e-6 * dl.abs().max(1.0) {
        return Err(Error::Invariant(format!(
            "incremental description length drifted by {drift}"
        )));
    }
    let mut assignment = CommunityAssignment::from_labels(net.names().to_vec(), labels)?;
    assignment.description_length = Some(dl);
    assignment.seed = Some(seed);
    Ok(SbmFit {
        assignment,
        levels,
        trace,
    })
}

/// Independent restarts with seeds `seed, seed+1, ...`; lowest DL wins, ties
/// go to the earlier restart.
pub fn fit_sbm_restarts(
    net: &ProximityNetwork,
    seed: u64,
    restarts: usize,
    config: &SbmConfig,
) -> Result<SbmFit> {
    use rayon::prelude::*;
    let fits: Vec<Result<SbmFit>> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|k| fit_sbm(net, seed.wrapping_add(k), config))
        .collect();
    let mut best: Option<SbmFit> = None;
    for fit in fits {
        let fit = fit?;
        let better = best.as_ref().map_or(true, |b| {
            fit.assignment.description_length < b.assignment.description_length
        });
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Normalized mutual information with arithmetic-mean normalization.
/// Two single-cluster labelings score 1.
pub fn normalized_mutual_information(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len() as f64;
    if a.is_empty() {
        return 1.0;
    }
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pa: HashMap<usize, f64> = HashMap::new();
    let mut pb: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *pa.entry(x).or_default() += 1.0;
        *pb.entry(y).or_default() += 1.0;
    }
    let entropy = |m: &HashMap<usize, f64>| -> f64 {
        m.values().map(|&c| {
            let p = c / n;
            -p * p.ln()
        }).sum()
    };
    let (ha, hb) = (entropy(&pa), entropy(&pb));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c / n;
            pxy * (pxy / ((pa[&x] / n) * (pb[&y] / n))).ln()
        })
        .sum();
    (2.0 * mi / (ha + hb)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberMentions {
    pub tool: String,
    pub mentions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisionRca {
    pub division: String,
    pub rca: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitySummary {
    pub id: usize,
    pub size: usize,
    pub top_members: Vec<MemberMentions>,
    pub top_divisions: Vec<DivisionRca>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityReport {
    pub model: String,
    pub num_blocks: usize,
    pub description_length: Option<f64>,
    pub seed: Option<u64>,
    pub communities: Vec<CommunitySummary>,
}

/// Per community: size, ten most-mentioned members, and the divisions with
/// the highest community-level RCA above 1 (at most five).
pub fn describe_communities(a: &CommunityAssignment, m: &CountMatrix) -> Result<CommunityReport> {
    let totals: HashMap<&str, u64> = m
        .cols()
        .iter()
        .map(String::as_str)
        .zip(m.col_totals())
        .collect();
    let mut members: Vec<Vec<MemberMentions>> = vec![Vec::new(); a.num_blocks()];
    for (name, &l) in a.names().iter().zip(a.labels()) {
        members[l].push(MemberMentions {
            tool: name.clone(),
            mentions: totals.get(name.as_str()).copied().unwrap_or(0),
        });
    }
    let crca = if m.total() > 0 {
        community_rca(m, a).ok()
    } else {
        None
    };
    let communities = members
        .into_iter()
        .enumerate()
        .map(|(id, mut list)| {
            let size = list.len();
            list.sort_by(|x, y| y.mentions.cmp(&x.mentions).then_with(|| x.tool.cmp(&y.tool)));
            list.truncate(10);
            let mut top_divisions = Vec::new();
            if let Some(c) = &crca {
                for (r, division) in c.rca.rows().iter().enumerate() {
                    if let Some(v) = c.rca.get(r, id) {
                        if v > 1.0 {
                            top_divisions.push(DivisionRca {
                                division: division.clone(),
                                rca: v,
                            });
                        }
                    }
                }
                top_divisions.sort_by(|x, y| y.rca.total_cmp(&x.rca).then_with(|| x.division.cmp(&y.division)));
                top_divisions.truncate(5);
            }
            CommunitySummary {
                id,
                size,
                top_members: list,
                top_divisions,
            }
        })
        .collect();
    Ok(CommunityReport {
        model: MODEL_NAME.to_string(),
        num_blocks: a.num_blocks(),
        description_length: a.description_length(),
        seed: a.seed(),
        communities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(n: usize, edges: &[(usize, usize)]) -> ProximityNetwork {
        ProximityNetwork::new(
            (0..n).map(|i| format!("v{i:03}")).collect(),
            edges.iter().map(|&(a, b)| (a, b, 1.0)),
        )
        .unwrap()
    }

    fn two_cliques() -> ProximityNetwork {
        let mut edges = Vec::new();
        for base in [0, 10] {
            for i in 0..10 {
                for j in (i + 1)..10 {
                    edges.push((base + i, base + j));
                }
            }
        }
        edges.push((0, 10));
        net(20, &edges)
    }

    #[test]
    fn ln_factorial_matches_stirling_beyond_table() {
        let lf = LnFactorial::new(3000);
        let small = LnFactorial::new(10);
        for n in [11u64, 50, 500, 2999] {
            assert!((lf.get(n) - small.get(n)).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn incremental_deltas_match_full_recompute() {
        let g = Multigraph::from_network(&two_cliques(), &SbmConfig::default()).unwrap();
        let mut st = BlockState::new(&g, (0..20).map(|i| i % 3).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let i = rng.gen_range(0..20);
            let s = st.active[rng.gen_range(0..st.active.len())];
            if s == st.labels[i] {
                continue;
            }
            st.collect_neighbour_blocks(i);
            let d = st.move_delta(i, s);
            st.apply_move(i, s, d);
            assert!((st.dl - st.full_dl()).abs() < 1e-8);
        }
        while st.active.len() > 1 {
            let (r, s) = (st.active[0], st.active[1]);
            let d = st.merge_delta(r, s);
            st.apply_merge(r, s, d);
            assert!((st.dl - st.full_dl()).abs() < 1e-8);
        }
    }

    #[test]
    fn weighted_multiplicity_deltas_match() {
        let base = two_cliques();
        let edges: Vec<(usize, usize, f64)> = base
            .edges()
            .iter()
            .enumerate()
            .map(|(k, e)| (e.source, e.target, 0.05 + (k % 7) as f64 / 7.5))
            .collect();
        let weighted = ProximityNetwork::new(base.names().to_vec(), edges).unwrap();
        let config = SbmConfig {
            binarize: false,
            multiplicity_scale: 4,
            ..Default::default()
        };
        let g = Multigraph::from_network(&weighted, &config).unwrap();
        assert!(g.ln_mult > 0.0);
        let mut st = BlockState::new(&g, (0..20).map(|i| i % 4).collect());
        for i in 0..20 {
            let s = st.active[(i * 7) % st.active.len()];
            if s != st.labels[i] {
                st.collect_neighbour_blocks(i);
                let d = st.move_delta(i, s);
                st.apply_move(i, s, d);
                assert!((st.dl - st.full_dl()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn two_cliques_split_in_two() {
        let fit = fit_sbm(&two_cliques(), 1, &SbmConfig::default()).unwrap();
        let labels = fit.assignment.labels();
        assert_eq!(fit.assignment.num_blocks(), 2);
        assert!(labels[..10].iter().all(|&l| l == labels[0]));
        assert!(labels[10..].iter().all(|&l| l == labels[10]));
        assert!(fit.trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn complete_graph_is_one_block() {
        let n = 12;
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let g = net(n, &edges);
        let config = SbmConfig::default();
        let fit = fit_sbm(&g, 5, &config).unwrap();
        let one = description_length(&g, &vec![0; n], &config).unwrap();
        assert!(one <= fit.assignment.description_length().unwrap() + 1e-9);
        assert_eq!(fit.assignment.num_blocks(), 1);
    }

    #[test]
    fn empty_network_is_rejected() {
        let g = ProximityNetwork::new(Vec::new(), Vec::new()).unwrap();
        assert!(matches!(fit_sbm(&g, 0, &SbmConfig::default()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fit_is_deterministic_and_recomputable() {
        let g = two_cliques();
        let config = SbmConfig::default();
        let a = fit_sbm(&g, 9, &config).unwrap();
        let b = fit_sbm(&g, 9, &config).unwrap();
        assert_eq!(a, b);
        let dl = description_length(&g, a.assignment.labels(), &config).unwrap();
        assert!((dl - a.assignment.description_length().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn dl_is_label_permutation_invariant() {
        let g = two_cliques();
        let config = SbmConfig::default();
        let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
        let permuted: Vec<usize> = labels.iter().map(|&l| [7, 2, 5][l]).collect();
        let a = description_length(&g, &labels, &config).unwrap();
        let b = description_length(&g, &permuted, &config).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn nmi_edge_cases() {
        assert_eq!(normalized_mutual_information(&[0, 0, 1, 1], &[5, 5, 3, 3]), 1.0);
        assert!(normalized_mutual_information(&[0, 1, 0, 1], &[0, 0, 1, 1]).abs() < 1e-12);
        assert_eq!(normalized_mutual_information(&[0, 0], &[1, 1]), 1.0);
    }

    #[test]
    fn from_labels_requires_contiguous_ids() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(CommunityAssignment::from_labels(names.clone(), vec![0, 2]).is_err());
        assert!(CommunityAssignment::from_labels(names, vec![1, 0]).is_ok());
    }

    #[test]
    fn report_lists_singleton_and_sizes() {
        let m = CountMatrix::from_dense(
            vec!["31".into(), "52".into()],
            vec!["a".into(), "b".into(), "c".into()],
            vec![5, 1, 0, 0, 2, 9],
        )
        .unwrap();
        let a = CommunityAssignment::from_labels(m.cols().to_vec(), vec![0, 0, 1]).unwrap();
        let report = describe_communities(&a, &m).unwrap();
        assert_eq!(report.communities[1].size, 1);
        assert_eq!(report.communities[1].top_members[0].tool, "c");
        let sizes: Vec<usize> = report.communities.iter().map(|c| c.size).collect();
        assert_eq!(sizes, a.sizes());
        assert_eq!(report.communities[0].top_members[0].tool, "a");
        assert_eq!(report.communities[1].top_divisions[0].division, "52");
    }
}
