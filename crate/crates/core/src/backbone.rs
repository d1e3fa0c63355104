//! Network backbone: disparity-filter significant edges plus a maximum
//! spanning forest that keeps every component connected.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::proximity::ProximityNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Filter,
    Mst,
    Both,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Filter => "filter",
            Origin::Mst => "mst",
            Origin::Both => "both",
        }
    }
}

/// Edge of the backbone; `source < target` index into the network's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
    /// Smaller of the two node-local disparity p-values.
    pub significance: f64,
    pub origin: Origin,
}

/// Node-local p-value `(1 - w/s)^(k-1)` of an edge of weight `w` at a node of
/// strength `s` and degree `k`. Degree-1 nodes give 1.
pub fn disparity_pvalue(weight: f64, strength: f64, degree: usize) -> f64 {
    if degree < 2 {
        return 1.0;
    }
    let p = (1.0 - weight / strength).max(0.0);
    p.powi((degree - 1) as i32)
}

/// Per-edge pair of node-local p-values, in `net.edges()` order.
pub fn node_local_pvalues(net: &ProximityNetwork) -> Vec<(f64, f64)> {
    let n = net.num_nodes();
    let mut strength = vec![0.0f64; n];
    let mut degree = vec![0usize; n];
    for e in net.edges() {
        strength[e.source] += e.weight;
        strength[e.target] += e.weight;
        degree[e.source] += 1;
        degree[e.target] += 1;
    }
    net.edges()
        .par_iter()
        .map(|e| {
            (
                disparity_pvalue(e.weight, strength[e.source], degree[e.source]),
                disparity_pvalue(e.weight, strength[e.target], degree[e.target]),
            )
        })
        .collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

/// Edges significant at either endpoint: `min(p_source, p_target) < alpha`.
pub fn disparity_filter(net: &ProximityNetwork, alpha: f64) -> Result<Vec<BackboneEdge>> {
    check_alpha(alpha)?;
    Ok(net
        .edges()
        .iter()
        .zip(node_local_pvalues(net))
        .filter_map(|(e, (ps, pt))| {
            let significance = ps.min(pt);
            (significance < alpha).then(|| BackboneEdge {
                source: e.source,
                target: e.target,
                weight: e.weight,
                significance,
                origin: Origin::Filter,
            })
        })
        .collect())
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Maximum spanning forest by Kruskal: descending weight, ties by the
/// lexicographic order of endpoint names.
pub fn max_spanning_tree(net: &ProximityNetwork) -> Vec<BackboneEdge> {
    let names = net.names();
    let key = |s: usize, t: usize| {
        let (a, b) = (&names[s], &names[t]);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    };
    let pvalues = node_local_pvalues(net);
    let mut order: Vec<usize> = (0..net.num_edges()).collect();
    let edges = net.edges();
    order.sort_by(|&x, &y| {
        let (ex, ey) = (&edges[x], &edges[y]);
        ey.weight
            .total_cmp(&ex.weight)
            .then_with(|| key(ex.source, ex.target).cmp(&key(ey.source, ey.target)))
    });
    let mut sets = DisjointSets::new(net.num_nodes());
    let mut tree = Vec::with_capacity(net.num_nodes().saturating_sub(1));
    for i in order {
        let e = &edges[i];
        if sets.union(e.source, e.target) {
            let (ps, pt) = pvalues[i];
            tree.push(BackboneEdge {
                source: e.source,
                target: e.target,
                weight: e.weight,
                significance: ps.min(pt),
                origin: Origin::Mst,
            });
        }
    }
    tree
}

/// Union of filter and spanning-forest edges, sorted by endpoints.
pub fn backbone(net: &ProximityNetwork, alpha: f64, with_mst: bool) -> Result<Vec<BackboneEdge>> {
    let mut by_pair: std::collections::BTreeMap<(usize, usize), BackboneEdge> = disparity_filter(net, alpha)?
        .into_iter()
        .map(|e| ((e.source, e.target), e))
        .collect();
    if with_mst {
        for e in max_spanning_tree(net) {
            by_pair
                .entry((e.source, e.target))
                .and_modify(|f| f.origin = Origin::Both)
                .or_insert(e);
        }
    }
    Ok(by_pair.into_values().collect())
}

/// Edge list `(i, j, phi, significance, origin)`.
pub fn write_backbone(path: &Path, net: &ProximityNetwork, edges: &[BackboneEdge]) -> Result<()> {
    let mut w = io::writer(path)?;
    w.write_record(["i", "j", "phi", "significance", "origin"])?;
    for e in edges {
        w.write_record([
            net.names()[e.source].as_str(),
            net.names()[e.target].as_str(),
            &io::fmt_f64(e.weight),
            &io::fmt_f64(e.significance),
            e.origin.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(n: usize, edges: &[(usize, usize, f64)]) -> ProximityNetwork {
        ProximityNetwork::new((0..n).map(|i| format!("n{i}")).collect(), edges.iter().copied()).unwrap()
    }

    #[test]
    fn equal_pair_is_not_significant() {
        let g = net(3, &[(0, 1, 0.5), (0, 2, 0.5)]);
        let p = node_local_pvalues(&g);
        assert_eq!(p[0].0, 0.5);
        // Leaves have degree 1.
        assert_eq!(p[0].1, 1.0);
        assert!(disparity_filter(&g, 0.05).unwrap().is_empty());
    }

    #[test]
    fn dominant_edge_of_ten_is_retained() {
        let mut edges = vec![(0, 1, 0.9)];
        edges.extend((2..11).map(|j| (0, j, 0.1 / 9.0)));
        let g = net(11, &edges);
        let p = node_local_pvalues(&g)[0].0;
        let expected = (1.0f64 - 0.9 / 1.0).powi(9);
        assert!((p - expected).abs() <= 1e-12 * expected.max(1e-300) + 1e-24);
        let kept = disparity_filter(&g, 0.05).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!((kept[0].source, kept[0].target), (0, 1));
    }

    #[test]
    fn alpha_domain() {
        let g = net(2, &[(0, 1, 1.0)]);
        for a in [0.0, 1.0, -0.5, 2.0] {
            assert!(disparity_filter(&g, a).is_err());
        }
    }

    #[test]
    fn triangle_mst_keeps_heaviest_pair() {
        let g = net(3, &[(0, 1, 0.9), (1, 2, 0.8), (0, 2, 0.1)]);
        let t = max_spanning_tree(&g);
        let mut w: Vec<f64> = t.iter().map(|e| e.weight).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(w, [0.9, 0.8]);
    }

    #[test]
    fn path_is_its_own_tree() {
        let g = net(4, &[(0, 1, 0.3), (1, 2, 0.2), (2, 3, 0.7)]);
        assert_eq!(max_spanning_tree(&g).len(), 3);
    }

    #[test]
    fn mst_ties_follow_name_order() {
        let g = ProximityNetwork::new(
            vec!["b".into(), "a".into(), "c".into()],
            [(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5)],
        )
        .unwrap();
        let t = max_spanning_tree(&g);
        let pairs: Vec<(&str, &str)> = t
            .iter()
            .map(|e| (g.names()[e.source].as_str(), g.names()[e.target].as_str()))
            .collect();
        // (a,b) then (a,c); (b,c) would close a cycle.
        assert_eq!(pairs, [("b", "a"), ("a", "c")]);
    }

    #[test]
    fn empty_network_has_empty_backbone() {
        let g = net(3, &[]);
        assert!(backbone(&g, 0.05, true).unwrap().is_empty());
    }

    #[test]
    fn origin_tagging() {
        let mut edges = vec![(0, 1, 0.9)];
        edges.extend((2..11).map(|j| (0, j, 0.01)));
        let g = net(11, &edges);
        let b = backbone(&g, 0.05, true).unwrap();
        let first = b.iter().find(|e| (e.source, e.target) == (0, 1)).unwrap();
        assert_eq!(first.origin, Origin::Both);
        assert_eq!(b.len(), 10);
        assert!(b.iter().filter(|e| e.origin == Origin::Mst).count() == 9);
        let no_mst = backbone(&g, 0.05, false).unwrap();
        assert_eq!(no_mst.len(), 1);
        assert_eq!(no_mst[0].origin, Origin::Filter);
    }
}
