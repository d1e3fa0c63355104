//! Tool-tool proximity from co-specialization and the weighted network it
//! induces.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::specialization::SpecializationSet;

/// Symmetric proximity matrix over an ordered entity universe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    entities: Vec<String>,
    values: Vec<f64>,
    basis_count: Vec<usize>,
}

impl ProximityMatrix {
    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.entities.len() + j]
    }

    /// Number of disciplines specializing in each entity.
    pub fn basis_count(&self) -> &[usize] {
        &self.basis_count
    }

    /// Entities no discipline specializes in; they have no proximity to anything.
    pub fn unsupported(&self) -> Vec<&str> {
        self.entities
            .iter()
            .zip(&self.basis_count)
            .filter(|(_, &n)| n == 0)
            .map(|(e, _)| e.as_str())
            .collect()
    }
}

/// Proximity as `|D_i & D_j| / max(|D_i|, |D_j|)`, where `D_i` is the set of
/// disciplines specializing in entity `i`. The diagonal is 1 for entities
/// with a nonempty basis and 0 otherwise. Specialization members outside
/// `entities` are ignored.
pub fn proximity(spec: &SpecializationSet, entities: &[String]) -> ProximityMatrix {
    let n = entities.len();
    let index: HashMap<&str, usize> = entities
        .iter()
        .enumerate()
        .map(|(i, e)| (e.as_str(), i))
        .collect();
    let mut basis = vec![0usize; n];
    let mut shared = vec![0u32; n * n];
    for members in spec.members.values() {
        let ids: Vec<usize> = members
            .iter()
            .filter_map(|e| index.get(e.as_str()).copied())
            .collect();
        for (a, &i) in ids.iter().enumerate() {
            basis[i] += 1;
            for &j in &ids[a + 1..] {
                shared[i * n + j] += 1;
                shared[j * n + i] += 1;
            }
        }
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        if basis[i] > 0 {
            values[i * n + i] = 1.0;
        }
        for j in (i + 1)..n {
            let s = shared[i * n + j];
            if s > 0 {
                let phi = s as f64 / basis[i].max(basis[j]) as f64;
                values[i * n + j] = phi;
                values[j * n + i] = phi;
            }
        }
    }
    ProximityMatrix {
        entities: entities.to_vec(),
        values,
        basis_count: basis,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeAttrs {
    pub total_mentions: Option<u64>,
    pub community: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Undirected weighted tool network. Edges satisfy `source < target`, carry
/// a weight in (0, 1], and appear once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProximityNetwork {
    names: Vec<String>,
    attrs: Vec<NodeAttrs>,
    edges: Vec<Edge>,
}

impl ProximityNetwork {
    /// Builds a network from raw parts, normalising edge orientation and
    /// rejecting self-loops, duplicates, and out-of-range weights.
    pub fn new(names: Vec<String>, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let n = names.len();
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop on node {a}")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidArgument(format!("edge weight {w} outside (0,1]")));
            }
            let (s, t) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((s, t)) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({s},{t})")));
            }
            out.push(Edge {
                source: s,
                target: t,
                weight: w,
            });
        }
        out.sort_by_key(|e| (e.source, e.target));
        Ok(ProximityNetwork {
            attrs: vec![NodeAttrs::default(); n],
            names,
            edges: out,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn attrs(&self) -> &[NodeAttrs] {
        &self.attrs
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn set_total_mentions(&mut self, totals: &HashMap<String, u64>) {
        for (a, name) in self.attrs.iter_mut().zip(&self.names) {
            a.total_mentions = totals.get(name).copied();
        }
    }

    pub fn set_communities(&mut self, labels: &HashMap<String, usize>) {
        for (a, name) in self.attrs.iter_mut().zip(&self.names) {
            a.community = labels.get(name).copied();
        }
    }

    /// Adjacency lists of (neighbor, weight), sorted by neighbor.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.names.len()];
        for e in &self.edges {
            adj[e.source].push((e.target, e.weight));
            adj[e.target].push((e.source, e.weight));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        adj
    }

    /// Connected-component id per node, numbered by first appearance.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.names.len()];
        let mut next = 0;
        for start in 0..self.names.len() {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = next;
            while let Some(v) = stack.pop() {
                for &(u, _) in &adj[v] {
                    if comp[u] == usize::MAX {
                        comp[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// Edge list `(tool_i, tool_j, phi)`.
    pub fn write_edges(&self, path: &Path) -> Result<()> {
        let mut w = io::writer(path)?;
        w.write_record(["tool_i", "tool_j", "phi"])?;
        for e in &self.edges {
            w.write_record([
                self.names[e.source].as_str(),
                self.names[e.target].as_str(),
                &io::fmt_f64(e.weight),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads an edge list over a known node universe. Endpoints absent from
    /// `names` are a data error.
    pub fn read_edges(path: &Path, names: Vec<String>) -> Result<Self> {
        let index: HashMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut rdr = io::reader(path)?;
        let mut edges = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 3 {
                return Err(Error::Data(format!("short edge row {rec:?}")));
            }
            let lookup = |s: &str| {
                index
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("edge endpoint {s:?} not in node set")))
            };
            let w: f64 = rec[2]
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("bad weight {:?}", &rec[2])))?;
            edges.push((lookup(&rec[0])?, lookup(&rec[1])?, w));
        }
        Self::new(names, edges).map_err(|e| Error::Data(e.to_string()))
    }
}

/// All pairs with positive proximity become edges; `node_attrs` is keyed by
/// entity name.
pub fn to_network(p: &ProximityMatrix, node_attrs: &BTreeMap<String, NodeAttrs>) -> ProximityNetwork {
    let n = p.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = p.get(i, j);
            if w > 0.0 {
                edges.push(Edge {
                    source: i,
                    target: j,
                    weight: w,
                });
            }
        }
    }
    let attrs = p
        .entities
        .iter()
        .map(|e| node_attrs.get(e).cloned().unwrap_or_default())
        .collect();
    ProximityNetwork {
        names: p.entities.clone(),
        attrs,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::specialization::Comparison;

    fn spec(members: &[(&str, &[&str])]) -> SpecializationSet {
        SpecializationSet {
            threshold: 1.0,
            comparison: Comparison::Strict,
            members: members
                .iter()
                .map(|(d, es)| (d.to_string(), es.iter().map(|e| e.to_string()).collect::<BTreeSet<_>>()))
                .collect(),
        }
    }

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_bases_give_one() {
        let s = spec(&[("a", &["x", "y"]), ("b", &["x", "y"])]);
        let p = proximity(&s, &names(&["x", "y"]));
        assert_eq!(p.get(0, 1), 1.0);
    }

    #[test]
    fn disjoint_bases_give_zero() {
        let s = spec(&[("a", &["x"]), ("b", &["y"])]);
        let p = proximity(&s, &names(&["x", "y"]));
        assert_eq!(p.get(0, 1), 0.0);
        assert_eq!(p.get(0, 0), 1.0);
    }

    #[test]
    fn half_overlap() {
        // D_x = {a,b,c}, D_y = {b,c,d,e}
        let s = spec(&[
            ("a", &["x"]),
            ("b", &["x", "y"]),
            ("c", &["x", "y"]),
            ("d", &["y"]),
            ("e", &["y"]),
        ]);
        let p = proximity(&s, &names(&["x", "y"]));
        assert_eq!(p.get(0, 1), 0.5);
        assert_eq!(p.get(1, 0), 0.5);
        assert_eq!(p.basis_count(), [3, 4]);
    }

    #[test]
    fn unsupported_entities_stay_isolated() {
        let s = spec(&[("a", &["x"])]);
        let p = proximity(&s, &names(&["x", "z"]));
        assert_eq!(p.unsupported(), ["z"]);
        assert_eq!(p.get(1, 1), 0.0);
        let net = to_network(&p, &BTreeMap::new());
        assert_eq!(net.num_nodes(), 2);
        assert_eq!(net.num_edges(), 0);
    }

    #[test]
    fn triangle_of_unit_weights() {
        let s = spec(&[("a", &["x", "y", "z"])]);
        let p = proximity(&s, &names(&["x", "y", "z"]));
        let net = to_network(&p, &BTreeMap::new());
        assert_eq!(net.num_edges(), 3);
        assert!(net.edges().iter().all(|e| e.weight == 1.0 && e.source < e.target));
    }

    #[test]
    fn network_rejects_bad_edges() {
        let n = names(&["a", "b"]);
        assert!(ProximityNetwork::new(n.clone(), [(0, 0, 0.5)]).is_err());
        assert!(ProximityNetwork::new(n.clone(), [(0, 1, 0.5), (1, 0, 0.5)]).is_err());
        assert!(ProximityNetwork::new(n.clone(), [(0, 1, 0.0)]).is_err());
        assert!(ProximityNetwork::new(n, [(0, 2, 0.5)]).is_err());
    }

    #[test]
    fn components_are_labelled() {
        let net = ProximityNetwork::new(names(&["a", "b", "c", "d"]), [(0, 1, 1.0), (2, 3, 0.5)]).unwrap();
        assert_eq!(net.components(), [0, 0, 1, 1]);
    }
}
