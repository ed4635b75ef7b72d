//! Participants, the undirected edges that carry items between them, and the
//! per-edge screening counts accumulated during a search.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an edge in [`Network::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Undirected communication network over dense node ids `0..node_count`.
///
/// Edges are stored once each as `(u, v)` with `u < v`, sorted
/// lexicographically. Optional string labels map external names to ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<BTreeSet<usize>>,
    edge_index: HashMap<(usize, usize), EdgeId>,
    labels: Vec<String>,
}

impl Network {
    /// Builds a network, canonicalising each edge to `u < v` and dropping
    /// duplicates (in either orientation).
    pub fn new(node_count: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::EmptyNetwork);
        }
        let mut canon = BTreeSet::new();
        for &(a, b) in edge_list {
            for node in [a, b] {
                if node >= node_count {
                    return Err(Error::EndpointOutOfRange { node, node_count });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            canon.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = canon.into_iter().collect();
        let mut adjacency = vec![BTreeSet::new(); node_count];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (i, &(u, v)) in edges.iter().enumerate() {
            adjacency[u].insert(v);
            adjacency[v].insert(u);
            edge_index.insert((u, v), EdgeId(i));
        }
        let labels = (0..node_count).map(|i| i.to_string()).collect();
        Ok(Self {
            node_count,
            edges,
            adjacency,
            edge_index,
            labels,
        })
    }

    /// Builds a network from string labels. Edge endpoints must name a label.
    pub fn from_labels<S: AsRef<str>, T: AsRef<str>>(labels: &[S], edge_list: &[(T, T)]) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if lookup.insert(l.as_ref().to_string(), i).is_some() {
                return Err(Error::DuplicateLabel(l.as_ref().to_string()));
            }
        }
        let resolve = |s: &T| {
            lookup
                .get(s.as_ref())
                .copied()
                .ok_or_else(|| Error::UnknownLabel(s.as_ref().to_string()))
        };
        let pairs = edge_list
            .iter()
            .map(|(a, b)| Ok((resolve(a)?, resolve(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut net = Self::new(labels.len(), &pairs)?;
        net.labels = labels.iter().map(|l| l.as_ref().to_string()).collect();
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> (usize, usize) {
        self.edges[id.0]
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).map(EdgeId)
    }

    /// Looks up the edge joining `a` and `b`, in either order.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<EdgeId> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn neighbours(&self, node: usize) -> &BTreeSet<usize> {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn node_by_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Pairs of edges that share an endpoint (the line graph), each listed once
    /// with the smaller edge id first.
    pub fn line_graph_pairs(&self) -> Vec<(usize, usize)> {
        let mut incident = vec![Vec::new(); self.node_count];
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            incident[u].push(i);
            incident[v].push(i);
        }
        let mut pairs = BTreeSet::new();
        for list in &incident {
            for (a, &e) in list.iter().enumerate() {
                for &f in &list[a + 1..] {
                    pairs.insert((e.min(f), e.max(f)));
                }
            }
        }
        pairs.into_iter().collect()
    }

    /// Connected components as sorted node lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.node_count];
        let mut out = Vec::new();
        for start in 0..self.node_count {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(x) = stack.pop() {
                comp.push(x);
                for &y in &self.adjacency[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// A single screened item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub edge: EdgeId,
    pub relevant: bool,
}

/// Per-edge screened (`n`) and relevant (`y`) counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCount {
    pub n: u64,
    pub y: u64,
}

/// Sufficient statistics of the screening history, one count pair per edge.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeStats {
    counts: Vec<EdgeCount>,
}

impl EdgeStats {
    pub fn new(edge_count: usize) -> Self {
        Self {
            counts: vec![EdgeCount::default(); edge_count],
        }
    }

    pub fn for_network(net: &Network) -> Self {
        Self::new(net.edge_count())
    }

    /// Builds stats from explicit counts, checking `y <= n` on every edge.
    pub fn from_counts(counts: Vec<EdgeCount>) -> Result<Self> {
        if let Some(c) = counts.iter().find(|c| c.y > c.n) {
            return Err(Error::InconsistentCounts { n: c.n, y: c.y });
        }
        Ok(Self { counts })
    }

    pub fn record(&mut self, obs: Observation) -> Result<()> {
        let c = self
            .counts
            .get_mut(obs.edge.0)
            .ok_or_else(|| Error::UnknownEdge(obs.edge.to_string()))?;
        c.n += 1;
        if obs.relevant {
            c.y += 1;
        }
        Ok(())
    }

    /// Value-semantics variant of [`EdgeStats::record`].
    pub fn with_observation(&self, obs: Observation) -> Result<Self> {
        let mut next = self.clone();
        next.record(obs)?;
        Ok(next)
    }

    pub fn get(&self, edge: EdgeId) -> EdgeCount {
        self.counts[edge.0]
    }

    pub fn counts(&self) -> &[EdgeCount] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_screened(&self) -> u64 {
        self.counts.iter().map(|c| c.n).sum()
    }

    /// Edges with at least one screened item, in edge order.
    pub fn observed_edges(&self) -> Vec<EdgeId> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.n > 0)
            .map(|(i, _)| EdgeId(i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_network() {
        let net = Network::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.edge_count(), 2);
        assert_eq!(net.neighbours(1).iter().copied().collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn isolated_node() {
        let net = Network::new(1, &[]).unwrap();
        assert_eq!(net.edge_count(), 0);
        assert!(net.neighbours(0).is_empty());
    }

    #[test]
    fn duplicates_and_orientation_collapse() {
        let a = Network::new(3, &[(0, 1), (1, 2)]).unwrap();
        let b = Network::new(3, &[(1, 0), (0, 1), (1, 2)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn build_errors() {
        assert_eq!(Network::new(0, &[]), Err(Error::EmptyNetwork));
        assert_eq!(Network::new(3, &[(1, 1)]), Err(Error::SelfLoop(1)));
        assert_eq!(
            Network::new(3, &[(0, 3)]),
            Err(Error::EndpointOutOfRange { node: 3, node_count: 3 })
        );
    }

    #[test]
    fn adjacency_matches_edges() {
        let net = Network::new(5, &[(4, 0), (2, 3), (0, 2), (3, 2)]).unwrap();
        for (u, v) in net.edges() {
            assert!(u < v);
            assert!(net.neighbours(*u).contains(v));
            assert!(net.neighbours(*v).contains(u));
        }
        let degree_sum: usize = (0..5).map(|i| net.degree(i)).sum();
        assert_eq!(degree_sum, 2 * net.edge_count());
    }

    #[test]
    fn labels_resolve() {
        let net = Network::from_labels(&["a", "b", "c"], &[("c", "b"), ("a", "b")]).unwrap();
        assert_eq!(net.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(net.node_by_label("c"), Some(2));
        assert!(matches!(
            Network::from_labels(&["a"], &[("a", "z")]),
            Err(Error::UnknownLabel(_))
        ));
        assert!(matches!(
            Network::from_labels::<_, &str>(&["a", "a"], &[]),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn counter_semantics() {
        let mut stats = EdgeStats::new(2);
        stats
            .record(Observation { edge: EdgeId(0), relevant: true })
            .unwrap();
        assert_eq!(stats.get(EdgeId(0)), EdgeCount { n: 1, y: 1 });
        let stats = EdgeStats::from_counts(vec![EdgeCount { n: 3, y: 1 }]).unwrap();
        let next = stats
            .with_observation(Observation { edge: EdgeId(0), relevant: false })
            .unwrap();
        assert_eq!(next.get(EdgeId(0)), EdgeCount { n: 4, y: 1 });
        assert_eq!(stats.get(EdgeId(0)), EdgeCount { n: 3, y: 1 });
    }

    #[test]
    fn line_sequence_counts() {
        // Y01=0, Y12=0, Y12=1, Y12=0, Y01=0, Y12=1, Y01=1
        let seq = [(0, false), (1, false), (1, true), (1, false), (0, false), (1, true), (0, true)];
        let mut stats = EdgeStats::new(2);
        for (e, r) in seq {
            stats.record(Observation { edge: EdgeId(e), relevant: r }).unwrap();
        }
        assert_eq!(stats.get(EdgeId(0)), EdgeCount { n: 3, y: 1 });
        assert_eq!(stats.get(EdgeId(1)), EdgeCount { n: 4, y: 2 });
    }

    #[test]
    fn unknown_edge_rejected() {
        let mut stats = EdgeStats::new(1);
        assert!(stats
            .record(Observation { edge: EdgeId(1), relevant: true })
            .is_err());
        assert!(EdgeStats::from_counts(vec![EdgeCount { n: 1, y: 2 }]).is_err());
    }

    #[test]
    fn line_graph_of_star() {
        let net = Network::new(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(net.line_graph_pairs(), vec![(0, 1), (0, 2), (1, 2)]);
    }
}
