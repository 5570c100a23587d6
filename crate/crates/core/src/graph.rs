//! Immutable attributed graph with contiguous neighbor lists.
//!
//! Edges are either directed (`src → dst`) or undirected. An undirected edge is
//! stored once in [`Graph::edges`] and appears in both endpoints' neighbor
//! lists in both directions. Messages in the layers flow along edge direction:
//! the neighborhood `N(v)` used for aggregation is the in-neighbor list.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

/// Default cap on node count for [`Graph::adjacency_dense`].
pub const DENSE_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub directed: bool,
}

impl Edge {
    pub fn undirected(a: NodeId, b: NodeId) -> Self {
        Self {
            src: a,
            dst: b,
            directed: false,
        }
    }

    pub fn directed(src: NodeId, dst: NodeId) -> Self {
        Self {
            src,
            dst,
            directed: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
    Both,
}

/// CSR-style adjacency: `targets[offsets[v]..offsets[v + 1]]`, sorted per node.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl Csr {
    fn build(num_nodes: usize, pairs: &[(NodeId, NodeId)]) -> Self {
        let mut offsets = vec![0usize; num_nodes + 1];
        for &(owner, _) in pairs {
            offsets[owner + 1] += 1;
        }
        for v in 0..num_nodes {
            offsets[v + 1] += offsets[v];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0; pairs.len()];
        for &(owner, t) in pairs {
            targets[fill[owner]] = t;
            fill[owner] += 1;
        }
        for v in 0..num_nodes {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self { offsets, targets }
    }

    fn list(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

#[derive(Clone, Debug)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    node_features: Matrix,
    edge_features: Option<Matrix>,
    in_adj: Csr,
    out_adj: Csr,
    /// Message list (source, target) ordered by target then source.
    msg_src: Arc<Vec<NodeId>>,
    msg_dst: Arc<Vec<NodeId>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.num_nodes == other.num_nodes
            && self.edges == other.edges
            && self.node_features == other.node_features
            && self.edge_features == other.edge_features
    }
}

impl Graph {
    /// Validates the edge list and builds the neighbor index.
    ///
    /// Rejects out-of-range ids, self-loops, feature row mismatches and any
    /// edge that duplicates an existing neighbor relation.
    pub fn new(
        num_nodes: usize,
        edges: Vec<Edge>,
        node_features: Matrix,
        edge_features: Option<Matrix>,
    ) -> Result<Self> {
        if node_features.rows() != num_nodes {
            return Err(Error::InvalidGraph(format!(
                "node_features has {} rows for {num_nodes} nodes",
                node_features.rows()
            )));
        }
        if let Some(ef) = &edge_features {
            if ef.rows() != edges.len() {
                return Err(Error::InvalidGraph(format!(
                    "edge_features has {} rows for {} edges",
                    ef.rows(),
                    edges.len()
                )));
            }
        }
        let mut in_pairs = Vec::with_capacity(edges.len() * 2);
        let mut out_pairs = Vec::with_capacity(edges.len() * 2);
        for (i, e) in edges.iter().enumerate() {
            for id in [e.src, e.dst] {
                if id >= num_nodes {
                    return Err(Error::InvalidGraph(format!(
                        "edge {i} references node {id} but num_nodes is {num_nodes}"
                    )));
                }
            }
            if e.src == e.dst {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} is a self-loop on node {}",
                    e.src
                )));
            }
            in_pairs.push((e.dst, e.src));
            out_pairs.push((e.src, e.dst));
            if !e.directed {
                in_pairs.push((e.src, e.dst));
                out_pairs.push((e.dst, e.src));
            }
        }
        let in_adj = Csr::build(num_nodes, &in_pairs);
        let out_adj = Csr::build(num_nodes, &out_pairs);
        for v in 0..num_nodes {
            if let Some(w) = in_adj.list(v).windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge {} -> {v}",
                    w[0]
                )));
            }
        }
        let mut msg_src = Vec::with_capacity(in_adj.targets.len());
        let mut msg_dst = Vec::with_capacity(in_adj.targets.len());
        for v in 0..num_nodes {
            for &u in in_adj.list(v) {
                msg_src.push(u);
                msg_dst.push(v);
            }
        }
        Ok(Self {
            num_nodes,
            edges,
            node_features,
            edge_features,
            in_adj,
            out_adj,
            msg_src: Arc::new(msg_src),
            msg_dst: Arc::new(msg_dst),
        })
    }

    /// Convenience constructor for an undirected graph from an edge list.
    pub fn undirected(num_nodes: usize, pairs: &[(NodeId, NodeId)], node_features: Matrix) -> Result<Self> {
        let edges = pairs.iter().map(|&(a, b)| Edge::undirected(a, b)).collect();
        Self::new(num_nodes, edges, node_features, None)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_features(&self) -> &Matrix {
        &self.node_features
    }

    pub fn edge_features(&self) -> Option<&Matrix> {
        self.edge_features.as_ref()
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.cols()
    }

    pub fn is_undirected(&self) -> bool {
        self.edges.iter().all(|e| !e.directed)
    }

    /// Sorted in-neighbors (message senders) of `v`.
    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        self.in_adj.list(v)
    }

    /// Sorted out-neighbors of `v`.
    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        self.out_adj.list(v)
    }

    pub fn neighbors(&self, v: NodeId, direction: Direction) -> Result<Vec<NodeId>> {
        if v >= self.num_nodes {
            return Err(Error::IndexOutOfRange {
                op: "neighbors",
                index: v,
                limit: self.num_nodes,
            });
        }
        Ok(match direction {
            Direction::In => self.in_neighbors(v).to_vec(),
            Direction::Out => self.out_neighbors(v).to_vec(),
            Direction::Both => {
                let mut all: Vec<NodeId> = self
                    .in_neighbors(v)
                    .iter()
                    .chain(self.out_neighbors(v))
                    .copied()
                    .collect();
                all.sort_unstable();
                all.dedup();
                all
            }
        })
    }

    /// Whether `u` and `v` are adjacent in either direction.
    pub fn adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.out_neighbors(u).binary_search(&v).is_ok()
            || self.in_neighbors(u).binary_search(&v).is_ok()
    }

    /// Message sources, one per (in-neighbor, node) relation, ordered by target.
    pub fn message_sources(&self) -> Arc<Vec<NodeId>> {
        Arc::clone(&self.msg_src)
    }

    /// Message targets matching [`Graph::message_sources`].
    pub fn message_targets(&self) -> Arc<Vec<NodeId>> {
        Arc::clone(&self.msg_dst)
    }

    /// Flattened neighbor index: in-offsets, in-targets, out-offsets, out-targets.
    pub fn neighbor_index(&self) -> [&[usize]; 4] {
        [
            &self.in_adj.offsets,
            &self.in_adj.targets,
            &self.out_adj.offsets,
            &self.out_adj.targets,
        ]
    }

    /// `A[i][j] = 1` iff there is an edge `i → j` or an undirected edge `{i, j}`.
    pub fn adjacency_dense(&self) -> Result<Matrix> {
        self.adjacency_dense_capped(DENSE_CAP)
    }

    pub fn adjacency_dense_capped(&self, cap: usize) -> Result<Matrix> {
        if self.num_nodes > cap {
            return Err(Error::InvalidArgument(format!(
                "dense adjacency for {} nodes exceeds cap {cap}",
                self.num_nodes
            )));
        }
        let n = self.num_nodes;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for &j in self.out_neighbors(i) {
                a.set(i, j, 1.0);
            }
        }
        Ok(a)
    }

    /// Relabels node `i` as `perm[i]`; feature rows move with their nodes and
    /// edge order is preserved.
    pub fn permute(&self, perm: &[NodeId]) -> Result<Graph> {
        check_permutation(perm, self.num_nodes)?;
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                src: perm[e.src],
                dst: perm[e.dst],
                directed: e.directed,
            })
            .collect();
        let features = permute_rows(&self.node_features, perm);
        Graph::new(self.num_nodes, edges, features, self.edge_features.clone())
    }

    /// Returns a copy with node features replaced.
    pub fn with_features(&self, node_features: Matrix) -> Result<Graph> {
        Graph::new(
            self.num_nodes,
            self.edges.clone(),
            node_features,
            self.edge_features.clone(),
        )
    }

    /// Disjoint union; node ids of the `k`-th graph are shifted by the total
    /// size of the graphs before it. Returns the offsets.
    pub fn disjoint_union(graphs: &[&Graph]) -> Result<(Graph, Vec<usize>)> {
        let dim = graphs.first().map_or(0, |g| g.feature_dim());
        let mut offsets = Vec::with_capacity(graphs.len());
        let mut edges = Vec::new();
        let mut rows = Vec::new();
        let mut total = 0;
        for g in graphs {
            if g.feature_dim() != dim {
                return Err(Error::InvalidGraph(format!(
                    "feature dims differ in union: {} vs {dim}",
                    g.feature_dim()
                )));
            }
            offsets.push(total);
            edges.extend(g.edges.iter().map(|e| Edge {
                src: e.src + total,
                dst: e.dst + total,
                directed: e.directed,
            }));
            rows.extend_from_slice(g.node_features.as_slice());
            total += g.num_nodes;
        }
        let features = Matrix::from_vec(total, dim, rows)?;
        Ok((Graph::new(total, edges, features, None)?, offsets))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphDoc::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Graph> {
        GraphDoc::parse(text)?.into_graph()
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has length {} for {n} nodes",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument(
                "permutation is not a bijection".into(),
            ));
        }
    }
    Ok(())
}

/// Output row `perm[i]` = input row `i`.
pub fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for (i, &p) in perm.iter().enumerate() {
        out.row_mut(p).copy_from_slice(m.row(i));
    }
    out
}

/// Wire form of a graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub num_nodes: usize,
    pub edges: Vec<Edge>,
    pub node_features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_features: Option<Vec<Vec<f64>>>,
}

impl From<&Graph> for GraphDoc {
    fn from(g: &Graph) -> Self {
        Self {
            num_nodes: g.num_nodes,
            edges: g.edges.clone(),
            node_features: g.node_features.to_rows(),
            edge_features: g.edge_features.as_ref().map(Matrix::to_rows),
        }
    }
}

impl GraphDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let doc: GraphDoc =
            serde_path_to_error::deserialize(&mut de).map_err(Error::from_json_path)?;
        de.end().map_err(|e| Error::Json(e.to_string()))?;
        Ok(doc)
    }

    pub fn into_graph(self) -> Result<Graph> {
        let dim = self.node_features.first().map_or(0, Vec::len);
        let nf = Matrix::from_rows(&self.node_features, dim).map_err(|e| Error::Schema {
            path: "node_features".into(),
            message: e.to_string(),
        })?;
        let ef = match self.edge_features {
            Some(rows) => {
                let d = rows.first().map_or(0, Vec::len);
                Some(Matrix::from_rows(&rows, d).map_err(|e| Error::Schema {
                    path: "edge_features".into(),
                    message: e.to_string(),
                })?)
            }
            None => None,
        };
        Graph::new(self.num_nodes, self.edges, nf, ef)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(n: usize) -> Matrix {
        Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    fn triangle() -> Graph {
        Graph::undirected(3, &[(0, 1), (1, 2), (0, 2)], feats(3)).unwrap()
    }

    #[test]
    fn smallest_undirected_graph() {
        let g = Graph::undirected(2, &[(0, 1)], feats(2)).unwrap();
        assert_eq!(g.neighbors(0, Direction::Both).unwrap(), vec![1]);
        assert_eq!(g.neighbors(1, Direction::Both).unwrap(), vec![0]);
    }

    #[test]
    fn directed_edge_neighbors() {
        let g = Graph::new(2, vec![Edge::directed(0, 1)], feats(2), None).unwrap();
        assert_eq!(g.neighbors(0, Direction::Out).unwrap(), vec![1]);
        assert_eq!(g.neighbors(1, Direction::In).unwrap(), vec![0]);
        assert!(g.neighbors(1, Direction::Out).unwrap().is_empty());
        assert!(g.neighbors(0, Direction::In).unwrap().is_empty());
    }

    #[test]
    fn triangle_degrees_and_neighbors() {
        let g = triangle();
        for v in 0..3 {
            assert_eq!(g.neighbors(v, Direction::Both).unwrap().len(), 2);
        }
        assert_eq!(g.neighbors(0, Direction::Both).unwrap(), vec![1, 2]);
    }

    #[test]
    fn isolated_and_star() {
        let g = Graph::undirected(5, &[(0, 1), (0, 2), (0, 3)], feats(5)).unwrap();
        assert!(g.neighbors(4, Direction::Both).unwrap().is_empty());
        assert_eq!(g.neighbors(0, Direction::Out).unwrap(), vec![1, 2, 3]);
        assert!(g.neighbors(9, Direction::In).is_err());
    }

    #[test]
    fn build_errors() {
        assert!(Graph::undirected(2, &[(0, 2)], feats(2)).is_err());
        assert!(Graph::undirected(2, &[(0, 1)], feats(3)).is_err());
        assert!(Graph::undirected(2, &[(0, 1), (0, 1)], feats(2)).is_err());
        assert!(Graph::undirected(2, &[(0, 1), (1, 0)], feats(2)).is_err());
        assert!(Graph::undirected(2, &[(1, 1)], feats(2)).is_err());
        let mixed = vec![Edge::directed(0, 1), Edge::undirected(0, 1)];
        assert!(Graph::new(2, mixed, feats(2), None).is_err());
        // opposite directed edges are two distinct relations
        let pair = vec![Edge::directed(0, 1), Edge::directed(1, 0)];
        assert!(Graph::new(2, pair, feats(2), None).is_ok());
        let ef = Matrix::zeros(2, 1);
        assert!(Graph::new(2, vec![Edge::undirected(0, 1)], feats(2), Some(ef)).is_err());
    }

    #[test]
    fn dense_adjacency() {
        let g = Graph::undirected(2, &[(0, 1)], feats(2)).unwrap();
        assert_eq!(g.adjacency_dense().unwrap().as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        let d = Graph::new(2, vec![Edge::directed(0, 1)], feats(2), None).unwrap();
        assert_eq!(d.adjacency_dense().unwrap().as_slice(), &[0.0, 1.0, 0.0, 0.0]);
        let e = Graph::new(3, vec![], feats(3), None).unwrap();
        assert_eq!(e.adjacency_dense().unwrap(), Matrix::zeros(3, 3));
        assert!(e.adjacency_dense_capped(2).is_err());
    }

    #[test]
    fn permutation_cases() {
        let g = Graph::undirected(2, &[(0, 1)], feats(2)).unwrap();
        assert_eq!(g.permute(&[0, 1]).unwrap(), g);
        let s = g.permute(&[1, 0]).unwrap();
        assert_eq!(s.node_features().as_slice(), &[1.0, 0.0]);
        assert_eq!(s.permute(&[1, 0]).unwrap(), g);
        assert!(g.permute(&[0, 0]).is_err());
        assert!(g.permute(&[0]).is_err());
    }

    #[test]
    fn json_round_trip_and_errors() {
        let g = Graph::new(
            3,
            vec![Edge::undirected(0, 1), Edge::directed(2, 1)],
            Matrix::from_vec(3, 2, vec![0.1, 1.0 / 3.0, -0.0, 1e-310, 7.0, f64::MAX]).unwrap(),
            Some(Matrix::from_vec(2, 1, vec![0.5, 0.25]).unwrap()),
        )
        .unwrap();
        let back = Graph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.neighbor_index(), g.neighbor_index());
        for (a, b) in back
            .node_features()
            .as_slice()
            .iter()
            .zip(g.node_features().as_slice())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let missing = r#"{"edges": [], "node_features": []}"#;
        match Graph::from_json(missing) {
            Err(Error::Schema { path, .. }) => assert!(path.contains("nodes")),
            other => panic!("expected schema error, got {other:?}"),
        }
        let bad_type = r#"{"num_nodes": 1, "edges": [{"src": "a", "dst": 0, "directed": true}], "node_features": [[0]]}"#;
        match Graph::from_json(bad_type) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "edges[0].src"),
            other => panic!("expected schema error, got {other:?}"),
        }
        assert!(matches!(Graph::from_json("{nope"), Err(Error::Json(_))));
    }

    #[test]
    fn message_lists_follow_in_neighbors() {
        let g = Graph::new(3, vec![Edge::directed(0, 2), Edge::undirected(1, 2)], feats(3), None)
            .unwrap();
        assert_eq!(*g.message_sources(), vec![2, 0, 1]);
        assert_eq!(*g.message_targets(), vec![1, 2, 2]);
    }
}
