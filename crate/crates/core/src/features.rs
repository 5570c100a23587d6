//! Hand-designed node, edge and graph statistics.
//!
//! Neighborhoods here are direction-agnostic: for graphs with directed edges
//! the both-direction neighbor set is used, except for the Katz index which
//! counts directed walks through the adjacency matrix.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::{Direction, Graph, NodeId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Node,
    Edge,
    Graph,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub level: Level,
    pub names: Vec<String>,
    /// Entity identifiers, one per row.
    pub ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|r| r[j]).collect())
    }

    /// Header `id,<names…>`, one row per entity.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (id, row) in self.ids.iter().zip(&self.values) {
            out.push_str(id);
            for v in row {
                write!(out, ",{v}").expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

fn both_neighbors(g: &Graph) -> Vec<Vec<NodeId>> {
    (0..g.num_nodes())
        .map(|v| g.neighbors(v, Direction::Both).expect("valid node"))
        .collect()
}

/// Breadth-first hop distances from `src`; `None` when unreachable.
fn bfs(adj: &[Vec<NodeId>], src: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued nodes have distance");
        for &u in &adj[v] {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

fn sorted_intersection(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Triangles through each node.
fn node_triangles(adj: &[Vec<NodeId>]) -> Vec<usize> {
    let mut t = vec![0; adj.len()];
    for (v, nv) in adj.iter().enumerate() {
        for &u in nv.iter().filter(|&&u| u > v) {
            for &w in adj[u].iter().filter(|&&w| w > u) {
                if nv.binary_search(&w).is_ok() {
                    t[v] += 1;
                    t[u] += 1;
                    t[w] += 1;
                }
            }
        }
    }
    t
}

/// Degree, closeness centrality and local clustering coefficient per node.
///
/// Closeness is `(c − 1) / Σ d(v, u)` over the `c` nodes of `v`'s connected
/// component, and 0 for isolated nodes.
pub fn node_statistics(g: &Graph) -> FeatureTable {
    let adj = both_neighbors(g);
    let tri = node_triangles(&adj);
    let values = (0..g.num_nodes())
        .map(|v| {
            let deg = adj[v].len();
            let dist = bfs(&adj, v);
            let (reached, total) = dist
                .iter()
                .flatten()
                .fold((0usize, 0usize), |(c, s), &d| (c + 1, s + d));
            let closeness = if total == 0 {
                0.0
            } else {
                (reached - 1) as f64 / total as f64
            };
            let clustering = if deg < 2 {
                0.0
            } else {
                2.0 * tri[v] as f64 / (deg * (deg - 1)) as f64
            };
            vec![deg as f64, closeness, clustering]
        })
        .collect();
    FeatureTable {
        level: Level::Node,
        names: ["degree", "closeness_centrality", "clustering_coefficient"]
            .map(String::from)
            .to_vec(),
        ids: (0..g.num_nodes()).map(|v| v.to_string()).collect(),
        values,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KatzParams {
    pub beta: f64,
    pub max_length: usize,
}

impl Default for KatzParams {
    fn default() -> Self {
        Self {
            beta: 0.1,
            max_length: 4,
        }
    }
}

/// Truncated Katz index `Σ_{l=1..L} β^l (A^l)[u][v]` for one source against
/// every target, by repeated sparse propagation of walk counts.
pub fn katz_row(g: &Graph, u: NodeId, params: KatzParams) -> Vec<f64> {
    let n = g.num_nodes();
    let mut walks = vec![0.0; n];
    walks[u] = 1.0;
    let mut score = vec![0.0; n];
    let mut weight = 1.0;
    for _ in 0..params.max_length {
        let mut next = vec![0.0; n];
        for (i, &w) in walks.iter().enumerate() {
            if w != 0.0 {
                for &j in g.out_neighbors(i) {
                    next[j] += w;
                }
            }
        }
        walks = next;
        weight *= params.beta;
        for (s, w) in score.iter_mut().zip(&walks) {
            *s += weight * w;
        }
    }
    score
}

/// Pairwise scores: shortest path (−1 when disconnected), common neighbors,
/// Jaccard overlap and truncated Katz index.
pub fn edge_scores(g: &Graph, pairs: &[(NodeId, NodeId)], katz: KatzParams) -> Result<FeatureTable> {
    let n = g.num_nodes();
    for &(u, v) in pairs {
        if u >= n || v >= n {
            return Err(Error::IndexOutOfRange {
                op: "edge_scores",
                index: u.max(v),
                limit: n,
            });
        }
    }
    let adj = both_neighbors(g);
    let values = pairs
        .iter()
        .map(|&(u, v)| {
            let sp = bfs(&adj, u)[v].map_or(-1.0, |d| d as f64);
            let common = sorted_intersection(&adj[u], &adj[v]);
            let union = adj[u].len() + adj[v].len() - common;
            let jaccard = if union == 0 {
                0.0
            } else {
                common as f64 / union as f64
            };
            let k = katz_row(g, u, katz)[v];
            vec![sp, common as f64, jaccard, k]
        })
        .collect();
    Ok(FeatureTable {
        level: Level::Edge,
        names: ["shortest_path", "common_neighbors", "jaccard", "katz"]
            .map(String::from)
            .to_vec(),
        ids: pairs.iter().map(|(u, v)| format!("{u}-{v}")).collect(),
        values,
    })
}

/// Node and edge counts plus exact 3-node graphlet counts: triangles (each
/// counted once) and wedges (paths of length two, open or closed).
pub fn graph_statistics(g: &Graph) -> FeatureTable {
    let adj = both_neighbors(g);
    let triangles = node_triangles(&adj).iter().sum::<usize>() / 3;
    let wedges: usize = adj
        .iter()
        .map(|a| a.len() * a.len().saturating_sub(1) / 2)
        .sum();
    FeatureTable {
        level: Level::Graph,
        names: ["num_nodes", "num_edges", "triangle_count", "wedge_count"]
            .map(String::from)
            .to_vec(),
        ids: vec!["graph".into()],
        values: vec![vec![
            g.num_nodes() as f64,
            g.num_edges() as f64,
            triangles as f64,
            wedges as f64,
        ]],
    }
}
