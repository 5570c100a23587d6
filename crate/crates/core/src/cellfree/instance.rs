//! Per-UE instance graphs: AP nodes on a kNN graph plus one UE node fed by
//! directed edges from the measured APs.

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::cellfree::scenario::{distance, ground_truth, measure, Point, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

/// Width of AP node features: `[x/side, y/side, rsrp_norm, measured_flag]`.
pub const FEATURE_DIM: usize = 4;

pub fn rsrp_norm(rsrp_dbm: f64) -> f64 {
    ((rsrp_dbm + 110.0) / 60.0).clamp(-1.0, 2.0)
}

/// Undirected AP–AP edges joining each AP to its `k` nearest peers, merged
/// so that a pair chosen from either side appears once. Ties prefer the
/// lower AP id. Pairs are returned as `(low, high)` in sorted order.
pub fn ap_knn_edges(positions: &[Point], k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(positions.len() * k);
    for (i, &p) in positions.iter().enumerate() {
        let mut others: Vec<(f64, usize)> = positions
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, &q)| (distance(p, q), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceGraph {
    pub graph: Graph,
    pub ue_node_id: usize,
    /// Measured APs, strongest first.
    pub measured_set: Vec<usize>,
    pub stage1_labels: Vec<bool>,
    pub stage2_labels: Vec<bool>,
    pub ue_position: Point,
}

impl InstanceGraph {
    pub fn num_aps(&self) -> usize {
        self.stage1_labels.len()
    }

    pub fn serving(&self) -> Vec<usize> {
        flagged(&self.stage2_labels)
    }

    pub fn candidates(&self) -> Vec<usize> {
        flagged(&self.stage1_labels)
    }

    /// AP positions recovered from the normalized coordinate features.
    pub fn ap_position(&self, ap: usize, side: f64) -> Point {
        let row = self.graph.node_features().row(ap);
        [row[0] * side, row[1] * side]
    }

    pub fn to_json_line(&self) -> String {
        let doc = InstanceDoc {
            num_nodes: self.graph.num_nodes(),
            edges: self.graph.edges().to_vec(),
            node_features: self.graph.node_features().to_rows(),
            measured_set: self.measured_set.clone(),
            stage1_labels: self.stage1_labels.clone(),
            stage2_labels: self.stage2_labels.clone(),
            ue_node_id: self.ue_node_id,
            ue_position: self.ue_position,
        };
        serde_json::to_string(&doc).expect("instance serializes")
    }

    pub fn from_json_line(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let doc: InstanceDoc =
            serde_path_to_error::deserialize(&mut de).map_err(Error::from_json_path)?;
        de.end().map_err(|e| Error::Json(e.to_string()))?;
        let schema = |path: &str, message: String| Error::Schema {
            path: path.into(),
            message,
        };
        let dim = doc.node_features.first().map_or(0, Vec::len);
        let features = Matrix::from_rows(&doc.node_features, dim)
            .map_err(|e| schema("node_features", e.to_string()))?;
        let graph = Graph::new(doc.num_nodes, doc.edges, features, None)?;
        let n_aps = doc.stage1_labels.len();
        if doc.ue_node_id != n_aps || doc.num_nodes != n_aps + 1 {
            return Err(schema(
                "ue_node_id",
                format!(
                    "expected {n_aps} AP nodes followed by the UE node, got ue_node_id {} of {} nodes",
                    doc.ue_node_id, doc.num_nodes
                ),
            ));
        }
        if doc.stage2_labels.len() != n_aps {
            return Err(schema(
                "stage2_labels",
                format!("{} labels for {n_aps} APs", doc.stage2_labels.len()),
            ));
        }
        if let Some(&a) = doc.measured_set.iter().find(|&&a| a >= n_aps) {
            return Err(schema("measured_set", format!("AP {a} out of range")));
        }
        Ok(Self {
            graph,
            ue_node_id: doc.ue_node_id,
            measured_set: doc.measured_set,
            stage1_labels: doc.stage1_labels,
            stage2_labels: doc.stage2_labels,
            ue_position: doc.ue_position,
        })
    }
}

fn flagged(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    num_nodes: usize,
    edges: Vec<Edge>,
    node_features: Vec<Vec<f64>>,
    measured_set: Vec<usize>,
    stage1_labels: Vec<bool>,
    stage2_labels: Vec<bool>,
    ue_node_id: usize,
    ue_position: Point,
}

/// Builds the instance graph of `ue`. Fails with `Degenerate` when the UE
/// measured no AP.
pub fn build_instance_graph(scenario: &Scenario, ue: usize, config: &ScenarioConfig) -> Result<InstanceGraph> {
    let knn = ap_knn_edges(&scenario.ap_positions, config.k_ap_knn);
    build_with_knn(scenario, ue, config, &knn)
}

/// As [`build_instance_graph`] with precomputed AP–AP pairs.
pub(crate) fn build_with_knn(
    scenario: &Scenario,
    ue: usize,
    config: &ScenarioConfig,
    knn: &[(usize, usize)],
) -> Result<InstanceGraph> {
    let m = measure(scenario, ue, config)?;
    if m.is_empty() {
        return Err(Error::Degenerate(format!("UE {ue} measured no AP")));
    }
    let gt = ground_truth(scenario, ue, config)?;
    let n_aps = scenario.num_aps();
    let ue_node = n_aps;
    let mut features = Matrix::zeros(n_aps + 1, FEATURE_DIM);
    for (a, p) in scenario.ap_positions.iter().enumerate() {
        let row = features.row_mut(a);
        row[0] = p[0] / config.area_side_m;
        row[1] = p[1] / config.area_side_m;
    }
    for (&a, &r) in m.aps.iter().zip(&m.rsrp_dbm) {
        let row = features.row_mut(a);
        row[2] = rsrp_norm(r);
        row[3] = 1.0;
    }
    let mut edges: Vec<Edge> = knn.iter().map(|&(a, b)| Edge::undirected(a, b)).collect();
    let mut measured_sorted = m.aps.clone();
    measured_sorted.sort_unstable();
    edges.extend(measured_sorted.iter().map(|&a| Edge::directed(a, ue_node)));
    let graph = Graph::new(n_aps + 1, edges, features, None)?;
    let mut stage1_labels = vec![false; n_aps];
    let mut stage2_labels = vec![false; n_aps];
    for &a in &gt.candidates {
        stage1_labels[a] = true;
    }
    for &a in &gt.serving {
        stage2_labels[a] = true;
    }
    Ok(InstanceGraph {
        graph,
        ue_node_id: ue_node,
        measured_set: m.aps,
        stage1_labels,
        stage2_labels,
        ue_position: scenario.ue_positions[ue],
    })
}

/// Instance graphs for every UE in order, skipping degenerate ones. Returns
/// `(ue index, instance)` pairs and the number skipped.
pub fn build_all(scenario: &Scenario, config: &ScenarioConfig) -> Result<(Vec<(usize, InstanceGraph)>, usize)> {
    use rayon::prelude::*;
    let knn = ap_knn_edges(&scenario.ap_positions, config.k_ap_knn);
    let built: Vec<Result<Option<InstanceGraph>>> = (0..scenario.num_ues())
        .into_par_iter()
        .map(|ue| match build_with_knn(scenario, ue, config, &knn) {
            Ok(g) => Ok(Some(g)),
            Err(Error::Degenerate(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut out = Vec::with_capacity(built.len());
    let mut skipped = 0;
    for (ue, r) in built.into_iter().enumerate() {
        match r? {
            Some(g) => out.push((ue, g)),
            None => skipped += 1,
        }
    }
    Ok((out, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellfree::scenario::{ap_positions, generate_scenario};
    use crate::graph::Direction;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig {
            num_ues: 40,
            seed: 9,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn knn_one_corner_links_to_grid_neighbor() {
        let c = ScenarioConfig { k_ap_knn: 1, ..cfg() };
        let pos = ap_positions(&c).unwrap();
        let pairs = ap_knn_edges(&pos, 1);
        for corner in [0usize, 4, 20, 24] {
            let linked: Vec<usize> = pairs
                .iter()
                .filter_map(|&(a, b)| {
                    (a == corner).then_some(b).or((b == corner).then_some(a))
                })
                .collect();
            assert!(!linked.is_empty());
            for other in linked {
                assert!((distance(pos[corner], pos[other]) - 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn knn_is_symmetrized_superset() {
        let pos = ap_positions(&cfg()).unwrap();
        let pairs = ap_knn_edges(&pos, 4);
        for i in 0..pos.len() {
            let deg = pairs.iter().filter(|&&(a, b)| a == i || b == i).count();
            assert!(deg >= 4);
        }
    }

    #[test]
    fn ue_node_structure() {
        let c = cfg();
        let s = generate_scenario(&c).unwrap();
        let (all, skipped) = build_all(&s, &c).unwrap();
        assert_eq!(all.len() + skipped, c.num_ues);
        let knn = ap_knn_edges(&s.ap_positions, c.k_ap_knn);
        for (_, inst) in &all {
            let g = &inst.graph;
            let ue = inst.ue_node_id;
            assert_eq!(g.num_nodes(), c.num_aps + 1);
            assert!(g.out_neighbors(ue).is_empty());
            assert_eq!(g.in_neighbors(ue).len(), inst.measured_set.len());
            assert!(g.node_features().row(ue).iter().all(|&x| x == 0.0));
            let serving = inst.serving();
            assert_eq!(serving.len(), c.m_serve);
            assert!(serving.iter().all(|a| inst.stage1_labels[*a]));
            let ap_pairs: Vec<(usize, usize)> = g
                .edges()
                .iter()
                .filter(|e| !e.directed)
                .map(|e| (e.src.min(e.dst), e.src.max(e.dst)))
                .collect();
            assert_eq!(ap_pairs, knn);
            for a in 0..c.num_aps {
                let both = g.neighbors(a, Direction::In).unwrap();
                assert!(!both.contains(&ue));
            }
        }
    }

    #[test]
    fn features_and_json_round_trip() {
        let c = cfg();
        let s = generate_scenario(&c).unwrap();
        let (all, _) = build_all(&s, &c).unwrap();
        let (ue, inst) = &all[0];
        for &a in &inst.measured_set {
            let row = inst.graph.node_features().row(a);
            assert_eq!(row[3], 1.0);
            assert_eq!(row[2], rsrp_norm(s.rsrp_dbm[*ue][a]));
        }
        assert_eq!(inst.ap_position(24, c.area_side_m), [450.0, 450.0]);
        let back = InstanceGraph::from_json_line(&inst.to_json_line()).unwrap();
        assert_eq!(&back, inst);
        assert!(InstanceGraph::from_json_line("{\"num_nodes\": 2}").is_err());
    }

    #[test]
    fn rsrp_norm_clips() {
        assert_eq!(rsrp_norm(-110.0), 0.0);
        assert_eq!(rsrp_norm(-50.0), 1.0);
        assert_eq!(rsrp_norm(200.0), 2.0);
        assert_eq!(rsrp_norm(-400.0), -1.0);
    }

    #[test]
    fn degenerate_ue_is_flagged() {
        let c = ScenarioConfig { num_aps: 1, m_candidate: 1, m_serve: 1, n_meas: 1, k_ap_knn: 0, num_ues: 1, ..cfg() };
        let s = Scenario {
            ap_positions: vec![[0.0, 0.0]],
            ue_positions: vec![[1.0, 1.0]],
            gain_db: vec![vec![-200.0]],
            rsrp_dbm: vec![vec![-170.0]],
        };
        assert!(matches!(build_instance_graph(&s, 0, &c), Err(Error::Degenerate(_))));
    }
}
