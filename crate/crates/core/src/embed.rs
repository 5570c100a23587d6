//! Random-walk node embeddings (DeepWalk / node2vec style) trained with a
//! skip-gram objective and negative sampling, plus whole-graph pooling.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sgd_step, Matrix, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::graph::{Direction, Graph, NodeId};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkParams {
    /// Number of nodes per walk, including the start node.
    pub walk_length: usize,
    pub walks_per_node: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            walk_length: 20,
            walks_per_node: 10,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<NodeId>>,
    pub num_nodes: usize,
    /// Degree of each node, used for the negative-sampling distribution.
    pub degrees: Vec<usize>,
    pub params: WalkParams,
}

impl WalkCorpus {
    /// Corpus from explicit walks; degrees count distinct nodes adjacent to
    /// each node anywhere in the walks.
    pub fn from_walks(walks: Vec<Vec<NodeId>>, num_nodes: usize) -> Result<Self> {
        let mut adjacent = vec![Vec::new(); num_nodes];
        for w in &walks {
            for &v in w {
                if v >= num_nodes {
                    return Err(Error::IndexOutOfRange {
                        op: "walk corpus",
                        index: v,
                        limit: num_nodes,
                    });
                }
            }
            for pair in w.windows(2) {
                adjacent[pair[0]].push(pair[1]);
                adjacent[pair[1]].push(pair[0]);
            }
        }
        let degrees = adjacent
            .into_iter()
            .map(|mut a| {
                a.sort_unstable();
                a.dedup();
                a.len()
            })
            .collect();
        Ok(Self {
            walks,
            num_nodes,
            degrees,
            params: WalkParams::default(),
        })
    }
}

/// Unnormalized-then-normalized second-order transition law out of `cur`,
/// having arrived from `prev` (`None` on the first step, which is uniform).
pub fn transition_probabilities(
    g: &Graph,
    prev: Option<NodeId>,
    cur: NodeId,
    p: f64,
    q: f64,
) -> Vec<(NodeId, f64)> {
    let next = g.out_neighbors(cur);
    let weights: Vec<f64> = next
        .iter()
        .map(|&x| match prev {
            None => 1.0,
            Some(t) if x == t => 1.0 / p,
            Some(t) if g.adjacent(t, x) => 1.0,
            Some(_) => 1.0 / q,
        })
        .collect();
    let total: f64 = weights.iter().sum();
    next.iter()
        .zip(weights)
        .map(|(&x, w)| (x, w / total))
        .collect()
}

fn walk_from(g: &Graph, start: NodeId, params: &WalkParams, rng: &mut seed::Rng) -> Vec<NodeId> {
    let mut walk = Vec::with_capacity(params.walk_length);
    walk.push(start);
    while walk.len() < params.walk_length {
        let cur = *walk.last().expect("walk is nonempty");
        let prev = walk.len().checked_sub(2).map(|i| walk[i]);
        let law = transition_probabilities(g, prev, cur, params.p, params.q);
        if law.is_empty() {
            break;
        }
        let mut u = rng.gen::<f64>();
        let mut chosen = law.last().expect("nonempty law").0;
        for &(x, prob) in &law {
            if u < prob {
                chosen = x;
                break;
            }
            u -= prob;
        }
        walk.push(chosen);
    }
    walk
}

/// Generates `walks_per_node` biased walks from every node. Each start node
/// draws from its own derived stream, so the corpus is identical regardless
/// of thread scheduling. Walks stop early at nodes without out-neighbors.
pub fn random_walks(g: &Graph, params: WalkParams) -> Result<WalkCorpus> {
    if !(params.p > 0.0 && params.q > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "walk bias parameters must be positive (p = {}, q = {})",
            params.p, params.q
        )));
    }
    if params.walk_length == 0 {
        return Err(Error::InvalidArgument("walk_length must be at least 1".into()));
    }
    let per_node: Vec<Vec<Vec<NodeId>>> = (0..g.num_nodes())
        .into_par_iter()
        .map(|v| {
            let mut rng = seed::rng_at(params.seed, &[v as u64]);
            (0..params.walks_per_node)
                .map(|_| walk_from(g, v, &params, &mut rng))
                .collect()
        })
        .collect();
    let degrees = (0..g.num_nodes())
        .map(|v| g.neighbors(v, Direction::Both).map(|n| n.len()))
        .collect::<Result<Vec<_>>>()?;
    Ok(WalkCorpus {
        walks: per_node.into_iter().flatten().collect(),
        num_nodes: g.num_nodes(),
        degrees,
        params,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkipGramParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SkipGramParams {
    fn default() -> Self {
        Self {
            dim: 16,
            window: 3,
            negatives: 5,
            epochs: 10,
            lr: 0.5,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix(pub Matrix);

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn dot(&self, u: NodeId, v: NodeId) -> f64 {
        self.0.row(u).iter().zip(self.0.row(v)).map(|(a, b)| a * b).sum()
    }

    /// `node,dim_0,…,dim_{d-1}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        for j in 0..self.dim() {
            write!(out, ",dim_{j}").expect("string write");
        }
        out.push('\n');
        for r in 0..self.0.rows() {
            write!(out, "{r}").expect("string write");
            for v in self.0.row(r) {
                write!(out, ",{v}").expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SkipGramResult {
    pub embeddings: EmbeddingMatrix,
    /// Mean loss per epoch.
    pub loss_history: Vec<f64>,
}

fn cooccurring_pairs(corpus: &WalkCorpus, window: usize) -> Vec<(NodeId, NodeId)> {
    let mut pairs = Vec::new();
    for walk in &corpus.walks {
        for (i, &u) in walk.iter().enumerate() {
            let hi = (i + window).min(walk.len() - 1);
            for &v in &walk[i + 1..=hi] {
                if u != v {
                    pairs.push((u, v));
                    pairs.push((v, u));
                }
            }
        }
    }
    pairs
}

/// Skip-gram with negative sampling over a single embedding table:
/// maximizes `log σ(z_u·z_v)` for pairs within `window` of each other on a
/// walk and `log σ(−z_u·z_n)` for `negatives` samples drawn ∝ degree^0.75.
/// A negative that coincides with either endpoint of its pair is redrawn a
/// few times and then dropped.
pub fn train_skipgram(corpus: &WalkCorpus, params: SkipGramParams) -> Result<SkipGramResult> {
    if params.dim == 0 || params.window == 0 || params.batch_size == 0 {
        return Err(Error::InvalidArgument(
            "dim, window and batch_size must be at least 1".into(),
        ));
    }
    let pairs = cooccurring_pairs(corpus, params.window);
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "empty corpus: no co-occurring node pairs".into(),
        ));
    }
    let n = corpus.num_nodes;
    let mut rng = seed::rng(params.seed);
    let scale = 0.5 / params.dim as f64;
    let init: Vec<f64> = (0..n * params.dim)
        .map(|_| rng.gen_range(-scale..=scale))
        .collect();
    let mut table = ParamSet::new();
    table.insert("z", Matrix::from_vec(n, params.dim, init)?);

    let weights: Vec<f64> = corpus.degrees.iter().map(|&d| (d as f64).powf(0.75)).collect();
    let negative_law = if params.negatives > 0 && weights.iter().any(|&w| w > 0.0) {
        Some(WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    let ones = Matrix::filled(params.dim, 1, 1.0);

    let mut order = pairs.clone();
    let mut history = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(params.batch_size) {
            let mut left = Vec::with_capacity(batch.len() * (1 + params.negatives));
            let mut right = Vec::with_capacity(left.capacity());
            let mut labels = Vec::with_capacity(left.capacity());
            for &(u, v) in batch {
                left.push(u);
                right.push(v);
                labels.push(1.0);
                if let Some(law) = &negative_law {
                    for _ in 0..params.negatives {
                        let drawn = (0..8)
                            .map(|_| law.sample(&mut rng))
                            .find(|&x| x != u && x != v);
                        if let Some(x) = drawn {
                            left.push(u);
                            right.push(x);
                            labels.push(0.0);
                        }
                    }
                }
            }
            let mut tape = Tape::new();
            let bound = table.bind(&mut tape);
            let z = bound.get("z")?;
            let zl = tape.gather_rows(z, Arc::new(left))?;
            let zr = tape.gather_rows(z, Arc::new(right))?;
            let prod = tape.mul(zl, zr)?;
            let ones_var = tape.constant(ones.clone());
            let logits = tape.matmul(prod, ones_var)?;
            let loss = tape.bce_with_logits(logits, &labels)?;
            tape.backward(loss)?;
            epoch_loss += tape.value(loss).item() * labels.len() as f64;
            seen += labels.len();
            sgd_step(&mut table, &bound.gradients(&tape), params.lr);
        }
        history.push(epoch_loss / seen as f64);
    }
    let z = table.get("z").expect("embedding table").clone();
    Ok(SkipGramResult {
        embeddings: EmbeddingMatrix(z),
        loss_history: history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Mean,
    Sum,
}

/// Column-wise mean or sum of node embeddings.
pub fn pool_graph_embedding(e: &Matrix, kind: Pooling) -> Result<Vec<f64>> {
    if e.rows() == 0 {
        return Err(Error::InvalidArgument("cannot pool an empty embedding matrix".into()));
    }
    let mut out = vec![0.0; e.cols()];
    for r in 0..e.rows() {
        for (o, x) in out.iter_mut().zip(e.row(r)) {
            *o += x;
        }
    }
    if kind == Pooling::Mean {
        let inv = 1.0 / e.rows() as f64;
        out.iter_mut().for_each(|x| *x *= inv);
    }
    Ok(out)
}
