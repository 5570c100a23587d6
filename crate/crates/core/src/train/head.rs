//! Prediction heads mapping node embeddings to node, edge or graph logits.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Bound, Reduce, Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "snake_case", deny_unknown_fields)]
pub enum HeadSpec {
    /// Linear map `d_L → outputs` per queried node.
    Node { outputs: usize },
    /// Feedforward on `[h_u ‖ h_v]` with one hidden relu layer, one logit out.
    /// Ordered: `(u, v)` and `(v, u)` generally score differently.
    Edge { hidden: usize },
    /// Mean-pool each graph's nodes, then a linear map `d_L → outputs`.
    Graph { outputs: usize },
}

impl HeadSpec {
    pub fn outputs(&self) -> usize {
        match *self {
            HeadSpec::Node { outputs } | HeadSpec::Graph { outputs } => outputs,
            HeadSpec::Edge { .. } => 1,
        }
    }

    /// Parameter names and shapes for embeddings of width `d`. The final
    /// layer is listed last.
    pub fn param_shapes(&self, d: usize) -> Vec<(&'static str, (usize, usize))> {
        match *self {
            HeadSpec::Node { outputs } | HeadSpec::Graph { outputs } => {
                vec![("w", (d, outputs)), ("b", (1, outputs))]
            }
            HeadSpec::Edge { hidden } => vec![
                ("w1", (2 * d, hidden)),
                ("b1", (1, hidden)),
                ("w2", (hidden, 1)),
                ("b2", (1, 1)),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            HeadSpec::Node { outputs: 0 } | HeadSpec::Graph { outputs: 0 } => {
                Err(Error::Config("head needs at least one output".into()))
            }
            HeadSpec::Edge { hidden: 0 } => {
                Err(Error::Config("edge head hidden width must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// What the head is asked to score.
#[derive(Clone, Debug, PartialEq)]
pub enum HeadQuery {
    Nodes(Arc<Vec<usize>>),
    Pairs(Vec<(usize, usize)>),
    /// Graph membership of every node (e.g. in a disjoint union).
    Graphs {
        graph_of_node: Arc<Vec<usize>>,
        num_graphs: usize,
    },
}

impl HeadQuery {
    pub fn len(&self) -> usize {
        match self {
            HeadQuery::Nodes(n) => n.len(),
            HeadQuery::Pairs(p) => p.len(),
            HeadQuery::Graphs { num_graphs, .. } => *num_graphs,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const HEAD_PREFIX: &str = "head.";

fn param(bound: &Bound, name: &str) -> Result<Var> {
    bound.get(&format!("{HEAD_PREFIX}{name}"))
}

/// Applies `head` to `embeddings`, producing one logit row per query entry.
pub fn apply_head(
    tape: &mut Tape,
    bound: &Bound,
    head: &HeadSpec,
    embeddings: Var,
    query: &HeadQuery,
) -> Result<Var> {
    let n = tape.value(embeddings).rows();
    match (head, query) {
        (HeadSpec::Node { .. }, HeadQuery::Nodes(nodes)) => {
            let rows = tape.gather_rows(embeddings, Arc::clone(nodes))?;
            let z = tape.matmul(rows, param(bound, "w")?)?;
            tape.add_row_bias(z, param(bound, "b")?)
        }
        (HeadSpec::Edge { .. }, HeadQuery::Pairs(pairs)) => {
            let (us, vs): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let hu = tape.gather_rows(embeddings, Arc::new(us))?;
            let hv = tape.gather_rows(embeddings, Arc::new(vs))?;
            let cat = tape.concat_cols(hu, hv)?;
            let z = tape.matmul(cat, param(bound, "w1")?)?;
            let z = tape.add_row_bias(z, param(bound, "b1")?)?;
            let z = tape.activation(z, Activation::Relu);
            let z = tape.matmul(z, param(bound, "w2")?)?;
            tape.add_row_bias(z, param(bound, "b2")?)
        }
        (
            HeadSpec::Graph { .. },
            HeadQuery::Graphs {
                graph_of_node,
                num_graphs,
            },
        ) => {
            if graph_of_node.len() != n {
                return Err(Error::shape(
                    "graph head",
                    format!("{} memberships for {n} nodes", graph_of_node.len()),
                ));
            }
            let pooled =
                tape.segment_reduce(embeddings, Arc::clone(graph_of_node), *num_graphs, Reduce::Mean)?;
            let z = tape.matmul(pooled, param(bound, "w")?)?;
            tape.add_row_bias(z, param(bound, "b")?)
        }
        (head, query) => Err(Error::InvalidArgument(format!(
            "{head:?} cannot answer a {} query",
            match query {
                HeadQuery::Nodes(_) => "node",
                HeadQuery::Pairs(_) => "edge",
                HeadQuery::Graphs { .. } => "graph",
            }
        ))),
    }
}
