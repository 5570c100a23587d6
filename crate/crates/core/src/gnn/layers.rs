//! Message-passing layers.
//!
//! Weights use the row-vector convention: node features are rows of `H`, and
//! a layer's weight `W` has shape `d_in × d_out`, so `H·W` applies the
//! transform to every node at once. Aggregation runs over in-neighbors.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Matrix, Reduce, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SageAggregator {
    Mean,
    /// Element-wise max over `relu(h_u · P)` with a learned `d_in × d_in` map `P`.
    Pool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerKind {
    Gcn,
    Sage {
        aggregator: SageAggregator,
        l2_normalize: bool,
    },
    Gat {
        leaky_slope: f64,
    },
    Gin {
        eps: f64,
        hidden: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skip {
    #[default]
    None,
    Residual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub d_in: usize,
    pub d_out: usize,
    pub activation: Activation,
    #[serde(default)]
    pub skip: Skip,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.d_out == 0 {
            return Err(Error::Config(format!(
                "layer dims must be positive, got {}→{}",
                self.d_in, self.d_out
            )));
        }
        if self.skip == Skip::Residual && self.d_in != self.d_out {
            return Err(Error::Config(format!(
                "residual skip needs d_in == d_out, got {}→{}",
                self.d_in, self.d_out
            )));
        }
        if let LayerKind::Gin { hidden: 0, .. } = self.kind {
            return Err(Error::Config("GIN hidden width must be positive".into()));
        }
        Ok(())
    }

    /// Parameter names (without layer prefix) and shapes.
    pub fn param_shapes(&self) -> Vec<(&'static str, (usize, usize))> {
        let (i, o) = (self.d_in, self.d_out);
        match self.kind {
            LayerKind::Gcn => vec![("w", (i, o))],
            LayerKind::Sage { aggregator, .. } => {
                let mut v = vec![("w", (2 * i, o))];
                if aggregator == SageAggregator::Pool {
                    v.push(("pool", (i, i)));
                }
                v
            }
            LayerKind::Gat { .. } => vec![("w", (i, o)), ("a", (2 * o, 1))],
            LayerKind::Gin { hidden, .. } => vec![
                ("w1", (i, hidden)),
                ("b1", (1, hidden)),
                ("w2", (hidden, o)),
                ("b2", (1, o)),
            ],
        }
    }
}

fn expect_shape(tape: &Tape, v: Var, shape: (usize, usize), what: &'static str) -> Result<()> {
    let got = tape.value(v).shape();
    if got != shape {
        return Err(Error::shape(what, format!("expected {shape:?}, got {got:?}")));
    }
    Ok(())
}

fn check_features(tape: &Tape, g: &Graph, h: Var, op: &'static str) -> Result<usize> {
    let (rows, d) = tape.value(h).shape();
    if rows != g.num_nodes() {
        return Err(Error::shape(
            op,
            format!("{rows} feature rows for {} nodes", g.num_nodes()),
        ));
    }
    Ok(d)
}

/// Aggregates `rows` (one per node) from in-neighbors into each node.
fn aggregate(tape: &mut Tape, g: &Graph, rows: Var, kind: Reduce) -> Result<Var> {
    tape.gather_reduce(rows, g.message_sources(), g.message_targets(), g.num_nodes(), kind)
}

/// `h_v = σ( Σ_{u∈N(v)} W h_u / |N(v)| )`; nodes without in-neighbors get `σ(0)`.
pub fn gcn_forward(tape: &mut Tape, g: &Graph, h: Var, w: Var, act: Activation) -> Result<Var> {
    let d_in = check_features(tape, g, h, "gcn")?;
    let d_out = tape.value(w).cols();
    expect_shape(tape, w, (d_in, d_out), "gcn weight")?;
    let z = tape.matmul(h, w)?;
    let agg = aggregate(tape, g, z, Reduce::Mean)?;
    Ok(tape.activation(agg, act))
}

/// `h_v = σ( W·[h_v ‖ AGG{h_u}] )`, optionally row-normalized afterwards.
/// `pool` must be given exactly when the aggregator is [`SageAggregator::Pool`].
pub fn sage_forward(
    tape: &mut Tape,
    g: &Graph,
    h: Var,
    w: Var,
    pool: Option<Var>,
    act: Activation,
    l2_normalize: bool,
) -> Result<Var> {
    let d_in = check_features(tape, g, h, "sage")?;
    let d_out = tape.value(w).cols();
    expect_shape(tape, w, (2 * d_in, d_out), "sage weight")?;
    let agg = match pool {
        None => aggregate(tape, g, h, Reduce::Mean)?,
        Some(p) => {
            expect_shape(tape, p, (d_in, d_in), "sage pool map")?;
            let t = tape.matmul(h, p)?;
            let t = tape.activation(t, Activation::Relu);
            aggregate(tape, g, t, Reduce::Max)?
        }
    };
    let cat = tape.concat_cols(h, agg)?;
    let z = tape.matmul(cat, w)?;
    let out = tape.activation(z, act);
    Ok(if l2_normalize {
        tape.l2_normalize_rows(out)
    } else {
        out
    })
}

/// Single-head additive attention. Returns the node output and the attention
/// column `α` aligned with the graph's message list.
pub fn gat_forward(
    tape: &mut Tape,
    g: &Graph,
    h: Var,
    w: Var,
    a: Var,
    act: Activation,
    leaky_slope: f64,
) -> Result<(Var, Var)> {
    let d_in = check_features(tape, g, h, "gat")?;
    let d_out = tape.value(w).cols();
    expect_shape(tape, w, (d_in, d_out), "gat weight")?;
    expect_shape(tape, a, (2 * d_out, 1), "gat attention vector")?;
    let z = tape.matmul(h, w)?;
    let z_dst = tape.gather_rows(z, g.message_targets())?;
    let z_src = tape.gather_rows(z, g.message_sources())?;
    let pair = tape.concat_cols(z_dst, z_src)?;
    let raw = tape.matmul(pair, a)?;
    let scores = tape.activation(raw, Activation::LeakyRelu(leaky_slope));
    let alpha = tape.segment_softmax(scores, g.message_targets(), g.num_nodes())?;
    let weighted = tape.row_scale(z_src, alpha)?;
    let agg = tape.segment_reduce(weighted, g.message_targets(), g.num_nodes(), Reduce::Sum)?;
    Ok((tape.activation(agg, act), alpha))
}

/// Two-layer perceptron used by GIN: `relu(x·W1 + b1)·W2 + b2`.
#[derive(Clone, Copy, Debug)]
pub struct GinMlp {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// `h_v = σ( MLP((1 + ε)·h_v + Σ_{u∈N(v)} h_u) )`.
pub fn gin_forward(
    tape: &mut Tape,
    g: &Graph,
    h: Var,
    mlp: GinMlp,
    eps: f64,
    act: Activation,
) -> Result<Var> {
    let d_in = check_features(tape, g, h, "gin")?;
    let hidden = tape.value(mlp.w1).cols();
    let d_out = tape.value(mlp.w2).cols();
    expect_shape(tape, mlp.w1, (d_in, hidden), "gin w1")?;
    expect_shape(tape, mlp.b1, (1, hidden), "gin b1")?;
    expect_shape(tape, mlp.w2, (hidden, d_out), "gin w2")?;
    expect_shape(tape, mlp.b2, (1, d_out), "gin b2")?;
    let summed = aggregate(tape, g, h, Reduce::Sum)?;
    let own = tape.scale(h, 1.0 + eps);
    let x = tape.add(own, summed)?;
    let x = tape.matmul(x, mlp.w1)?;
    let x = tape.add_row_bias(x, mlp.b1)?;
    let x = tape.activation(x, Activation::Relu);
    let x = tape.matmul(x, mlp.w2)?;
    let x = tape.add_row_bias(x, mlp.b2)?;
    Ok(tape.activation(x, act))
}

/// Mean pairwise Euclidean distance between L2-normalized rows; tends to 0
/// as embeddings collapse onto a common direction.
pub fn oversmoothing_metric(h: &Matrix) -> Result<f64> {
    let n = h.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "over-smoothing metric needs at least 2 rows, got {n}"
        )));
    }
    let mut normed = h.clone();
    for r in 0..n {
        let norm = h.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > crate::autodiff::L2_EPS {
            normed.row_mut(r).iter_mut().for_each(|x| *x /= norm);
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += normed
                .row(i)
                .iter()
                .zip(normed.row(j))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}
