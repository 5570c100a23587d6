//! Layer stacks with a prediction head and their JSON form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Bound, Matrix, ParamSet, Tape, Var};
use crate::error::{Error, Result};
use crate::gnn::layers::{
    gat_forward, gcn_forward, gin_forward, sage_forward, GinMlp, LayerKind, LayerSpec,
    SageAggregator, Skip,
};
use crate::graph::Graph;
use crate::seed;
use crate::train::head::{apply_head, HeadQuery, HeadSpec, HEAD_PREFIX};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct GnnModel {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub head: HeadSpec,
    pub params: ParamSet,
    /// Free-form annotations carried through serialization.
    pub metadata: BTreeMap<String, String>,
}

pub fn layer_param_name(layer: usize, name: &str) -> String {
    format!("layer{layer}.{name}")
}

impl GnnModel {
    /// Builds a model with seeded Glorot weights and zero biases. The head's
    /// output layer starts at zero, so an untrained model scores every query
    /// identically.
    pub fn new(input_dim: usize, layers: Vec<LayerSpec>, head: HeadSpec, seed: u64) -> Result<Self> {
        let model = Self {
            input_dim,
            layers,
            head,
            params: ParamSet::new(),
            metadata: BTreeMap::new(),
        };
        model.validate()?;
        let mut rng = seed::rng(seed);
        let mut params = ParamSet::new();
        for (i, spec) in model.layers.iter().enumerate() {
            for (name, (r, c)) in spec.param_shapes() {
                let m = if name.starts_with('b') {
                    Matrix::zeros(r, c)
                } else {
                    ParamSet::glorot(r, c, &mut rng)
                };
                params.insert(layer_param_name(i, name), m);
            }
        }
        let head_shapes = head.param_shapes(model.embedding_dim());
        let last = head_shapes.len() - 2;
        for (k, (name, (r, c))) in head_shapes.into_iter().enumerate() {
            let m = if name.starts_with('b') || k >= last {
                Matrix::zeros(r, c)
            } else {
                ParamSet::glorot(r, c, &mut rng)
            };
            params.insert(format!("{HEAD_PREFIX}{name}"), m);
        }
        Ok(Self { params, ..model })
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.d_out)
    }

    /// Checks that dims chain from the input through every layer.
    pub fn validate(&self) -> Result<()> {
        let mut d = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            if l.d_in != d {
                return Err(Error::Config(format!(
                    "layer {i} expects input dim {} but receives {d}",
                    l.d_in
                )));
            }
            d = l.d_out;
        }
        self.head.validate()
    }

    /// Checks that every expected parameter exists with the right shape.
    fn validate_params(&self) -> Result<()> {
        let mut expected: Vec<(String, (usize, usize))> = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            for (name, shape) in l.param_shapes() {
                expected.push((layer_param_name(i, name), shape));
            }
        }
        for (name, shape) in self.head.param_shapes(self.embedding_dim()) {
            expected.push((format!("{HEAD_PREFIX}{name}"), shape));
        }
        for (name, shape) in &expected {
            match self.params.get(name) {
                Some(m) if m.shape() == *shape => {}
                Some(m) => {
                    return Err(Error::Schema {
                        path: format!("params.{name}"),
                        message: format!("expected shape {shape:?}, got {:?}", m.shape()),
                    })
                }
                None => {
                    return Err(Error::Schema {
                        path: format!("params.{name}"),
                        message: "missing parameter".into(),
                    })
                }
            }
        }
        if self.params.len() != expected.len() {
            return Err(Error::Schema {
                path: "params".into(),
                message: format!(
                    "{} parameters present, {} expected",
                    self.params.len(),
                    expected.len()
                ),
            });
        }
        Ok(())
    }

    /// Runs the layer stack on `g` with parameters bound on `tape`.
    pub fn encode(&self, tape: &mut Tape, bound: &Bound, g: &Graph) -> Result<Var> {
        if g.feature_dim() != self.input_dim {
            return Err(Error::shape(
                "model input",
                format!("graph features have dim {}, model expects {}", g.feature_dim(), self.input_dim),
            ));
        }
        let mut h = tape.constant(g.node_features().clone());
        for (i, spec) in self.layers.iter().enumerate() {
            let p = |name: &str| bound.get(&layer_param_name(i, name));
            let out = match spec.kind {
                LayerKind::Gcn => gcn_forward(tape, g, h, p("w")?, spec.activation)?,
                LayerKind::Sage {
                    aggregator,
                    l2_normalize,
                } => {
                    let pool = match aggregator {
                        SageAggregator::Mean => None,
                        SageAggregator::Pool => Some(p("pool")?),
                    };
                    sage_forward(tape, g, h, p("w")?, pool, spec.activation, l2_normalize)?
                }
                LayerKind::Gat { leaky_slope } => {
                    gat_forward(tape, g, h, p("w")?, p("a")?, spec.activation, leaky_slope)?.0
                }
                LayerKind::Gin { eps, .. } => {
                    let mlp = GinMlp {
                        w1: p("w1")?,
                        b1: p("b1")?,
                        w2: p("w2")?,
                        b2: p("b2")?,
                    };
                    gin_forward(tape, g, h, mlp, eps, spec.activation)?
                }
            };
            h = match spec.skip {
                Skip::None => out,
                Skip::Residual => tape.add(out, h)?,
            };
        }
        Ok(h)
    }

    /// Node embeddings without gradient bookkeeping beyond one scratch tape.
    pub fn embed(&self, g: &Graph) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let h = self.encode(&mut tape, &bound, g)?;
        Ok(tape.value(h).clone())
    }

    /// Forward pass through layers and head.
    pub fn predict(&self, g: &Graph, query: &HeadQuery) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let h = self.encode(&mut tape, &bound, g)?;
        let out = apply_head(&mut tape, &bound, &self.head, h, query)?;
        Ok(tape.value(out).clone())
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            format_version: FORMAT_VERSION,
            input_dim: self.input_dim,
            layers: self.layers.clone(),
            head: self.head,
            params: self.params.to_json(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let doc: ModelDoc =
            serde_path_to_error::deserialize(&mut de).map_err(Error::from_json_path)?;
        de.end().map_err(|e| Error::Json(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Schema {
                path: "format_version".into(),
                message: format!(
                    "unsupported version {} (expected {FORMAT_VERSION})",
                    doc.format_version
                ),
            });
        }
        let params = ParamSet::from_json(&doc.params).map_err(|e| match e {
            Error::Schema { path, message } => Error::Schema {
                path: format!("params.{path}"),
                message,
            },
            other => other,
        })?;
        let model = Self {
            input_dim: doc.input_dim,
            layers: doc.layers,
            head: doc.head,
            params,
            metadata: doc.metadata,
        };
        model.validate()?;
        model.validate_params()?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: u32,
    input_dim: usize,
    layers: Vec<LayerSpec>,
    head: HeadSpec,
    params: serde_json::Value,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}
