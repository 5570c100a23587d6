//! Full-batch supervised training with validation-loss early stopping.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::gnn::GnnModel;
use crate::graph::Graph;
use crate::train::head::{apply_head, HeadQuery};

/// Supervision attached to a head query.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// Binary labels in {0, 1} for a single-logit head (logistic loss).
    Binary(Vec<f64>),
    /// Class indices for a multi-logit head (softmax cross-entropy).
    Classes(Vec<usize>),
    /// Real-valued targets, one row per query (squared error).
    Values(Matrix),
}

/// One full batch: a (possibly disjoint-union) graph, the entities to score
/// and their targets.
#[derive(Clone, Debug)]
pub struct Batch {
    pub graph: Graph,
    pub query: HeadQuery,
    pub target: Target,
}

impl Batch {
    pub fn loss(&self, model: &GnnModel, tape: &mut Tape) -> Result<(Var, crate::autodiff::Bound)> {
        let bound = model.params.bind(tape);
        let h = model.encode(tape, &bound, &self.graph)?;
        let logits = apply_head(tape, &bound, &model.head, h, &self.query)?;
        let loss = match &self.target {
            Target::Binary(labels) => tape.bce_with_logits(logits, labels)?,
            Target::Classes(classes) => tape.cross_entropy(logits, classes)?,
            Target::Values(values) => tape.mse(logits, values)?,
        };
        Ok((loss, bound))
    }

    pub fn loss_value(&self, model: &GnnModel) -> Result<f64> {
        let mut tape = Tape::new();
        let (loss, _) = self.loss(model, &mut tape)?;
        Ok(tape.value(loss).item())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub optimizer: AdamConfig,
    /// Stop after this many epochs without validation improvement; 0 disables.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            optimizer: AdamConfig::default(),
            patience: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if any training happened.
    pub best_epoch: Option<usize>,
}

impl History {
    /// `epoch,train_loss,val_loss` (empty field when there is no validation set).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            match r.val_loss {
                Some(v) => writeln!(out, "{},{},{}", r.epoch, r.train_loss, v),
                None => writeln!(out, "{},{},", r.epoch, r.train_loss),
            }
            .expect("string write");
        }
        out
    }
}

/// Trains `model` in place with Adam on full batches.
///
/// `train_loss` of epoch `e` is measured before that epoch's update, and
/// `val_loss` after it. With a validation batch, the parameters with the
/// lowest validation loss seen are restored at the end. Test data never
/// enters this function.
pub fn train(model: &mut GnnModel, train_batch: &Batch, val_batch: Option<&Batch>, cfg: &TrainConfig) -> Result<History> {
    let mut adam = Adam::new(cfg.optimizer);
    let mut history = History::default();
    let mut best: Option<(f64, crate::autodiff::ParamSet)> = None;
    let mut since_best = 0usize;
    for epoch in 1..=cfg.epochs {
        let mut tape = Tape::new();
        let (loss, bound) = train_batch.loss(model, &mut tape)?;
        let train_loss = tape.value(loss).item();
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                value: train_loss,
            });
        }
        tape.backward(loss)?;
        adam.step(&mut model.params, &bound.gradients(&tape));

        let val_loss = match val_batch {
            Some(v) => {
                let l = v.loss_value(model)?;
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, value: l });
                }
                Some(l)
            }
            None => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if let Some(l) = val_loss {
            if best.as_ref().is_none_or(|(b, _)| l < *b) {
                best = Some((l, model.params.clone()));
                history.best_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.patience > 0 && since_best >= cfg.patience {
                    break;
                }
            }
        } else {
            history.best_epoch = Some(epoch);
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(history)
}
