//! Two-stage AP selection: candidate classification on AP nodes, then
//! serving-link prediction on (UE, AP) pairs restricted to the predicted
//! candidates. Two baselines are scored on the same test UEs.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Matrix};
use crate::cellfree::instance::{build_all, InstanceGraph, FEATURE_DIM};
use crate::cellfree::scenario::{distance, generate_scenario, top_k, ScenarioConfig};
use crate::embed::{random_walks, train_skipgram, SkipGramParams, WalkParams};
use crate::error::{Error, Result};
use crate::gnn::{GnnModel, LayerKind, LayerSpec, SageAggregator, Skip};
use crate::graph::Graph;
use crate::seed;
use crate::train::{
    classification_metrics, f1, make_split, train, Batch, HeadQuery, HeadSpec, History,
    MetricsReport, SplitMode, Target, TrainConfig,
};

/// Which label set a model is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApTask {
    /// Stage 1: candidate flag per AP node.
    Candidate,
    /// Stage 2: serving flag per (UE, AP) pair.
    Serving,
}

impl ApTask {
    pub fn as_str(self) -> &'static str {
        match self {
            ApTask::Candidate => "candidate",
            ApTask::Serving => "serving",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "candidate" => Some(ApTask::Candidate),
            "serving" => Some(ApTask::Serving),
            _ => None,
        }
    }
}

/// Message-passing encoder shared by both stages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub kind: LayerKind,
    pub hidden: usize,
    pub num_layers: usize,
    pub activation: Activation,
    pub skip: Skip,
    pub edge_head_hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: LayerKind::Sage {
                aggregator: SageAggregator::Mean,
                l2_normalize: false,
            },
            hidden: 32,
            num_layers: 2,
            activation: Activation::Relu,
            skip: Skip::None,
            edge_head_hidden: 32,
        }
    }
}

impl EncoderConfig {
    pub fn layers(&self, input_dim: usize) -> Result<Vec<LayerSpec>> {
        if self.num_layers == 0 || self.hidden == 0 {
            return Err(Error::Config("encoder needs at least one layer of positive width".into()));
        }
        let layers = (0..self.num_layers)
            .map(|i| LayerSpec {
                kind: self.kind,
                d_in: if i == 0 { input_dim } else { self.hidden },
                d_out: self.hidden,
                activation: self.activation,
                // the first layer changes width, so it cannot carry a residual
                skip: if i == 0 { Skip::None } else { self.skip },
            })
            .collect();
        Ok(layers)
    }

    pub fn build(&self, task: ApTask, seed: u64) -> Result<GnnModel> {
        let head = match task {
            ApTask::Candidate => HeadSpec::Node { outputs: 1 },
            ApTask::Serving => HeadSpec::Edge {
                hidden: self.edge_head_hidden,
            },
        };
        let mut model = GnnModel::new(FEATURE_DIM, self.layers(FEATURE_DIM)?, head, seed)?;
        model.metadata.insert("task".into(), task.as_str().into());
        Ok(model)
    }
}

/// Per-instance shallow embeddings scored by `z_ue · z_ap`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShallowConfig {
    pub walks: WalkParams,
    pub skipgram: SkipGramParams,
}

impl Default for ShallowConfig {
    fn default() -> Self {
        Self {
            walks: WalkParams {
                walk_length: 10,
                walks_per_node: 10,
                ..WalkParams::default()
            },
            skipgram: SkipGramParams {
                dim: 8,
                epochs: 5,
                ..SkipGramParams::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApSelectConfig {
    /// `num_ues` and `seed` are overridden by the split counts and `seed`.
    pub scenario: ScenarioConfig,
    pub num_train: usize,
    pub num_val: usize,
    pub num_test: usize,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub shallow: ShallowConfig,
    /// Stage-2 logit at or above which a candidate pair is predicted serving.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ApSelectConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            num_train: 2000,
            num_val: 200,
            num_test: 500,
            encoder: EncoderConfig::default(),
            train: TrainConfig {
                epochs: 150,
                patience: 30,
                ..TrainConfig::default()
            },
            shallow: ShallowConfig::default(),
            threshold: 0.0,
            seed: 0,
        }
    }
}

impl ApSelectConfig {
    pub fn resolved_scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            num_ues: self.num_train + self.num_val + self.num_test,
            seed: self.seed,
            ..self.scenario
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_train == 0 || self.num_val == 0 || self.num_test == 0 {
            return Err(Error::Config("num_train, num_val and num_test must be positive".into()));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        self.resolved_scenario().validate()?;
        self.encoder.layers(FEATURE_DIM)?;
        self.encoder.build(ApTask::Serving, 0)?;
        Ok(())
    }
}

/// Disjoint union of instance graphs with the head query and labels for `task`.
pub fn task_batch(instances: &[&InstanceGraph], task: ApTask) -> Result<Batch> {
    let graphs: Vec<&Graph> = instances.iter().map(|i| &i.graph).collect();
    let (graph, offsets) = Graph::disjoint_union(&graphs)?;
    let mut labels = Vec::new();
    let query = match task {
        ApTask::Candidate => {
            let mut nodes = Vec::new();
            for (inst, &off) in instances.iter().zip(&offsets) {
                nodes.extend((0..inst.num_aps()).map(|a| off + a));
                labels.extend(inst.stage1_labels.iter().map(|&l| f64::from(u8::from(l))));
            }
            HeadQuery::Nodes(Arc::new(nodes))
        }
        ApTask::Serving => {
            let mut pairs = Vec::new();
            for (inst, &off) in instances.iter().zip(&offsets) {
                pairs.extend((0..inst.num_aps()).map(|a| (off + inst.ue_node_id, off + a)));
                labels.extend(inst.stage2_labels.iter().map(|&l| f64::from(u8::from(l))));
            }
            HeadQuery::Pairs(pairs)
        }
    };
    Ok(Batch {
        graph,
        query,
        target: Target::Binary(labels),
    })
}

/// Per-AP logits of `model` on each instance, one row per instance.
pub fn task_scores(model: &GnnModel, instances: &[&InstanceGraph], task: ApTask) -> Result<Vec<Vec<f64>>> {
    let batch = task_batch(instances, task)?;
    let logits = model.predict(&batch.graph, &batch.query)?;
    let mut out = Vec::with_capacity(instances.len());
    let mut at = 0;
    for inst in instances {
        let n = inst.num_aps();
        out.push(logits.as_slice()[at..at + n].to_vec());
        at += n;
    }
    Ok(out)
}

/// Task labels of each instance, one row per instance.
pub fn task_labels(instances: &[&InstanceGraph], task: ApTask) -> Vec<Vec<bool>> {
    instances
        .iter()
        .map(|i| match task {
            ApTask::Candidate => i.stage1_labels.clone(),
            ApTask::Serving => i.stage2_labels.clone(),
        })
        .collect()
}

/// Outcome for one test UE.
#[derive(Clone, Debug, PartialEq)]
pub struct TestOutcome {
    pub ue: usize,
    pub predicted_candidates: Vec<usize>,
    /// Stage-2 logit per AP, `−∞` outside the predicted candidates.
    pub stage2_scores: Vec<f64>,
    pub serving: Vec<usize>,
}

impl TestOutcome {
    /// Fraction of serving APs inside the predicted candidate set.
    pub fn candidate_recall(&self) -> f64 {
        let hit = self
            .serving
            .iter()
            .filter(|a| self.predicted_candidates.contains(a))
            .count();
        hit as f64 / self.serving.len() as f64
    }

    /// Serving recall with `score ≥ threshold` selected.
    pub fn stage2_recall(&self, threshold: f64) -> f64 {
        let hit = self
            .serving
            .iter()
            .filter(|&&a| self.stage2_scores[a] >= threshold)
            .count();
        hit as f64 / self.serving.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApSelectionReport {
    pub num_train: usize,
    pub num_val: usize,
    pub num_test: usize,
    pub degenerate_ues: usize,
    pub stage1: MetricsReport,
    pub stage2: MetricsReport,
    /// Pooled share of serving links inside the predicted candidate sets.
    pub candidate_recall: f64,
    pub nearest: MetricsReport,
    /// F1 of the fixed nearest-`m_serve` set.
    pub nearest_fixed_f1: f64,
    pub shallow: MetricsReport,
    pub stage1_history: History,
    pub stage2_history: History,
    pub outcomes: Vec<TestOutcome>,
}

impl ApSelectionReport {
    pub fn nearest_best_f1(&self) -> f64 {
        self.nearest.best_f1().max(self.nearest_fixed_f1)
    }

    /// `split,metric,value` rows in a fixed order.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("split,metric,value\n");
        let mut row = |split: &str, metric: &str, value: f64| {
            writeln!(out, "{split},{metric},{value}").expect("string write");
        };
        row("data", "num_train", self.num_train as f64);
        row("data", "num_val", self.num_val as f64);
        row("data", "num_test", self.num_test as f64);
        row("data", "degenerate_ues", self.degenerate_ues as f64);
        for (name, v) in self.stage1.named_values() {
            row("test", &format!("stage1_{name}"), v);
        }
        for (name, v) in self.stage2.named_values() {
            row("test", &format!("stage2_{name}"), v);
        }
        row("test", "candidate_recall", self.candidate_recall);
        for (name, v) in self.nearest.named_values() {
            row("test", &format!("nearest_{name}"), v);
        }
        row("test", "nearest_fixed_set_f1", self.nearest_fixed_f1);
        row("test", "nearest_overall_best_f1", self.nearest_best_f1());
        for (name, v) in self.shallow.named_values() {
            row("test", &format!("shallow_{name}"), v);
        }
        if let Some(b) = self.stage1_history.best_epoch {
            row("train", "stage1_best_epoch", b as f64);
        }
        if let Some(b) = self.stage2_history.best_epoch {
            row("train", "stage2_best_epoch", b as f64);
        }
        out
    }
}

pub struct ApSelectionRun {
    pub report: ApSelectionReport,
    pub stage1_model: GnnModel,
    pub stage2_model: GnnModel,
}

/// Shallow-embedding scores `z_ue · z_ap` learned on one instance graph.
pub fn shallow_scores(inst: &InstanceGraph, cfg: &ShallowConfig, seed: u64) -> Result<Vec<f64>> {
    let walks = WalkParams {
        seed: seed::derive(seed, &[0]),
        ..cfg.walks
    };
    let corpus = random_walks(&inst.graph, walks)?;
    let sg = SkipGramParams {
        seed: seed::derive(seed, &[1]),
        ..cfg.skipgram
    };
    let emb = train_skipgram(&corpus, sg)?.embeddings;
    Ok((0..inst.num_aps()).map(|a| emb.dot(inst.ue_node_id, a)).collect())
}

fn flatten<T: Copy>(rows: &[Vec<T>]) -> Vec<T> {
    rows.iter().flatten().copied().collect()
}

/// Runs the whole pipeline: scenario, instances, split, both stages and the
/// baselines. Deterministic for a fixed config.
pub fn run_ap_selection(cfg: &ApSelectConfig) -> Result<ApSelectionRun> {
    cfg.validate()?;
    let scenario_cfg = cfg.resolved_scenario();
    let scenario = generate_scenario(&scenario_cfg)?;
    let (instances, degenerate_ues) = build_all(&scenario, &scenario_cfg)?;
    let total = (cfg.num_train + cfg.num_val + cfg.num_test) as f64;
    let ratios = [
        cfg.num_train as f64 / total,
        cfg.num_val as f64 / total,
        cfg.num_test as f64 / total,
    ];
    let split = make_split(instances.len(), SplitMode::Inductive, ratios, seed::derive(cfg.seed, &[2]))?;
    let pick = |idx: &[usize]| -> Vec<&InstanceGraph> { idx.iter().map(|&i| &instances[i].1).collect() };
    let (train_set, val_set, test_set) = (pick(&split.train), pick(&split.val), pick(&split.test));

    let mut stage1_model = cfg.encoder.build(ApTask::Candidate, seed::derive(cfg.seed, &[3]))?;
    let stage1_history = train(
        &mut stage1_model,
        &task_batch(&train_set, ApTask::Candidate)?,
        Some(&task_batch(&val_set, ApTask::Candidate)?),
        &cfg.train,
    )?;
    let mut stage2_model = cfg.encoder.build(ApTask::Serving, seed::derive(cfg.seed, &[4]))?;
    let stage2_history = train(
        &mut stage2_model,
        &task_batch(&train_set, ApTask::Serving)?,
        Some(&task_batch(&val_set, ApTask::Serving)?),
        &cfg.train,
    )?;

    let s1 = task_scores(&stage1_model, &test_set, ApTask::Candidate)?;
    let s2 = task_scores(&stage2_model, &test_set, ApTask::Serving)?;
    let stage1 = classification_metrics(&flatten(&s1), &flatten(&task_labels(&test_set, ApTask::Candidate)), 0.0)?;
    let serving_labels = flatten(&task_labels(&test_set, ApTask::Serving));

    let m_candidate = scenario_cfg.m_candidate;
    let outcomes: Vec<TestOutcome> = split
        .test
        .iter()
        .zip(test_set.iter().zip(s1.iter().zip(&s2)))
        .map(|(&i, (inst, (c_logits, s_logits)))| {
            let predicted_candidates = top_k(c_logits, m_candidate);
            let stage2_scores = (0..inst.num_aps())
                .map(|a| {
                    if predicted_candidates.contains(&a) {
                        s_logits[a]
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            TestOutcome {
                ue: instances[i].0,
                predicted_candidates,
                stage2_scores,
                serving: inst.serving(),
            }
        })
        .collect();
    let masked: Vec<f64> = outcomes.iter().flat_map(|o| o.stage2_scores.iter().copied()).collect();
    let stage2 = classification_metrics(&masked, &serving_labels, cfg.threshold)?;
    let hits: usize = outcomes
        .iter()
        .map(|o| o.serving.iter().filter(|a| o.predicted_candidates.contains(a)).count())
        .sum();
    let candidate_recall = hits as f64 / serving_labels.iter().filter(|&&l| l).count() as f64;

    // Baseline (a): rank APs by distance to the UE.
    let side = scenario_cfg.area_side_m;
    let dist_scores: Vec<Vec<f64>> = test_set
        .iter()
        .map(|inst| {
            (0..inst.num_aps())
                .map(|a| -distance(inst.ap_position(a, side), inst.ue_position))
                .collect()
        })
        .collect();
    let nearest = classification_metrics(&flatten(&dist_scores), &serving_labels, f64::NEG_INFINITY)?;
    let m_serve = scenario_cfg.m_serve;
    let fixed: Vec<f64> = dist_scores
        .iter()
        .flat_map(|row| {
            let chosen = top_k(row, m_serve);
            (0..row.len()).map(move |a| if chosen.contains(&a) { 1.0 } else { 0.0 })
        })
        .collect();
    let fixed_report = classification_metrics(&fixed, &serving_labels, 0.5)?;
    let nearest_fixed_f1 = f1(fixed_report.precision, fixed_report.recall);

    // Baseline (b): node2vec-style embeddings learned per test instance.
    let shallow_rows: Vec<Vec<f64>> = test_set
        .par_iter()
        .zip(split.test.par_iter())
        .map(|(inst, &i)| shallow_scores(inst, &cfg.shallow, seed::derive(cfg.seed, &[5, i as u64])))
        .collect::<Result<_>>()?;
    let shallow = classification_metrics(&flatten(&shallow_rows), &serving_labels, 0.0)?;

    Ok(ApSelectionRun {
        report: ApSelectionReport {
            num_train: train_set.len(),
            num_val: val_set.len(),
            num_test: test_set.len(),
            degenerate_ues,
            stage1,
            stage2,
            candidate_recall,
            nearest,
            nearest_fixed_f1,
            shallow,
            stage1_history,
            stage2_history,
            outcomes,
        },
        stage1_model,
        stage2_model,
    })
}

/// Max-abs difference helper for comparing embeddings across instances.
pub fn max_abs_row_diff(a: &Matrix, b: &Matrix, rows: usize) -> f64 {
    (0..rows)
        .flat_map(|r| a.row(r).iter().zip(b.row(r)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellfree::scenario::generate_scenario;

    fn small() -> ApSelectConfig {
        ApSelectConfig {
            num_train: 60,
            num_val: 10,
            num_test: 30,
            train: TrainConfig {
                epochs: 20,
                ..TrainConfig::default()
            },
            shallow: ShallowConfig {
                skipgram: SkipGramParams {
                    epochs: 1,
                    ..ShallowConfig::default().skipgram
                },
                ..ShallowConfig::default()
            },
            seed: 3,
            ..ApSelectConfig::default()
        }
    }

    #[test]
    fn stage2_recall_bounded_by_candidates() {
        let run = run_ap_selection(&small()).unwrap();
        let r = &run.report;
        assert_eq!(r.num_train + r.num_val + r.num_test + r.degenerate_ues, 100);
        for o in &r.outcomes {
            assert_eq!(o.predicted_candidates.len(), 8);
            assert!(o.stage2_recall(f64::MIN) <= o.candidate_recall());
            assert_eq!(o.stage2_recall(f64::MIN), o.candidate_recall());
        }
        let max_recall = r.stage2.pr_curve.iter().map(|p| p.recall).fold(0.0, f64::max);
        assert!((max_recall - r.candidate_recall).abs() < 1e-12);
        assert_eq!(run.stage1_model.metadata["task"], "candidate");
        assert_eq!(run.stage2_model.metadata["task"], "serving");
    }

    #[test]
    fn ap_embeddings_ignore_ue_labels() {
        let c = ScenarioConfig { num_ues: 30, seed: 2, ..ScenarioConfig::default() };
        let s = generate_scenario(&c).unwrap();
        let (all, _) = build_all(&s, &c).unwrap();
        let a = all[0].1.clone();
        let mut b = a.clone();
        b.stage2_labels.iter_mut().for_each(|l| *l = !*l);
        b.ue_position = [0.0, 0.0];
        // UE state cannot reach AP rows through the directed edges
        let mut x = a.graph.node_features().clone();
        x.row_mut(a.ue_node_id).iter_mut().for_each(|v| *v = 3.0);
        b.graph = a.graph.with_features(x).unwrap();
        let model = EncoderConfig::default().build(ApTask::Serving, 1).unwrap();
        let ea = model.embed(&a.graph).unwrap();
        let eb = model.embed(&b.graph).unwrap();
        assert_eq!(max_abs_row_diff(&ea, &eb, a.num_aps()), 0.0);
        let other = all.iter().find(|(_, g)| g.measured_set != a.measured_set).unwrap();
        let eo = model.embed(&other.1.graph).unwrap();
        assert!(max_abs_row_diff(&ea, &eo, a.num_aps()) > 0.0);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<ApSelectConfig>("{\"bogus\": 1}").is_err());
        let c: ApSelectConfig = serde_json::from_str("{\"num_test\": 7}").unwrap();
        assert_eq!(c.num_test, 7);
        assert_eq!(c.scenario.num_aps, 25);
    }
}
