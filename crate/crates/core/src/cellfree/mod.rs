//! Cell-free massive MIMO scenarios and the AP-selection task built on them.

pub mod instance;
pub mod pipeline;
pub mod scenario;

pub use instance::{ap_knn_edges, build_all, build_instance_graph, rsrp_norm, InstanceGraph, FEATURE_DIM};
pub use pipeline::{
    run_ap_selection, shallow_scores, task_batch, task_labels, task_scores, ApSelectConfig,
    ApSelectionReport, ApSelectionRun, ApTask, EncoderConfig, ShallowConfig, TestOutcome,
};
pub use scenario::{
    ap_positions, distance, generate_scenario, ground_truth, large_scale_gain, measure, top_k,
    ApLayout, GroundTruth, Measurement, Point, Scenario, ScenarioConfig,
};
