//! Message-passing GNN layers (GCN, GraphSAGE, GAT, GIN) and model stacking.

pub mod layers;
pub mod model;

pub use layers::{
    gat_forward, gcn_forward, gin_forward, oversmoothing_metric, sage_forward, GinMlp, LayerKind,
    LayerSpec, SageAggregator, Skip,
};
pub use model::{layer_param_name, GnnModel, FORMAT_VERSION};
