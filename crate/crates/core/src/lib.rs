//! Graph representation learning from first principles: classical graph
//! features, random-walk embeddings, message-passing GNN layers on a small
//! reverse-mode differentiation core, and a cell-free massive MIMO
//! simulator for access-point selection.

pub mod autodiff;
pub mod cellfree;
pub mod embed;
pub mod error;
pub mod features;
pub mod gnn;
pub mod graph;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
pub mod cli;
