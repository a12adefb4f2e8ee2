//! Model layer: named-parameter graphs, architecture builders, and
//! checkpoint serialization.

pub mod checkpoint;
pub mod graph;
pub mod zoo;

pub use checkpoint::{
    load_checkpoint, load_partial, save_checkpoint, TransferReport, CHECKPOINT_VERSION,
};
pub use graph::{
    ForwardPass, GraphNode, LayerCensus, LayerKind, Model, NodeId, ParamCensus, ParamId,
    ParamStore, Parameter,
};
pub use zoo::{build_by_name, build_densenet121, build_nemanet, InceptionWidths};
