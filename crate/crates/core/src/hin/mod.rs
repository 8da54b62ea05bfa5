//! Heterogeneous information network storage and the interaction dataset
//! derived from its target relation.

mod dataset;
mod graph;
mod negatives;
pub(crate) mod schema;
pub mod synth;

pub use dataset::{split_dataset, InteractionDataset, Split, SplitRatios};
pub use graph::{format_edges, load_hin, parse_edges, write_edges, Hin, HinBuilder};
pub use negatives::NegativeSampler;
pub use schema::{load_schema, Relation, RelationSpec, Schema, SchemaFile, Target, TargetSpec};

/// Index into [`Schema::node_types`].
pub type TypeId = usize;
/// Index into [`Schema::relations`].
pub type RelId = usize;
/// Node id, local to its node type.
pub type NodeId = u32;

/// Which endpoint of the target relation a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Sink,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Source => Side::Sink,
            Side::Sink => Side::Source,
        }
    }
}
