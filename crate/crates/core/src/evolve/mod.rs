//! Gene-level mutation and crossover, individual-level elimination and
//! reproduction.

mod mutation;
mod population;

pub use mutation::{
    mutation_operators, prune_side_branches, random_gene, EdgeFlip, MutationConfig, MutationOperator, Mutator,
    NodeAdd, NodeDelete,
};
pub use population::{crossover, eliminate, reproduce};
