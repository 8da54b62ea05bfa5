//! Evolutionary search over meta-structures (typed sub-graph templates) on a
//! heterogeneous information network, scored by an attention-fused
//! multi-view GCN link ranker.
//!
//! The crate is organised bottom-up:
//!
//! * [`hin`] typed graph storage, dataset splits, negative sampling, synthetic graphs
//! * [`gene`] meta-structure encoding, validation, canonical keys
//! * [`evolve`] mutation operators, crossover, elimination, reproduction
//! * [`adjsearch`] instance matching into per-node neighbor tables
//! * [`mvgcn`] the multi-view GCN, its loss, hand-derived gradients and trainer
//! * [`predictor`] the surrogate that scores gene sets before training
//! * [`evalkit`] HR/MRR/NDCG under the sampled-negatives protocol
//! * [`engine`] the generational search loop
//!
//! Interchangeable strategies (mutation operators, instance matchers) are
//! registered by name in a [`registry::Registry`] and selected from config.

pub mod adjsearch;
pub mod engine;
pub mod error;
pub mod evalkit;
pub mod evolve;
pub mod gene;
pub mod hin;
pub mod mvgcn;
pub mod optim;
pub mod predictor;
pub mod registry;
pub mod seed;

pub use error::{Error, Result};
