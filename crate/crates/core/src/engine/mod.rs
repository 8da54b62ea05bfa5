//! The generational search: breed, filter with the surrogate, evaluate the
//! rest in parallel, log, retrain the surrogate.

mod config;
mod evaluate;
mod search;

pub use config::{InitMode, MutationSchedule, SearchConfig};
pub use evaluate::{Evaluation, Evaluator};
pub use search::{gene_frequency, run_search, run_search_with, GeneFrequency, GenerationLog, Individual, IndividualLog, SearchOutcome};

/// Final gene table: `count<TAB>key`, most frequent first.
pub fn format_frequency(freq: &[GeneFrequency]) -> String {
    freq.iter().map(|f| format!("{}\t{}\n", f.count, f.key)).collect()
}
