use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adjsearch::MatchCaps;
use crate::error::{Error, Result};
use crate::evolve::MutationConfig;
use crate::gene::MAX_NODES;
use crate::hin::SplitRatios;
use crate::mvgcn::TrainConfig;

/// How generation 0 is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Every gene starts as the direct source-sink edge.
    Direct,
    /// Every gene is an independent random valid gene.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationSchedule {
    pub early: f64,
    pub late: f64,
    /// First generation that uses `late`.
    pub switch_generation: usize,
}

impl Default for MutationSchedule {
    fn default() -> Self {
        MutationSchedule {
            early: 0.6,
            late: 0.3,
            switch_generation: 5,
        }
    }
}

impl MutationSchedule {
    pub fn at(&self, generation: usize) -> f64 {
        if generation < self.switch_generation {
            self.early
        } else {
            self.late
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub population: usize,
    pub genes_per_individual: usize,
    pub generations: usize,
    pub mutation: MutationSchedule,
    pub p_complex: f64,
    pub max_retries: usize,
    pub p_swap: f64,
    pub survive_fraction: f64,
    /// Added to shifted fitness before proportional reproduction.
    pub reproduce_eps: f64,
    pub use_predictor: bool,
    pub filter_quantile: f64,
    pub predictor_epochs: usize,
    pub predictor_lr: f64,
    pub init: InitMode,
    /// Node limit for random initial genes.
    pub init_max_nodes: usize,
    pub seed: u64,
    pub matcher: String,
    pub operators: Vec<String>,
    pub caps: MatchCaps,
    pub dim: usize,
    pub train: TrainConfig,
    pub split: SplitRatios,
    /// Worker threads for individual evaluation; all cores when unset.
    pub workers: Option<usize>,
    /// Pretrained endpoint features in `type<TAB>id<TAB>v1,...` form.
    pub features: Option<PathBuf>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population: 20,
            genes_per_individual: 5,
            generations: 10,
            mutation: MutationSchedule::default(),
            p_complex: 0.5,
            max_retries: 32,
            p_swap: 0.2,
            survive_fraction: 0.5,
            reproduce_eps: 1e-6,
            use_predictor: true,
            filter_quantile: 0.25,
            predictor_epochs: 100,
            predictor_lr: 0.01,
            init: InitMode::Direct,
            init_max_nodes: 4,
            seed: 0,
            matcher: "sampled".into(),
            operators: ["edge-flip", "node-add", "node-del"].map(String::from).to_vec(),
            caps: MatchCaps::default(),
            dim: 64,
            train: TrainConfig::default(),
            split: SplitRatios::default(),
            workers: None,
            features: None,
        }
    }
}

impl SearchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SearchConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mutation_config(&self, generation: usize) -> MutationConfig {
        MutationConfig {
            p_mutate: self.mutation.at(generation),
            p_complex: self.p_complex,
            max_retries: self.max_retries,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population < 2 {
            return bad(format!("population must be >= 2, got {}", self.population));
        }
        if self.genes_per_individual < 1 {
            return bad("genes_per_individual must be >= 1".into());
        }
        if self.generations < 1 {
            return bad("generations must be >= 1".into());
        }
        let prob = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        prob("mutation.early", self.mutation.early)?;
        prob("mutation.late", self.mutation.late)?;
        prob("p_complex", self.p_complex)?;
        prob("p_swap", self.p_swap)?;
        prob("filter_quantile", self.filter_quantile)?;
        if !(self.survive_fraction > 0.0 && self.survive_fraction <= 1.0) {
            return bad(format!("survive_fraction must be in (0, 1], got {}", self.survive_fraction));
        }
        if !(self.reproduce_eps > 0.0) {
            return bad("reproduce_eps must be > 0".into());
        }
        if !(self.predictor_lr > 0.0) {
            return bad("predictor_lr must be > 0".into());
        }
        if !(2..=MAX_NODES).contains(&self.init_max_nodes) {
            return bad(format!("init_max_nodes must be in 2..={MAX_NODES}"));
        }
        if self.dim < 1 {
            return bad("dim must be >= 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        if self.operators.is_empty() {
            return bad("at least one mutation operator is required".into());
        }
        self.train.validate()?;
        self.split.validate()?;
        Ok(())
    }
}
