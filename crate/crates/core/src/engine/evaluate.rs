use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::adjsearch::{matcher, InstanceMatcher, InstanceTables, MatchCaps};
use crate::error::{Error, Result};
use crate::evalkit::{EvalSet, RankingMetrics, EVAL_NEGATIVES};
use crate::gene::{Gene, GeneKey};
use crate::hin::{split_dataset, Hin, InteractionDataset, Schema, Split};
use crate::mvgcn::{import_features, init_params, train, EndpointSizes, Embeddings, ModelParams, TrainConfig};
use crate::seed::derive_seed;

use super::config::SearchConfig;

/// Outcome of training one individual.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Best validation NDCG@10.
    pub fitness: f64,
    pub best_epoch: usize,
    pub params: ModelParams,
    pub tables: Vec<InstanceTables>,
}

/// Read-only inputs shared by every evaluation of a run: the split, the
/// graph with only train edges in the target relation, and fixed validation
/// and test negatives.
pub struct Evaluator {
    pub schema: Arc<Schema>,
    pub dataset: InteractionDataset,
    pub train_graph: Hin,
    pub val: EvalSet,
    pub test: EvalSet,
    matcher: Arc<dyn InstanceMatcher>,
    caps: MatchCaps,
    dim: usize,
    train_cfg: TrainConfig,
    features: Option<String>,
    seed: u64,
    tables: Mutex<HashMap<GeneKey, InstanceTables>>,
}

impl Evaluator {
    pub fn new(cfg: &SearchConfig, hin: &Hin) -> Result<Self> {
        let seed = cfg.seed;
        let schema = hin.schema().clone();
        let dataset = split_dataset(hin, cfg.split, derive_seed(seed, &["split".into()]))?;
        if dataset.count(Split::Val) == 0 || dataset.count(Split::Test) == 0 {
            return Err(Error::Validation("validation and test splits must be non-empty".into()));
        }
        let train_graph = hin.with_relation_edges(schema.target().relation, &train_edges(&schema, &dataset))?;
        let val = EvalSet::build(&dataset, Split::Val, EVAL_NEGATIVES, derive_seed(seed, &["val-negatives".into()]))?;
        let test = EvalSet::build(&dataset, Split::Test, EVAL_NEGATIVES, derive_seed(seed, &["test-negatives".into()]))?;
        let features = match &cfg.features {
            Some(path) => Some(std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?),
            None => None,
        };
        Ok(Evaluator {
            schema,
            dataset,
            train_graph,
            val,
            test,
            matcher: matcher(&cfg.matcher)?,
            caps: cfg.caps,
            dim: cfg.dim,
            train_cfg: cfg.train,
            features,
            seed,
            tables: Mutex::new(HashMap::new()),
        })
    }

    /// Neighbor tables for one gene. They depend only on the gene key and the
    /// master seed, so they are built once per run.
    pub fn tables_for(&self, gene: &Gene) -> InstanceTables {
        let key = gene.canonical_key(&self.schema);
        if let Some(t) = self.tables.lock().expect("table cache").get(&key) {
            return t.clone();
        }
        let s = derive_seed(self.seed, &["tables".into(), key.as_str().into()]);
        let t = self.matcher.materialize(gene, &self.train_graph, self.caps, s);
        self.tables.lock().expect("table cache").entry(key).or_insert(t).clone()
    }

    /// Materializes tables, trains a fresh model and reports its best
    /// validation NDCG@10. Views are ordered by gene key, so the result does
    /// not depend on gene order. Every individual of a run shares the feature
    /// initialization, batch order and training negatives; per-view weights
    /// are keyed by gene.
    pub fn evaluate(&self, genes: &[Gene]) -> Result<Evaluation> {
        if genes.is_empty() {
            return Err(Error::Validation("an individual needs at least one gene".into()));
        }
        for g in genes {
            let v = g.validate(&self.schema);
            if !v.is_empty() {
                return Err(Error::Validation(format!("invalid gene {}", g.display(&self.schema))));
            }
        }
        let mut keyed: Vec<(GeneKey, &Gene)> = genes.iter().map(|g| (g.canonical_key(&self.schema), g)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let keys: Vec<GeneKey> = keyed.iter().map(|(k, _)| k.clone()).collect();
        let tables: Vec<InstanceTables> = keyed.iter().map(|(_, g)| self.tables_for(g)).collect();
        let mut params = init_params(
            EndpointSizes::of(&self.train_graph),
            self.dim,
            keys,
            derive_seed(self.seed, &["init".into()]),
        );
        if let Some(text) = &self.features {
            import_features(&mut params, &self.schema, text)?;
        }
        let cfg = TrainConfig {
            seed: derive_seed(self.seed, &["train".into()]),
            ..self.train_cfg
        };
        let out = train(params, &tables, &self.dataset, &self.val, cfg)?;
        Ok(Evaluation {
            fitness: out.best_ndcg10,
            best_epoch: out.best_epoch,
            params: out.params,
            tables,
        })
    }

    pub fn test_metrics(&self, params: &ModelParams, tables: &[InstanceTables]) -> RankingMetrics {
        self.test.evaluate(&Embeddings::compute(params, tables))
    }

    /// Tables for a checkpoint's views, in the checkpoint's view order.
    pub fn tables_for_params(&self, params: &ModelParams, genes: &[Gene]) -> Result<Vec<InstanceTables>> {
        let mut by_key: HashMap<GeneKey, &Gene> = HashMap::new();
        for g in genes {
            by_key.insert(g.canonical_key(&self.schema), g);
        }
        let mut expected: Vec<&GeneKey> = params.gene_keys.iter().collect();
        let mut given: Vec<GeneKey> = genes.iter().map(|g| g.canonical_key(&self.schema)).collect();
        expected.sort();
        given.sort();
        if expected.into_iter().cloned().collect::<Vec<_>>() != given {
            return Err(Error::Validation(format!(
                "genes do not match the checkpoint: checkpoint has [{}], genes file has [{}]",
                params.gene_keys.iter().map(GeneKey::as_str).collect::<Vec<_>>().join(", "),
                given.iter().map(GeneKey::as_str).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(params.gene_keys.iter().map(|k| self.tables_for(by_key[k])).collect())
    }
}

fn train_edges(schema: &Schema, ds: &InteractionDataset) -> Vec<(u32, u32)> {
    let t = schema.target();
    let rel = schema.relation(t.relation);
    // stored edges are (a-side, b-side); positives are (source, sink)
    let flip = rel.a != t.source;
    ds.records(Split::Train).map(|(u, i)| if flip { (i, u) } else { (u, i) }).collect()
}
