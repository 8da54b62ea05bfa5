use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{InitMode, SearchConfig};
use super::evaluate::{Evaluation, Evaluator};
use crate::error::{Error, Result};
use crate::evolve::{crossover, eliminate, random_gene, reproduce, Mutator};
use crate::gene::{Gene, GeneKey};
use crate::hin::{Hin, Schema};
use crate::predictor::{
    filter_threshold, init_predictor, mse, predict, spearman, train_predictor, HistoryRecord,
    HistoryStore, PredictorParams,
};
use crate::seed::{self, derive_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genes: Vec<Gene>,
    /// Validation NDCG@10, or the surrogate's estimate when `evaluated` is
    /// false.
    pub fitness: f64,
    pub evaluated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualLog {
    pub gene_keys: Vec<GeneKey>,
    pub fitness: f64,
    pub evaluated: bool,
    /// Surrogate estimate on the normalized scale, when a trained surrogate
    /// existed.
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub generation: usize,
    pub individuals: Vec<IndividualLog>,
    pub mean_fitness: f64,
    pub max_fitness: f64,
    /// Mean and max over real evaluations only.
    pub mean_real_fitness: Option<f64>,
    pub max_real_fitness: Option<f64>,
    /// Individuals whose fitness came from the surrogate.
    pub filtered: usize,
    /// Individuals trained this generation (cache misses).
    pub trained: usize,
    pub predictor_mse: Option<f64>,
    /// Surrogate estimates (made before retraining) against this
    /// generation's fresh real evaluations.
    pub predictor_spearman: Option<f64>,
    /// Wall-clock time; kept out of the serialized log so logs compare
    /// byte-for-byte across runs.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneFrequency {
    pub key: GeneKey,
    pub count: usize,
}

pub struct SearchOutcome {
    pub logs: Vec<GenerationLog>,
    pub population: Vec<Individual>,
    /// Canonical gene keys over the last 5 generations, most frequent first.
    pub frequency: Vec<GeneFrequency>,
    pub history: HistoryStore,
    pub predictor: PredictorParams,
    /// Best really-evaluated individual of the whole run.
    pub best: Individual,
}

/// Sorted key multiset of an individual; the fitness cache key.
fn fingerprint(schema: &Schema, genes: &[Gene]) -> Vec<GeneKey> {
    let mut keys: Vec<GeneKey> = genes.iter().map(|g| g.canonical_key(schema)).collect();
    keys.sort();
    keys
}

/// Occurrences of each canonical key in the given populations, most frequent
/// first, ties by key.
pub fn gene_frequency<'a>(schema: &Schema, populations: impl IntoIterator<Item = &'a [Individual]>) -> Vec<GeneFrequency> {
    let mut counts: BTreeMap<GeneKey, usize> = BTreeMap::new();
    for pop in populations {
        for ind in pop {
            for g in &ind.genes {
                *counts.entry(g.canonical_key(schema)).or_default() += 1;
            }
        }
    }
    let mut out: Vec<GeneFrequency> = counts.into_iter().map(|(key, count)| GeneFrequency { key, count }).collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    out
}

/// Re-mutates repeated genes inside one individual until its keys are
/// distinct, giving up after the configured retries.
fn dedupe(genes: &mut [Gene], schema: &Schema, mutator: &Mutator, cfg: &SearchConfig, generation: usize, rng: &mut seed::Rng) {
    let mcfg = cfg.mutation_config(generation);
    for i in 1..genes.len() {
        for _ in 0..cfg.max_retries {
            let key = genes[i].canonical_key(schema);
            if !genes[..i].iter().any(|g| g.canonical_key(schema) == key) {
                break;
            }
            genes[i] = mutator.mutate_always(&genes[i], schema, &mcfg, rng);
        }
    }
}

struct Run<'a> {
    cfg: &'a SearchConfig,
    schema: &'a Schema,
    eval: &'a Evaluator,
    mutator: Mutator,
    pool: rayon::ThreadPool,
    cache: HashMap<Vec<GeneKey>, f64>,
    history: HistoryStore,
    predictor: PredictorParams,
    predictor_trained: bool,
}

impl Run<'_> {
    fn rng(&self, generation: usize, role: &str) -> seed::Rng {
        seed::rng_from(self.cfg.seed, &["generation".into(), generation.into(), role.into()])
    }

    fn initial(&self) -> Vec<Vec<Gene>> {
        let k = self.cfg.genes_per_individual;
        match self.cfg.init {
            InitMode::Direct => vec![vec![Gene::direct(self.schema); k]; self.cfg.population],
            InitMode::Random => {
                let mut rng = self.rng(0, "init");
                (0..self.cfg.population)
                    .map(|_| {
                        let mut genes: Vec<Gene> =
                            (0..k).map(|_| random_gene(self.schema, self.cfg.init_max_nodes, &mut rng)).collect();
                        dedupe(&mut genes, self.schema, &self.mutator, self.cfg, 0, &mut rng);
                        genes
                    })
                    .collect()
            }
        }
    }

    /// Elite first, then proportional copies of the survivors, then mutation
    /// and crossover on everything but the elite.
    fn breed(&self, prev: &[Individual], generation: usize) -> Result<Vec<Vec<Gene>>> {
        let fitness: Vec<f64> = prev.iter().map(|i| i.fitness).collect();
        let survivors_idx = eliminate(&fitness, self.cfg.survive_fraction)?;
        let elite = prev
            .iter()
            .enumerate()
            .filter(|(_, i)| i.evaluated)
            .fold(None::<(usize, f64)>, |best, (i, ind)| match best {
                Some((_, f)) if f >= ind.fitness => best,
                _ => Some((i, ind.fitness)),
            })
            .map_or(survivors_idx[0], |(i, _)| i);
        let survivors: Vec<Vec<Gene>> = survivors_idx.iter().map(|&i| prev[i].genes.clone()).collect();
        let surv_fit: Vec<f64> = survivors_idx.iter().map(|&i| prev[i].fitness).collect();
        let mut rng = self.rng(generation, "reproduce");
        let mut rest = reproduce(&survivors, &surv_fit, self.cfg.population - 1, self.cfg.reproduce_eps, &mut rng);

        let mcfg = self.cfg.mutation_config(generation);
        for (i, genes) in rest.iter_mut().enumerate() {
            let mut rng = seed::rng_from(self.cfg.seed, &["generation".into(), generation.into(), "mutate".into(), i.into()]);
            for g in genes.iter_mut() {
                *g = self.mutator.mutate(g, self.schema, &mcfg, &mut rng);
            }
        }
        crossover(&mut rest, self.cfg.p_swap, &mut self.rng(generation, "crossover"));
        let mut rng = self.rng(generation, "dedupe");
        for genes in rest.iter_mut() {
            dedupe(genes, self.schema, &self.mutator, self.cfg, generation, &mut rng);
        }
        let mut out = vec![prev[elite].genes.clone()];
        out.extend(rest);
        Ok(out)
    }

    fn evaluate_generation(&mut self, generation: usize, pop: Vec<Vec<Gene>>) -> Result<(Vec<Individual>, GenerationLog)> {
        let start = Instant::now();
        let n = pop.len();
        let prints: Vec<Vec<GeneKey>> = pop.iter().map(|g| fingerprint(self.schema, g)).collect();
        let predicted: Vec<Option<f64>> = pop
            .iter()
            .map(|g| self.predictor_trained.then(|| predict(&self.predictor, g)))
            .collect();

        // surrogate filter over individuals that would need training
        let mut skip = vec![false; n];
        if self.cfg.use_predictor && self.predictor_trained {
            let cutoff = filter_threshold(&self.history, self.cfg.filter_quantile);
            let limit = (self.cfg.filter_quantile * n as f64).ceil() as usize;
            let mut below: Vec<(f64, usize)> = (0..n)
                .filter(|&i| !self.cache.contains_key(&prints[i]))
                .filter_map(|i| predicted[i].filter(|p| *p < cutoff).map(|p| (p, i)))
                .collect();
            below.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, i) in below.iter().take(limit) {
                skip[i] = true;
            }
        }

        // one training per distinct uncached fingerprint
        let mut todo: Vec<usize> = Vec::new();
        let mut seen: HashMap<&Vec<GeneKey>, ()> = HashMap::new();
        for i in 0..n {
            if !skip[i] && !self.cache.contains_key(&prints[i]) && seen.insert(&prints[i], ()).is_none() {
                todo.push(i);
            }
        }
        let eval = self.eval;
        let results: Vec<Result<Evaluation>> = self
            .pool
            .install(|| todo.par_iter().map(|&i| eval.evaluate(&pop[i])).collect());
        let mut fresh: Vec<(usize, f64)> = Vec::with_capacity(todo.len());
        for (&i, r) in todo.iter().zip(results) {
            let e = r.map_err(|e| Error::Generation {
                generation,
                source: Box::new(e),
            })?;
            self.cache.insert(prints[i].clone(), e.fitness);
            fresh.push((i, e.fitness));
        }

        let individuals: Vec<Individual> = pop
            .into_iter()
            .enumerate()
            .map(|(i, genes)| {
                if skip[i] {
                    let p = predicted[i].expect("filtered individuals have predictions");
                    Individual {
                        genes,
                        fitness: self.history.denormalize(p),
                        evaluated: false,
                    }
                } else {
                    Individual {
                        genes,
                        fitness: self.cache[&prints[i]],
                        evaluated: true,
                    }
                }
            })
            .collect();

        let predictor_spearman = if self.predictor_trained && fresh.len() >= 2 {
            let p: Vec<f64> = fresh.iter().map(|&(i, _)| predicted[i].expect("trained")).collect();
            let t: Vec<f64> = fresh.iter().map(|&(_, f)| f).collect();
            Some(spearman(&p, &t)?)
        } else {
            None
        };

        for &(i, f) in &fresh {
            self.history.push(HistoryRecord {
                generation,
                genes: individuals[i].genes.clone(),
                gene_keys: prints[i].clone(),
                raw_metric: f,
            })?;
        }
        let predictor_mse = if self.cfg.use_predictor && !self.history.is_empty() {
            self.predictor = train_predictor(self.predictor.clone(), &self.history, self.cfg.predictor_epochs, self.cfg.predictor_lr);
            self.predictor_trained = true;
            Some(mse(&self.predictor, &self.history.training_data()))
        } else {
            None
        };

        let fit: Vec<f64> = individuals.iter().map(|i| i.fitness).collect();
        let real: Vec<f64> = individuals.iter().filter(|i| i.evaluated).map(|i| i.fitness).collect();
        let log = GenerationLog {
            generation,
            individuals: individuals
                .iter()
                .zip(&predicted)
                .map(|(ind, p)| IndividualLog {
                    gene_keys: ind.genes.iter().map(|g| g.canonical_key(self.schema)).collect(),
                    fitness: ind.fitness,
                    evaluated: ind.evaluated,
                    predicted: *p,
                })
                .collect(),
            mean_fitness: fit.iter().sum::<f64>() / n as f64,
            max_fitness: fit.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_real_fitness: (!real.is_empty()).then(|| real.iter().sum::<f64>() / real.len() as f64),
            max_real_fitness: real.iter().copied().reduce(f64::max),
            filtered: skip.iter().filter(|s| **s).count(),
            trained: fresh.len(),
            predictor_mse,
            predictor_spearman,
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok((individuals, log))
    }
}

/// The generational loop. `on_generation` sees each log as soon as it is
/// complete.
pub fn run_search(
    cfg: &SearchConfig,
    hin: &Hin,
    mut on_generation: impl FnMut(&GenerationLog),
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let eval = Evaluator::new(cfg, hin)?;
    run_search_with(cfg, &eval, &mut on_generation)
}

pub fn run_search_with(
    cfg: &SearchConfig,
    eval: &Evaluator,
    on_generation: &mut dyn FnMut(&GenerationLog),
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let schema = &*eval.schema;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut run = Run {
        cfg,
        schema,
        eval,
        mutator: Mutator::from_names(&cfg.operators)?,
        pool,
        cache: HashMap::new(),
        history: HistoryStore::new(),
        predictor: init_predictor(schema.type_count(), derive_seed(cfg.seed, &["predictor-init".into()])),
        predictor_trained: false,
    };

    let mut logs = Vec::with_capacity(cfg.generations);
    let mut generations: Vec<Vec<Individual>> = Vec::with_capacity(cfg.generations);
    let mut pop = run.initial();
    for generation in 0..cfg.generations {
        if generation > 0 {
            pop = run.breed(generations.last().expect("previous generation"), generation)?;
        }
        let (individuals, log) = run.evaluate_generation(generation, pop.clone())?;
        log::info!(
            "generation {generation}: mean {:.4} max {:.4} trained {} filtered {}",
            log.mean_fitness,
            log.max_fitness,
            log.trained,
            log.filtered
        );
        on_generation(&log);
        logs.push(log);
        generations.push(individuals);
    }

    let tail = generations.len().saturating_sub(5);
    let frequency = gene_frequency(schema, generations[tail..].iter().map(Vec::as_slice));
    let best = generations
        .iter()
        .flatten()
        .filter(|i| i.evaluated)
        .fold(None::<&Individual>, |b, i| match b {
            Some(b) if b.fitness >= i.fitness => Some(b),
            _ => Some(i),
        })
        .expect("generation 0 is fully evaluated")
        .clone();
    Ok(SearchOutcome {
        logs,
        population: generations.pop().expect("at least one generation"),
        frequency,
        history: run.history,
        predictor: run.predictor,
        best,
    })
}
