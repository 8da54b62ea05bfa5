use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::forward::embed_node;
use super::objective::{batch_loss_grad, BatchLoss, Example, LossConfig};
use super::params::ModelParams;
use crate::adjsearch::InstanceTables;
use crate::error::{Error, Result};
use crate::evalkit::{EvalSet, Scorer};
use crate::hin::{InteractionDataset, NegativeSampler, NodeId, Side, Split};
use crate::optim::{Adam, Parameters};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub margin: f64,
    pub l2: f64,
    pub lr: f64,
    pub warmup_epochs: usize,
    /// Per-epoch learning-rate factor after warm-up.
    pub decay: f64,
    /// Negatives drawn per positive.
    pub negatives: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Negatives are drawn proportional to `frequency^exponent`.
    pub negative_exponent: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 0.3,
            l2: 0.05,
            lr: 0.01,
            warmup_epochs: 2,
            decay: 0.95,
            negatives: 4,
            batch_size: 64,
            epochs: 30,
            negative_exponent: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if !(self.margin > 0.0) {
            return bad("margin must be > 0");
        }
        if !(self.l2 >= 0.0) {
            return bad("l2 must be >= 0");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must be in (0, 1]");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.negatives == 0 || self.batch_size == 0 {
            return bad("negatives and batch_size must be >= 1");
        }
        if !self.negative_exponent.is_finite() {
            return bad("negative_exponent must be finite");
        }
        Ok(())
    }

    /// Learning rate for 0-based `epoch`: linear ramp to `lr` over the
    /// warm-up epochs, then `lr * decay^(epoch - warmup)`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch < self.warmup_epochs {
            self.lr * (epoch + 1) as f64 / self.warmup_epochs as f64
        } else {
            self.lr * self.decay.powi((epoch - self.warmup_epochs) as i32)
        }
    }
}

/// Fused embeddings of every source and sink node.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub source: Array2<f64>,
    pub sink: Array2<f64>,
}

impl Embeddings {
    pub fn compute(p: &ModelParams, tables: &[InstanceTables]) -> Self {
        let sizes = p.sizes();
        let fill = |side: Side, n: usize| {
            let mut out = Array2::zeros((n, p.dim));
            for v in 0..n {
                out.row_mut(v).assign(&embed_node(p, tables, side, v as NodeId));
            }
            out
        };
        Embeddings {
            source: fill(Side::Source, sizes.source),
            sink: fill(Side::Sink, sizes.sink),
        }
    }
}

impl Scorer for Embeddings {
    /// Ranks by the inner product; the sigmoid is monotone and would only
    /// add ties once it saturates.
    fn score(&self, user: NodeId, item: NodeId) -> f64 {
        self.source.row(user as usize).dot(&self.sink.row(item as usize))
    }
}

pub fn check_tables(p: &ModelParams, tables: &[InstanceTables]) -> Result<()> {
    if tables.len() != p.n_views() {
        return Err(Error::Validation(format!(
            "model has {} views but {} table pairs were given",
            p.n_views(),
            tables.len()
        )));
    }
    let sizes = p.sizes();
    for (k, t) in p.gene_keys.iter().zip(tables) {
        if &t.source.gene_key != k || &t.sink.gene_key != k {
            return Err(Error::Validation(format!("tables for `{}` do not match view `{k}`", t.source.gene_key)));
        }
        if t.source.len() != sizes.source || t.sink.len() != sizes.sink {
            return Err(Error::Validation(format!("tables for `{k}` do not match the feature tables")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub val_ndcg10: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation NDCG@10.
    pub params: ModelParams,
    pub best_ndcg10: f64,
    pub best_epoch: usize,
    /// Epoch 0 is the untrained model.
    pub epochs: Vec<EpochStats>,
}

/// Mini-batch ADAM over the train split.
pub struct Trainer<'a> {
    pub params: ModelParams,
    tables: &'a [InstanceTables],
    ds: &'a InteractionDataset,
    cfg: TrainConfig,
    adam: Adam,
    sampler: NegativeSampler,
    rng: seed::Rng,
    train: Vec<(NodeId, NodeId)>,
}

impl<'a> Trainer<'a> {
    pub fn new(params: ModelParams, tables: &'a [InstanceTables], ds: &'a InteractionDataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        check_tables(&params, tables)?;
        let train: Vec<_> = ds.records(Split::Train).collect();
        if train.is_empty() {
            return Err(Error::Validation("train split is empty".into()));
        }
        Ok(Trainer {
            adam: Adam::new(&params),
            params,
            tables,
            ds,
            cfg,
            sampler: NegativeSampler::new(ds.item_frequency(), cfg.negative_exponent),
            rng: seed::rng_from(cfg.seed, &["train".into()]),
            train,
        })
    }

    pub fn loss_config(&self, batch_len: usize) -> LossConfig {
        LossConfig {
            margin: self.cfg.margin,
            l2: self.cfg.l2,
            l2_scale: batch_len as f64 / self.train.len() as f64,
        }
    }

    /// A fresh shuffle of the train positives, cut into batches.
    pub fn epoch_batches(&mut self) -> Vec<Vec<(NodeId, NodeId)>> {
        let mut order = self.train.clone();
        order.shuffle(&mut self.rng);
        order.chunks(self.cfg.batch_size).map(<[_]>::to_vec).collect()
    }

    /// Attaches negatives that avoid the user's train positives.
    pub fn examples(&mut self, pairs: &[(NodeId, NodeId)]) -> Result<Vec<Example>> {
        pairs
            .iter()
            .map(|&(user, positive)| {
                let negatives = self
                    .sampler
                    .sample(self.cfg.negatives, self.ds.train_positives(user), &mut self.rng)?;
                Ok(Example {
                    user,
                    positive,
                    negatives,
                })
            })
            .collect()
    }

    pub fn step(&mut self, batch: &[Example], lr: f64) -> Result<BatchLoss> {
        let (loss, grads) = batch_loss_grad(&self.params, self.tables, batch, self.loss_config(batch.len()));
        if !loss.total.is_finite() || !grads.all_finite() {
            return Err(Error::NonFinite(format!(
                "loss {} (margin part {}) after {} optimizer steps, parameter norm {}",
                loss.total,
                loss.margin,
                self.adam.steps(),
                self.params.l2_norm()
            )));
        }
        self.adam.step(&mut self.params, &grads, lr);
        Ok(loss)
    }

    /// One pass over the train split; returns the mean batch loss.
    pub fn run_epoch(&mut self, epoch: usize) -> Result<f64> {
        let lr = self.cfg.learning_rate(epoch);
        let batches = self.epoch_batches();
        let mut total = 0.0;
        for pairs in &batches {
            let ex = self.examples(pairs)?;
            total += self.step(&ex, lr)?.total;
        }
        Ok(total / batches.len() as f64)
    }
}

/// Trains for `cfg.epochs` epochs and keeps the parameters with the best
/// validation NDCG@10, counting the untrained model as epoch 0.
pub fn train(
    params: ModelParams,
    tables: &[InstanceTables],
    ds: &InteractionDataset,
    val: &EvalSet,
    cfg: TrainConfig,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(params, tables, ds, cfg)?;
    let ndcg = |p: &ModelParams| val.ndcg_at_10(&Embeddings::compute(p, tables));
    let first = ndcg(&trainer.params);
    let mut best = (first, 0, trainer.params.clone());
    let mut epochs = vec![EpochStats {
        epoch: 0,
        lr: 0.0,
        loss: f64::NAN,
        val_ndcg10: first,
    }];
    for e in 0..cfg.epochs {
        let loss = trainer.run_epoch(e)?;
        let score = ndcg(&trainer.params);
        epochs.push(EpochStats {
            epoch: e + 1,
            lr: cfg.learning_rate(e),
            loss,
            val_ndcg10: score,
        });
        if score > best.0 {
            best = (score, e + 1, trainer.params.clone());
        }
    }
    Ok(TrainOutcome {
        params: best.2,
        best_ndcg10: best.0,
        best_epoch: best.1,
        epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule() {
        let cfg = TrainConfig {
            lr: 0.1,
            warmup_epochs: 2,
            decay: 0.5,
            ..TrainConfig::default()
        };
        let lrs: Vec<f64> = (0..5).map(|e| cfg.learning_rate(e)).collect();
        assert_eq!(lrs, vec![0.05, 0.1, 0.1, 0.05, 0.025]);
        let flat = TrainConfig {
            warmup_epochs: 0,
            decay: 1.0,
            ..cfg
        };
        assert_eq!(flat.learning_rate(7), 0.1);
    }

    #[test]
    fn rejects_bad_config() {
        let d = TrainConfig::default();
        assert!(d.validate().is_ok());
        assert!(TrainConfig { margin: 0.0, ..d }.validate().is_err());
        assert!(TrainConfig { l2: -1.0, ..d }.validate().is_err());
        assert!(TrainConfig { decay: 0.0, ..d }.validate().is_err());
        assert!(TrainConfig { decay: 1.5, ..d }.validate().is_err());
    }
}
