use std::fmt::Write as _;

use serde::Serialize;

use super::model::{fit, PredictorParams};
use crate::error::{Error, Result};
use crate::gene::{Gene, GeneKey};

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub generation: usize,
    pub genes: Vec<Gene>,
    pub gene_keys: Vec<GeneKey>,
    /// Validation NDCG@10.
    pub raw_metric: f64,
}

/// Append-only log of really-evaluated individuals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryStore {
    records: Vec<HistoryRecord>,
}

#[derive(Serialize)]
struct ExportLine<'a> {
    generation: usize,
    gene_keys: &'a [GeneKey],
    raw_metric: f64,
    normalized: f64,
}

impl HistoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: HistoryRecord) -> Result<()> {
        if !(0.0..=1.0).contains(&record.raw_metric) {
            return Err(Error::Validation(format!("history metric {} outside [0, 1]", record.raw_metric)));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[HistoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        let mut it = self.records.iter().map(|r| r.raw_metric);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn last_generation(&self) -> Option<usize> {
        self.records.iter().map(|r| r.generation).max()
    }

    /// Maps a normalized score back to the raw metric scale.
    pub fn denormalize(&self, normalized: f64) -> f64 {
        match self.range() {
            Some((lo, hi)) => lo + (normalized + 1.0) / 2.0 * (hi - lo),
            None => 0.0,
        }
    }

    /// Training pairs of (genes, normalized metric).
    pub fn training_data(&self) -> Vec<(Vec<Gene>, f64)> {
        self.records
            .iter()
            .map(|r| (r.genes.clone(), normalize_metric(self, r.raw_metric)))
            .collect()
    }

    /// JSON lines of `{generation, gene_keys, raw_metric, normalized}`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = ExportLine {
                generation: r.generation,
                gene_keys: &r.gene_keys,
                raw_metric: r.raw_metric,
                normalized: normalize_metric(self, r.raw_metric),
            };
            let _ = writeln!(out, "{}", serde_json::to_string(&line).expect("history serializes"));
        }
        out
    }
}

/// `2 (raw - min) / (max - min) - 1` over the whole history; 0 when the
/// history is empty or flat.
pub fn normalize_metric(history: &HistoryStore, raw: f64) -> f64 {
    match history.range() {
        Some((lo, hi)) if hi > lo => 2.0 * (raw - lo) / (hi - lo) - 1.0,
        _ => 0.0,
    }
}

/// Linear-interpolation quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// The `q`-quantile of the most recent generation's normalized metrics;
/// negative infinity (no filtering) for an empty history.
pub fn filter_threshold(history: &HistoryStore, q: f64) -> f64 {
    let Some(last) = history.last_generation() else {
        return f64::NEG_INFINITY;
    };
    let values: Vec<f64> = history
        .records()
        .iter()
        .filter(|r| r.generation == last)
        .map(|r| normalize_metric(history, r.raw_metric))
        .collect();
    quantile(&values, q)
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. A constant input
/// has no ordering to agree with and yields 0.
pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Validation(format!("spearman: lengths {} and {} differ", pred.len(), truth.len())));
    }
    if pred.len() < 2 {
        return Err(Error::Validation("spearman needs at least two points".into()));
    }
    let (a, b) = (average_ranks(pred), average_ranks(truth));
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}

/// Full-batch ADAM on the history's normalized targets, warm-started from
/// `params`.
pub fn train_predictor(params: PredictorParams, history: &HistoryStore, epochs: usize, lr: f64) -> PredictorParams {
    fit(params, &history.training_data(), epochs, lr)
}
