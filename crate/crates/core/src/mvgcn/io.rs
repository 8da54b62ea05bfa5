use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::hin::{Schema, Side};

/// `type<TAB>id<TAB>v1,...,vd` for every endpoint node.
pub fn export_features(p: &ModelParams, schema: &Schema) -> String {
    let t = schema.target();
    let mut sides = vec![(Side::Source, t.source)];
    if p.features.len() > 1 {
        sides.push((Side::Sink, t.sink));
    }
    let mut out = String::new();
    for (side, ty) in sides {
        let name = schema.type_name(ty);
        for (id, row) in p.features(side).rows().into_iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{name}\t{id}\t{}", vals.join(","));
        }
    }
    out
}

/// Overwrites feature rows from text in the export format. Lines for node
/// types without a feature table are skipped. Returns the rows written.
pub fn import_features(p: &mut ModelParams, schema: &Schema, text: &str) -> Result<usize> {
    let t = schema.target();
    let mut written = 0;
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: String| Error::Parse(format!("features line {}: {m}", no + 1));
        let mut parts = line.split('\t');
        let (Some(ty), Some(id), Some(vals), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected type<TAB>id<TAB>values".into()));
        };
        let ty = schema.type_id(ty).ok_or_else(|| bad(format!("unknown node type `{ty}`")))?;
        let side = if ty == t.source {
            Side::Source
        } else if ty == t.sink {
            Side::Sink
        } else {
            log::warn!("features line {}: type `{}` has no feature table, skipped", no + 1, schema.type_name(ty));
            continue;
        };
        let id: usize = id.parse().map_err(|_| bad(format!("bad node id `{id}`")))?;
        let vals: Vec<f64> = vals
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        if vals.len() != p.dim {
            return Err(bad(format!("expected {} values, found {}", p.dim, vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        let slot = p.slot(side);
        if id >= p.features[slot].nrows() {
            return Err(bad(format!("node id {id} out of range")));
        }
        p.features[slot].row_mut(id).assign(&ndarray::ArrayView1::from(&vals));
        written += 1;
    }
    Ok(written)
}

/// Trained parameters plus the master seed of the run that produced them,
/// which fixes the split they were trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    dim: usize,
    views: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    params: ModelParams,
}

const FORMAT: &str = "metastruct-model/1";

pub fn checkpoint_to_json(c: &Checkpoint) -> String {
    let p = &c.params;
    serde_json::to_string(&CheckpointFile {
        format: FORMAT.into(),
        dim: p.dim,
        views: p.n_views(),
        seed: c.seed,
        params: p.clone(),
    })
    .expect("parameters serialize")
}

pub fn checkpoint_from_json(text: &str) -> Result<Checkpoint> {
    let c: CheckpointFile = serde_json::from_str(text)?;
    if c.format != FORMAT {
        return Err(Error::Parse(format!("unsupported checkpoint format `{}`", c.format)));
    }
    let p = c.params;
    let (d, n) = (c.dim, c.views);
    let ok = p.dim == d
        && p.gene_keys.len() == n
        && p.view_w.len() == n
        && p.view_b.len() == n
        && (1..=2).contains(&p.features.len())
        && p.features.iter().all(|f| f.ncols() == d)
        && p.view_w.iter().all(|w| w.dim() == (d, 2 * d))
        && p.view_b.iter().all(|b| b.len() == d)
        && p.attn_w.len() == 2
        && p.attn_w.iter().all(|w| w.dim() == (d, n * d));
    if !ok {
        return Err(Error::Validation("checkpoint shapes are inconsistent".into()));
    }
    if !crate::optim::Parameters::all_finite(&p) {
        return Err(Error::Validation("checkpoint holds non-finite values".into()));
    }
    Ok(Checkpoint { params: p, seed: c.seed })
}

pub fn save_checkpoint(c: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_json(c)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_json(&text)
}
