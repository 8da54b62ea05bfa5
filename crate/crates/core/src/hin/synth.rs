//! Planted synthetic graphs: positives are drawn so that (source, sink)
//! pairs joined by an instance of a known gene are far more likely to
//! interact than other pairs.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Hin, HinBuilder, NodeId, RelationSpec, Schema, SchemaFile, TargetSpec};
use crate::adjsearch::brute_force_instances;
use crate::error::{Error, Result};
use crate::gene::{self, Gene};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeSize {
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Every a-side node links to this many distinct b-side nodes.
    PerNode(usize),
    /// Every (a, b) pair is linked independently with this probability.
    Density(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRelation {
    pub name: String,
    pub a: String,
    pub b: String,
    /// Ignored for the target relation.
    #[serde(default = "default_mode")]
    pub mode: EdgeMode,
}

fn default_mode() -> EdgeMode {
    EdgeMode::Density(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub node_types: Vec<TypeSize>,
    pub relations: Vec<SynthRelation>,
    pub target: TargetSpec,
    /// Gene string whose instances drive the positives.
    pub planted: String,
    /// Uniform target edges given to each source node before planting.
    pub seed_per_source: usize,
    pub p_signal: f64,
    pub p_noise: f64,
}

impl SyntheticSpec {
    /// Users, items and item categories, with the item-category-item pattern
    /// planted.
    pub fn collaborative() -> Self {
        SyntheticSpec {
            node_types: vec![
                TypeSize { name: "U".into(), count: 50 },
                TypeSize { name: "I".into(), count: 60 },
                TypeSize { name: "C".into(), count: 5 },
            ],
            relations: vec![
                SynthRelation {
                    name: "U-I".into(),
                    a: "U".into(),
                    b: "I".into(),
                    mode: default_mode(),
                },
                SynthRelation {
                    name: "I-C".into(),
                    a: "I".into(),
                    b: "C".into(),
                    mode: EdgeMode::PerNode(1),
                },
            ],
            target: TargetSpec {
                source: "U".into(),
                sink: "I".into(),
                relation: "U-I".into(),
            },
            planted: "[U,I,I,C](0-2)(1-3)(2-3)".into(),
            seed_per_source: 1,
            p_signal: 0.25,
            p_noise: 0.01,
        }
    }

    /// A small graph with the user/business/compliment/city/category layout.
    pub fn yelp_like() -> Self {
        let rel = |a: &str, b: &str, mode| SynthRelation {
            name: format!("{a}-{b}"),
            a: a.into(),
            b: b.into(),
            mode,
        };
        SyntheticSpec {
            node_types: [("U", 40), ("B", 50), ("O", 5), ("I", 4), ("A", 8)]
                .into_iter()
                .map(|(n, c)| TypeSize { name: n.into(), count: c })
                .collect(),
            relations: vec![
                rel("U", "B", default_mode()),
                rel("U", "U", EdgeMode::Density(0.05)),
                rel("U", "O", EdgeMode::PerNode(1)),
                rel("B", "I", EdgeMode::PerNode(1)),
                rel("B", "A", EdgeMode::PerNode(1)),
            ],
            target: TargetSpec {
                source: "U".into(),
                sink: "B".into(),
                relation: "U-B".into(),
            },
            planted: "[U,B,B,A](0-2)(1-3)(2-3)".into(),
            seed_per_source: 2,
            p_signal: 0.4,
            p_noise: 0.01,
        }
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::from_file(&SchemaFile {
            node_types: self.node_types.iter().map(|t| t.name.clone()).collect(),
            relations: self
                .relations
                .iter()
                .map(|r| RelationSpec {
                    name: r.name.clone(),
                    a: r.a.clone(),
                    b: r.b.clone(),
                })
                .collect(),
            target: self.target.clone(),
        })
    }

    fn validate(&self) -> Result<()> {
        let prob = |p: f64| p.is_finite() && (0.0..=1.0).contains(&p);
        if !prob(self.p_signal) || !prob(self.p_noise) {
            return Err(Error::Validation("p_signal and p_noise must lie in [0, 1]".into()));
        }
        if self.p_signal <= self.p_noise {
            return Err(Error::Validation(format!(
                "p_signal ({}) must exceed p_noise ({}); otherwise there is no signal to learn",
                self.p_signal, self.p_noise
            )));
        }
        for r in &self.relations {
            if let EdgeMode::Density(p) = r.mode {
                if !prob(p) {
                    return Err(Error::Validation(format!("density of `{}` outside [0, 1]", r.name)));
                }
            }
        }
        Ok(())
    }
}

/// Generates a planted graph. Returns the schema, the graph and the planted
/// gene. Output is a pure function of (spec, seed).
pub fn generate_synthetic_hin(spec: &SyntheticSpec, seed: u64) -> Result<(Schema, Hin, Gene)> {
    spec.validate()?;
    let schema = Arc::new(spec.schema()?);
    let planted = gene::parse(&spec.planted, &schema)?;
    let counts: Vec<usize> = spec.node_types.iter().map(|t| t.count).collect();
    let target = schema.target();
    let mut rng = seed::rng(seed);

    let mut builder = HinBuilder::new(schema.clone(), Some(counts.clone()));
    let mut background = Vec::new();
    for (r, rel) in spec.relations.iter().enumerate() {
        if r == target.relation {
            continue;
        }
        let (a, b) = (schema.relation(r).a, schema.relation(r).b);
        match rel.mode {
            EdgeMode::PerNode(k) => {
                let k = k.min(counts[b]);
                for x in 0..counts[a] {
                    for y in index::sample(&mut rng, counts[b], k).into_vec() {
                        background.push((r, x as NodeId, y as NodeId));
                    }
                }
            }
            EdgeMode::Density(p) => {
                for x in 0..counts[a] {
                    for y in 0..counts[b] {
                        if rng.gen::<f64>() < p {
                            background.push((r, x as NodeId, y as NodeId));
                        }
                    }
                }
            }
        }
    }
    for &(r, x, y) in &background {
        builder.add_edge(r, x, y)?;
    }

    // orientation of the target relation relative to (source, sink)
    let flip = schema.relation(target.relation).a != target.source;
    let orient = |u: NodeId, i: NodeId| if flip { (i, u) } else { (u, i) };
    let n_src = counts[target.source];
    let n_sink = counts[target.sink];
    let mut seeds: Vec<HashSet<NodeId>> = vec![HashSet::new(); n_src];
    let k = spec.seed_per_source.min(n_sink);
    for (u, set) in seeds.iter_mut().enumerate() {
        for i in index::sample(&mut rng, n_sink, k).into_vec() {
            set.insert(i as NodeId);
            let (x, y) = orient(u as NodeId, i as NodeId);
            builder.add_edge(target.relation, x, y)?;
        }
    }
    let seeded = builder.build();
    let reach = brute_force_instances(&planted, &seeded).source;

    let mut builder = HinBuilder::new(schema.clone(), Some(counts));
    for &(r, x, y) in &background {
        builder.add_edge(r, x, y)?;
    }
    for (u, set) in seeds.iter().enumerate() {
        let reachable: HashSet<NodeId> = reach.get(u as NodeId).iter().copied().collect();
        for i in 0..n_sink as NodeId {
            let positive = set.contains(&i) || {
                let p = if reachable.contains(&i) { spec.p_signal } else { spec.p_noise };
                rng.gen::<f64>() < p
            };
            if positive {
                let (x, y) = orient(u as NodeId, i);
                builder.add_edge(target.relation, x, y)?;
            }
        }
    }
    let hin = builder.build();
    Ok(((*schema).clone(), hin, planted))
}

/// A random connected schema over `n_types` types named `T0`, `T1`, ... The
/// target joins `T0` with `T1` (or `T0` with itself when `n_types` is 1);
/// every other pair, self pairs included, gets a relation with probability
/// `p_relation`.
pub fn random_schema<R: Rng + ?Sized>(n_types: usize, p_relation: f64, rng: &mut R) -> Result<Schema> {
    if n_types == 0 {
        return Err(Error::Validation("a schema needs at least one node type".into()));
    }
    let names: Vec<String> = (0..n_types).map(|t| format!("T{t}")).collect();
    let sink = if n_types > 1 { 1 } else { 0 };
    let mut relations = vec![RelationSpec {
        name: format!("{}-{}", names[0], names[sink]),
        a: names[0].clone(),
        b: names[sink].clone(),
    }];
    // a spanning chain keeps every type reachable
    for t in 2..n_types {
        let parent = rng.gen_range(0..t);
        relations.push(RelationSpec {
            name: format!("{}-{}", names[parent], names[t]),
            a: names[parent].clone(),
            b: names[t].clone(),
        });
    }
    for a in 0..n_types {
        for b in a..n_types {
            let name = format!("{}-{}", names[a], names[b]);
            if relations.iter().any(|r| r.name == name || r.name == format!("{}-{}", names[b], names[a])) {
                continue;
            }
            if rng.gen_bool(p_relation) {
                relations.push(RelationSpec {
                    name,
                    a: names[a].clone(),
                    b: names[b].clone(),
                });
            }
        }
    }
    Schema::from_file(&SchemaFile {
        node_types: names.clone(),
        relations,
        target: TargetSpec {
            source: names[0].clone(),
            sink: names[sink].clone(),
            relation: format!("{}-{}", names[0], names[sink]),
        },
    })
}

/// A graph on `schema` with 1..=`max_nodes` nodes per type and every
/// permitted pair linked independently with probability `density`.
pub fn random_hin<R: Rng + ?Sized>(schema: Arc<Schema>, max_nodes: usize, density: f64, rng: &mut R) -> Result<Hin> {
    let counts: Vec<usize> = (0..schema.type_count()).map(|_| rng.gen_range(1..=max_nodes.max(1))).collect();
    let mut builder = HinBuilder::new(schema.clone(), Some(counts.clone()));
    for (r, rel) in schema.relations().iter().enumerate() {
        for x in 0..counts[rel.a] {
            for y in 0..counts[rel.b] {
                if rel.is_self() && y <= x {
                    continue;
                }
                if rng.gen_bool(density) {
                    builder.add_edge(r, x as NodeId, y as NodeId)?;
                }
            }
        }
    }
    Ok(builder.build())
}
