use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::{NodeId, RelId, Schema, TypeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Adjacency {
    /// a-side id -> b-side ids. For a self relation this holds both directions.
    forward: Vec<Vec<NodeId>>,
    /// b-side id -> a-side ids. Empty for self relations.
    backward: Vec<Vec<NodeId>>,
}

/// The typed multigraph. Relations are undirected; each relation's edge list
/// is stored as (a-side id, b-side id) pairs in the orientation the schema
/// declares, sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hin {
    schema: Arc<Schema>,
    node_counts: Vec<usize>,
    edges: Vec<Vec<(NodeId, NodeId)>>,
    adjacency: Vec<Adjacency>,
}

impl Hin {
    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn node_count(&self, t: TypeId) -> usize {
        self.node_counts[t]
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.node_counts
    }

    pub fn edges(&self, r: RelId) -> &[(NodeId, NodeId)] {
        &self.edges[r]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Neighbors of `node` (of type `from`) across relation `r`.
    pub fn neighbors(&self, r: RelId, from: TypeId, node: NodeId) -> &[NodeId] {
        let rel = self.schema.relation(r);
        let adj = &self.adjacency[r];
        if rel.a == from {
            &adj.forward[node as usize]
        } else {
            debug_assert_eq!(rel.b, from);
            &adj.backward[node as usize]
        }
    }

    pub fn has_edge(&self, r: RelId, from: TypeId, node: NodeId, other: NodeId) -> bool {
        self.neighbors(r, from, node).binary_search(&other).is_ok()
    }

    /// Sum of adjacency entries seen from nodes of type `t` over relation `r`.
    pub fn relation_degree(&self, t: TypeId, r: RelId) -> usize {
        let rel = self.schema.relation(r);
        let m = self.edges[r].len();
        match (rel.a == t, rel.b == t) {
            (true, true) => 2 * m,
            (true, false) | (false, true) => m,
            _ => 0,
        }
    }

    pub fn type_degree(&self, t: TypeId) -> usize {
        (0..self.edges.len()).map(|r| self.relation_degree(t, r)).sum()
    }

    /// A copy of this graph whose relation `r` holds exactly `edges`.
    pub fn with_relation_edges(&self, r: RelId, edges: &[(NodeId, NodeId)]) -> Result<Hin> {
        let mut b = HinBuilder::new(self.schema.clone(), Some(self.node_counts.clone()));
        for (rel, list) in self.edges.iter().enumerate() {
            if rel == r {
                continue;
            }
            for &(x, y) in list {
                b.add_edge(rel, x, y)?;
            }
        }
        for &(x, y) in edges {
            b.add_edge(r, x, y)?;
        }
        Ok(b.build())
    }
}

/// Accumulates edges and builds a [`Hin`].
pub struct HinBuilder {
    schema: Arc<Schema>,
    declared: Option<Vec<usize>>,
    seen_max: Vec<Option<NodeId>>,
    edges: Vec<BTreeSet<(NodeId, NodeId)>>,
    duplicates: usize,
    self_loops: usize,
}

impl HinBuilder {
    /// `declared` fixes per-type node counts; otherwise they are inferred as
    /// max id + 1.
    pub fn new(schema: Arc<Schema>, declared: Option<Vec<usize>>) -> Self {
        let n_types = schema.type_count();
        let n_rel = schema.relations().len();
        HinBuilder {
            schema,
            declared,
            seen_max: vec![None; n_types],
            edges: vec![BTreeSet::new(); n_rel],
            duplicates: 0,
            self_loops: 0,
        }
    }

    fn check_id(&mut self, t: TypeId, id: NodeId) -> Result<()> {
        if let Some(counts) = &self.declared {
            if id as usize >= counts[t] {
                return Err(Error::Validation(format!(
                    "node id {id} exceeds declared count {} for type `{}`",
                    counts[t],
                    self.schema.type_name(t)
                )));
            }
        }
        let m = &mut self.seen_max[t];
        *m = Some(m.map_or(id, |v| v.max(id)));
        Ok(())
    }

    /// Adds an edge given in the relation's declared (a, b) orientation.
    pub fn add_edge(&mut self, r: RelId, a_id: NodeId, b_id: NodeId) -> Result<()> {
        let rel = self.schema.relation(r).clone();
        self.check_id(rel.a, a_id)?;
        self.check_id(rel.b, b_id)?;
        let key = if rel.is_self() {
            if a_id == b_id {
                self.self_loops += 1;
                return Ok(());
            }
            (a_id.min(b_id), a_id.max(b_id))
        } else {
            (a_id, b_id)
        };
        if !self.edges[r].insert(key) {
            self.duplicates += 1;
        }
        Ok(())
    }

    pub fn build(self) -> Hin {
        if self.duplicates > 0 {
            log::warn!("dropped {} duplicate edge(s)", self.duplicates);
        }
        if self.self_loops > 0 {
            log::warn!("dropped {} self-loop(s) on same-type relations", self.self_loops);
        }
        let node_counts = match self.declared {
            Some(c) => c,
            None => self
                .seen_max
                .iter()
                .map(|m| m.map_or(0, |v| v as usize + 1))
                .collect(),
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut adjacency = Vec::with_capacity(self.edges.len());
        for (r, set) in self.edges.into_iter().enumerate() {
            let rel = self.schema.relation(r);
            let list: Vec<(NodeId, NodeId)> = set.into_iter().collect();
            let mut forward = vec![Vec::new(); node_counts[rel.a]];
            let mut backward = if rel.is_self() {
                Vec::new()
            } else {
                vec![Vec::new(); node_counts[rel.b]]
            };
            for &(x, y) in &list {
                forward[x as usize].push(y);
                if rel.is_self() {
                    forward[y as usize].push(x);
                } else {
                    backward[y as usize].push(x);
                }
            }
            for l in forward.iter_mut().chain(backward.iter_mut()) {
                l.sort_unstable();
            }
            edges.push(list);
            adjacency.push(Adjacency { forward, backward });
        }
        // self relations read both directions from `forward`
        for (r, adj) in adjacency.iter_mut().enumerate() {
            if self.schema.relation(r).is_self() {
                adj.backward = adj.forward.clone();
            }
        }
        Hin {
            schema: self.schema,
            node_counts,
            edges,
            adjacency,
        }
    }
}

fn resolve_relation(schema: &Schema, name: &str) -> Option<(RelId, bool)> {
    if let Some(r) = schema.relation_id(name) {
        return Some((r, false));
    }
    // `A-B` written with type names, in either order
    let (x, y) = name.split_once('-')?;
    let (tx, ty) = (schema.type_id(x)?, schema.type_id(y)?);
    let r = schema.relation_between(tx, ty)?;
    let rel = schema.relation(r);
    Some((r, rel.a != tx))
}

/// Reads a tab-separated edge file: `relation<TAB>src<TAB>dst` per line, with
/// optional `#count <type> <n>` header lines. Other `#` lines are comments.
pub fn load_hin(schema: Arc<Schema>, path: impl AsRef<Path>) -> Result<Hin> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edges(schema, &text)
}

pub fn parse_edges(schema: Arc<Schema>, text: &str) -> Result<Hin> {
    let mut declared: Option<Vec<usize>> = None;
    let mut body = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#count") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("line {}: malformed #count header", lineno + 1)));
            }
            let t = schema.type_id(parts[0]).ok_or_else(|| {
                Error::Validation(format!("line {}: unknown node type `{}`", lineno + 1, parts[0]))
            })?;
            let n: usize = parts[1]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad count `{}`", lineno + 1, parts[1])))?;
            // undeclared types default to 0 and are then raised to fit the edges seen
            declared.get_or_insert_with(|| vec![usize::MAX; schema.type_count()])[t] = n;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        body.push((lineno + 1, line));
    }

    let mut parsed = Vec::with_capacity(body.len());
    let mut seen_max = vec![0usize; schema.type_count()];
    for (lineno, line) in body {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {lineno}: expected `relation<TAB>src<TAB>dst`"
            )));
        }
        let (r, swap) = resolve_relation(&schema, fields[0].trim()).ok_or_else(|| {
            Error::Validation(format!("line {lineno}: unknown relation `{}`", fields[0]))
        })?;
        let id = |s: &str| -> Result<NodeId> {
            s.trim()
                .parse::<NodeId>()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad node id `{s}`")))
        };
        let (mut x, mut y) = (id(fields[1])?, id(fields[2])?);
        if swap {
            std::mem::swap(&mut x, &mut y);
        }
        let rel = schema.relation(r);
        seen_max[rel.a] = seen_max[rel.a].max(x as usize + 1);
        seen_max[rel.b] = seen_max[rel.b].max(y as usize + 1);
        parsed.push((lineno, r, x, y));
    }

    let declared = declared.map(|mut counts| {
        for (t, c) in counts.iter_mut().enumerate() {
            if *c == usize::MAX {
                *c = seen_max[t];
            }
        }
        counts
    });
    let mut builder = HinBuilder::new(schema, declared);
    for (lineno, r, x, y) in parsed {
        builder
            .add_edge(r, x, y)
            .map_err(|e| Error::Validation(format!("line {lineno}: {e}")))?;
    }
    Ok(builder.build())
}

/// Serializes a graph in the edge-file format, with count headers for every
/// type. Output is a pure function of the graph.
pub fn format_edges(hin: &Hin) -> String {
    let schema = hin.schema();
    let mut out = String::new();
    for (t, name) in schema.node_types().iter().enumerate() {
        let _ = writeln!(out, "#count {name} {}", hin.node_count(t));
    }
    for (r, rel) in schema.relations().iter().enumerate() {
        for &(x, y) in hin.edges(r) {
            let _ = writeln!(out, "{}\t{x}\t{y}", rel.name);
        }
    }
    out
}

pub fn write_edges(hin: &Hin, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_edges(hin)).map_err(|e| Error::io(path, e))
}
