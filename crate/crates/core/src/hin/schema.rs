use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RelId, TypeId};
use crate::error::{Error, Result};

/// On-disk form of a schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub node_types: Vec<String>,
    pub relations: Vec<RelationSpec>,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub name: String,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub source: String,
    pub sink: String,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub a: TypeId,
    pub b: TypeId,
}

impl Relation {
    pub fn is_self(&self) -> bool {
        self.a == self.b
    }

    pub fn joins(&self, t: TypeId) -> bool {
        self.a == t || self.b == t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Target {
    pub source: TypeId,
    pub sink: TypeId,
    pub relation: RelId,
}

/// Node types, the relations permitted between them, and the (source, sink)
/// pair whose links are ranked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    node_types: Vec<String>,
    relations: Vec<Relation>,
    by_pair: HashMap<(TypeId, TypeId), RelId>,
    target: Target,
}

fn pair_key(a: TypeId, b: TypeId) -> (TypeId, TypeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Schema {
    pub fn from_file(file: &SchemaFile) -> Result<Self> {
        let mut type_index = HashMap::new();
        for (i, name) in file.node_types.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::Validation("empty node type name".into()));
            }
            if name.contains([',', '[', ']', '(', ')', '\t']) {
                return Err(Error::Validation(format!(
                    "node type name `{name}` contains a reserved character"
                )));
            }
            if type_index.insert(name.as_str(), i).is_some() {
                return Err(Error::Validation(format!("duplicate node type `{name}`")));
            }
        }
        let lookup = |name: &str| -> Result<TypeId> {
            type_index.get(name).copied().ok_or_else(|| {
                Error::Validation(format!("relation references undeclared node type `{name}`"))
            })
        };

        let mut relations = Vec::with_capacity(file.relations.len());
        let mut by_pair = HashMap::new();
        let mut names = HashSet::new();
        for spec in &file.relations {
            let a = lookup(&spec.a)?;
            let b = lookup(&spec.b)?;
            if !names.insert(spec.name.as_str()) {
                return Err(Error::Validation(format!("duplicate relation name `{}`", spec.name)));
            }
            if by_pair.insert(pair_key(a, b), relations.len()).is_some() {
                return Err(Error::Validation(format!(
                    "more than one relation between `{}` and `{}`",
                    spec.a, spec.b
                )));
            }
            relations.push(Relation {
                name: spec.name.clone(),
                a,
                b,
            });
        }

        let source = lookup(&file.target.source)
            .map_err(|_| Error::Validation(format!("unknown target source `{}`", file.target.source)))?;
        let sink = lookup(&file.target.sink)
            .map_err(|_| Error::Validation(format!("unknown target sink `{}`", file.target.sink)))?;
        let relation = relations
            .iter()
            .position(|r| r.name == file.target.relation)
            .ok_or_else(|| {
                Error::Validation(format!("target relation `{}` is not declared", file.target.relation))
            })?;
        if pair_key(relations[relation].a, relations[relation].b) != pair_key(source, sink) {
            return Err(Error::Validation(format!(
                "target relation `{}` does not join `{}` and `{}`",
                file.target.relation, file.target.source, file.target.sink
            )));
        }

        Ok(Schema {
            node_types: file.node_types.clone(),
            relations,
            by_pair,
            target: Target {
                source,
                sink,
                relation,
            },
        })
    }

    pub fn to_file(&self) -> SchemaFile {
        SchemaFile {
            node_types: self.node_types.clone(),
            relations: self
                .relations
                .iter()
                .map(|r| RelationSpec {
                    name: r.name.clone(),
                    a: self.node_types[r.a].clone(),
                    b: self.node_types[r.b].clone(),
                })
                .collect(),
            target: TargetSpec {
                source: self.node_types[self.target.source].clone(),
                sink: self.node_types[self.target.sink].clone(),
                relation: self.relations[self.target.relation].name.clone(),
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("schema serializes")
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn type_count(&self) -> usize {
        self.node_types.len()
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        &self.node_types[t]
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.node_types.iter().position(|n| n == name)
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, r: RelId) -> &Relation {
        &self.relations[r]
    }

    pub fn relation_id(&self, name: &str) -> Option<RelId> {
        self.relations.iter().position(|r| r.name == name)
    }

    /// The relation joining two types, in either order.
    pub fn relation_between(&self, a: TypeId, b: TypeId) -> Option<RelId> {
        self.by_pair.get(&pair_key(a, b)).copied()
    }

    pub fn target(&self) -> Target {
        self.target
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Schema::from_json(&text)
}
