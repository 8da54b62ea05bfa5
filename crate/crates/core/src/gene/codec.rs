use std::fmt;

use super::Gene;
use crate::error::{Error, Result};
use crate::hin::Schema;

pub(super) struct Display<'a> {
    pub gene: &'a Gene,
    pub schema: &'a Schema,
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, &t) in self.gene.types().iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            f.write_str(self.schema.type_name(t))?;
        }
        f.write_str("]")?;
        for (i, j) in self.gene.edges() {
            write!(f, "({i}-{j})")?;
        }
        Ok(())
    }
}

fn grammar(msg: impl Into<String>) -> Error {
    Error::Parse(format!("gene grammar: {}", msg.into()))
}

/// Parses `[T0,T1,...](i-j)...` without checking gene invariants. Edges may
/// appear in any order but each at most once, with i < j.
pub fn parse_unchecked(text: &str, schema: &Schema) -> Result<Gene> {
    let text = text.trim();
    let rest = text
        .strip_prefix('[')
        .ok_or_else(|| grammar(format!("`{text}` must start with `[`")))?;
    let close = rest.find(']').ok_or_else(|| grammar("missing `]`"))?;
    let types = rest[..close]
        .split(',')
        .map(|name| {
            schema
                .type_id(name.trim())
                .ok_or_else(|| Error::Validation(format!("unknown node type `{}` in gene", name.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = types.len();

    let mut edges = Vec::new();
    let mut tail = &rest[close + 1..];
    while !tail.is_empty() {
        let body = tail.strip_prefix('(').ok_or_else(|| grammar(format!("unexpected `{tail}`")))?;
        let end = body.find(')').ok_or_else(|| grammar("unterminated edge"))?;
        let (a, b) = body[..end]
            .split_once('-')
            .ok_or_else(|| grammar(format!("edge `({})` is not `i-j`", &body[..end])))?;
        let parse_idx = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| grammar(format!("bad index `{s}`")))
        };
        let (i, j) = (parse_idx(a)?, parse_idx(b)?);
        if i >= j {
            return Err(grammar(format!("edge ({i}-{j}) must have i < j")));
        }
        if j >= n {
            return Err(grammar(format!("edge ({i}-{j}) references a node beyond the {n}-type list")));
        }
        if edges.contains(&(i, j)) {
            return Err(grammar(format!("edge ({i}-{j}) repeated")));
        }
        edges.push((i, j));
        tail = &body[end + 1..];
    }
    Ok(Gene::from_edges(schema, types, &edges))
}

/// Parses and validates a gene.
pub fn parse(text: &str, schema: &Schema) -> Result<Gene> {
    let gene = parse_unchecked(text, schema)?;
    let violations = gene.validate(schema);
    if !violations.is_empty() {
        let names: Vec<&str> = violations.iter().map(|v| v.name()).collect();
        return Err(Error::Validation(format!(
            "gene `{}` violates: {}",
            text.trim(),
            names.join(", ")
        )));
    }
    Ok(gene)
}

/// One gene per line; blank lines and `#` comments are skipped. An empty
/// list is a validation error.
pub fn parse_gene_list(text: &str, schema: &Schema) -> Result<Vec<Gene>> {
    let genes = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| parse(l, schema))
        .collect::<Result<Vec<_>>>()?;
    if genes.is_empty() {
        return Err(Error::Validation("the gene list is empty".into()));
    }
    Ok(genes)
}
