//! Meta-structure genes: an ordered type list plus an upper-triangular
//! adjacency whose cells are -1 (forbidden by the schema), 0 (absent) or
//! 1 (present). Positions 0 and 1 are always the target source and sink.

mod canon;
mod codec;
mod space;

use std::fmt;

pub use canon::GeneKey;
pub use codec::{parse, parse_gene_list, parse_unchecked};
pub use space::search_space_size;

use crate::hin::{Schema, TypeId};

/// Largest gene the search will build.
pub const MAX_NODES: usize = 6;

pub const FORBIDDEN: i8 = -1;
pub const ABSENT: i8 = 0;
pub const PRESENT: i8 = 1;

/// Upper-triangular cell values for a type list: `-1` where the schema has
/// no relation between the two types, `0` elsewhere. Diagonal and lower
/// triangle are left at 0 and carry no meaning.
pub fn mask_matrix(schema: &Schema, types: &[TypeId]) -> Vec<Vec<i8>> {
    let n = types.len();
    let mut m = vec![vec![0i8; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if schema.relation_between(types[i], types[j]).is_none() {
                m[i][j] = FORBIDDEN;
            }
        }
    }
    m
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gene {
    types: Vec<TypeId>,
    // row-major n*n; only i < j is used
    cells: Vec<i8>,
}

impl Gene {
    /// A gene over `types` with every legal cell absent.
    pub fn masked(schema: &Schema, types: Vec<TypeId>) -> Self {
        let n = types.len();
        let mask = mask_matrix(schema, &types);
        let mut cells = vec![0i8; n * n];
        for i in 0..n {
            for j in i + 1..n {
                cells[i * n + j] = mask[i][j];
            }
        }
        Gene { types, cells }
    }

    /// Builds a gene with the given edges set to 1. No validation: edges on
    /// forbidden cells are written as-is so callers can build bad genes.
    pub fn from_edges(schema: &Schema, types: Vec<TypeId>, edges: &[(usize, usize)]) -> Self {
        let mut g = Gene::masked(schema, types);
        for &(i, j) in edges {
            g.set(i, j, PRESENT);
        }
        g
    }

    /// The target source and sink joined directly.
    pub fn direct(schema: &Schema) -> Self {
        let t = schema.target();
        Gene::from_edges(schema, vec![t.source, t.sink], &[(0, 1)])
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn types(&self) -> &[TypeId] {
        &self.types
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.cells[i * self.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i8) {
        assert!(i != j, "a gene cannot encode a self-loop at one position");
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let n = self.len();
        self.cells[i * n + j] = v;
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.get(i, j) == PRESENT
    }

    /// Present edges as (i, j) with i < j, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.cells[i * n + j] == PRESENT {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Cells that are not forbidden, i < j.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.cells[i * n + j] != FORBIDDEN {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.len()).filter(|&u| self.has_edge(u, v)).collect()
    }

    /// Appends a node of type `t`; `row[i]` is the cell value against node i.
    pub fn push_node(&mut self, t: TypeId, row: &[i8]) {
        let n = self.len();
        assert_eq!(row.len(), n);
        let mut cells = vec![0i8; (n + 1) * (n + 1)];
        for i in 0..n {
            for j in i + 1..n {
                cells[i * (n + 1) + j] = self.cells[i * n + j];
            }
            cells[i * (n + 1) + n] = row[i];
        }
        self.types.push(t);
        self.cells = cells;
    }

    pub fn remove_node(&mut self, v: usize) {
        let n = self.len();
        assert!(v < n);
        let keep: Vec<usize> = (0..n).filter(|&i| i != v).collect();
        self.reindex(&keep);
    }

    /// Rebuilds the gene so that new position `p` holds old node `order[p]`.
    pub(crate) fn reindex(&mut self, order: &[usize]) {
        let m = order.len();
        let mut cells = vec![0i8; m * m];
        for a in 0..m {
            for b in a + 1..m {
                cells[a * m + b] = self.get(order[a], order[b]);
            }
        }
        self.types = order.iter().map(|&i| self.types[i]).collect();
        self.cells = cells;
    }

    /// Every simple path from node 0 to node 1 over present edges, as node
    /// index sequences.
    pub fn simple_paths(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut out = Vec::new();
        if n < 2 {
            return out;
        }
        let mut path = vec![0usize];
        let mut on_path = vec![false; n];
        on_path[0] = true;
        self.extend_paths(&mut path, &mut on_path, &mut out);
        out
    }

    fn extend_paths(&self, path: &mut Vec<usize>, on_path: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        if last == 1 {
            out.push(path.clone());
            return;
        }
        for next in 0..self.len() {
            if !on_path[next] && self.has_edge(last, next) {
                on_path[next] = true;
                path.push(next);
                self.extend_paths(path, on_path, out);
                path.pop();
                on_path[next] = false;
            }
        }
    }

    /// Type-name sequences of all simple source-sink paths, sorted, with
    /// multiplicity.
    pub fn path_signature(&self, schema: &Schema) -> Vec<String> {
        let mut sig: Vec<String> = self
            .simple_paths()
            .into_iter()
            .map(|p| {
                p.iter()
                    .map(|&v| schema.type_name(self.types[v]))
                    .collect::<Vec<_>>()
                    .join("-")
            })
            .collect();
        sig.sort();
        sig
    }

    /// Nodes lying on at least one simple source-sink path.
    pub fn on_path_nodes(&self) -> Vec<bool> {
        let mut on = vec![false; self.len()];
        for p in self.simple_paths() {
            for v in p {
                on[v] = true;
            }
        }
        on
    }

    pub fn targets_connected(&self) -> bool {
        let n = self.len();
        if n < 2 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in 0..n {
                if !seen[u] && self.has_edge(u, v) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen[1]
    }

    /// Checks every gene invariant against the schema. Empty means valid.
    pub fn validate(&self, schema: &Schema) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.len();
        if !(2..=MAX_NODES).contains(&n) {
            out.push(Violation::BadSize);
            if n < 2 {
                return out;
            }
        }
        if self.types.iter().any(|&t| t >= schema.type_count()) {
            out.push(Violation::UnknownType);
            return out;
        }
        let target = schema.target();
        if self.types[0] != target.source || self.types[1] != target.sink {
            out.push(Violation::TargetTypes);
        }
        let mut forbidden = false;
        let mut mismatch = false;
        for i in 0..n {
            for j in i + 1..n {
                let v = self.get(i, j);
                match schema.relation_between(self.types[i], self.types[j]) {
                    None if v == PRESENT => forbidden = true,
                    None if v != FORBIDDEN => mismatch = true,
                    Some(_) if v == FORBIDDEN => mismatch = true,
                    _ => {}
                }
                if !(-1..=1).contains(&v) {
                    mismatch = true;
                }
            }
        }
        if forbidden {
            out.push(Violation::ForbiddenLink);
        }
        if mismatch {
            out.push(Violation::MaskMismatch);
        }
        if !self.targets_connected() {
            out.push(Violation::TargetsDisconnected);
        }
        if self.on_path_nodes().iter().skip(2).any(|on| !on) {
            out.push(Violation::SideBranch);
        }
        out
    }

    pub fn is_valid(&self, schema: &Schema) -> bool {
        self.validate(schema).is_empty()
    }

    /// Renders the gene in the `[T0,T1,...](i-j)...` grammar.
    pub fn display<'a>(&'a self, schema: &'a Schema) -> impl fmt::Display + 'a {
        codec::Display { gene: self, schema }
    }

    pub fn to_string_with(&self, schema: &Schema) -> String {
        self.display(schema).to_string()
    }
}

impl fmt::Debug for Gene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gene{:?}", self.types)?;
        for (i, j) in self.edges() {
            write!(f, "({i}-{j})")?;
        }
        Ok(())
    }
}

/// A named gene invariant violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Violation {
    BadSize,
    UnknownType,
    TargetTypes,
    ForbiddenLink,
    MaskMismatch,
    TargetsDisconnected,
    SideBranch,
}

impl Violation {
    pub fn name(self) -> &'static str {
        match self {
            Violation::BadSize => "bad-size",
            Violation::UnknownType => "unknown-type",
            Violation::TargetTypes => "target-types",
            Violation::ForbiddenLink => "forbidden-link",
            Violation::MaskMismatch => "mask-mismatch",
            Violation::TargetsDisconnected => "targets-disconnected",
            Violation::SideBranch => "side-branch",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::hin::schema::tests::yelp;

    pub(crate) fn g(schema: &Schema, text: &str) -> Gene {
        parse_unchecked(text, schema).unwrap()
    }

    #[test]
    fn five_node_type_list_has_seven_free_cells() {
        let s = yelp();
        let types = [0, 1, 0, 1, 4];
        let m = mask_matrix(&s, &types);
        let free = (0..5)
            .flat_map(|i| (i + 1..5).map(move |j| (i, j)))
            .filter(|&(i, j)| m[i][j] == 0)
            .count();
        assert_eq!(free, 7);
    }

    #[test]
    fn mask_small_cases() {
        let s = yelp();
        assert_eq!(mask_matrix(&s, &[0, 1])[0][1], 0);
        let aa = mask_matrix(&s, &[4, 4]);
        assert_eq!(aa[0][1], FORBIDDEN);
    }

    #[test]
    fn direct_gene() {
        let s = yelp();
        let d = Gene::direct(&s);
        assert_eq!(d.to_string_with(&s), "[U,B](0-1)");
        assert!(d.validate(&s).is_empty());
        assert_eq!(parse(&d.to_string_with(&s), &s).unwrap(), d);
        assert_eq!(d.path_signature(&s), vec!["U-B"]);
    }

    #[test]
    fn forbidden_link_reported() {
        let s = yelp();
        // U-A is not a relation
        let mut gene = Gene::from_edges(&s, vec![0, 1, 4], &[(0, 1), (1, 2)]);
        gene.set(0, 2, PRESENT);
        assert_eq!(gene.validate(&s), vec![Violation::ForbiddenLink]);
    }

    #[test]
    fn disconnected_source_and_side_branch() {
        let s = yelp();
        let gene = g(&s, "[U,B,A](1-2)");
        let names: Vec<&str> = gene.validate(&s).iter().map(|v| v.name()).collect();
        assert_eq!(names, vec!["targets-disconnected", "side-branch"]);
    }

    #[test]
    fn path_signature_of_square() {
        let s = yelp();
        let gene = g(&s, "[U,B,U,B](0-1)(0-2)(2-3)(1-3)");
        // brute-force listing: 0-1 and 0-2-3-1
        assert_eq!(gene.simple_paths(), vec![vec![0, 1], vec![0, 2, 3, 1]]);
        assert_eq!(gene.path_signature(&s), vec!["U-B", "U-U-B-B"]);
    }

    #[test]
    fn path_signature_empty_when_disconnected() {
        let s = yelp();
        assert!(g(&s, "[U,B,A](1-2)").path_signature(&s).is_empty());
    }

    #[test]
    fn push_and_remove_nodes() {
        let s = yelp();
        let mut gene = Gene::direct(&s);
        gene.push_node(4, &[FORBIDDEN, PRESENT]);
        assert_eq!(gene.to_string_with(&s), "[U,B,A](0-1)(1-2)");
        gene.remove_node(2);
        assert_eq!(gene, Gene::direct(&s));
    }

    #[test]
    fn self_relation_between_positions() {
        let s = yelp();
        let gene = g(&s, "[U,B,U](0-2)(1-2)");
        assert!(gene.validate(&s).is_empty());
        assert_eq!(gene.path_signature(&s), vec!["U-U-B"]);
    }
}
