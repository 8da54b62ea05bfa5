use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gene::{Gene, ABSENT, FORBIDDEN, MAX_NODES, PRESENT};
use crate::hin::Schema;
use crate::registry::{Named, Registry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationConfig {
    /// Probability that a gene is mutated at all.
    pub p_mutate: f64,
    /// Among size-changing mutations, probability of growing.
    pub p_complex: f64,
    /// Candidates tried before giving up and returning the gene unchanged.
    pub max_retries: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            p_mutate: 0.6,
            p_complex: 0.5,
            max_retries: 32,
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if !unit(self.p_mutate) || !unit(self.p_complex) {
            return Err(Error::Config("mutation probabilities must lie in [0, 1]".into()));
        }
        if self.max_retries == 0 {
            return Err(Error::Config("max_retries must be at least 1".into()));
        }
        Ok(())
    }
}

/// One kind of raw gene edit. Proposals are filtered by [`Mutator`], so an
/// operator may return candidates that break gene invariants.
pub trait MutationOperator: Named + Send + Sync {
    /// Relative selection weight under `cfg`.
    fn weight(&self, cfg: &MutationConfig) -> f64;

    fn propose(&self, gene: &Gene, schema: &Schema, rng: &mut dyn RngCore) -> Option<Gene>;
}

/// Flips one non-forbidden cell.
pub struct EdgeFlip;

impl Named for EdgeFlip {
    fn name(&self) -> &'static str {
        "edge-flip"
    }
}

impl MutationOperator for EdgeFlip {
    fn weight(&self, _cfg: &MutationConfig) -> f64 {
        1.0
    }

    fn propose(&self, gene: &Gene, _schema: &Schema, rng: &mut dyn RngCore) -> Option<Gene> {
        let free = gene.free_cells();
        if free.is_empty() {
            return None;
        }
        let (i, j) = free[rng.gen_range(0..free.len())];
        let mut g = gene.clone();
        g.set(i, j, if g.get(i, j) == PRESENT { ABSENT } else { PRESENT });
        Some(g)
    }
}

/// Appends a node of a uniformly random type with random legal cells.
pub struct NodeAdd;

impl Named for NodeAdd {
    fn name(&self) -> &'static str {
        "node-add"
    }
}

impl MutationOperator for NodeAdd {
    fn weight(&self, cfg: &MutationConfig) -> f64 {
        2.0 * cfg.p_complex
    }

    fn propose(&self, gene: &Gene, schema: &Schema, rng: &mut dyn RngCore) -> Option<Gene> {
        if gene.len() >= MAX_NODES {
            return None;
        }
        let t = rng.gen_range(0..schema.type_count());
        let row: Vec<i8> = gene
            .types()
            .iter()
            .map(|&u| match schema.relation_between(u, t) {
                None => FORBIDDEN,
                Some(_) if rng.gen_bool(0.5) => PRESENT,
                Some(_) => ABSENT,
            })
            .collect();
        let mut g = gene.clone();
        g.push_node(t, &row);
        Some(g)
    }
}

/// Removes a uniformly random non-target node.
pub struct NodeDelete;

impl Named for NodeDelete {
    fn name(&self) -> &'static str {
        "node-del"
    }
}

impl MutationOperator for NodeDelete {
    fn weight(&self, cfg: &MutationConfig) -> f64 {
        2.0 * (1.0 - cfg.p_complex)
    }

    fn propose(&self, gene: &Gene, _schema: &Schema, rng: &mut dyn RngCore) -> Option<Gene> {
        if gene.len() <= 2 {
            return None;
        }
        let v = rng.gen_range(2..gene.len());
        let mut g = gene.clone();
        g.remove_node(v);
        Some(g)
    }
}

pub fn mutation_operators() -> Registry<dyn MutationOperator> {
    let mut r: Registry<dyn MutationOperator> = Registry::new("mutation operator");
    r.register(Arc::new(EdgeFlip))
        .register(Arc::new(NodeAdd))
        .register(Arc::new(NodeDelete));
    r
}

/// Removes every non-target node that lies on no simple source-sink path,
/// repeating until nothing changes.
pub fn prune_side_branches(gene: &Gene) -> Gene {
    let mut g = gene.clone();
    loop {
        let on = g.on_path_nodes();
        let keep: Vec<usize> = (0..g.len()).filter(|&v| v < 2 || on[v]).collect();
        if keep.len() == g.len() {
            return g;
        }
        g.reindex(&keep);
    }
}

/// Applies registered operators under the three validity rules: no forbidden
/// cell is ever set, the source-sink path signature must change, and side
/// branches are pruned before the result is checked.
#[derive(Clone)]
pub struct Mutator {
    operators: Vec<Arc<dyn MutationOperator>>,
}

impl Default for Mutator {
    fn default() -> Self {
        Mutator::new(vec![Arc::new(EdgeFlip), Arc::new(NodeAdd), Arc::new(NodeDelete)])
    }
}

impl Mutator {
    pub fn new(operators: Vec<Arc<dyn MutationOperator>>) -> Self {
        Mutator { operators }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("at least one mutation operator is required".into()));
        }
        Ok(Mutator::new(mutation_operators().select(names)?))
    }

    /// With probability `p_mutate`, returns a mutated valid gene; otherwise,
    /// or when every retry fails, the input unchanged.
    pub fn mutate<R: Rng + ?Sized>(&self, gene: &Gene, schema: &Schema, cfg: &MutationConfig, rng: &mut R) -> Gene {
        if !rng.gen_bool(cfg.p_mutate) {
            return gene.clone();
        }
        self.mutate_always(gene, schema, cfg, rng)
    }

    /// Like [`Mutator::mutate`] but always attempts a mutation.
    pub fn mutate_always<R: Rng + ?Sized>(&self, gene: &Gene, schema: &Schema, cfg: &MutationConfig, rng: &mut R) -> Gene {
        let weights: Vec<f64> = self.operators.iter().map(|o| o.weight(cfg).max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return gene.clone();
        }
        let signature = gene.path_signature(schema);
        for _ in 0..cfg.max_retries {
            let mut pick = rng.gen::<f64>() * total;
            let mut op = &self.operators[self.operators.len() - 1];
            for (o, w) in self.operators.iter().zip(&weights) {
                if pick < *w {
                    op = o;
                    break;
                }
                pick -= w;
            }
            let Some(candidate) = op.propose(gene, schema, &mut RngAdapter(&mut *rng)) else {
                continue;
            };
            let candidate = prune_side_branches(&candidate);
            if candidate.is_valid(schema) && candidate.path_signature(schema) != signature {
                return candidate;
            }
        }
        gene.clone()
    }
}

// lets a generic `Rng` be handed to operators as `&mut dyn RngCore`
struct RngAdapter<'a, R: ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// A random valid gene with no side branches. The size is drawn uniformly
/// from 2..=`max_nodes`, redrawing among the remaining sizes when one yields
/// no valid gene. Falls back to the direct gene.
pub fn random_gene<R: Rng + ?Sized>(schema: &Schema, max_nodes: usize, rng: &mut R) -> Gene {
    let target = schema.target();
    let mut sizes: Vec<usize> = (2..=max_nodes.clamp(2, MAX_NODES)).collect();
    while !sizes.is_empty() {
        let slot = rng.gen_range(0..sizes.len());
        let n = sizes[slot];
        for _ in 0..500 {
            let mut types = vec![target.source, target.sink];
            types.extend((2..n).map(|_| rng.gen_range(0..schema.type_count())));
            let mut g = Gene::masked(schema, types);
            for (i, j) in g.free_cells() {
                if rng.gen_bool(0.5) {
                    g.set(i, j, PRESENT);
                }
            }
            if g.is_valid(schema) && prune_side_branches(&g) == g {
                return g;
            }
        }
        // no gene of this size found; try the others
        sizes.swap_remove(slot);
    }
    Gene::direct(schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gene::parse;
    use crate::hin::schema::tests::yelp;
    use crate::seed;

    #[test]
    fn direct_gene_cannot_lose_its_only_edge() {
        let s = yelp();
        let d = Gene::direct(&s);
        let flipped = EdgeFlip.propose(&d, &s, &mut seed::rng(0)).unwrap();
        assert!(!flipped.is_valid(&s));
        let m = Mutator::new(vec![Arc::new(EdgeFlip)]);
        let cfg = MutationConfig {
            p_mutate: 1.0,
            ..Default::default()
        };
        // the only edge-flip disconnects the targets, so every retry fails
        assert_eq!(m.mutate(&d, &s, &cfg, &mut seed::rng(1)), d);
    }

    #[test]
    fn never_flips_forbidden_cells() {
        let s = yelp();
        let g = parse("[U,B,B,A](0-1)(0-2)(1-3)(2-3)", &s).unwrap();
        let mut rng = seed::rng(3);
        for _ in 0..500 {
            let c = EdgeFlip.propose(&g, &s, &mut rng).unwrap();
            assert!(c.validate(&s).iter().all(|v| v.name() != "forbidden-link"));
        }
    }

    #[test]
    fn fig5c_dangling_category_pruned() {
        let s = yelp();
        // U-B with a category hanging off the business
        let g = Gene::from_edges(&s, vec![0, 1, 4], &[(0, 1), (1, 2)]);
        assert_eq!(prune_side_branches(&g), Gene::direct(&s));
    }

    #[test]
    fn prune_is_fixpoint_on_valid_genes() {
        let s = yelp();
        let g = parse("[U,B,U,B](0-1)(0-3)(1-2)(2-3)", &s).unwrap();
        assert_eq!(prune_side_branches(&g), g);
    }

    #[test]
    fn dangling_chain_removed() {
        let s = yelp();
        // U-B plus B-A and nothing beyond; then a U-U-U chain off the source
        let g = Gene::from_edges(&s, vec![0, 1, 0, 0], &[(0, 1), (0, 2), (2, 3)]);
        assert_eq!(prune_side_branches(&g), Gene::direct(&s));
    }

    #[test]
    fn mutation_changes_signature() {
        let s = yelp();
        let m = Mutator::default();
        let cfg = MutationConfig {
            p_mutate: 1.0,
            ..Default::default()
        };
        let mut rng = seed::rng(11);
        let g = parse("[U,B,U](0-1)(0-2)(1-2)", &s).unwrap();
        for _ in 0..200 {
            let out = m.mutate(&g, &s, &cfg, &mut rng);
            assert!(out.is_valid(&s));
            if out != g {
                assert_ne!(out.path_signature(&s), g.path_signature(&s));
            }
        }
    }

    #[test]
    fn p_mutate_zero_is_identity() {
        let s = yelp();
        let g = parse("[U,B,U](0-1)(0-2)(1-2)", &s).unwrap();
        let cfg = MutationConfig {
            p_mutate: 0.0,
            ..Default::default()
        };
        assert_eq!(Mutator::default().mutate(&g, &s, &cfg, &mut seed::rng(0)), g);
    }

    #[test]
    fn registry_names() {
        let names: Vec<_> = mutation_operators().names().collect();
        assert_eq!(names, vec!["edge-flip", "node-add", "node-del"]);
        assert!(Mutator::from_names(&["edge-flip", "bogus"]).is_err());
    }

    #[test]
    fn random_genes_are_valid() {
        let s = yelp();
        let mut rng = seed::rng(5);
        for _ in 0..200 {
            assert!(random_gene(&s, MAX_NODES, &mut rng).is_valid(&s));
        }
    }
}
