use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use metastruct::adjsearch::{brute_force_instances, materialize, matcher, InstanceTables, MatchCaps};
use metastruct::evolve::random_gene;
use metastruct::gene::MAX_NODES;
use metastruct::hin::synth::{random_hin, random_schema};
use metastruct::hin::Side;
use metastruct::seed;

const UNCAPPED: MatchCaps = MatchCaps {
    expansion: None,
    per_node: None,
};

fn sorted(t: &InstanceTables, side: Side) -> Vec<Vec<u32>> {
    t.side(side)
        .lists()
        .iter()
        .map(|l| {
            let mut l = l.clone();
            l.sort_unstable();
            l
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn uncapped_matching_equals_brute_force(seed in any::<u64>()) {
        let mut rng = seed::rng(seed);
        let schema = Arc::new(random_schema(rng.gen_range(1..=4), 0.5, &mut rng).unwrap());
        let hin = random_hin(schema.clone(), 12, rng.gen_range(0.05..0.4), &mut rng).unwrap();
        for _ in 0..4 {
            let gene = random_gene(&schema, MAX_NODES.min(5), &mut rng);
            let fast = materialize(&gene, &hin, UNCAPPED, rng.gen());
            let slow = brute_force_instances(&gene, &hin);
            prop_assert_eq!(sorted(&fast, Side::Source), sorted(&slow, Side::Source));
            prop_assert_eq!(sorted(&fast, Side::Sink), sorted(&slow, Side::Sink));
        }
    }

    #[test]
    fn capped_tables_are_sub_multisets(seed in any::<u64>(), cap in 1usize..6) {
        let mut rng = seed::rng(seed);
        let schema = Arc::new(random_schema(3, 0.6, &mut rng).unwrap());
        let hin = random_hin(schema.clone(), 15, 0.3, &mut rng).unwrap();
        let gene = random_gene(&schema, 5, &mut rng);
        let caps = MatchCaps { expansion: Some(cap), per_node: Some(cap) };
        let capped = materialize(&gene, &hin, caps, 9);
        let full = brute_force_instances(&gene, &hin);
        for side in [Side::Source, Side::Sink] {
            for (c, f) in sorted(&capped, side).iter().zip(sorted(&full, side)) {
                prop_assert!(c.len() <= cap);
                // every sampled neighbor is a real instance endpoint
                prop_assert!(c.iter().all(|x| f.contains(x)));
            }
        }
    }
}

#[test]
fn matchers_are_selected_by_name() {
    assert_eq!(matcher("sampled").unwrap().name(), "sampled");
    assert_eq!(matcher("brute-force").unwrap().name(), "brute-force");
    assert!(matcher("nope").is_err());
}

#[test]
fn sampled_matching_is_seed_deterministic() {
    let mut rng = seed::rng(3);
    let schema = Arc::new(random_schema(3, 0.8, &mut rng).unwrap());
    let hin = random_hin(schema.clone(), 40, 0.3, &mut rng).unwrap();
    let gene = random_gene(&schema, 5, &mut rng);
    let caps = MatchCaps::default();
    let a = materialize(&gene, &hin, caps, 5);
    let b = materialize(&gene, &hin, caps, 5);
    assert_eq!(sorted(&a, Side::Source), sorted(&b, Side::Source));
    assert_eq!(sorted(&a, Side::Sink), sorted(&b, Side::Sink));
}
