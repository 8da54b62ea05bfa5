use ndarray::{Array1, Array2};
use proptest::prelude::*;

use metastruct::engine::{Evaluator, SearchConfig};
use metastruct::evalkit::{hr_at_k, mrr_at_k, ndcg_at_k, rank_of_positive, uniform_rank_ndcg, RandomScorer, EVAL_NEGATIVES};
use metastruct::gene::{parse, Gene};
use metastruct::hin::synth::{generate_synthetic_hin, SyntheticSpec};
use metastruct::hin::Hin;
use metastruct::mvgcn::{fuse_with, init_params, train, EndpointSizes, TrainConfig};
use metastruct::seed::derive_seed;

fn planted(seed: u64) -> (Hin, Gene, Gene) {
    let (schema, hin, planted) = generate_synthetic_hin(&SyntheticSpec::collaborative(), seed).unwrap();
    (hin, planted, Gene::direct(&schema))
}

fn small_config(seed: u64) -> SearchConfig {
    SearchConfig {
        seed,
        dim: 16,
        train: TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        },
        ..SearchConfig::default()
    }
}

proptest! {
    #[test]
    fn attention_weights_sum_to_one(d in 1usize..6, n in 1usize..5, vals in prop::collection::vec(-2.0f64..2.0, 200)) {
        let mut it = vals.iter().copied().cycle();
        let w = Array2::from_shape_fn((d, n * d), |_| it.next().unwrap());
        let hs: Vec<Array1<f64>> = (0..n).map(|_| Array1::from_shape_fn(d, |_| it.next().unwrap().abs())).collect();
        let f = fuse_with(&w, &hs);
        prop_assert!((f.alpha.sum() - 1.0).abs() < 1e-12);
        prop_assert!(f.alpha.iter().all(|a| *a >= 0.0));
        if n == 1 {
            prop_assert_eq!(&f.y, &hs[0]);
        }
    }

    #[test]
    fn metric_ordering(rank in 1usize..=101, k in 1usize..60) {
        let (hr, mrr, ndcg) = (hr_at_k(rank, k), mrr_at_k(rank, k), ndcg_at_k(rank, k));
        prop_assert!(mrr <= ndcg + 1e-15 && ndcg <= hr);
        prop_assert_eq!(hr > 0.0, rank <= k);
        prop_assert!(hr_at_k(rank, k + 1) >= hr && ndcg_at_k(rank, k + 1) >= ndcg);
    }

    #[test]
    fn rank_counts_strictly_better_candidates(scores in prop::collection::vec(0u32..20, 2..40), pos in 0usize..40) {
        let pos = pos % scores.len();
        let scored: Vec<(u32, f64)> = scores.iter().enumerate().map(|(i, s)| (i as u32, *s as f64)).collect();
        let rank = rank_of_positive(&scored, pos as u32).unwrap();
        let better = scores.iter().enumerate().filter(|&(i, s)| *s > scores[pos] || (*s == scores[pos] && i < pos)).count();
        prop_assert_eq!(rank, better + 1);
        let mut rev = scored.clone();
        rev.reverse();
        prop_assert_eq!(rank_of_positive(&rev, pos as u32).unwrap(), rank);
    }
}

#[test]
fn random_scorer_matches_uniform_rank_expectation() {
    let mut spec = SyntheticSpec::collaborative();
    spec.node_types[0].count = 1500;
    spec.node_types[1].count = 300;
    let (_, hin, _) = generate_synthetic_hin(&spec, 5).unwrap();
    let eval = Evaluator::new(&small_config(5), &hin).unwrap();
    assert!(eval.test.len() >= 500, "{}", eval.test.len());
    let got = eval.test.ndcg_at_10(&RandomScorer { seed: 1 });
    let want = uniform_rank_ndcg(10, EVAL_NEGATIVES + 1);
    assert!((got - want).abs() < 0.01, "{got} vs {want}");
}

#[test]
fn fitness_ignores_gene_order() {
    let (hin, planted, direct) = planted(1);
    let eval = Evaluator::new(&small_config(1), &hin).unwrap();
    let a = eval.evaluate(&[planted.clone(), direct.clone()]).unwrap();
    let b = eval.evaluate(&[direct, planted]).unwrap();
    assert_eq!(a.fitness, b.fitness);
    assert_eq!(a.params, b.params);
}

#[test]
fn copies_of_the_direct_gene_match_a_single_view() {
    let (hin, _, direct) = planted(2);
    let eval = Evaluator::new(&small_config(2), &hin).unwrap();
    let one = eval.evaluate(std::slice::from_ref(&direct)).unwrap().fitness;
    let many = eval.evaluate(&vec![direct; 5]).unwrap().fitness;
    assert!((one - many).abs() <= 0.01, "{one} vs {many}");
}

#[test]
fn training_improves_on_the_untrained_model() {
    let (hin, planted, _) = planted(3);
    let cfg = SearchConfig {
        seed: 3,
        ..SearchConfig::default()
    };
    let eval = Evaluator::new(&cfg, &hin).unwrap();
    let tables = vec![eval.tables_for(&planted)];
    let params = init_params(
        EndpointSizes::of(&eval.train_graph),
        cfg.dim,
        vec![planted.canonical_key(&eval.schema)],
        derive_seed(3, &["init".into()]),
    );
    let out = train(params, &tables, &eval.dataset, &eval.val, cfg.train).unwrap();
    assert_eq!(out.epochs.len(), 31);
    let untrained = out.epochs[0].val_ndcg10;
    assert!(out.best_ndcg10 >= untrained + 0.05, "{untrained} -> {}", out.best_ndcg10);
}

#[test]
fn heavy_l2_shrinks_parameters() {
    let (hin, planted, _) = planted(4);
    let cfg = small_config(4);
    let eval = Evaluator::new(&cfg, &hin).unwrap();
    let tables = vec![eval.tables_for(&planted)];
    let params = init_params(EndpointSizes::of(&eval.train_graph), 16, vec![planted.canonical_key(&eval.schema)], 9);
    let norm = |l2: f64| {
        let tc = TrainConfig { l2, ..cfg.train };
        let mut t = metastruct::mvgcn::Trainer::new(params.clone(), &tables, &eval.dataset, tc).unwrap();
        for e in 0..tc.epochs {
            t.run_epoch(e).unwrap();
        }
        t.params.l2_norm()
    };
    assert!(norm(10.0) < norm(0.0));
}

#[test]
fn genes_parse_on_the_synthetic_schema() {
    let spec = SyntheticSpec::collaborative();
    let schema = spec.schema().unwrap();
    assert!(parse(&spec.planted, &schema).is_ok());
}
