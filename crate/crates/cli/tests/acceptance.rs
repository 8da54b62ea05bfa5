//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array1, Array2};
use num_bigint::BigUint;
use rand::Rng;

use metastruct::adjsearch::{brute_force_instances, materialize, InstanceTables, MatchCaps};
use metastruct::engine::{run_search, Evaluator, InitMode, SearchConfig, SearchOutcome};
use metastruct::evalkit::{hr_at_k, mrr_at_k, ndcg_at_k, uniform_rank_ndcg, RandomScorer, EVAL_NEGATIVES};
use metastruct::evolve::{prune_side_branches, random_gene, MutationConfig, Mutator};
use metastruct::gene::{mask_matrix, search_space_size, Gene, GeneKey, MAX_NODES};
use metastruct::hin::synth::{generate_synthetic_hin, random_hin, random_schema, SyntheticSpec};
use metastruct::hin::{Schema, Side};
use metastruct::mvgcn::{fuse_with, margin_loss, random_micro_instance};
use metastruct::predictor::{self, fit, init_predictor, node_count_task, predict, spearman, train_predictor, HistoryStore};
use metastruct::seed::{self, derive_seed};

const SEARCH_SEEDS: u64 = 5;
const GRAD_STEP: f64 = 1e-5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn five_node_free_cells() -> Verdict {
    let schema = SyntheticSpec::yelp_like().schema().unwrap();
    let types: Vec<usize> = ["U", "B", "U", "B", "A"].iter().map(|t| schema.type_id(t).unwrap()).collect();
    let mask = mask_matrix(&schema, &types);
    let free = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).filter(|&(i, j)| mask[i][j] == 0).count();
    verdict(free == 7, format!("free cells {free}"))
}

/// n! / (k! (n-k)!) with every factor kept.
fn binomial_by_factorials(n: &BigUint, k: u32) -> BigUint {
    let k_big = BigUint::from(k);
    if &k_big > n {
        return BigUint::ZERO;
    }
    let falling = (0..k).fold(BigUint::from(1u32), |acc, i| acc * (n - BigUint::from(i)));
    let fact = (1..=k).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(i));
    falling / fact
}

fn space_formula() -> Verdict {
    let headline = search_space_size(5, 3, 1) == BigUint::from(64_000u32);
    let mut mismatches = 0;
    for m in 1..=5u32 {
        for n in 1..=5u32 {
            let genes = (0..n).fold(BigUint::from(1u32), |a, _| a * m) << (n * n) as usize;
            for k in 1..=5u32 {
                if search_space_size(m, n, k) != binomial_by_factorials(&genes, k) {
                    mismatches += 1;
                }
            }
        }
    }
    verdict(headline && mismatches == 0, format!("(5,3,1) ok={headline}, mismatches {mismatches}/125"))
}

fn forbidden_links(g: &Gene, schema: &Schema) -> usize {
    g.edges()
        .iter()
        .filter(|&&(i, j)| schema.relation_between(g.types()[i], g.types()[j]).is_none())
        .count()
}

fn mutation_rules() -> Verdict {
    let mutator = Mutator::from_names(&["edge-flip", "node-add", "node-del"]).unwrap();
    let mut rng = seed::rng(derive_seed(3, &["mutation".into()]));
    let (mut invalid, mut forbidden, mut unchanged_sig, mut side_branches, mut changed) = (0, 0, 0, 0, 0);
    let per_schema = 10_000 / 3 + 1;
    for s in 0..3 {
        let n_types = 3 + s;
        let schema = random_schema(n_types, 0.5, &mut rng).unwrap();
        let mut g = random_gene(&schema, MAX_NODES, &mut rng);
        for step in 0..per_schema {
            if step % 50 == 0 {
                g = random_gene(&schema, MAX_NODES, &mut rng);
            }
            let cfg = MutationConfig {
                p_mutate: 1.0,
                p_complex: rng.gen(),
                max_retries: 32,
            };
            let m = mutator.mutate(&g, &schema, &cfg, &mut rng);
            invalid += usize::from(!m.is_valid(&schema));
            forbidden += forbidden_links(&m, &schema);
            side_branches += usize::from(prune_side_branches(&m) != m);
            if m != g {
                changed += 1;
                unchanged_sig += usize::from(m.path_signature(&schema) == g.path_signature(&schema));
            }
            g = m;
        }
    }
    verdict(
        invalid + forbidden + unchanged_sig + side_branches == 0,
        format!(
            "{} mutations, {changed} changed: invalid {invalid}, forbidden {forbidden}, same signature {unchanged_sig}, side branches {side_branches}",
            3 * per_schema
        ),
    )
}

fn sorted_lists(t: &InstanceTables, side: Side) -> Vec<Vec<u32>> {
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

fn matching_oracle() -> Verdict {
    let uncapped = MatchCaps {
        expansion: None,
        per_node: None,
    };
    let mut rng = seed::rng(derive_seed(4, &["matching".into()]));
    let (mut compared, mut mismatched) = (0, 0);
    for _ in 0..50 {
        let schema = Arc::new(random_schema(rng.gen_range(1..=4), 0.5, &mut rng).unwrap());
        let hin = random_hin(schema.clone(), 200, rng.gen_range(0.005..0.03), &mut rng).unwrap();
        for _ in 0..10 {
            let gene = random_gene(&schema, 5, &mut rng);
            let fast = materialize(&gene, &hin, uncapped, rng.gen());
            let slow = brute_force_instances(&gene, &hin);
            compared += 1;
            if sorted_lists(&fast, Side::Source) != sorted_lists(&slow, Side::Source)
                || sorted_lists(&fast, Side::Sink) != sorted_lists(&slow, Side::Sink)
            {
                mismatched += 1;
            }
        }
    }
    verdict(mismatched == 0, format!("{compared} gene/graph pairs, {mismatched} mismatched"))
}

fn gradients() -> Verdict {
    let tolerance = 1e-4;
    let mvgcn: Vec<_> = (0..100u64)
        .map(|b| random_micro_instance(4, 2, derive_seed(5, &["mvgcn".into(), b.into()])).check(GRAD_STEP))
        .collect();
    let schema = SyntheticSpec::yelp_like().schema().unwrap();
    let pred: Vec<_> = (0..100u64)
        .map(|b| {
            let (p, data) = predictor::random_micro_history(&schema, derive_seed(5, &["predictor".into(), b.into()]));
            predictor::grad_check(&p, &data, GRAD_STEP)
        })
        .collect();
    let worst = |checks: &[metastruct::mvgcn::GradCheck]| {
        let kept: Vec<_> = checks.iter().filter(|c| !c.near_kink()).collect();
        (kept.iter().map(|c| c.max_rel_error).fold(0.0, f64::max), kept.len())
    };
    let (m_err, m_n) = worst(&mvgcn);
    let (p_err, p_n) = worst(&pred);
    verdict(
        m_err < tolerance && p_err < tolerance && m_n > 0 && p_n > 0,
        format!("mvgcn {m_err:.2e} over {m_n}/100, predictor {p_err:.2e} over {p_n}/100"),
    )
}

fn unit_identities() -> Verdict {
    let mut failures = Vec::new();
    let mut rng = seed::rng(6);

    let d = 5;
    let w = Array2::from_shape_fn((d, d), |_| rng.gen_range(-1.0..1.0));
    let h = Array1::from_shape_fn(d, |_| rng.gen_range(0.0..2.0));
    let single = fuse_with(&w, std::slice::from_ref(&h));
    if single.y != h || single.alpha.len() != 1 || single.alpha[0] != 1.0 {
        failures.push("single view");
    }

    let mut worst_sum = 0.0f64;
    for n in 2..=6 {
        let w = Array2::from_shape_fn((d, n * d), |_| rng.gen_range(-2.0..2.0));
        let hs: Vec<Array1<f64>> = (0..n).map(|_| Array1::from_shape_fn(d, |_| rng.gen_range(0.0..3.0))).collect();
        worst_sum = worst_sum.max((fuse_with(&w, &hs).alpha.sum() - 1.0).abs());
    }
    if worst_sum > 1e-12 {
        failures.push("attention sum");
    }

    let loss_cases = [
        (margin_loss(0.5, &[0.5], 0.5), 0.5),
        (margin_loss(0.75, &[0.5, 0.0], 0.5), 0.125),
        (margin_loss(0.25, &[0.5, 0.25, 0.0], 0.25), 0.25),
        (margin_loss(1.0, &[0.0], 0.5), 0.0),
        (margin_loss(0.5, &[], 0.5), 0.0),
    ];
    if loss_cases.iter().any(|(got, want)| got != want) {
        failures.push("margin loss");
    }

    let metric_cases = [
        (ndcg_at_k(1, 10), 1.0),
        (ndcg_at_k(3, 10), 0.5),
        (ndcg_at_k(7, 10), 1.0 / 3.0),
        (ndcg_at_k(11, 10), 0.0),
        (mrr_at_k(4, 10), 0.25),
        (mrr_at_k(10, 10), 0.1),
        (mrr_at_k(11, 10), 0.0),
        (hr_at_k(10, 10), 1.0),
        (hr_at_k(11, 10), 0.0),
    ];
    if metric_cases.iter().any(|(got, want)| got != want) {
        failures.push("ranking metrics");
    }

    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("attention sum error {worst_sum:.1e}")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn random_scorer() -> Verdict {
    let mut spec = SyntheticSpec::collaborative();
    spec.node_types[0].count = 1500;
    spec.node_types[1].count = 300;
    let (_, hin, _) = generate_synthetic_hin(&spec, 7).unwrap();
    let cfg = SearchConfig {
        seed: 7,
        dim: 8,
        ..SearchConfig::default()
    };
    let eval = Evaluator::new(&cfg, &hin).unwrap();
    let got = eval.test.ndcg_at_10(&RandomScorer { seed: 1 });
    let want = uniform_rank_ndcg(10, EVAL_NEGATIVES + 1);
    verdict(
        eval.test.len() >= 500 && (got - want).abs() <= 0.01,
        format!("{} records, ndcg@10 {got:.4} vs {want:.4}", eval.test.len()),
    )
}

struct SearchRun {
    schema: Schema,
    planted: GeneKey,
    cfg: SearchConfig,
    out: SearchOutcome,
}

fn search_config(seed: u64) -> SearchConfig {
    let mut cfg = SearchConfig {
        seed,
        population: 10,
        genes_per_individual: 2,
        generations: 8,
        init: InitMode::Random,
        dim: 16,
        workers: Some(4),
        ..SearchConfig::default()
    };
    cfg.train.l2 = 0.0;
    cfg.train.epochs = 20;
    cfg
}

fn search_runs() -> Vec<SearchRun> {
    (0..SEARCH_SEEDS)
        .map(|seed| {
            let (schema, hin, planted) = generate_synthetic_hin(&SyntheticSpec::collaborative(), seed).unwrap();
            let cfg = search_config(seed);
            let out = run_search(&cfg, &hin, |_| {}).unwrap();
            SearchRun {
                planted: planted.canonical_key(&schema),
                schema,
                cfg,
                out,
            }
        })
        .collect()
}

fn search_quality(runs: &[SearchRun]) -> Verdict {
    let mut passed = 0;
    let mut parts = Vec::new();
    for (seed, run) in runs.iter().enumerate() {
        let first = run.out.logs[0].mean_real_fitness.unwrap();
        let last = run.out.logs.last().unwrap().mean_real_fitness.unwrap();
        let gain = last >= 1.03 * first;
        let top3 = run.out.frequency.iter().take(3).any(|f| f.key == run.planted);
        passed += usize::from(gain && top3);
        parts.push(format!("s{seed}:{:+.1}%{}", 100.0 * (last / first - 1.0), if top3 { "+top3" } else { "" }));
    }
    verdict(passed >= 3, format!("{passed}/{SEARCH_SEEDS} seeds [{}]", parts.join(" ")))
}

fn holdout_spearman(run: &SearchRun) -> Option<f64> {
    let mut held: BTreeMap<Vec<GeneKey>, (Vec<Gene>, f64)> = BTreeMap::new();
    for ind in run.out.population.iter().filter(|i| i.evaluated) {
        let mut key: Vec<GeneKey> = ind.genes.iter().map(|g| g.canonical_key(&run.schema)).collect();
        key.sort();
        held.insert(key, (ind.genes.clone(), ind.fitness));
    }
    let mut train = HistoryStore::new();
    for r in run.out.history.records() {
        if !held.contains_key(&r.gene_keys) {
            train.push(r.clone()).unwrap();
        }
    }
    if held.len() < 2 || train.is_empty() {
        return None;
    }
    let params = init_predictor(run.schema.type_count(), run.cfg.seed);
    let params = train_predictor(params, &train, run.cfg.predictor_epochs, run.cfg.predictor_lr);
    let pred: Vec<f64> = held.values().map(|(g, _)| predict(&params, g)).collect();
    let truth: Vec<f64> = held.values().map(|(_, f)| *f).collect();
    spearman(&pred, &truth).ok()
}

fn predictor_usefulness(runs: &[SearchRun]) -> Verdict {
    let rhos: Vec<Option<f64>> = runs.iter().map(holdout_spearman).collect();
    let good = rhos.iter().filter(|r| r.is_some_and(|r| r >= 0.3)).count();

    let schema = SyntheticSpec::yelp_like().schema().unwrap();
    let (train, held) = node_count_task(&schema, 160, 1, 3);
    let p = fit(init_predictor(schema.type_count(), 1), &train, 300, 0.03);
    let pred: Vec<f64> = held.iter().map(|(g, _)| predict(&p, g)).collect();
    let truth: Vec<f64> = held.iter().map(|(_, t)| *t).collect();
    let node_rho = spearman(&pred, &truth).unwrap();

    let shown: Vec<String> = rhos.iter().map(|r| r.map_or("n/a".into(), |r| format!("{r:.2}"))).collect();
    verdict(
        good >= 3 && node_rho >= 0.8,
        format!("held-out {good}/{SEARCH_SEEDS} [{}], node count {node_rho:.3}", shown.join(" ")),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_metastruct"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    run_cli(&["synth", "--preset", "collaborative", "--seed", "11", "--out", &p("data")]);
    let config = r#"{"population": 6, "genes_per_individual": 2, "generations": 3, "init": "random", "dim": 8, "train": {"epochs": 4}}"#;
    std::fs::write(p("config.json"), config).unwrap();
    let search = |workers: &str, out: &str| {
        run_cli(&[
            "search",
            "--schema",
            &p("data/schema.json"),
            "--edges",
            &p("data/edges.tsv"),
            "--config",
            &p("config.json"),
            "--seed",
            "11",
            "--workers",
            workers,
            "--out",
            &p(out),
        ]);
        std::fs::read(Path::new(&p(out)).join("generations.jsonl")).unwrap()
    };
    let one = search("1", "w1");
    let four = search("4", "w4");
    verdict(
        !one.is_empty() && one == four,
        format!("generations.jsonl {} vs {} bytes, identical={}", one.len(), four.len(), one == four),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, started: Instant, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!v.pass);
        println!("{tag} {id:>2} {name}: {} ({:.1}s)", v.detail, started.elapsed().as_secs_f64());
    };

    let t = Instant::now();
    report(1, "encoding fidelity", t, five_node_free_cells());
    let t = Instant::now();
    report(2, "search-space formula", t, space_formula());
    let t = Instant::now();
    report(3, "mutation rules", t, mutation_rules());
    let t = Instant::now();
    report(4, "instance matching oracle", t, matching_oracle());
    let t = Instant::now();
    report(5, "gradient correctness", t, gradients());
    let t = Instant::now();
    report(6, "fusion, loss and metric identities", t, unit_identities());
    let t = Instant::now();
    report(7, "evaluation protocol", t, random_scorer());
    let t = Instant::now();
    let runs = search_runs();
    report(8, "scaled search quality", t, search_quality(&runs));
    let t = Instant::now();
    report(9, "predictor usefulness", t, predictor_usefulness(&runs));
    let t = Instant::now();
    report(10, "determinism across workers", t, determinism());

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
