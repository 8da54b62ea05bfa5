use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use metastruct::adjsearch::brute_force_instances;
use metastruct::engine::{format_frequency, run_search_with, Evaluator, SearchConfig};
use metastruct::gene::{parse_gene_list, parse_unchecked, Gene};
use metastruct::hin::synth::{generate_synthetic_hin, SyntheticSpec};
use metastruct::hin::{load_hin, load_schema, write_edges, Hin, Schema, Side};
use metastruct::mvgcn::{random_micro_instance, save_checkpoint, load_checkpoint, Checkpoint, GradCheck};
use metastruct::predictor;
use metastruct::seed::derive_seed;

use crate::manifest::{create_dir, fresh_seed, write_file, RunManifest, SeedSource};
use crate::{
    DataArgs, EvalArgs, Fail, FixedArgs, GradcheckArgs, InspectArgs, Preset, RunArgs, SearchArgs, SweepArgs, SweepParam,
    SynthArgs,
};

const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_STEP: f64 = 1e-5;

/// A closed stdout (e.g. piped into `head`) is not an error.
fn print_json(value: &impl Serialize) {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail::io(path, e))
}

fn resolve_seed(flag: Option<u64>) -> (u64, SeedSource) {
    match flag {
        Some(s) => (s, SeedSource::Flag),
        None => (fresh_seed(), SeedSource::Fresh),
    }
}

/// Config file (or defaults) with the seed taken from the flag, then the file,
/// then a fresh draw. Not yet validated.
fn load_config(path: Option<&Path>, seed: Option<u64>, workers: Option<usize>) -> Result<(SearchConfig, SeedSource), Fail> {
    let (mut cfg, file_seed) = match path {
        Some(path) => {
            let value: serde_json::Value =
                serde_json::from_str(&read(path)?).map_err(|e| Fail::User(format!("config {}: {e}", path.display())))?;
            let file_seed = value.get("seed").and_then(serde_json::Value::as_u64);
            let cfg: SearchConfig =
                serde_json::from_value(value).map_err(|e| Fail::User(format!("config {}: {e}", path.display())))?;
            (cfg, file_seed)
        }
        None => (SearchConfig::default(), None),
    };
    let source = match (seed, file_seed) {
        (Some(s), _) => {
            cfg.seed = s;
            SeedSource::Flag
        }
        (None, Some(_)) => SeedSource::Config,
        (None, None) => {
            cfg.seed = fresh_seed();
            SeedSource::Fresh
        }
    };
    if workers.is_some() {
        cfg.workers = workers;
    }
    Ok((cfg, source))
}

fn load_data(data: &DataArgs, manifest: &mut RunManifest) -> Result<(Arc<Schema>, Hin), Fail> {
    manifest.input("schema", &data.schema)?;
    manifest.input("edges", &data.edges)?;
    let schema = Arc::new(load_schema(&data.schema)?);
    let hin = load_hin(schema.clone(), &data.edges)?;
    log::info!(
        "loaded {} nodes and {} edges from {}",
        hin.node_counts().iter().sum::<usize>(),
        hin.edge_count(),
        data.edges.display()
    );
    Ok((schema, hin))
}

fn load_genes(path: &Path, schema: &Schema, manifest: &mut RunManifest) -> Result<Vec<Gene>, Fail> {
    manifest.input("genes", path)?;
    Ok(parse_gene_list(&read(path)?, schema)?)
}

fn gene_lines(genes: &[Gene], schema: &Schema) -> String {
    genes.iter().map(|g| format!("{}\n", g.display(schema))).collect()
}

fn global_workers(workers: Option<usize>) -> Result<(), Fail> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Fail::User("--workers must be >= 1".into()));
        }
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn start(command: &str, run: &RunArgs) -> Result<(SearchConfig, RunManifest), Fail> {
    let (cfg, source) = load_config(run.config.as_deref(), run.seed, run.workers)?;
    let mut manifest = RunManifest::new(command, cfg.seed, source);
    if let Some(path) = &run.config {
        manifest.config_path = Some(path.clone());
        manifest.input("config", path)?;
    }
    Ok((cfg, manifest))
}

pub fn synth(a: SynthArgs) -> Result<(), Fail> {
    let (seed, source) = resolve_seed(a.seed);
    let mut manifest = RunManifest::new("synth", seed, source);
    let spec = match &a.spec {
        Some(path) => {
            manifest.config_path = Some(path.clone());
            manifest.input("spec", path)?;
            serde_json::from_str::<SyntheticSpec>(&read(path)?)
                .map_err(|e| Fail::User(format!("spec {}: {e}", path.display())))?
        }
        None => match a.preset {
            Preset::Collaborative => SyntheticSpec::collaborative(),
            Preset::YelpLike => SyntheticSpec::yelp_like(),
        },
    };
    manifest.config(&spec);
    create_dir(&a.out)?;
    let (schema, hin, planted) = generate_synthetic_hin(&spec, seed)?;
    write_file(&a.out.join("schema.json"), &schema.to_json())?;
    write_edges(&hin, a.out.join("edges.tsv"))?;
    write_file(&a.out.join("planted.txt"), &gene_lines(std::slice::from_ref(&planted), &schema))?;
    manifest.write(Some(&a.out))?;
    log::info!("wrote {} edges to {}", hin.edge_count(), a.out.display());
    print_json(&json!({
        "seed": seed,
        "schema": a.out.join("schema.json"),
        "edges": a.out.join("edges.tsv"),
        "planted": planted.to_string_with(&schema),
        "planted_key": planted.canonical_key(&schema),
        "node_counts": hin.node_counts(),
        "edge_count": hin.edge_count(),
    }));
    Ok(())
}

struct JsonLines {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonLines {
    fn create(path: PathBuf) -> Result<Self, Fail> {
        let file = File::create(&path).map_err(|e| Fail::io(&path, e))?;
        Ok(JsonLines { path, out: BufWriter::new(file) })
    }

    fn push(&mut self, value: &impl Serialize) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    fn check(&self, r: std::io::Result<()>) -> Result<(), Fail> {
        r.map_err(|e| Fail::io(&self.path, e))
    }
}

pub fn search(a: SearchArgs) -> Result<(), Fail> {
    let (mut cfg, mut manifest) = start("search", &a.run)?;
    if a.no_predictor {
        cfg.use_predictor = false;
    }
    if let Some(g) = a.generations {
        cfg.generations = g;
    }
    if let Some(n) = a.population {
        cfg.population = n;
    }
    if let Some(k) = a.genes_per_individual {
        cfg.genes_per_individual = k;
    }
    cfg.validate()?;
    manifest.config(&cfg);
    let (schema, hin) = load_data(&a.data, &mut manifest)?;
    create_dir(&a.out)?;
    manifest.write(Some(&a.out))?;
    write_file(&a.out.join("config.json"), &serde_json::to_string_pretty(&cfg).expect("config serializes"))?;

    let eval = Evaluator::new(&cfg, &hin)?;
    log::info!(
        "search: seed {} population {} genes {} generations {} ({} train / {} val / {} test records)",
        cfg.seed,
        cfg.population,
        cfg.genes_per_individual,
        cfg.generations,
        eval.dataset.count(metastruct::hin::Split::Train),
        eval.val.len(),
        eval.test.len()
    );
    let mut logs = JsonLines::create(a.out.join("generations.jsonl"))?;
    let mut timings = JsonLines::create(a.out.join("timings.jsonl"))?;
    let mut write_err: Option<Fail> = None;
    let outcome = run_search_with(&cfg, &eval, &mut |log| {
        if write_err.is_some() {
            return;
        }
        let r = logs.push(log);
        if let Err(e) = logs.check(r) {
            write_err = Some(e);
            return;
        }
        let r = timings.push(&json!({
            "generation": log.generation,
            "seconds": log.seconds,
            "trained": log.trained,
            "filtered": log.filtered,
        }));
        if let Err(e) = timings.check(r) {
            write_err = Some(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }

    write_file(&a.out.join("frequency.tsv"), &format_frequency(&outcome.frequency))?;
    write_file(&a.out.join("history.jsonl"), &outcome.history.export())?;
    let best = &outcome.best;
    write_file(&a.out.join("best_genes.txt"), &gene_lines(&best.genes, &schema))?;
    let retrained = eval.evaluate(&best.genes)?;
    if retrained.fitness != best.fitness {
        log::warn!("retrained best scored {} against {} during search", retrained.fitness, best.fitness);
    }
    save_checkpoint(
        &Checkpoint {
            params: retrained.params.clone(),
            seed: Some(cfg.seed),
        },
        a.out.join("best_checkpoint.json"),
    )?;
    let test = eval.test_metrics(&retrained.params, &retrained.tables);
    let summary = json!({
        "seed": cfg.seed,
        "generations": outcome.logs.len(),
        "generation_mean_real_fitness": outcome.logs.iter().map(|l| l.mean_real_fitness).collect::<Vec<_>>(),
        "best_fitness": best.fitness,
        "best_genes": best.genes.iter().map(|g| g.canonical_key(&schema)).collect::<Vec<_>>(),
        "test": test,
        "top_genes": outcome.frequency.iter().take(5).collect::<Vec<_>>(),
    });
    write_file(&a.out.join("summary.json"), &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    log::info!("best validation NDCG@10 {:.4}, test NDCG@10 {:.4}", best.fitness, test.ndcg10);
    print_json(&summary);
    Ok(())
}

fn train_fixed(cfg: &SearchConfig, hin: &Hin, genes: &[Gene]) -> Result<(serde_json::Value, Checkpoint), Fail> {
    let eval = Evaluator::new(cfg, hin)?;
    let e = eval.evaluate(genes)?;
    let test = eval.test_metrics(&e.params, &e.tables);
    let report = json!({
        "seed": cfg.seed,
        "genes": genes.iter().map(|g| g.canonical_key(&eval.schema)).collect::<Vec<_>>(),
        "val_ndcg10": e.fitness,
        "best_epoch": e.best_epoch,
        "test": test,
    });
    Ok((report, Checkpoint { params: e.params, seed: Some(cfg.seed) }))
}

pub fn fixed(a: FixedArgs) -> Result<(), Fail> {
    let (cfg, mut manifest) = start("fixed", &a.run)?;
    cfg.validate()?;
    manifest.config(&cfg);
    global_workers(cfg.workers)?;
    let (schema, hin) = load_data(&a.data, &mut manifest)?;
    let genes = load_genes(&a.genes, &schema, &mut manifest)?;
    create_dir(&a.out)?;
    manifest.write(Some(&a.out))?;
    log::info!("training {} fixed genes", genes.len());
    let (report, checkpoint) = train_fixed(&cfg, &hin, &genes)?;
    save_checkpoint(&checkpoint, a.out.join("checkpoint.json"))?;
    write_file(&a.out.join("genes.txt"), &gene_lines(&genes, &schema))?;
    write_file(&a.out.join("metrics.json"), &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    print_json(&report);
    Ok(())
}

fn apply_sweep(cfg: &mut SearchConfig, param: SweepParam, v: f64) -> Result<(), Fail> {
    let count = |v: f64| -> Result<usize, Fail> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Fail::User(format!("sweep value {v} must be a positive integer")))
        }
    };
    match param {
        SweepParam::L2 => cfg.train.l2 = v,
        SweepParam::Margin => cfg.train.margin = v,
        SweepParam::Lr => cfg.train.lr = v,
        SweepParam::Dim => cfg.dim = count(v)?,
        SweepParam::Epochs => cfg.train.epochs = count(v)?,
    }
    cfg.validate()?;
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<(), Fail> {
    let (cfg, mut manifest) = start("sweep", &a.run)?;
    cfg.validate()?;
    let configs = a
        .values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            apply_sweep(&mut c, a.param, v).map(|_| c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    manifest.config(&json!({ "base": cfg, "param": format!("{:?}", a.param).to_lowercase(), "values": a.values }));
    global_workers(cfg.workers)?;
    let (schema, hin) = load_data(&a.data, &mut manifest)?;
    let genes = load_genes(&a.genes, &schema, &mut manifest)?;
    create_dir(&a.out)?;
    manifest.write(Some(&a.out))?;
    let mut lines = JsonLines::create(a.out.join("sweep.jsonl"))?;
    let mut rows = Vec::new();
    for (v, c) in a.values.iter().zip(&configs) {
        let (report, _) = train_fixed(c, &hin, &genes)?;
        let row = json!({ "value": v, "report": report });
        log::info!("{:?} = {v}: validation NDCG@10 {:.4}", a.param, report["val_ndcg10"].as_f64().unwrap_or(f64::NAN));
        let r = lines.push(&row);
        lines.check(r)?;
        rows.push(row);
    }
    print_json(&rows);
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<(), Fail> {
    let checkpoint = load_checkpoint(&a.checkpoint)?;
    let (mut cfg, source) = load_config(a.config.as_deref(), a.seed, a.workers)?;
    let source = match (a.seed, checkpoint.seed) {
        (None, Some(s)) => {
            cfg.seed = s;
            SeedSource::Checkpoint
        }
        _ => source,
    };
    cfg.dim = checkpoint.params.dim;
    cfg.validate()?;
    let mut manifest = RunManifest::new("eval", cfg.seed, source);
    manifest.config_path = a.config.clone();
    if let Some(path) = &a.config {
        manifest.input("config", path)?;
    }
    manifest.input("checkpoint", &a.checkpoint)?;
    manifest.config(&cfg);
    global_workers(cfg.workers)?;
    let (schema, hin) = load_data(&a.data, &mut manifest)?;
    let genes = load_genes(&a.genes, &schema, &mut manifest)?;
    let evaluator = Evaluator::new(&cfg, &hin)?;
    let tables = evaluator.tables_for_params(&checkpoint.params, &genes)?;
    let metrics = evaluator.test_metrics(&checkpoint.params, &tables);
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_file(&out.join("metrics.json"), &serde_json::to_string_pretty(&metrics).expect("metrics serialize"))?;
    }
    manifest.write(a.out.as_deref())?;
    log::info!("test NDCG@10 {:.4} over {} records", metrics.ndcg10, metrics.records);
    print_json(&metrics);
    Ok(())
}

#[derive(Serialize)]
struct GradSummary {
    max_rel_error: f64,
    max_abs_error: f64,
    checked_batches: usize,
    excluded_near_kink: usize,
}

fn summarize(checks: impl Iterator<Item = GradCheck>) -> GradSummary {
    let mut s = GradSummary {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked_batches: 0,
        excluded_near_kink: 0,
    };
    for c in checks {
        if c.near_kink() {
            s.excluded_near_kink += 1;
            continue;
        }
        s.checked_batches += 1;
        s.max_rel_error = s.max_rel_error.max(c.max_rel_error);
        s.max_abs_error = s.max_abs_error.max(c.max_abs_error);
    }
    s
}

pub fn gradcheck(a: GradcheckArgs) -> Result<(), Fail> {
    if a.d == 0 || a.views == 0 || a.batches == 0 {
        return Err(Fail::User("--d, --views and --batches must be >= 1".into()));
    }
    let (seed, source) = resolve_seed(a.seed);
    let mut manifest = RunManifest::new("gradcheck", seed, source);
    manifest.config(&json!({ "d": a.d, "views": a.views, "batches": a.batches, "step": GRAD_STEP }));
    if let Some(out) = &a.out {
        create_dir(out)?;
    }
    let mvgcn = summarize(
        (0..a.batches).map(|b| random_micro_instance(a.d, a.views, derive_seed(seed, &["mvgcn".into(), b.into()])).check(GRAD_STEP)),
    );
    let schema = SyntheticSpec::yelp_like().schema()?;
    let pred = summarize((0..a.batches).map(|b| {
        let (p, data) = predictor::random_micro_history(&schema, derive_seed(seed, &["predictor".into(), b.into()]));
        predictor::grad_check(&p, &data, GRAD_STEP)
    }));
    let pass = mvgcn.max_rel_error < GRAD_TOLERANCE
        && pred.max_rel_error < GRAD_TOLERANCE
        && mvgcn.checked_batches > 0
        && pred.checked_batches > 0;
    let report = json!({
        "seed": seed,
        "d": a.d,
        "views": a.views,
        "tolerance": GRAD_TOLERANCE,
        "mvgcn": mvgcn,
        "predictor": pred,
        "pass": pass,
    });
    if let Some(out) = &a.out {
        write_file(&out.join("gradcheck.json"), &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    manifest.write(a.out.as_deref())?;
    log::info!(
        "max relative error: mvgcn {:.3e}, predictor {:.3e}",
        mvgcn.max_rel_error,
        pred.max_rel_error
    );
    print_json(&report);
    if pass {
        Ok(())
    } else {
        Err(Fail::Runtime(format!("gradient check exceeded {GRAD_TOLERANCE:e}")))
    }
}

pub fn inspect_genes(a: InspectArgs) -> Result<(), Fail> {
    let (seed, source) = resolve_seed(a.seed);
    let mut manifest = RunManifest::new("inspect-genes", seed, source);
    manifest.input("schema", &a.schema)?;
    let schema = Arc::new(load_schema(&a.schema)?);
    let hin = match &a.edges {
        Some(path) => {
            manifest.input("edges", path)?;
            let hin = load_hin(schema.clone(), path)?;
            if hin.node_counts().iter().any(|&n| n > 1000) {
                log::warn!("exhaustive matching on a graph this large may be slow");
            }
            Some(hin)
        }
        None => None,
    };
    let mut texts: Vec<String> = a.gene.clone();
    if let Some(path) = &a.genes {
        manifest.input("genes", path)?;
        texts.extend(
            read(path)?
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_string())
                .filter(|l| !l.is_empty()),
        );
    }
    if texts.is_empty() {
        return Err(Fail::User("no genes given".into()));
    }
    if let Some(out) = &a.out {
        create_dir(out)?;
    }

    let mut report = Vec::with_capacity(texts.len());
    let mut any_invalid = false;
    for text in &texts {
        let gene = match parse_unchecked(text, &schema) {
            Ok(g) => g,
            Err(e) => {
                any_invalid = true;
                report.push(json!({ "input": text, "error": e.to_string() }));
                continue;
            }
        };
        let violations: Vec<&str> = gene.validate(&schema).iter().map(|v| v.name()).collect();
        any_invalid |= !violations.is_empty();
        let mut entry = json!({
            "input": text,
            "gene": gene.to_string_with(&schema),
            "canonical_key": gene.canonical_key(&schema),
            "nodes": gene.len(),
            "edges": gene.edges().len(),
            "path_signature": gene.path_signature(&schema),
            "valid": violations.is_empty(),
            "violations": violations,
        });
        if let (Some(hin), true) = (&hin, violations.is_empty()) {
            let tables = brute_force_instances(&gene, hin);
            let src = tables.side(Side::Source);
            let sink = tables.side(Side::Sink);
            entry["instances"] = json!({
                "pairs": src.total_entries(),
                "sources_with_instances": src.lists().iter().filter(|l| !l.is_empty()).count(),
                "sinks_with_instances": sink.lists().iter().filter(|l| !l.is_empty()).count(),
            });
        }
        report.push(entry);
    }

    let mut human = String::new();
    for e in &report {
        let _ = match (e.get("canonical_key"), e.get("error")) {
            (Some(k), _) => writeln!(human, "{} -> {} valid={}", e["input"], k, e["valid"]),
            (_, Some(err)) => writeln!(human, "{} -> {}", e["input"], err),
            _ => Ok(()),
        };
    }
    eprint!("{human}");
    if let Some(out) = &a.out {
        write_file(&out.join("genes.json"), &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    manifest.config(&json!({ "genes": texts }));
    manifest.write(a.out.as_deref())?;
    print_json(&report);
    if any_invalid {
        return Err(Fail::User("one or more genes are invalid".into()));
    }
    Ok(())
}
