use std::io::Write;
use std::path::{Path, PathBuf};

use adaptir_core::corpus::{ingest_corpus, ingest_queries, write_jsonl, Document, Query};
use adaptir_core::cutoff::{
    fit_ordinal, load_model, model_to_string_with, OptimizerConfig, DEFAULT_THRESHOLD_TAU,
};
use adaptir_core::eval::{Judge, Judged};
use adaptir_core::io::{write_atomic, write_atomic_bytes};
use adaptir_core::retrieval::{MAX_HASH_BITS, MIN_HASH_BITS};
use adaptir_core::sweep::{
    evaluate_corpus, sweep_corpus_growth, GrowthSetup, RetrievalParams, SweepConfig, SweepReport,
};
use adaptir_core::synth::{generate, SynthConfig};
use adaptir_core::{CutoffModel, ReaderModel, SparseIndex, TrainingSet};
use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    CutoffSpec, EvalArgs, IndexArgs, RetrievalArgs, RetrieveArgs, SweepArgs, SynthArgs, SystemArgs,
    TrainArgs,
};

pub fn index(a: IndexArgs) -> Result<()> {
    check_bits(a.bits)?;
    let corpus = ingest_corpus(&a.corpus, a.mode)?;
    let index = SparseIndex::build(&corpus, a.mode, a.bits)?;
    index.save(&a.out)?;
    println!(
        "indexed {} units (mode={}, bits={}) -> {}",
        index.len(),
        a.mode,
        a.bits,
        a.out.display()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    check_retrieval(&a.retrieval)?;
    if !(a.lambda.is_finite() && a.lambda >= 0.0) {
        bail!("--lambda must be >= 0, got {}", a.lambda);
    }
    if a.offset_b > a.retrieval.tau {
        bail!("--offset-b must be <= --tau ({})", a.retrieval.tau);
    }
    if a.iterations == 0 {
        bail!("--iterations must be >= 1");
    }
    let queries = ingest_queries(&a.queries)?;
    let (train, excluded) = match &a.grid {
        Some(grid) => {
            if a.index.is_some() {
                bail!("--index cannot be combined with --grid");
            }
            let corpus = ingest_corpus(&a.corpus, a.retrieval.mode)?;
            let setup = GrowthSetup::partition(queries, corpus)?;
            setup.training_set(grid, &retrieval_params(&a.retrieval), a.seed)?
        }
        None => {
            let (index, units) = open_index(&a.corpus, a.index.as_deref(), &a.retrieval)?;
            let judged = judge_all(&index, &units, &queries, a.retrieval.tau)?;
            TrainingSet::from_retrievals(
                a.retrieval.tau,
                judged.iter().map(|j| (&j.candidates, &j.labels)),
            )?
        }
    };
    if train.is_empty() {
        bail!(
            "no usable training query: none of {excluded} queries has a relevant candidate in the top {}",
            a.retrieval.tau
        );
    }
    let optimizer = OptimizerConfig {
        iterations: a.iterations,
        ..OptimizerConfig::default()
    };
    let model = fit_ordinal(&train, a.lambda, a.offset_b, &optimizer)?;
    let config = json!({
        "command": "train",
        "version": env!("CARGO_PKG_VERSION"),
        "args": &a,
        "initial_step": optimizer.initial_step,
    });
    write_atomic_bytes(
        &a.out,
        model_to_string_with(&model, Some(&config))?.as_bytes(),
    )?;
    if let CutoffModel::Ordinal(m) = &model {
        println!("N_used={} N_excluded={excluded}", train.len());
        println!(
            "surrogate_loss={} true_loss={}",
            m.surrogate_loss, m.true_loss
        );
    }
    println!("wrote {} -> {}", model.label(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct RetrievalRecord<'a> {
    query_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff: Option<usize>,
    candidates: &'a [adaptir_core::retrieval::Candidate],
}

pub fn retrieve(a: RetrieveArgs) -> Result<()> {
    check_retrieval(&a.retrieval)?;
    let model = match &a.cutoff {
        Some(spec) => Some(resolve_cutoff(spec, a.theta, a.offset_b, a.retrieval.tau)?),
        None => None,
    };
    let queries = match (&a.queries, &a.question) {
        (Some(path), _) => ingest_queries(path)?,
        (None, Some(q)) => vec![Query {
            id: "query".into(),
            question: q.clone(),
            answers: Vec::new(),
        }],
        (None, None) => bail!("one of --queries or --question is required"),
    };
    let index = match (&a.index, &a.corpus) {
        (Some(path), _) => SparseIndex::load(path)?,
        (None, Some(corpus)) => {
            let units = ingest_corpus(corpus, a.retrieval.mode)?;
            SparseIndex::build(&units, a.retrieval.mode, a.retrieval.bits)?
        }
        (None, None) => bail!("one of --index or --corpus is required"),
    };
    let lists = index.retrieve_batch(&queries, a.retrieval.tau)?;
    let mut lines = vec![serde_json::to_string(
        &json!({ "config": header_value("retrieve", &a) }),
    )?];
    for list in &lists {
        let cutoff = match &model {
            Some(m) => Some(m.cutoff_for(list)?),
            None => None,
        };
        lines.push(serde_json::to_string(&RetrievalRecord {
            query_id: &list.query_id,
            cutoff,
            candidates: &list.entries,
        })?);
    }
    let mut text = lines.join("\n");
    text.push('\n');
    match &a.out {
        Some(path) => write_atomic_bytes(path, text.as_bytes())?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    check_retrieval(&a.retrieval)?;
    let reader = ReaderModel::new(a.reader.delta, a.reader.seed)?;
    check_replicates(a.reader.replicates)?;
    let systems = resolve_systems(&a.systems, a.retrieval.tau)?;
    let queries = ingest_queries(&a.queries)?;
    let (index, units) = open_index(&a.corpus, a.index.as_deref(), &a.retrieval)?;
    let judged = judge_all(&index, &units, &queries, a.retrieval.tau)?;
    let config = SweepConfig {
        grid: vec![index.len()],
        retrieval: RetrievalParams {
            mode: index.mode(),
            hash_bits: index.hash_bits(),
            tau: a.retrieval.tau,
        },
        reader,
        replicates: a.reader.replicates,
        seed: a.reader.seed,
    };
    let report = evaluate_corpus(&judged, index.len(), &systems, &config)?;
    write_report(&report, &a.out, header_value("eval", &a))?;
    for (s, size) in report.systems.iter().zip(&report.sizes[0].systems) {
        println!(
            "{s}: exact_match={} mean_cutoff={}",
            size.exact_match, size.mean_cutoff
        );
    }
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    check_retrieval(&a.retrieval)?;
    let reader = ReaderModel::new(a.reader.delta, a.reader.seed)?;
    check_replicates(a.reader.replicates)?;
    let systems = resolve_systems(&a.systems, a.retrieval.tau)?;
    let queries = ingest_queries(&a.queries)?;
    let corpus = ingest_corpus(&a.corpus, a.retrieval.mode)?;
    let setup = GrowthSetup::partition(queries, corpus)?;
    setup.check_grid(&a.grid)?;
    let config = SweepConfig {
        grid: a.grid.clone(),
        retrieval: retrieval_params(&a.retrieval),
        reader,
        replicates: a.reader.replicates,
        seed: a.reader.seed,
    };
    let report = sweep_corpus_growth(&setup, &systems, &config)?;
    write_report(&report, &a.out, header_value("sweep", &a))?;
    for (s, r) in report.systems.iter().zip(&report.total_regret) {
        match r {
            Some(r) => println!("{s}: total_regret={r}"),
            None => println!("{s}: total_regret=n/a"),
        }
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        queries: a.queries,
        train_queries: a.train_queries,
        distractors: a.distractors,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let bench = generate(&config)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let corpus = bench.corpus();
    write_records(&a.out.join("corpus.jsonl"), &corpus)?;
    write_records(&a.out.join("queries.jsonl"), &bench.queries)?;
    write_records(&a.out.join("train_queries.jsonl"), &bench.train_queries)?;
    println!(
        "wrote {} documents, {} queries, {} training queries -> {}",
        corpus.len(),
        bench.queries.len(),
        bench.train_queries.len(),
        a.out.display()
    );
    Ok(())
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_atomic(path, |f| {
        let mut out = std::io::BufWriter::new(f);
        write_jsonl(&mut out, records)?;
        out.flush()
    })?;
    Ok(())
}

fn header_value(command: &str, args: &impl Serialize) -> serde_json::Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
    })
}

fn write_report(report: &SweepReport, out: &Path, config: serde_json::Value) -> Result<()> {
    let header = vec![format!("adaptir {}", serde_json::to_string(&config)?)];
    write_atomic_bytes(out, report.csv_string(&header).as_bytes())?;
    let summary_path = summary_path(out);
    let mut summary = report.summary();
    summary["run"] = config;
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_atomic_bytes(&summary_path, text.as_bytes())?;
    println!("wrote {} and {}", out.display(), summary_path.display());
    Ok(())
}

/// `results.csv` -> `results.summary.json`.
fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn check_bits(bits: u32) -> Result<()> {
    if !(MIN_HASH_BITS..=MAX_HASH_BITS).contains(&bits) {
        bail!("--bits must be in [{MIN_HASH_BITS}, {MAX_HASH_BITS}], got {bits}");
    }
    Ok(())
}

fn check_retrieval(r: &RetrievalArgs) -> Result<()> {
    check_bits(r.bits)?;
    if r.tau == 0 {
        bail!("--tau must be >= 1");
    }
    Ok(())
}

fn check_replicates(n: usize) -> Result<()> {
    if n == 0 {
        bail!("--replicates must be >= 1");
    }
    Ok(())
}

fn retrieval_params(r: &RetrievalArgs) -> RetrievalParams {
    RetrievalParams {
        mode: r.mode,
        hash_bits: r.bits,
        tau: r.tau,
    }
}

/// Load `index` when given (its mode and bits win), otherwise build one.
/// Returns the index and the retrieval units it was built over.
fn open_index(
    corpus: &Path,
    index: Option<&Path>,
    r: &RetrievalArgs,
) -> Result<(SparseIndex, Vec<Document>)> {
    match index {
        Some(path) => {
            let index = SparseIndex::load(path)?;
            let units = ingest_corpus(corpus, index.mode())?;
            if units.len() != index.len() {
                bail!(
                    "{} holds {} units but {} yields {}",
                    path.display(),
                    index.len(),
                    corpus.display(),
                    units.len()
                );
            }
            Ok((index, units))
        }
        None => {
            let units = ingest_corpus(corpus, r.mode)?;
            let index = SparseIndex::build(&units, r.mode, r.bits)?;
            Ok((index, units))
        }
    }
}

fn judge_all(
    index: &SparseIndex,
    units: &[Document],
    queries: &[Query],
    tau: usize,
) -> Result<Vec<Judged>> {
    let lists = index.retrieve_batch(queries, tau)?;
    let judge = Judge::new(units);
    Ok(queries
        .iter()
        .zip(lists)
        .map(|(q, list)| judge.judge(q, list))
        .collect::<adaptir_core::Result<_>>()?)
}

fn resolve_cutoff(
    spec: &CutoffSpec,
    theta: f64,
    offset_b: Option<usize>,
    tau: usize,
) -> Result<CutoffModel> {
    let model = match spec {
        CutoffSpec::Fixed(n) => CutoffModel::fixed(*n)?,
        CutoffSpec::Threshold(t) => {
            CutoffModel::threshold(t.unwrap_or(theta), DEFAULT_THRESHOLD_TAU.min(tau))?
        }
        CutoffSpec::Ordinal(path) => {
            let model = load_model(path)?;
            match offset_b {
                Some(b) => model.with_offset(b),
                None => model,
            }
        }
    };
    Ok(model)
}

/// Systems from `--cutoff`, or top-{1,3,5,10} plus the threshold rule.
fn resolve_systems(s: &SystemArgs, tau: usize) -> Result<Vec<CutoffModel>> {
    let specs = if s.cutoffs.is_empty() {
        vec![
            CutoffSpec::Fixed(1),
            CutoffSpec::Fixed(3),
            CutoffSpec::Fixed(5),
            CutoffSpec::Fixed(10),
            CutoffSpec::Threshold(None),
        ]
    } else {
        s.cutoffs.clone()
    };
    let systems = specs
        .iter()
        .map(|spec| resolve_cutoff(spec, s.theta, s.offset_b, tau))
        .collect::<Result<Vec<_>>>()?;
    let mut labels: Vec<String> = systems.iter().map(CutoffModel::label).collect();
    labels.sort();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        bail!("system `{}` listed twice", w[0]);
    }
    Ok(systems)
}
