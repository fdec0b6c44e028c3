use adaptir_core::corpus::{Document, Query};
use adaptir_core::eval::{avg_relevant_at_n, evaluate_system, recall_at_n};
use adaptir_core::sweep::{sweep_corpus_growth, GrowthSetup, RetrievalParams, SweepConfig};
use adaptir_core::synth::{generate, SynthConfig};
use adaptir_core::{CutoffModel, ReaderModel, UnitMode};

fn doc(id: &str, text: &str) -> Document {
    Document {
        id: id.into(),
        title: String::new(),
        text: text.into(),
    }
}

/// Ten queries whose seeded document is the only one mentioning its key word.
fn discriminative() -> GrowthSetup {
    let mut queries = Vec::new();
    let mut corpus = Vec::new();
    for i in 0..10 {
        queries.push(Query {
            id: format!("q{i}"),
            question: format!("where is key{i}"),
            answers: vec![format!("place{i}")],
        });
        corpus.push(doc(&format!("s{i}"), &format!("key{i} lives in place{i}")));
    }
    for j in 0..40 {
        corpus.push(doc(
            &format!("n{j:02}"),
            &format!("filler words number w{j} and w{}", j + 1),
        ));
    }
    GrowthSetup::partition(queries, corpus).unwrap()
}

fn config(grid: Vec<usize>, tau: usize, delta: f64) -> SweepConfig {
    SweepConfig {
        grid,
        retrieval: RetrievalParams {
            mode: UnitMode::Document,
            hash_bits: 16,
            tau,
        },
        reader: ReaderModel::new(delta, 42).unwrap(),
        replicates: 8,
        seed: 42,
    }
}

#[test]
fn discriminative_queries_are_answered_by_top_one() {
    let setup = discriminative();
    let systems = [
        CutoffModel::fixed(1).unwrap(),
        CutoffModel::fixed(5).unwrap(),
    ];
    let report = sweep_corpus_growth(&setup, &systems, &config(vec![15, 30, 50], 5, 0.0)).unwrap();
    for size in &report.sizes {
        assert_eq!(size.systems[0].exact_match, 1.0);
        assert_eq!(size.systems[0].coverage, 1.0);
        assert_eq!(size.recall[0], 1.0);
    }
    // Top-1 is always best here, so it carries no regret.
    assert_eq!(report.regret_of("top-1"), Some(0.0));
    assert!(report.regret_of("top-5").unwrap() > 0.0);
}

#[test]
fn corpora_nest_along_the_grid() {
    let bench = generate(&SynthConfig {
        queries: 10,
        train_queries: 0,
        distractors: 300,
        ..SynthConfig::default()
    })
    .unwrap();
    let setup = GrowthSetup::partition(bench.queries.clone(), bench.corpus()).unwrap();
    let order = setup.distractor_order(7);
    let grid = [15, 60, 240, 310];
    let corpora: Vec<Vec<String>> = grid
        .iter()
        .map(|&m| {
            setup
                .corpus_at(&order, m)
                .into_iter()
                .map(|d| d.id)
                .collect()
        })
        .collect();
    for (ids, &m) in corpora.iter().zip(&grid) {
        assert_eq!(ids.len(), m);
    }
    for w in corpora.windows(2) {
        assert_eq!(&w[1][..w[0].len()], &w[0][..]);
    }
    assert_ne!(setup.distractor_order(7), setup.distractor_order(8));
}

#[test]
fn recall_shrinks_as_the_corpus_grows() {
    let bench = generate(&SynthConfig {
        queries: 40,
        train_queries: 0,
        distractors: 4000,
        answer_rate: 0.0,
        ..SynthConfig::default()
    })
    .unwrap();
    let setup = GrowthSetup::partition(bench.queries.clone(), bench.corpus()).unwrap();
    let report = sweep_corpus_growth(
        &setup,
        &[CutoffModel::fixed(1).unwrap()],
        &config(vec![60, 240, 960, 3840], 5, 0.5),
    )
    .unwrap();
    for size in &report.sizes {
        assert!(size.recall.windows(2).all(|w| w[0] <= w[1]));
        assert!(size.avg_relevant.windows(2).all(|w| w[0] <= w[1]));
    }
    let at_tau: Vec<f64> = report.sizes.iter().map(|s| s.recall[4]).collect();
    assert!(at_tau.windows(2).all(|w| w[0] >= w[1]), "{at_tau:?}");
    // With a single answer-bearing document, more noise must eventually hurt.
    assert!(at_tau[0] > at_tau[3], "{at_tau:?}");
}

#[test]
fn symmetric_reader_scores_the_relevant_share() {
    let bench = generate(&SynthConfig {
        queries: 30,
        train_queries: 0,
        distractors: 600,
        answer_rate: 0.5,
        ..SynthConfig::default()
    })
    .unwrap();
    let setup = GrowthSetup::partition(bench.queries.clone(), bench.corpus()).unwrap();
    let order = setup.distractor_order(1);
    let params = RetrievalParams {
        tau: 10,
        ..RetrievalParams::default()
    };
    let judged = setup.judge_at(&order, 600, &params).unwrap();
    let model = CutoffModel::fixed(10).unwrap();
    let reader = ReaderModel::new(0.0, 3).unwrap();
    let em = evaluate_system(&judged, &model, &reader, 4000)
        .unwrap()
        .exact_match;
    let expected = avg_relevant_at_n(&judged, 10).unwrap() / 10.0;
    assert!((em - expected).abs() < 0.01, "em {em} expected {expected}");
    assert!(recall_at_n(&judged, 10).unwrap() > 0.0);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let bench = generate(&SynthConfig {
        queries: 20,
        train_queries: 0,
        distractors: 1000,
        ..SynthConfig::default()
    })
    .unwrap();
    let setup = GrowthSetup::partition(bench.queries.clone(), bench.corpus()).unwrap();
    let systems = [
        CutoffModel::fixed(1).unwrap(),
        CutoffModel::fixed(5).unwrap(),
        CutoffModel::threshold(0.75, 15).unwrap(),
    ];
    let cfg = config(vec![30, 120, 480], 20, 0.5);
    let header = vec!["test".to_string()];
    let default = sweep_corpus_growth(&setup, &systems, &cfg)
        .unwrap()
        .csv_string(&header);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let single = pool.install(|| {
        sweep_corpus_growth(&setup, &systems, &cfg)
            .unwrap()
            .csv_string(&header)
    });
    assert_eq!(default, single);
}
