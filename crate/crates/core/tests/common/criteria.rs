//! Checks shared by the per-area integration tests and the `acceptance`
//! runner. Each function panics on the first violated expectation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use m2t::corpus::{bundled_viggo_dir, read_viggo_dir, CorpusItem, KgRecord, Split, ViggoRecord};
use m2t::experiment::{
    read_novel_mrs, run_matrix, run_novel, run_viggo, ExperimentConfig, Metric, RunEnv,
};
use m2t::metrics::{paired_t, pearson, semantic_accuracy, Lexicon};
use m2t::mr::{
    parse_kg_paren, parse_kg_s2s, parse_viggo_mr, parse_viggo_qa, serialize_kg_paren,
    serialize_kg_s2s, serialize_viggo_mr, serialize_viggo_qa, Slot,
};
use m2t::prompt::{
    build_qa, build_s2s, sample_exemplars, Exemplar, PromptFormat, QaMarkers, SamplingStrategy,
};
use m2t::realizer::{
    generate_corpus, CorpusSplitConfig, GeneratedCorpus, SyntheticSource, TemplateBank,
};
use m2t::{KgMr, MeaningRepresentation, MrSchema, Topic, Triple, ViggoMr};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn within(start: Instant, limit: Duration, what: &str) {
    let took = start.elapsed();
    assert!(took < limit, "{what} took {took:?}, limit {limit:?}");
}

// ---- prompt goldens ----

pub fn s2s_golden_exemplars() -> [Exemplar; 2] {
    [
        Exemplar::new(
            "Starship = song = We Built This City | We Built This City = genre = pop rock",
            "Starship plays pop rock like the song We Built This City. Do you like that genre?",
        ),
        Exemplar::new(
            "Scream = cast member = Liev Schreiber",
            "Liev Schreiber was really good in Scream, don't you agree?.",
        ),
    ]
}

pub const BABBO: &str =
    "name=Babbo | eatType = bistro | food = French | customerRating = outstanding";
pub const TONY_HAWK: &str =
    "confirm(name[Tony Hawk's Pro Skater 3], release_year[2001], genres[sport])";
pub const TONY_HAWK_TEXT: &str =
    "Gotcha! So you're referring to the Tony Hawk's Pro Skater 3 sports game, which was released in 2001?";

pub fn prompt_goldens() {
    let start = Instant::now();
    let s2s_golden = std::fs::read_to_string(fixture("s2s_prompt.txt")).unwrap();
    let bundle = build_s2s(&s2s_golden_exemplars(), BABBO).unwrap();
    assert_eq!(bundle.rendered, s2s_golden);
    assert_eq!(bundle.stop_sequences, ["\n\n"]);

    let qa_golden = std::fs::read_to_string(fixture("qa_exemplar.txt")).unwrap();
    let mr = parse_viggo_mr(TONY_HAWK).unwrap();
    let line = serialize_viggo_qa(&mr).unwrap();
    let markers = QaMarkers::default();
    let bundle = build_qa(
        &[Exemplar::new(line.clone(), TONY_HAWK_TEXT)],
        &line,
        &markers,
    )
    .unwrap();
    let (exemplar, stub) = bundle.rendered.split_at(qa_golden.len());
    assert_eq!(exemplar, qa_golden);
    assert_eq!(stub, format!("[PROMPT]: {line}\n[SENTENCE]:"));
    within(start, Duration::from_secs(1), "prompt goldens");
}

// ---- MR round trip ----

fn word() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9']{0,7}"
}

fn label() -> impl Strategy<Value = String> {
    proptest::collection::vec(word(), 1..4).prop_map(|w| w.join(" "))
}

pub fn viggo_mr_strategy(schema: &MrSchema) -> impl Strategy<Value = ViggoMr> {
    let das: Vec<String> = schema.dialogue_acts().map(str::to_string).collect();
    let attrs: Vec<String> = schema.attributes().map(|a| a.name.clone()).collect();
    let n = attrs.len();
    (
        proptest::sample::select(das),
        proptest::sample::subsequence(attrs, 0..=n.min(6)),
    )
        .prop_flat_map(|(da, attrs)| {
            let slots: Vec<_> = attrs
                .into_iter()
                .map(|a| {
                    proptest::collection::vec(label(), 0..3)
                        .prop_map(move |vs| Slot::new(&a, vs).unwrap())
                })
                .collect();
            (Just(da), slots)
        })
        .prop_map(|(da, slots)| ViggoMr::new(&da, slots).unwrap())
}

pub fn kg_mr_strategy(schema: &MrSchema) -> impl Strategy<Value = KgMr> {
    let topics = [Topic::Movies, Topic::Music, Topic::Sports, Topic::Tv];
    let per_topic: Vec<(Topic, Vec<String>)> = topics
        .iter()
        .map(|&t| (t, schema.relations_for(t).map(|r| r.name.clone()).collect()))
        .collect();
    proptest::sample::select(per_topic).prop_flat_map(|(topic, relations)| {
        proptest::collection::vec(
            (label(), proptest::sample::select(relations), label()),
            1..5,
        )
        .prop_map(move |ts| {
            let triples = ts
                .iter()
                .map(|(s, r, o)| Triple::new(s, r, o).unwrap())
                .collect();
            KgMr::new(triples, topic).unwrap()
        })
    })
}

pub fn check_viggo_roundtrip(mr: &ViggoMr) {
    let structured = serialize_viggo_mr(mr);
    let back = parse_viggo_mr(&structured).unwrap();
    assert_eq!(&back, mr, "{structured}");
    assert_eq!(parse_viggo_mr(&serialize_viggo_mr(&back)).unwrap(), back);
    let qa = serialize_viggo_qa(mr).unwrap();
    assert_eq!(&parse_viggo_qa(&qa).unwrap(), mr, "{qa}");
    assert_eq!(
        MeaningRepresentation::parse_any(&structured).unwrap(),
        MeaningRepresentation::Viggo(mr.clone())
    );
}

pub fn check_kg_roundtrip(mr: &KgMr) {
    let s2s = serialize_kg_s2s(mr).unwrap();
    let back = parse_kg_s2s(&s2s).unwrap().with_topic(mr.topic());
    assert_eq!(&back, mr, "{s2s}");
    assert_eq!(serialize_kg_s2s(&back).unwrap(), s2s);
    let paren = serialize_kg_paren(mr).unwrap();
    assert_eq!(
        &parse_kg_paren(&paren).unwrap().with_topic(mr.topic()),
        mr,
        "{paren}"
    );
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub fn viggo_records() -> Vec<ViggoRecord> {
    read_viggo_dir(&bundled_viggo_dir(), Some(&MrSchema::builtin())).unwrap()
}

pub fn mr_roundtrip() {
    let start = Instant::now();
    let records = viggo_records();
    let test: Vec<&ViggoRecord> = records.iter().filter(|r| r.split == Split::Test).collect();
    assert!(!test.is_empty());
    for r in &test {
        check_viggo_roundtrip(&r.mr);
    }

    let schema = MrSchema::builtin();
    runner(1000)
        .run(&viggo_mr_strategy(&schema), |mr| {
            schema.validate_viggo(&mr).unwrap();
            check_viggo_roundtrip(&mr);
            Ok(())
        })
        .unwrap();
    runner(1000)
        .run(&kg_mr_strategy(&schema), |mr| {
            schema.validate_kg(&mr).unwrap();
            check_kg_roundtrip(&mr);
            Ok(())
        })
        .unwrap();
    within(start, Duration::from_secs(10), "MR round trip");
}

// ---- slot aligner ----

/// Labeled examples: (MR, output, realized, total).
pub fn labeled_outputs() -> Vec<(&'static str, &'static str, usize, usize)> {
    vec![
        (
            "(Peter Capaldi, award, BAFTA Award for Best Short Film), \
             (BAFTA Award for Best Short Film, show, 47th British Academy Film Awards), \
             (BAFTA Award for Best Short Film, work, Franz Kafka's It's a Wonderful Life)",
            "I think it's really great when a talented actor wins an award. do you think Peter Capaldi deserved to win \
             a BAFTA Award for Best Short Film in 1980, for Franz Kafka's It's a Wonderful Life?",
            2,
            3,
        ),
        (
            "(Kellie Pickler, song, Red High Heels), (Red High Heels, genre, country music)",
            "Kellie Pickler is a country singer, and she's also a rapper. Do you know her songs?",
            1,
            2,
        ),
        // Hand-labeled 3/3 although the MR has two triples; the ratio is what matches.
        (
            "(Saturday Night Live, award, Primetime Emmy Award for Outstanding Variety Sketch Series), \
             (Saturday Night Live, date, 2019)",
            "Saturday Night Live won a Primetime Emmy Award for Outstanding Variety Sketch Series in 2019. \
             How does the fact that it got this award affect your opinion of the show?",
            2,
            2,
        ),
        (
            "(Len Ford, member of sports team, Los Angeles Dons), (Len Ford, position played on team, end)",
            "Did you know that Len Ford has played as a part of famous teams, such as the Los Angeles Dons, \
             and played positions such as end.",
            2,
            2,
        ),
    ]
}

const SYLLABLES: [&str; 12] = [
    "ka", "lo", "mi", "ren", "tu", "sa", "vel", "no", "dri", "pa", "zo", "quin",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=3);
    let mut w: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
    if rng.gen_bool(0.3) {
        w[..1].make_ascii_uppercase();
    }
    w
}

fn pseudo_phrase(rng: &mut ChaCha8Rng, max_words: usize) -> String {
    (0..rng.gen_range(1..=max_words))
        .map(|_| pseudo_word(rng))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A random MR and a text that mentions some objects whole, some partially
/// and some not at all, among filler words and punctuation.
pub fn synthetic_pair(rng: &mut ChaCha8Rng) -> (KgMr, String) {
    let relations = [
        "cast member",
        "genre",
        "award",
        "song",
        "spouse",
        "director",
    ];
    let triples: Vec<Triple> = (0..rng.gen_range(1..=4))
        .map(|_| {
            Triple::new(
                &pseudo_phrase(rng, 2),
                relations.choose(rng).unwrap(),
                &pseudo_phrase(rng, 3),
            )
            .unwrap()
        })
        .collect();
    let mut pieces: Vec<String> = (0..rng.gen_range(0..6)).map(|_| pseudo_word(rng)).collect();
    for t in &triples {
        match rng.gen_range(0..4) {
            0 => pieces.push(t.object().to_string()),
            1 => pieces.push(t.object().to_uppercase()),
            2 => pieces.push(t.object().split(' ').next().unwrap().to_string()),
            _ => {}
        }
        if rng.gen_bool(0.5) {
            pieces.push(t.subject().to_string());
        }
    }
    pieces.shuffle(rng);
    let seps = [" ", ", ", ". ", "! ", " (", ") ", "? "];
    let mut text = String::new();
    for p in pieces {
        text.push_str(&p);
        text.push_str(seps.choose(rng).unwrap());
    }
    (KgMr::new(triples, Topic::Movies).unwrap(), text)
}

/// Independent oracle: lower-case, blank out everything but ASCII letters and
/// digits, and look for the object as a space-delimited substring.
pub fn brute_force_realized(mr: &KgMr, text: &str) -> usize {
    let clean = |s: &str| -> String {
        let mapped: String = s
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_lowercase()
                } else {
                    ' '
                }
            })
            .collect();
        format!(
            " {} ",
            mapped.split_whitespace().collect::<Vec<_>>().join(" ")
        )
    };
    let hay = clean(text);
    mr.triples()
        .iter()
        .filter(|t| hay.contains(&clean(t.object())))
        .count()
}

pub fn aligner_oracle() {
    let start = Instant::now();
    let lexicon = Lexicon::builtin();
    for (mr, text, realized, total) in labeled_outputs() {
        let mr = MeaningRepresentation::parse_any(mr).unwrap();
        let r = semantic_accuracy(&mr, text, &lexicon);
        assert_eq!((r.realized, r.total), (realized, total), "{text}");
        assert_eq!(r.ratio, realized as f64 / total as f64);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let empty = Lexicon::empty();
    let (mut hits, mut misses) = (0, 0);
    for _ in 0..500 {
        let (mr, text) = synthetic_pair(&mut rng);
        let expected = brute_force_realized(&mr, &text);
        let got = semantic_accuracy(&MeaningRepresentation::Kg(mr.clone()), &text, &empty);
        assert_eq!(got.realized, expected, "{mr:?} / {text:?}");
        assert_eq!(got.total, mr.triples().len());
        hits += expected;
        misses += got.total - expected;
    }
    assert!(
        hits > 200 && misses > 200,
        "unbalanced fixture: {hits} hits, {misses} misses"
    );
    within(start, Duration::from_secs(30), "aligner oracle");
}

// ---- template faithfulness ----

pub fn scaled_corpus_config() -> CorpusSplitConfig {
    CorpusSplitConfig {
        train_target: 1000,
        dev_target: 100,
        test_per_category: 10,
        seed: 17,
    }
}

pub fn scaled_corpus() -> GeneratedCorpus {
    generate_corpus(
        &SyntheticSource::new(200),
        &TemplateBank::builtin(),
        scaled_corpus_config(),
    )
    .unwrap()
}

pub fn template_faithfulness() {
    let start = Instant::now();
    let corpus = scaled_corpus();
    let lexicon = Lexicon::builtin();
    for rec in &corpus.records {
        let r = semantic_accuracy(&rec.mr(), &rec.reference, &lexicon);
        assert_eq!(r.ratio, 1.0, "{} -> {}", rec.mr_s2s, rec.reference);
    }
    let m = &corpus.manifest;
    assert!(m.warnings.is_empty(), "{:?}", m.warnings);
    assert_eq!(m.totals[&Split::Train], 1000);
    assert_eq!(m.totals[&Split::Dev], 100);
    for (category, splits) in &m.counts {
        assert_eq!(splits.get(&Split::Test), Some(&10), "{category}");
    }

    let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
    for rec in &corpus.records {
        assert!(
            seen.insert(rec.key(), rec.split).is_none(),
            "duplicate key {}",
            rec.key()
        );
    }

    let again = scaled_corpus();
    assert_eq!(again.corpus_text(), corpus.corpus_text());
    assert_eq!(again.manifest_json(), corpus.manifest_json());
    within(start, Duration::from_secs(120), "template faithfulness");
}

// ---- mock matrix ----

pub fn matrix_config() -> ExperimentConfig {
    ExperimentConfig {
        backends: vec!["mock".into()],
        test_per_topic: 20,
        seed: 5,
        ..Default::default()
    }
}

pub fn mock_matrix() {
    let start = Instant::now();
    let corpus: Vec<KgRecord> = scaled_corpus().records;
    let cfg = matrix_config();
    assert_eq!(cfg.topics.len(), 4);
    assert_eq!(cfg.formats, [PromptFormat::S2s, PromptFormat::Qa]);
    let report = run_matrix(&cfg, &corpus, &RunEnv::mock(&cfg.backends, None)).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let sa: Vec<_> = report
        .subtables
        .iter()
        .filter(|t| t.metric == Metric::SemanticAccuracy)
        .collect();
    assert_eq!(sa.len(), 2);
    for t in &report.subtables {
        assert_eq!(t.cells.len(), 4);
        for row in &t.cells {
            assert_eq!(row.len(), 4);
            assert!(row
                .iter()
                .all(|c| c.value.is_some() && c.n > 0 && c.failed == 0));
        }
    }
    for t in &sa {
        assert_eq!(
            t.diagonal(),
            vec![Some(1.0); 4],
            "{} {}",
            t.format,
            t.backend
        );
    }

    let first = report.render();
    let second = run_matrix(&cfg, &corpus, &RunEnv::mock(&cfg.backends, None))
        .unwrap()
        .render();
    assert_eq!(first.markdown, second.markdown);
    assert_eq!(first.json, second.json);
    assert_eq!(first.tsv, second.tsv);
    assert_eq!(first.manifest, second.manifest);
    within(start, Duration::from_secs(120), "mock matrix");
}

// ---- statistics ----

/// Student's sleep data, paired by subject.
pub const SLEEP_A: [f64; 10] = [0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0];
pub const SLEEP_B: [f64; 10] = [1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4];

/// Textbook paired t: mean difference over its standard error.
pub fn textbook_paired_t(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sum: f64 = d.iter().sum();
    let sum_sq: f64 = d.iter().map(|v| v * v).sum();
    let sd = ((sum_sq - sum * sum / n) / (n - 1.0)).sqrt();
    (sum / n) / (sd / n.sqrt())
}

pub fn stats_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for len in [3usize, 10, 57] {
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap().pearson_r.unwrap() - 1.0).abs() < 1e-9);
        assert!((pearson(&x, &neg).unwrap().pearson_r.unwrap() + 1.0).abs() < 1e-9);
    }

    let t = paired_t(&SLEEP_A, &SLEEP_B).unwrap();
    assert!((t.t_statistic.unwrap() - textbook_paired_t(&SLEEP_A, &SLEEP_B)).abs() < 1e-6);
    // Frozen reference values from scipy.stats.ttest_rel / pearsonr.
    assert!((t.t_statistic.unwrap() - -4.062127683382037).abs() < 1e-6);
    assert!((t.p_value.unwrap() - 0.00283289019738427).abs() < 1e-6);
    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let y = [2.1, 3.9, 6.2, 7.8, 10.1, 12.2, 13.8, 16.3];
    let t = paired_t(&x, &y).unwrap();
    assert!((t.t_statistic.unwrap() - textbook_paired_t(&x, &y)).abs() < 1e-6);
    assert!((t.t_statistic.unwrap() - -5.164883728609059).abs() < 1e-6);
    assert!((t.p_value.unwrap() - 0.0013024168403450288).abs() < 1e-6);
    let r = pearson(&SLEEP_A, &SLEEP_B).unwrap();
    assert!((r.pearson_r.unwrap() - 0.7951702058335777).abs() < 1e-9);
    assert!((r.p_value.unwrap() - 0.005964995796918477).abs() < 1e-6);

    runner(200)
        .run(
            &(
                proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
                0.01f64..100.0,
                -1000.0f64..1000.0,
                -1000.0f64..1000.0,
            ),
            |(pairs, a, b, c)| {
                let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = pairs.iter().map(|p| p.0 * 0.3 + p.1).collect();
                let Ok(base) = pearson(&xs, &ys) else {
                    return Ok(());
                };
                let moved: Vec<f64> = xs.iter().map(|v| a * v + b).collect();
                let shifted: Vec<f64> = ys.iter().map(|v| v + c).collect();
                let r = pearson(&moved, &shifted).unwrap();
                prop_assert!((base.pearson_r.unwrap() - r.pearson_r.unwrap()).abs() < 1e-9);
                Ok(())
            },
        )
        .unwrap();
}

// ---- Viggo per-DA sampling ----

pub fn viggo_per_da() {
    let records = viggo_records();
    let test_keys: BTreeSet<String> = records
        .iter()
        .filter(|r| r.split == Split::Test)
        .map(|r| r.key.clone())
        .collect();
    let all_das: BTreeSet<&str> = records.iter().map(|r| r.mr.dialogue_act()).collect();
    // The test records stay in the pool; exclusion alone must keep them out.
    let sample = sample_exemplars(
        &records,
        10,
        SamplingStrategy::PerDialogueAct,
        3,
        &test_keys,
    )
    .unwrap();
    assert!(sample.manifest.leaked(&test_keys).is_empty());
    assert_eq!(
        sample
            .manifest
            .per_group
            .keys()
            .map(String::as_str)
            .collect::<BTreeSet<_>>(),
        all_das
    );
    for (da, items) in sample.by_group() {
        assert_eq!(items.len(), 10, "{da}");
        assert!(items
            .iter()
            .all(|r| r.mr.dialogue_act() == da && r.split != Split::Test));
    }

    let cfg = ExperimentConfig {
        backends: vec!["mock".into()],
        viggo_ks: vec![10],
        formats: vec![PromptFormat::S2s],
        viggo_test_size: 40,
        ..Default::default()
    };
    let report = run_viggo(&cfg, &records, &RunEnv::mock(&cfg.backends, None)).unwrap();
    let m = &report.manifest;
    let run_tests: BTreeSet<&String> = m.test_keys["viggo"].iter().collect();
    assert!(m.exemplars["k=10"]
        .iter()
        .all(|k| !run_tests.contains(k) && !test_keys.contains(k)));
    assert_eq!(m.exemplar_counts["k=10"].len(), all_das.len());
    assert!(m.exemplar_counts["k=10"].values().all(|&n| n == 10));
}

// ---- novel MRs ----

pub fn novel_mrs_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/novel_mrs.tsv")
}

pub fn novel_protocol() {
    let mrs = read_novel_mrs(&novel_mrs_path()).unwrap();
    assert_eq!(mrs.len(), 4);
    for num_candidates in [1u32, 3] {
        let cfg = ExperimentConfig {
            backends: vec!["mock".into()],
            num_candidates,
            ..Default::default()
        };
        let run = run_novel(&cfg, &mrs, &RunEnv::mock(&cfg.backends, None)).unwrap();
        assert!(run.failures.is_empty(), "{:?}", run.failures);
        assert_eq!(run.package.len(), 4 * num_candidates as usize);
        let jsonl = run.package_jsonl();
        assert_eq!(jsonl.lines().count(), run.package.len());
        for line in jsonl.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let obj = v.as_object().unwrap();
            assert!(
                obj.keys()
                    .all(|k| !k.contains("surface") && !k.contains("score")),
                "{line}"
            );
        }
        let report = run.render(&[]).unwrap();
        assert!(!report.markdown.to_lowercase().contains("surface"));
        assert!(report.tsv.iter().all(|(_, t)| !t.contains("surface")));
    }
}
