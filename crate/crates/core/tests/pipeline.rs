use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use hkg_core::corpus::{load_corpus, retrieve, Corpus, FixtureIndex, RetrievalConfig};
use hkg_core::extraction::{
    extract_mentions, mention_counts, run_pipeline, run_pipeline_with, HeuristicExtractor, Lexicon, TupleSet,
};
use hkg_core::hkg::{build_hkg, CentralConceptParams, Hkg};
use hkg_core::store;
use hkg_core::Execution;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load() -> (Corpus, Lexicon) {
    let corpus = load_corpus(fixtures().join("manifest.json")).unwrap();
    let lexicon = Lexicon::load(fixtures().join("gazetteer.json")).unwrap();
    (corpus, lexicon)
}

#[test]
fn fixture_corpus_shape() {
    let (corpus, _) = load();
    assert_eq!(corpus.partitions.len(), 3);
    assert!(corpus.partitions.iter().all(|p| p.documents.len() == 10));
    assert_eq!(corpus.documents.len(), 30);
    corpus.validate().unwrap();
    let ottawa = corpus.document("ottawa").unwrap();
    assert_eq!(ottawa.sentence(0), Some("Ottawa is the capital of Canada."));
}

#[test]
fn every_tuple_satisfies_its_invariants() {
    let (corpus, lexicon) = load();
    let extractor = HeuristicExtractor::new(lexicon);
    let tuples = run_pipeline_with(&corpus, &extractor, Execution::Parallel).unwrap();
    assert!(!tuples.is_empty());
    for t in &tuples {
        let doc = corpus.document(&t.anchor.doc_id).unwrap();
        t.check(doc).unwrap();
        extractor.check_tuple(t, doc).unwrap();
    }
}

#[test]
fn sentence_tuple_counts_are_pair_counts() {
    let (corpus, lexicon) = load();
    let tuples = run_pipeline(&corpus, &lexicon).unwrap();
    let mut per_sentence: HashMap<(String, usize), usize> = HashMap::new();
    for t in &tuples {
        *per_sentence.entry((t.anchor.doc_id.clone(), t.anchor.span.start)).or_default() += 1;
    }
    for doc in &corpus.documents {
        let mentions = extract_mentions(doc, &lexicon);
        for (i, span) in doc.sentence_spans.iter().enumerate() {
            let k = mentions
                .iter()
                .filter(|m| m.sentence_index == i)
                .map(|m| m.canonical_id.as_str())
                .collect::<BTreeSet<_>>()
                .len();
            let expected = if k >= 2 { k * (k - 1) / 2 } else { 0 };
            let got = per_sentence.get(&(doc.doc_id.clone(), span.start)).copied().unwrap_or(0);
            assert_eq!(got, expected, "{} sentence {i}", doc.doc_id);
        }
    }
}

#[test]
fn salience_is_the_sum_of_document_mention_counts() {
    let (corpus, lexicon) = load();
    let tuples = run_pipeline(&corpus, &lexicon).unwrap();
    for doc in corpus.documents.iter().take(5) {
        let counts = mention_counts(&extract_mentions(doc, &lexicon));
        for t in tuples.iter().filter(|t| t.anchor.doc_id == doc.doc_id) {
            assert_eq!(t.salience, (counts[&t.entity1] + counts[&t.entity2]) as f64);
        }
    }
}

#[test]
fn execution_modes_produce_identical_artifacts() {
    let (corpus, lexicon) = load();
    let extractor = HeuristicExtractor::new(lexicon);
    let p = CentralConceptParams::default();
    let seq = run_pipeline_with(&corpus, &extractor, Execution::Sequential).unwrap();
    let par = run_pipeline_with(&corpus, &extractor, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    let a = build_hkg(&corpus, &seq, &p, Execution::Sequential).unwrap();
    let b = build_hkg(&corpus, &par, &p, Execution::Parallel).unwrap();
    assert_eq!(store::content_hash(&a).unwrap(), store::content_hash(&b).unwrap());
}

#[test]
fn artifacts_round_trip_through_the_store() {
    let (corpus, lexicon) = load();
    let tuples = run_pipeline(&corpus, &lexicon).unwrap();
    let hkg = build_hkg(&corpus, &tuples, &CentralConceptParams::default(), Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let h1 = store::save(&hkg, dir.path().join("g.hkg.json")).unwrap();
    let back: Hkg = store::load(dir.path().join("g.hkg.json")).unwrap();
    assert_eq!(back, hkg);
    assert_eq!(store::save(&back, dir.path().join("again.json")).unwrap(), h1);
    store::save(&corpus, dir.path().join("corpus.json")).unwrap();
    assert_eq!(store::load::<Corpus>(dir.path().join("corpus.json")).unwrap(), corpus);
    store::save(&tuples, dir.path().join("t.json")).unwrap();
    assert_eq!(store::load::<TupleSet>(dir.path().join("t.json")).unwrap(), tuples);
}

#[test]
fn minimaps_respect_their_bounds() {
    let (corpus, lexicon) = load();
    let tuples = run_pipeline(&corpus, &lexicon).unwrap();
    let p = CentralConceptParams::default();
    let hkg = build_hkg(&corpus, &tuples, &p, Execution::Parallel).unwrap();
    for (doc, concepts) in &hkg.minimaps {
        assert!(concepts.len() <= p.max_count, "{doc}");
        assert!(concepts.iter().all(|c| c.degree >= p.min_degree));
        for c in concepts {
            assert!(hkg.mappings[doc][&c.entity].contains(&c.entity));
        }
    }
    let ottawa = &hkg.minimaps["ottawa"];
    assert_eq!(ottawa[0].entity, "ottawa");
}

#[test]
fn retrieval_keeps_the_history_partition() {
    let index = FixtureIndex::load(fixtures().join("index.json")).unwrap();
    let p = retrieve("Former Capital Cities of Canada", &RetrievalConfig::default(), &index).unwrap();
    assert_eq!(p.documents.len(), 10);
    let (corpus, _) = load();
    let expected: BTreeSet<&String> = corpus.partitions[0].documents.iter().collect();
    assert_eq!(p.documents.iter().collect::<BTreeSet<_>>(), expected);
    let open = RetrievalConfig { n: 10, domain_filter: String::new() };
    let p = retrieve("Former Capital Cities of Canada", &open, &index).unwrap();
    assert!(p.documents.contains(&"travel_blog_capitals".to_string()));
}
