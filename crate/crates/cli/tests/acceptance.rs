//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hkg_core::analytics::{self, View, HEATMAP_BINS};
use hkg_core::corpus::{load_corpus, Corpus, Document, Partition, Span};
use hkg_core::extraction::{
    extract_mentions, run_pipeline_with, Anchor, HeuristicExtractor, Lexicon, Tuple, TupleSet,
};
use hkg_core::hkg::{
    build_hkg, build_kg, document_subgraph, extract_central_concepts, CentralConceptParams,
    DegreeEntry, Hkg,
};
use hkg_core::quality::{self, DegradationSpec, MatchCriterion, QualityReport};
use hkg_core::store::{self, canonical, Artifact};
use hkg_core::Execution;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn within(start: Instant, limit: Duration, detail: String) -> Verdict {
    let took = start.elapsed();
    if took <= limit {
        Ok(format!("{detail}; {:.3} s", took.as_secs_f64()))
    } else {
        Err(format!("{detail}; took {:.3} s, limit {:.1} s", took.as_secs_f64(), limit.as_secs_f64()))
    }
}

fn random_degrees(rng: &mut ChaCha8Rng) -> Vec<DegreeEntry> {
    let n = rng.random_range(0..=1000);
    (0..n)
        .map(|i| DegreeEntry::new(format!("n{i:04}"), rng.random_range(0..=50)))
        .collect()
}

fn random_params(rng: &mut ChaCha8Rng, i: usize) -> CentralConceptParams {
    if i.is_multiple_of(4) {
        return CentralConceptParams::default();
    }
    CentralConceptParams {
        min_degree: rng.random_range(1..=10),
        max_count: rng.random_range(0..=60),
        relax_ties: false,
    }
}

/// Histogram sweep: the smallest threshold at or above `min_degree` whose
/// node count fits within `max_count`.
fn sweep_oracle(nodes: &[DegreeEntry], p: &CentralConceptParams) -> Vec<DegreeEntry> {
    let mut hist = [0usize; 52];
    for n in nodes {
        hist[n.degree] += 1;
    }
    let mut at_least = [0usize; 53];
    for d in (0..52).rev() {
        at_least[d] = at_least[d + 1] + hist[d];
    }
    let t = (p.min_degree..).find(|&t| t >= 52 || at_least[t] <= p.max_count).unwrap();
    let mut out: Vec<DegreeEntry> = nodes.iter().filter(|n| n.degree >= t).cloned().collect();
    out.sort_by(|a, b| b.degree.cmp(&a.degree).then_with(|| a.entity.cmp(&b.entity)));
    out
}

fn algorithm_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a1c);
    let instances: Vec<(Vec<DegreeEntry>, CentralConceptParams)> = (0..1000)
        .map(|i| (random_degrees(&mut rng), random_params(&mut rng, i)))
        .collect();
    let start = Instant::now();
    for (i, (nodes, p)) in instances.iter().enumerate() {
        let got = extract_central_concepts(nodes, p);
        if got != sweep_oracle(nodes, p) {
            return Err(format!("instance {i} differs from the oracle ({} nodes, {p:?})", nodes.len()));
        }
    }
    within(start, Duration::from_secs(5), "1000 random instances equal the oracle".into())
}

fn algorithm_bounds() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0d5);
    for i in 0..1000 {
        let nodes = random_degrees(&mut rng);
        let p = random_params(&mut rng, i);
        let got = extract_central_concepts(&nodes, &p);
        if got.len() > p.max_count {
            return Err(format!("instance {i}: {} concepts exceed max_count {}", got.len(), p.max_count));
        }
        if let Some(low) = got.iter().map(|n| n.degree).min() {
            let closed = nodes.iter().filter(|n| n.degree >= low).count();
            if low < p.min_degree || closed != got.len() {
                return Err(format!("instance {i}: result is not a degree threshold set"));
            }
        }
    }
    let ties: Vec<DegreeEntry> = (0..20).map(|i| DegreeEntry::new(format!("t{i}"), 5)).collect();
    let got = extract_central_concepts(&ties, &CentralConceptParams::default());
    if !got.is_empty() {
        return Err(format!("20 nodes of degree 5 gave {} concepts, expected none", got.len()));
    }
    Ok("1000 random instances bounded and threshold-complete; 20 x degree 5 gives none".into())
}

/// A gold set with many entities, so most entity pairs are free for
/// spurious injection.
fn synthetic_gold(n: usize, seed: u64) -> TupleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entities = (n as f64).sqrt() as usize * 3 + 10;
    let mut pairs = BTreeSet::new();
    let mut tuples = Vec::with_capacity(n);
    while tuples.len() < n {
        let a = rng.random_range(0..entities);
        let b = rng.random_range(0..entities);
        let relation = format!("relation {} of", rng.random_range(0..400));
        if a == b || !pairs.insert((a.min(b), a.max(b), relation.clone())) {
            continue;
        }
        let s = tuples.len();
        tuples.push(Tuple {
            entity1: format!("entity {a}"),
            entity2: format!("entity {b}"),
            relation,
            snippet: format!("sentence {s}"),
            anchor: Anchor { doc_id: format!("doc{}", s % 10), span: Span::new(s * 40, s * 40 + 30) },
            salience: rng.random_range(2..20) as f64,
        });
    }
    TupleSet::new(tuples)
}

fn degradation_fidelity() -> Verdict {
    let golds: Vec<(usize, TupleSet)> = [100, 500, 2957].iter().map(|&n| (n, synthetic_gold(n, n as u64))).collect();
    let exact = MatchCriterion::new(1.0).unwrap();
    let start = Instant::now();
    let mut cells = 0;
    for (n, gold) in &golds {
        let specs: Vec<DegradationSpec> = [0.5, 0.7, 0.9]
            .iter()
            .flat_map(|&p| [0.2, 0.31, 0.8].map(move |r| DegradationSpec { precision: p, recall: r, seed: 2024 }))
            .collect();
        let reports = quality::sweep(gold, &specs, &exact, Execution::Parallel).map_err(|e| e.to_string())?;
        for (spec, rep) in specs.iter().zip(&reports) {
            let r_ok = (rep.recall - spec.recall).abs() <= 1.0 / *n as f64;
            let p_ok = (rep.precision - spec.precision).abs() <= 1.0 / rep.system_size as f64;
            if !(r_ok && p_ok) {
                return Err(format!(
                    "|gold|={n} P={} R={}: measured P={:.6} R={:.6}",
                    spec.precision, spec.recall, rep.precision, rep.recall
                ));
            }
            cells += 1;
        }
    }
    let history = &golds[2].1;
    let spec = DegradationSpec { precision: 0.7, recall: 0.31, seed: 2024 };
    let auto = quality::degrade(history, &spec).map_err(|e| e.to_string())?;
    let rep = quality::score(&auto, history, &exact);
    if (rep.matched, rep.system_size - rep.matched, rep.system_size) != (917, 393, 1310) {
        return Err(format!("history point gave TP={} spurious={} size={}", rep.matched, rep.system_size - rep.matched, rep.system_size));
    }
    within(
        start,
        Duration::from_secs(10),
        format!(
            "{cells} cells within rounding; history point TP=917 spurious=393 P={:.3} R={:.3}",
            rep.precision, rep.recall
        ),
    )
}

fn random_tuples(rng: &mut ChaCha8Rng) -> TupleSet {
    let entities = rng.random_range(2..30);
    let docs = rng.random_range(1..6);
    let n = rng.random_range(0..120);
    (0..n)
        .map(|_| {
            let a = rng.random_range(0..entities);
            let b = (a + rng.random_range(1..entities)) % entities;
            let d = rng.random_range(0..docs);
            let s = rng.random_range(0..8);
            Tuple {
                entity1: format!("e{a}"),
                entity2: format!("e{b}"),
                relation: format!("rel {}", rng.random_range(0..5)),
                snippet: format!("s{s}"),
                anchor: Anchor { doc_id: format!("d{d}"), span: Span::new(s * 10, s * 10 + 9) },
                salience: rng.random_range(0..10) as f64,
            }
        })
        .collect()
}

fn graph_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a9f);
    for i in 0..500 {
        let tuples = random_tuples(&mut rng);
        let kg = build_kg(&tuples);
        if !kg.handshake_holds() {
            return Err(format!("set {i}: degree sum {} != 2|E| = {}", kg.nodes.values().map(|n| n.degree).sum::<usize>(), 2 * kg.edges.len()));
        }
        for doc in &kg.documents {
            let sub = document_subgraph(&kg, doc).map_err(|e| e.to_string())?;
            if !sub.handshake_holds() {
                return Err(format!("set {i}: subgraph of {doc} breaks the handshake property"));
            }
            let expected: BTreeSet<(String, String)> = tuples
                .iter()
                .filter(|t| &t.anchor.doc_id == doc)
                .map(|t| {
                    let (a, b) = t.pair();
                    (a.to_string(), b.to_string())
                })
                .collect();
            let got: BTreeSet<(String, String)> = sub.edges.iter().map(|e| e.endpoints.clone()).collect();
            if got != expected {
                return Err(format!("set {i}: subgraph of {doc} has the wrong edges"));
            }
            if sub.edges.iter().any(|e| e.relations.iter().any(|r| &r.anchor.doc_id != doc)) {
                return Err(format!("set {i}: subgraph of {doc} keeps a foreign relation"));
            }
        }
    }
    Ok("500 random tuple sets: handshake and subgraph anchors hold".into())
}

fn build_hash(out: &std::path::Path) -> Result<String, String> {
    let output = Command::new(env!("CARGO_BIN_EXE_hkg"))
        .arg("build")
        .arg("--manifest")
        .arg(fixtures().join("manifest.json"))
        .arg("--gazetteer")
        .arg(fixtures().join("gazetteer.json"))
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(String::from_utf8_lossy(&output.stderr).into_owned());
    }
    let text = String::from_utf8_lossy(&output.stdout).into_owned();
    text.lines()
        .find_map(|l| l.strip_prefix("content_hash "))
        .map(str::to_string)
        .ok_or_else(|| "no content_hash line".into())
}

/// Saves, loads and re-saves; the reloaded value must equal the original
/// in canonical form and be a fixed point of the round trip.
fn round_trip<T: Artifact + PartialEq + std::fmt::Debug>(value: &T, dir: &std::path::Path, name: &str) -> Result<(), String> {
    let path = dir.join(name);
    let h1 = store::save(value, &path).map_err(|e| e.to_string())?;
    let back: T = store::load(&path).map_err(|e| e.to_string())?;
    let h2 = store::save(&back, &path).map_err(|e| e.to_string())?;
    let again: T = store::load(&path).map_err(|e| e.to_string())?;
    let same_form = canonical::to_canonical(value).unwrap() == canonical::to_canonical(&back).unwrap();
    if h1 != h2 || !same_form || again != back {
        return Err(format!("{name} does not round-trip"));
    }
    Ok(())
}

fn random_corpus(rng: &mut ChaCha8Rng, docs: usize) -> Corpus {
    let words = ["Ottawa", "is", "the", "capital", "of", "Canada", "and", "Kingston", "was", "first"];
    let documents: Vec<Document> = (0..docs)
        .map(|i| {
            let sentences: Vec<String> = (0..rng.random_range(1..5))
                .map(|_| {
                    let w: Vec<&str> = (0..rng.random_range(3..9)).map(|_| words[rng.random_range(0..words.len())]).collect();
                    let mut s = w.join(" ");
                    s.push('.');
                    s
                })
                .collect();
            Document::new(format!("d{i}"), format!("Doc {i}"), "", sentences.join(" "), i as u32 + 1, "p")
        })
        .collect();
    Corpus {
        partitions: vec![Partition {
            partition_id: "p".into(),
            query: "q".into(),
            documents: documents.iter().map(|d| d.doc_id.clone()).collect(),
        }],
        documents,
    }
}

fn pipeline_determinism() -> Verdict {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let h1 = build_hash(a.path())?;
    let h2 = build_hash(b.path())?;
    if h1 != h2 {
        return Err(format!("two builds hashed {h1} and {h2}"));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a7e);
    for i in 0..50 {
        let tuples = random_tuples(&mut rng);
        let kg = build_kg(&tuples);
        let corpus = random_corpus(&mut rng, 6);
        let mut partitions = corpus.clone();
        let ids: Vec<String> = kg.documents.iter().cloned().collect();
        partitions.documents.extend(ids.iter().map(|d| Document::new(d.clone(), d.clone(), "", "x.", 1, "p")));
        partitions.partitions[0].documents.extend(ids);
        let params = CentralConceptParams { min_degree: rng.random_range(1..4), max_count: rng.random_range(0..10), relax_ties: rng.random_bool(0.5) };
        let hkg: Hkg = build_hkg(&partitions, &tuples, &params, Execution::Parallel).map_err(|e| e.to_string())?;
        let matched = rng.random_range(0..50);
        let report = QualityReport::from_counts(matched, matched + rng.random_range(0..50), matched + rng.random_range(1..50));
        round_trip(&tuples, dir.path(), &format!("t{i}.json"))?;
        round_trip(&hkg, dir.path(), &format!("h{i}.json"))?;
        round_trip(&corpus, dir.path(), &format!("c{i}.json"))?;
        round_trip(&report, dir.path(), &format!("r{i}.json"))?;
        let back: TupleSet = store::load(dir.path().join(format!("t{i}.json"))).map_err(|e| e.to_string())?;
        let back_hkg: Hkg = store::load(dir.path().join(format!("h{i}.json"))).map_err(|e| e.to_string())?;
        let back_corpus: Corpus = store::load(dir.path().join(format!("c{i}.json"))).map_err(|e| e.to_string())?;
        if back != tuples || back_hkg != hkg || back_corpus != corpus {
            return Err(format!("randomized artifact {i} is not structurally identical after reload"));
        }
    }
    Ok(format!("build hash {} stable; 50 x 4 randomized artifacts round-trip", &h1[..12]))
}

fn analytics_replay() -> Verdict {
    let start = Instant::now();
    let events = store::read_events(fixtures().join("logs/synthetic_session.jsonl")).map_err(|e| e.to_string())?;
    let m = analytics::session_metrics(&events).map_err(|e| e.to_string())?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    if (m.nc, m.ec, m.v) != (3, 2, 1) || !close(m.vt_s, 45.0) {
        return Err(format!("nc={} ec={} v={} vt={}", m.nc, m.ec, m.v, m.vt_s));
    }
    let frac = |v: View| m.view_fractions.get(&v).copied().unwrap_or(0.0);
    let expected = [(View::Global, 0.3), (View::MiniMap, 0.1), (View::Detailed, 0.6)];
    if expected.iter().any(|&(v, f)| !close(frac(v), f)) {
        return Err(format!("view fractions {:?}", m.view_fractions));
    }
    if !close(m.view_fractions.values().sum::<f64>(), 1.0) {
        return Err("view fractions do not sum to 1".into());
    }
    if m.heatmap.len() != HEATMAP_BINS {
        return Err(format!("heatmap has {} rows", m.heatmap.len()));
    }
    for (v, f) in expected {
        let col = m.heatmap.iter().map(|r| r[v.index()]).sum::<f64>() / HEATMAP_BINS as f64;
        if !close(col, f) {
            return Err(format!("{v:?} heatmap column gives {col}, expected {f}"));
        }
    }
    within(start, Duration::from_secs(1), "nc=3 ec=2 v=1 vt=45 s; fractions 0.3/0.1/0.6; heatmap columns agree".into())
}

fn tuple_invariants() -> Verdict {
    let corpus = load_corpus(fixtures().join("manifest.json")).map_err(|e| e.to_string())?;
    let lexicon = Lexicon::load(fixtures().join("gazetteer.json")).map_err(|e| e.to_string())?;
    let extractor = HeuristicExtractor::new(lexicon.clone());
    let tuples = run_pipeline_with(&corpus, &extractor, Execution::Parallel).map_err(|e| e.to_string())?;
    let docs: HashMap<&str, &Document> = corpus.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut per_sentence: HashMap<(&str, Span), usize> = HashMap::new();
    for t in &tuples {
        let doc = docs.get(t.anchor.doc_id.as_str()).ok_or("tuple anchored outside the corpus")?;
        t.check(doc).map_err(|e| format!("{}: {e}", t.anchor.doc_id))?;
        extractor.check_tuple(t, doc).map_err(|e| format!("{}: {e}", t.anchor.doc_id))?;
        *per_sentence.entry((t.anchor.doc_id.as_str(), t.anchor.span)).or_default() += 1;
    }
    let mut sentences = 0;
    for doc in &corpus.documents {
        let mentions = extract_mentions(doc, &lexicon);
        for (i, span) in doc.sentence_spans.iter().enumerate() {
            let k = mentions
                .iter()
                .filter(|m| m.sentence_index == i)
                .map(|m| m.canonical_id.as_str())
                .collect::<BTreeSet<_>>()
                .len();
            let expected = k * k.saturating_sub(1) / 2;
            let got = per_sentence.get(&(doc.doc_id.as_str(), *span)).copied().unwrap_or(0);
            if got != expected {
                return Err(format!("{} sentence {i}: {got} tuples for {k} entities", doc.doc_id));
            }
            sentences += 1;
        }
    }
    Ok(format!("{} tuples valid; {sentences} sentences hold C(k,2) tuples", tuples.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("central concepts equal the threshold-sweep oracle", algorithm_oracle),
        ("central concepts are bounded and threshold-complete", algorithm_bounds),
        ("degradation hits target precision and recall", degradation_fidelity),
        ("graph handshake and subgraph anchors", graph_invariants),
        ("build determinism and artifact round trip", pipeline_determinism),
        ("analytics replay of the synthetic session", analytics_replay),
        ("tuple invariants and pair counts on fixtures", tuple_invariants),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
