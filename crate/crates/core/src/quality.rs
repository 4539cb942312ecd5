//! Precision/recall scoring against a gold tuple set, and synthesis of
//! degraded tuple sets at a target operating point.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::extraction::{Tuple, TupleSet};
use crate::text::terms;

#[derive(Debug, Error, PartialEq)]
pub enum QualityError {
    #[error("invalid degradation spec: {0}")]
    InvalidSpec(String),
    #[error("invalid match criterion: {0}")]
    InvalidCriterion(String),
    #[error("gold tuple set is empty")]
    EmptyGold,
    #[error("recall {recall} keeps no true tuples out of {gold}, so precision {precision} cannot be realized")]
    ZeroTruePositives { precision: f64, recall: f64, gold: usize },
    #[error("every entity pair already occurs in gold; no spurious tuples can be injected")]
    NoAbsentPairs,
    #[error("could only inject {made} of {wanted} distinct spurious tuples")]
    Exhausted { made: usize, wanted: usize },
}

/// Exact unordered entity pair plus relation token Jaccard of at least `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCriterion {
    pub theta: f64,
}

impl Default for MatchCriterion {
    fn default() -> Self {
        MatchCriterion { theta: 0.5 }
    }
}

impl MatchCriterion {
    pub fn new(theta: f64) -> Result<Self, QualityError> {
        let c = MatchCriterion { theta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), QualityError> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(QualityError::InvalidCriterion(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

fn relation_tokens(relation: &str) -> BTreeSet<String> {
    terms(relation).collect()
}

/// Jaccard similarity of two token sets; two empty sets count as identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

pub fn relation_similarity(a: &str, b: &str) -> f64 {
    jaccard(&relation_tokens(a), &relation_tokens(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matched: usize,
    /// (system index, gold index) into the sets as given.
    pub pairs: Vec<(usize, usize)>,
}

fn canonical_order(set: &TupleSet) -> Vec<usize> {
    let t = set.as_slice();
    let mut idx: Vec<usize> = (0..t.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (&t[a], &t[b]);
        (&x.anchor, &x.entity1, &x.entity2, &x.relation)
            .cmp(&(&y.anchor, &y.entity1, &y.entity2, &y.relation))
            .then(x.salience.total_cmp(&y.salience))
            .then(a.cmp(&b))
    });
    idx
}

fn pair_key(t: &Tuple) -> (String, String) {
    let (a, b) = t.pair();
    (a.to_string(), b.to_string())
}

/// Greedy one-to-one matching in canonical order. Each system tuple takes
/// the first unconsumed gold tuple that matches it.
pub fn match_tuples(system: &TupleSet, gold: &TupleSet, c: &MatchCriterion) -> MatchResult {
    let gold_t = gold.as_slice();
    let mut by_pair: HashMap<(String, String), Vec<usize>> = HashMap::new();
    for g in canonical_order(gold) {
        by_pair.entry(pair_key(&gold_t[g])).or_default().push(g);
    }
    let gold_tokens: Vec<BTreeSet<String>> =
        gold_t.iter().map(|t| relation_tokens(&t.relation)).collect();
    let mut consumed = vec![false; gold_t.len()];
    let mut pairs = Vec::new();
    let sys_t = system.as_slice();
    for s in canonical_order(system) {
        let Some(candidates) = by_pair.get(&pair_key(&sys_t[s])) else {
            continue;
        };
        let tokens = relation_tokens(&sys_t[s].relation);
        if let Some(&g) = candidates
            .iter()
            .find(|&&g| !consumed[g] && jaccard(&tokens, &gold_tokens[g]) >= c.theta)
        {
            consumed[g] = true;
            pairs.push((s, g));
        }
    }
    MatchResult {
        matched: pairs.len(),
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub precision: f64,
    pub recall: f64,
    pub matched: usize,
    pub system_size: usize,
    pub gold_size: usize,
}

impl QualityReport {
    pub fn from_counts(matched: usize, system_size: usize, gold_size: usize) -> Self {
        let frac = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        QualityReport {
            precision: frac(matched, system_size),
            recall: frac(matched, gold_size),
            matched,
            system_size,
            gold_size,
        }
    }

    /// Ratios are compared at the six significant digits artifacts keep.
    pub fn validate(&self) -> Result<(), String> {
        let expected = QualityReport::from_counts(self.matched, self.system_size, self.gold_size);
        if self.matched > self.system_size || self.matched > self.gold_size {
            return Err("matched exceeds a set size".into());
        }
        if (self.precision - expected.precision).abs() > 1e-6
            || (self.recall - expected.recall).abs() > 1e-6
        {
            return Err("precision or recall disagrees with the counts".into());
        }
        Ok(())
    }
}

pub fn score(system: &TupleSet, gold: &TupleSet, c: &MatchCriterion) -> QualityReport {
    let m = match_tuples(system, gold, c);
    QualityReport::from_counts(m.matched, system.len(), gold.len())
}

/// Target operating point for [`degrade`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub precision: f64,
    pub recall: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<(), QualityError> {
        if !(self.precision > 0.0 && self.precision <= 1.0) {
            return Err(QualityError::InvalidSpec(format!(
                "precision must lie in (0, 1], got {}",
                self.precision
            )));
        }
        if !(0.0..=1.0).contains(&self.recall) {
            return Err(QualityError::InvalidSpec(format!(
                "recall must lie in [0, 1], got {}",
                self.recall
            )));
        }
        Ok(())
    }

    /// (true positives kept, spurious tuples injected) for a gold set.
    pub fn counts(&self, gold_size: usize) -> (usize, usize) {
        let tp = round_half_up(self.recall * gold_size as f64);
        let spurious = round_half_up(tp as f64 * (1.0 - self.precision) / self.precision);
        (tp, spurious)
    }
}

/// Rounds halves upward. The small bias absorbs binary representation
/// error so that products like 0.5 * 5 land on the intended half.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

const REJECTION_MIN_ABSENT_SHARE: f64 = 0.05;

struct PairSampler {
    entities: Vec<String>,
    gold_pairs: HashSet<(usize, usize)>,
    absent: Option<Vec<(usize, usize)>>,
}

impl PairSampler {
    fn new(gold: &TupleSet) -> Result<Self, QualityError> {
        let entities: Vec<String> = gold
            .iter()
            .flat_map(|t| [t.entity1.clone(), t.entity2.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pos: HashMap<&str, usize> = entities.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
        let gold_pairs: HashSet<(usize, usize)> = gold
            .iter()
            .map(|t| {
                let (a, b) = t.pair();
                (pos[a], pos[b])
            })
            .filter(|(a, b)| a != b)
            .collect();
        let n = entities.len();
        let total = n * n.saturating_sub(1) / 2;
        let absent_count = total - gold_pairs.len();
        if absent_count == 0 {
            return Err(QualityError::NoAbsentPairs);
        }
        let absent = if (absent_count as f64) < REJECTION_MIN_ABSENT_SHARE * total as f64 {
            let mut v = Vec::with_capacity(absent_count);
            for a in 0..n {
                for b in a + 1..n {
                    if !gold_pairs.contains(&(a, b)) {
                        v.push((a, b));
                    }
                }
            }
            Some(v)
        } else {
            None
        };
        Ok(PairSampler {
            entities,
            gold_pairs,
            absent,
        })
    }

    /// Uniform draw over unordered entity pairs absent from gold, returned
    /// in random orientation.
    fn draw<R: Rng>(&self, rng: &mut R) -> (&str, &str) {
        let (a, b) = match &self.absent {
            Some(v) => *v.choose(rng).expect("absent pairs exist"),
            None => loop {
                let a = rng.random_range(0..self.entities.len());
                let b = rng.random_range(0..self.entities.len());
                let p = (a.min(b), a.max(b));
                if a != b && !self.gold_pairs.contains(&p) {
                    break p;
                }
            },
        };
        let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        (&self.entities[a], &self.entities[b])
    }
}

fn shuffle_tokens<R: Rng>(relation: &str, rng: &mut R) -> String {
    let mut tokens: Vec<&str> = relation.split_whitespace().collect();
    tokens.shuffle(rng);
    tokens.join(" ")
}

/// Keeps a seeded uniform sample of gold tuples and injects spurious ones
/// so that scoring the result against gold lands on the target precision
/// and recall up to rounding.
///
/// Spurious tuples use entity pairs absent from gold, a token-shuffled
/// relation borrowed from a random gold tuple, and that tuple's snippet,
/// anchor and salience. The output is in canonical order.
pub fn degrade(gold: &TupleSet, spec: &DegradationSpec) -> Result<TupleSet, QualityError> {
    spec.validate()?;
    if gold.is_empty() {
        return Err(QualityError::EmptyGold);
    }
    let (tp, spurious) = spec.counts(gold.len());
    if tp == 0 && spec.precision < 1.0 {
        return Err(QualityError::ZeroTruePositives {
            precision: spec.precision,
            recall: spec.recall,
            gold: gold.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gold_t = gold.as_slice();
    let mut keep = index::sample(&mut rng, gold_t.len(), tp).into_vec();
    keep.sort_unstable();
    let mut out: Vec<Tuple> = keep.iter().map(|&i| gold_t[i].clone()).collect();

    if spurious > 0 {
        let sampler = PairSampler::new(gold)?;
        let mut seen: HashSet<(String, String, String, String, crate::corpus::Span)> = HashSet::new();
        let budget = 100 * spurious + 10_000;
        let mut made = 0;
        for _ in 0..budget {
            if made == spurious {
                break;
            }
            let (a, b) = sampler.draw(&mut rng);
            let source = gold_t.choose(&mut rng).expect("gold is non-empty");
            let t = Tuple {
                entity1: a.to_string(),
                entity2: b.to_string(),
                relation: shuffle_tokens(&source.relation, &mut rng),
                snippet: source.snippet.clone(),
                anchor: source.anchor.clone(),
                salience: source.salience,
            };
            let key = (
                t.entity1.clone(),
                t.entity2.clone(),
                t.relation.clone(),
                t.anchor.doc_id.clone(),
                t.anchor.span,
            );
            if seen.insert(key) {
                out.push(t);
                made += 1;
            }
        }
        if made < spurious {
            return Err(QualityError::Exhausted {
                made,
                wanted: spurious,
            });
        }
    }
    let mut set = TupleSet::new(out);
    set.sort_canonical();
    Ok(set)
}

/// Degrades and scores every spec; results follow the input order.
pub fn sweep(
    gold: &TupleSet,
    specs: &[DegradationSpec],
    c: &MatchCriterion,
    exec: Execution,
) -> Result<Vec<QualityReport>, QualityError> {
    c.validate()?;
    exec.try_map(specs, |spec| Ok(score(&degrade(gold, spec)?, gold, c)))
}
