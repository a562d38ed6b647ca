//! Evaluation helpers: error injection, scoring, error detection and a
//! seeded synthetic benchmark with planted label contexts.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_store::{parse_tuple_line, GraphStore, RelationLabel, Symbols, Tuple, NA_STR};
use crate::hash::{unit_interval, StableHasher};
use crate::repair::{Candidate, DecisionStatus, PredictionRecord, RepairDecision};
use crate::validation::{Status, ValidationConfig, Validator};

/// Whether the record with `id` falls in the seeded fraction `rate`.
pub fn is_selected(id: &str, rate: f64, seed: u64) -> bool {
    unit_interval(StableHasher::new(seed).write_str(id).finish()) < rate
}

/// Swaps the Top-1 and Top-2 labels of a seeded fraction `rate` of records.
/// Records with fewer than two candidates are left alone.
pub fn inject_errors(records: &[PredictionRecord], rate: f64, seed: u64) -> Result<Vec<PredictionRecord>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Config(format!("error rate must lie in [0, 1], got {rate}")));
    }
    Ok(records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if is_selected(&r.id, rate, seed) {
                r.swap_top_two();
            }
            r
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub id: String,
    pub relation: String,
}

pub fn read_gold(path: &Path) -> Result<Vec<GoldLabel>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::format(path, idx + 1, e.to_string()))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl ScoreReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
        let precision = ratio(tp, fp);
        let recall = ratio(tp, fn_);
        let f_score = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ScoreReport {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f_score,
        }
    }
}

/// Scores final labels against gold labels. A non-NA final equal to gold is
/// a true positive, any other non-NA final a false positive; an NA final
/// (rejected or held) is a false negative when gold is non-NA.
pub fn score(decisions: &[RepairDecision], gold: &[GoldLabel], symbols: &Symbols) -> Result<ScoreReport> {
    let mut by_id: HashMap<&str, &str> = HashMap::with_capacity(gold.len());
    for g in gold {
        if by_id.insert(&g.id, &g.relation).is_some() {
            return Err(Error::Record(format!("duplicate gold id {}", g.id)));
        }
    }
    let mut missing: Vec<String> = decisions
        .iter()
        .filter(|d| !by_id.contains_key(d.id.as_str()))
        .map(|d| d.id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingGold(missing));
    }

    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for d in decisions {
        let truth = by_id[d.id.as_str()];
        let predicted = if d.status.commits() {
            symbols.relation_name(d.final_label)
        } else {
            Arc::from(NA_STR)
        };
        match (&*predicted == NA_STR, truth == NA_STR) {
            (false, _) if &*predicted == truth => tp += 1,
            (false, _) => fp += 1,
            (true, false) => fn_ += 1,
            (true, true) => tn += 1,
        }
    }
    Ok(ScoreReport::from_counts(tp, fp, fn_, tn))
}

/// Decisions that take every record's Top-1 label as is.
pub fn unrepaired_decisions(records: &[PredictionRecord]) -> Vec<RepairDecision> {
    records
        .iter()
        .map(|r| {
            let top = r.top().relation;
            RepairDecision {
                id: r.id.clone(),
                head: r.head,
                tail: r.tail,
                initial: top,
                final_label: top,
                status: if top.is_na() {
                    DecisionStatus::Rejected
                } else {
                    DecisionStatus::Accepted
                },
                joint: r.top().probability,
                support: 0,
                terminal: false,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub report: ScoreReport,
    pub statuses: Vec<Status>,
}

/// Classifies labeled facts against `g_train`. A fact is predicted true when
/// it is Valid, or Unknown with `unknown_as_true`; true positives are
/// correctly predicted true facts.
pub fn detect_errors(
    g_train: &GraphStore,
    facts: &[(Tuple, bool)],
    cfg: &ValidationConfig,
    unknown_as_true: bool,
) -> Result<DetectionOutcome> {
    cfg.check()?;
    let validator = Validator::new(g_train, cfg);
    let statuses = facts
        .par_iter()
        .map(|(s, _)| Ok(validator.classify(s)?.status.unwrap_or(Status::Unknown)))
        .collect::<Result<Vec<_>>>()?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&status, &(_, truth)) in statuses.iter().zip(facts) {
        let predicted = status == Status::Valid || (unknown_as_true && status == Status::Unknown);
        match (predicted, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(DetectionOutcome {
        report: ScoreReport::from_counts(tp, fp, fn_, tn),
        statuses,
    })
}

/// Reads `head<TAB>relation<TAB>tail<TAB>1|0` lines.
pub fn read_labeled_facts(path: &Path, symbols: &Symbols) -> Result<Vec<(Tuple, bool)>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let Some(fields) = parse_tuple_line(&line) else {
            continue;
        };
        let bad = |msg: &str| Error::format(path, idx + 1, msg);
        let [h, r, t, flag] = fields[..] else {
            return Err(bad("expected head, relation, tail and a 1|0 flag"));
        };
        if r == NA_STR {
            return Err(bad("relation NA cannot be a fact"));
        }
        let truth = match flag.trim() {
            "1" => true,
            "0" => false,
            _ => return Err(bad("truth flag must be 1 or 0")),
        };
        out.push((symbols.tuple(h, r, t), truth));
    }
    Ok(out)
}

/// Shape of a synthetic benchmark.
///
/// Every label `rel_j` gets disjoint head and tail pools. Pool heads carry
/// an attribute edge `ctx_h_j` and pool tails an edge `ctx_t_j`, so each
/// label comes with a characteristic neighborhood. A fraction `density` of
/// all facts is drawn from the pools; the rest join fresh isolated entities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub labels: usize,
    /// Stored facts per label.
    pub facts_per_label: usize,
    pub records: usize,
    /// Candidate labels per record, the gold label included.
    pub candidates: usize,
    /// Append NA as the last candidate.
    pub include_na: bool,
    pub density: f64,
    pub detection_facts: usize,
    pub true_fraction: f64,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            labels: 20,
            facts_per_label: 100,
            records: 5000,
            candidates: 4,
            include_na: true,
            density: 1.0,
            detection_facts: 1000,
            true_fraction: 0.2,
            seed: 0,
        }
    }
}

impl BenchmarkSpec {
    pub fn check(&self) -> Result<()> {
        if self.labels < 2 || self.facts_per_label < 1 || self.candidates < 1 {
            return Err(Error::Config("benchmark needs at least 2 labels, 1 fact per label and 1 candidate".into()));
        }
        if self.candidates > self.labels {
            return Err(Error::Config("more candidates per record than labels".into()));
        }
        if !(0.0..=1.0).contains(&self.density) || !(0.0..=1.0).contains(&self.true_fraction) {
            return Err(Error::Config("density and true fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub graph: GraphStore,
    pub records: Vec<PredictionRecord>,
    pub gold: Vec<GoldLabel>,
    /// Held-out facts for error detection, disjoint from `graph`.
    pub facts: Vec<(Tuple, bool)>,
}

struct Generator {
    sym: Arc<Symbols>,
    rng: ChaCha8Rng,
    labels: Vec<RelationLabel>,
    pool: usize,
    used: HashSet<(usize, usize, usize)>,
    fresh: usize,
    density: f64,
}

impl Generator {
    fn head(&self, j: usize, i: usize) -> String {
        format!("e{j}_h{i}")
    }

    fn tail(&self, j: usize, i: usize) -> String {
        format!("e{j}_t{i}")
    }

    /// An unused entity pair for label `j`, planted or fresh.
    fn pair(&mut self, j: usize) -> (String, String) {
        if self.rng.gen::<f64>() < self.density {
            loop {
                let (a, b) = (self.rng.gen_range(0..self.pool), self.rng.gen_range(0..self.pool));
                if self.used.insert((j, a, b)) {
                    return (self.head(j, a), self.tail(j, b));
                }
            }
        }
        self.fresh += 1;
        (format!("f{}_h", self.fresh), format!("f{}_t", self.fresh))
    }

    fn tuple(&mut self, j: usize) -> Tuple {
        let (h, t) = self.pair(j);
        Tuple::new(self.sym.entity(&h), self.labels[j], self.sym.entity(&t))
    }
}

/// Generates a deterministic benchmark for `spec`.
pub fn benchmark_generate(spec: &BenchmarkSpec) -> Result<Benchmark> {
    spec.check()?;
    let sym = Symbols::new();
    let labels: Vec<RelationLabel> = (0..spec.labels).map(|j| sym.relation(&format!("rel_{j:02}"))).collect();
    let per_label_records = spec.records.div_ceil(spec.labels);
    let per_label_facts = spec.detection_facts.div_ceil(spec.labels);
    let need = spec.facts_per_label + per_label_records + per_label_facts;
    // pools stay small enough for entities to share contexts, large enough
    // that pair draws never run dry
    let pool = spec
        .facts_per_label
        .div_ceil(3)
        .max((2.0 * need as f64).sqrt().ceil() as usize)
        .max(2);
    let mut gen = Generator {
        sym: sym.clone(),
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        labels: labels.clone(),
        pool,
        used: HashSet::new(),
        fresh: 0,
        density: spec.density,
    };

    let mut graph = GraphStore::new(sym.clone());
    for j in 0..spec.labels {
        for _ in 0..spec.facts_per_label {
            let s = gen.tuple(j);
            graph.add_tuple(s)?;
        }
    }
    // attribute edges for every pool entity that took part in a stored fact
    for j in 0..spec.labels {
        let (ctx_h, ctx_t) = (sym.relation(&format!("ctx_h_{j}")), sym.relation(&format!("ctx_t_{j}")));
        for i in 0..pool {
            let h = sym.entity(&gen.head(j, i));
            if graph.has_vertex(h) {
                graph.add_tuple(Tuple::new(h, ctx_h, sym.entity(&format!("a{j}_h{i}"))))?;
            }
            let t = sym.entity(&gen.tail(j, i));
            if graph.has_vertex(t) {
                graph.add_tuple(Tuple::new(t, ctx_t, sym.entity(&format!("a{j}_t{i}"))))?;
            }
        }
    }

    let na = sym.relation(NA_STR);
    let mut records = Vec::with_capacity(spec.records);
    let mut gold = Vec::with_capacity(spec.records);
    for n in 0..spec.records {
        let j = n % spec.labels;
        let s = gen.tuple(j);
        let mut others: Vec<usize> = (0..spec.labels).filter(|&k| k != j).collect();
        others.shuffle(&mut gen.rng);
        let top = gen.rng.gen_range(0.45..0.85);
        let mut rest = 1.0 - top;
        let mut candidates = vec![Candidate {
            relation: labels[j],
            probability: top,
        }];
        for &k in others.iter().take(spec.candidates - 1) {
            let prev: f64 = candidates.last().map(|c| c.probability).unwrap_or(top);
            let p = (rest * gen.rng.gen_range(0.3..0.7)).min(prev);
            rest -= p;
            candidates.push(Candidate {
                relation: labels[k],
                probability: p,
            });
        }
        if spec.include_na && candidates.len() >= 2 {
            let prev = candidates.last().map(|c| c.probability).unwrap_or(top);
            candidates.push(Candidate {
                relation: na,
                probability: (rest * 0.5).min(prev),
            });
        }
        let id = format!("r{n}");
        records.push(PredictionRecord::new(id.clone(), s.head, s.tail, candidates)?);
        gold.push(GoldLabel {
            id,
            relation: sym.relation_name(labels[j]).to_string(),
        });
    }

    let n_true = (spec.detection_facts as f64 * spec.true_fraction).round() as usize;
    let mut facts = Vec::with_capacity(spec.detection_facts);
    for n in 0..spec.detection_facts {
        let j = n % spec.labels;
        let s = gen.tuple(j);
        if n < n_true {
            facts.push((s, true));
        } else {
            let k = (j + gen.rng.gen_range(1..spec.labels)) % spec.labels;
            facts.push((s.with_relation(labels[k]), false));
        }
    }
    facts.shuffle(&mut gen.rng);

    Ok(Benchmark {
        graph,
        records,
        gold,
        facts,
    })
}
