//! Optimize-validate repair of candidate relation labels.
//!
//! Each prediction record proposes Top-k labels for an entity pair. The
//! initial instance takes every record's Top-1 label; a tuple that does not
//! validate is relabeled to the best-ranked candidate (acquisition
//! probability times linkage estimate) that does, or dropped as NA.
//! Records are repaired independently against the `graph ∪ instance`
//! snapshot; no cross-record combinations are searched.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingCache;
use crate::error::{Error, Result};
use crate::graph_store::{EntityId, GraphStore, Overlay, RelationLabel, Symbols, Tuple};
use crate::validation::{AuxiliaryPatterns, Evidence, Status, ValidationConfig, Validator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub relation: RelationLabel,
    pub probability: f64,
}

/// One knowledge-acquisition output: ranked candidate labels for `<head, tail>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub id: String,
    pub head: EntityId,
    pub tail: EntityId,
    candidates: Vec<Candidate>,
}

impl PredictionRecord {
    /// Checks that the list is nonempty, probabilities lie in [0, 1], the
    /// order is descending and no label repeats.
    pub fn new(id: impl Into<String>, head: EntityId, tail: EntityId, candidates: Vec<Candidate>) -> Result<Self> {
        let id = id.into();
        if candidates.is_empty() {
            return Err(Error::Record(format!("{id}: empty candidate list")));
        }
        let mut seen = HashSet::new();
        for (i, c) in candidates.iter().enumerate() {
            if !(0.0..=1.0).contains(&c.probability) {
                return Err(Error::Record(format!("{id}: probability {} outside [0, 1]", c.probability)));
            }
            if i > 0 && c.probability > candidates[i - 1].probability {
                return Err(Error::Record(format!("{id}: candidates not sorted by descending probability")));
            }
            if !seen.insert(c.relation) {
                return Err(Error::Record(format!("{id}: repeated candidate label")));
            }
        }
        Ok(PredictionRecord {
            id,
            head,
            tail,
            candidates,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn top(&self) -> Candidate {
        self.candidates[0]
    }

    /// Exchanges the labels of the first two candidates, keeping the
    /// probabilities in place. No-op for single-candidate records.
    pub fn swap_top_two(&mut self) {
        if self.candidates.len() >= 2 {
            let first = self.candidates[0].relation;
            self.candidates[0].relation = self.candidates[1].relation;
            self.candidates[1].relation = first;
        }
    }

    /// The Top-1 tuple when it is non-NA and meets the probability threshold.
    pub fn initial_tuple(&self, p_threshold: f64) -> Option<Tuple> {
        let top = self.top();
        (!top.relation.is_na() && top.probability >= p_threshold).then(|| Tuple::new(self.head, top.relation, self.tail))
    }

    pub fn probability_of(&self, r: RelationLabel) -> Option<f64> {
        self.candidates.iter().find(|c| c.relation == r).map(|c| c.probability)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateLine {
    pub relation: String,
    pub p: f64,
}

/// JSON Lines form of a [`PredictionRecord`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordLine {
    pub id: String,
    pub head: String,
    pub tail: String,
    pub candidates: Vec<CandidateLine>,
}

impl RecordLine {
    pub fn into_record(self, symbols: &Symbols) -> Result<PredictionRecord> {
        let candidates = self
            .candidates
            .iter()
            .map(|c| Candidate {
                relation: symbols.relation(&c.relation),
                probability: c.p,
            })
            .collect();
        PredictionRecord::new(self.id, symbols.entity(&self.head), symbols.entity(&self.tail), candidates)
    }

    pub fn from_record(rec: &PredictionRecord, symbols: &Symbols) -> Self {
        RecordLine {
            id: rec.id.clone(),
            head: symbols.entity_name(rec.head).to_string(),
            tail: symbols.entity_name(rec.tail).to_string(),
            candidates: rec
                .candidates
                .iter()
                .map(|c| CandidateLine {
                    relation: symbols.relation_name(c.relation).to_string(),
                    p: c.probability,
                })
                .collect(),
        }
    }
}

pub fn parse_record(line: &str, symbols: &Symbols) -> Result<PredictionRecord> {
    serde_json::from_str::<RecordLine>(line)?.into_record(symbols)
}

/// Reads a predictions file. Each data line yields a record or the reason it
/// is malformed; blank lines are skipped.
pub fn read_records(path: &Path, symbols: &Symbols) -> Result<Vec<Result<PredictionRecord>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, symbols).map_err(|e| Error::format(path, idx + 1, e.to_string())));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnknownPolicy {
    Accept,
    Hold,
    Reject,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Number of non-NA candidate labels ranked per record.
    pub k: usize,
    pub p_threshold: f64,
    pub unknown_policy: UnknownPolicy,
    pub max_hold_iterations: u32,
    pub validation: ValidationConfig,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            k: 5,
            p_threshold: 0.0,
            unknown_policy: UnknownPolicy::Hold,
            max_hold_iterations: 3,
            validation: ValidationConfig::default(),
        }
    }
}

impl RepairConfig {
    pub fn check(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_threshold) {
            return Err(Error::Config(format!("p_th must lie in [0, 1], got {}", self.p_threshold)));
        }
        self.validation.check()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecisionStatus {
    Accepted,
    Repaired,
    Rejected,
    Held,
}

impl DecisionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionStatus::Accepted => "Accepted",
            DecisionStatus::Repaired => "Repaired",
            DecisionStatus::Rejected => "Rejected",
            DecisionStatus::Held => "Held",
        }
    }

    /// Whether the final label is added to the graph.
    pub fn commits(self) -> bool {
        matches!(self, DecisionStatus::Accepted | DecisionStatus::Repaired)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairDecision {
    pub id: String,
    pub head: EntityId,
    pub tail: EntityId,
    pub initial: RelationLabel,
    /// `NA` unless the status commits.
    pub final_label: RelationLabel,
    pub status: DecisionStatus,
    pub joint: f64,
    pub support: usize,
    /// Held records whose retries ran out; left to an administrator.
    pub terminal: bool,
}

impl RepairDecision {
    pub fn final_tuple(&self) -> Option<Tuple> {
        (self.status.commits() && !self.final_label.is_na()).then(|| Tuple::new(self.head, self.final_label, self.tail))
    }
}

/// JSON Lines form of a [`RepairDecision`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecisionLine {
    pub id: String,
    pub head: String,
    pub tail: String,
    pub initial: String,
    #[serde(rename = "final")]
    pub final_label: String,
    pub status: DecisionStatus,
    pub joint: f64,
    pub support: usize,
    #[serde(default)]
    pub terminal: bool,
}

impl DecisionLine {
    pub fn from_decision(d: &RepairDecision, symbols: &Symbols) -> Self {
        DecisionLine {
            id: d.id.clone(),
            head: symbols.entity_name(d.head).to_string(),
            tail: symbols.entity_name(d.tail).to_string(),
            initial: symbols.relation_name(d.initial).to_string(),
            final_label: symbols.relation_name(d.final_label).to_string(),
            status: d.status,
            joint: d.joint,
            support: d.support,
            terminal: d.terminal,
        }
    }

    pub fn into_decision(self, symbols: &Symbols) -> RepairDecision {
        RepairDecision {
            id: self.id,
            head: symbols.entity(&self.head),
            tail: symbols.entity(&self.tail),
            initial: symbols.relation(&self.initial),
            final_label: symbols.relation(&self.final_label),
            status: self.status,
            joint: self.joint,
            support: self.support,
            terminal: self.terminal,
        }
    }
}

/// One tuple per record whose Top-1 label is non-NA and at least `p_threshold`.
pub fn initial_instance(records: &[PredictionRecord], p_threshold: f64) -> Vec<Tuple> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter_map(|r| r.initial_tuple(p_threshold))
        .filter(|s| seen.insert(*s))
        .collect()
}

/// Source of linkage estimates `Pr(r | <h, t>, G)`.
pub trait LinkPredictor {
    fn predict_link(&self, head: EntityId, tail: EntityId, r: RelationLabel) -> Result<f64>;
}

impl LinkPredictor for Validator<'_> {
    fn predict_link(&self, head: EntityId, tail: EntityId, r: RelationLabel) -> Result<f64> {
        Validator::predict_link(self, head, tail, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointScore {
    pub label: RelationLabel,
    pub acquisition: f64,
    pub linkage: f64,
    pub joint: f64,
}

/// Joint scores `acquisition * linkage` for the first `k` non-NA candidates,
/// best first. Ties fall back to acquisition probability, then label string.
pub fn joint_scores<P: LinkPredictor + ?Sized>(
    predictor: &P,
    rec: &PredictionRecord,
    k: usize,
    symbols: &Symbols,
) -> Result<Vec<JointScore>> {
    let mut scores = rec
        .candidates
        .iter()
        .filter(|c| !c.relation.is_na())
        .take(k)
        .map(|c| {
            let linkage = predictor.predict_link(rec.head, rec.tail, c.relation)?;
            Ok(JointScore {
                label: c.relation,
                acquisition: c.probability,
                linkage,
                joint: c.probability * linkage,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scores.sort_by(|a, b| {
        b.joint
            .total_cmp(&a.joint)
            .then(b.acquisition.total_cmp(&a.acquisition))
            .then_with(|| symbols.relation_name(a.label).cmp(&symbols.relation_name(b.label)))
    });
    Ok(scores)
}

/// Caches per-label evidence so ranking and validation share one sample pass.
struct EvidenceMemo<'v, 'a> {
    validator: &'v Validator<'a>,
    evidence: RefCell<HashMap<RelationLabel, Evidence>>,
    linkage: RefCell<HashMap<RelationLabel, f64>>,
}

impl EvidenceMemo<'_, '_> {
    fn take(&self, s: &Tuple) -> Result<Evidence> {
        match self.evidence.borrow_mut().remove(&s.relation) {
            Some(ev) => Ok(ev),
            None => self.validator.evidence(s),
        }
    }
}

impl LinkPredictor for EvidenceMemo<'_, '_> {
    fn predict_link(&self, head: EntityId, tail: EntityId, r: RelationLabel) -> Result<f64> {
        if let Some(&v) = self.linkage.borrow().get(&r) {
            return Ok(v);
        }
        let ev = self.validator.evidence(&Tuple::new(head, r, tail))?;
        let link = ev.report().mean_similarity;
        self.linkage.borrow_mut().insert(r, link);
        self.evidence.borrow_mut().insert(r, ev);
        Ok(link)
    }
}

fn decision(
    rec: &PredictionRecord,
    initial: RelationLabel,
    final_label: RelationLabel,
    status: DecisionStatus,
    joint: f64,
    support: usize,
) -> RepairDecision {
    RepairDecision {
        id: rec.id.clone(),
        head: rec.head,
        tail: rec.tail,
        initial,
        final_label,
        status,
        joint,
        support,
        terminal: false,
    }
}

/// Repairs one record. At most one classification per ranked label.
pub fn repair_tuple(validator: &Validator<'_>, rec: &PredictionRecord, cfg: &RepairConfig) -> Result<RepairDecision> {
    let top = rec.top();
    let Some(initial) = rec.initial_tuple(cfg.p_threshold) else {
        return Ok(decision(rec, top.relation, RelationLabel::NA, DecisionStatus::Rejected, 0.0, 0));
    };

    let first = validator.classify(&initial)?;
    let first_joint = top.probability * first.mean_similarity;
    if first.status == Some(Status::Valid) {
        return Ok(decision(
            rec,
            initial.relation,
            initial.relation,
            DecisionStatus::Accepted,
            first_joint,
            first.support_count,
        ));
    }

    let memo = EvidenceMemo {
        validator,
        evidence: RefCell::new(HashMap::new()),
        linkage: RefCell::new(HashMap::from([(initial.relation, first.mean_similarity)])),
    };
    let ranking = joint_scores(&memo, rec, cfg.k, validator.base().symbols())?;

    let mut first_unknown = (first.status == Some(Status::Unknown)).then_some((initial.relation, first_joint, first.support_count));
    for js in ranking {
        if js.label == initial.relation {
            continue;
        }
        let candidate = initial.with_relation(js.label);
        let report = validator.conclude(memo.take(&candidate)?)?;
        match report.status {
            Some(Status::Valid) => {
                return Ok(decision(
                    rec,
                    initial.relation,
                    js.label,
                    DecisionStatus::Repaired,
                    js.joint,
                    report.support_count,
                ))
            }
            Some(Status::Unknown) if first_unknown.is_none() => {
                first_unknown = Some((js.label, js.joint, report.support_count));
            }
            _ => {}
        }
    }

    Ok(match (first_unknown, cfg.unknown_policy) {
        (Some((label, joint, support)), UnknownPolicy::Accept) => {
            let status = if label == initial.relation {
                DecisionStatus::Accepted
            } else {
                DecisionStatus::Repaired
            };
            decision(rec, initial.relation, label, status, joint, support)
        }
        (Some((_, joint, support)), UnknownPolicy::Hold) => {
            decision(rec, initial.relation, RelationLabel::NA, DecisionStatus::Held, joint, support)
        }
        _ => decision(rec, initial.relation, RelationLabel::NA, DecisionStatus::Rejected, 0.0, 0),
    })
}

#[derive(Debug, Clone)]
pub struct RepairOutcome {
    pub decisions: Vec<RepairDecision>,
    /// Total classifications performed (instrumentation).
    pub classifications: usize,
}

/// Repairs a batch of records against `graph ∪ initial_instance(records)`.
/// Decisions come back in input order regardless of parallelism.
pub fn repair_instance(
    graph: &GraphStore,
    records: &[PredictionRecord],
    cfg: &RepairConfig,
    aux: Option<&AuxiliaryPatterns>,
    cache: Option<&EmbeddingCache>,
) -> Result<RepairOutcome> {
    cfg.check()?;
    let instance = initial_instance(records, cfg.p_threshold);
    let snapshot = Overlay::new(graph, instance)?;
    let validator = Validator::new(graph, &cfg.validation)
        .with_context(&snapshot)
        .with_aux(aux)
        .with_cache(cache);
    let decisions = records
        .par_iter()
        .map(|rec| repair_tuple(&validator, rec, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(RepairOutcome {
        decisions,
        classifications: validator.classifications(),
    })
}
