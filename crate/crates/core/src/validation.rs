//! Implicit-constraint validation of candidate tuples.
//!
//! A candidate `<h, r, t>` is supported by an existing occurrence of `r`
//! when the embeddings of the two localized patterns are similar enough.
//! Supports are counted over a seeded sample of occurrences; when the sample
//! comes up short, a capped scan of the full occurrence index runs before a
//! tuple is declared non-valid.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{similarity, traverse_r, CacheKey, EmbeddingCache, EmbeddingOptions, PathEmbedding};
use crate::error::{Error, Result};
use crate::graph_store::{EntityId, GraphRead, GraphStore, Overlay, RelationLabel, Tuple};
use crate::hash::StableHasher;
use crate::pattern::{extract_pattern, LocalizedPattern, NeighborhoodRule};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Pattern radius and embedding walk budget.
    pub l: u32,
    /// Similarity must be strictly greater than this to count as support.
    pub theta: f64,
    /// Minimum support count for a valid tuple.
    pub delta: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub escalate_full_scan: bool,
    /// Maximum number of extra occurrences examined by the full scan.
    pub scan_cap: usize,
    pub edit_tolerance: usize,
    pub embedding: EmbeddingOptions,
    pub rule: NeighborhoodRule,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            l: 2,
            theta: 0.0,
            delta: 1,
            sample_size: 10,
            seed: 0,
            escalate_full_scan: true,
            scan_cap: 200,
            edit_tolerance: 0,
            embedding: EmbeddingOptions::default(),
            rule: NeighborhoodRule::Union,
        }
    }
}

impl ValidationConfig {
    pub fn check(&self) -> Result<()> {
        if self.l < 1 {
            return Err(Error::Config("l must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1), got {}", self.theta)));
        }
        if self.delta < 1 {
            return Err(Error::Config("delta must be at least 1".into()));
        }
        if self.sample_size < 1 {
            return Err(Error::Config("sample size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternSource {
    Native,
    Auxiliary,
}

impl PatternSource {
    fn origin(self) -> u8 {
        match self {
            PatternSource::Native => 0,
            PatternSource::Auxiliary => 1,
        }
    }
}

/// Relabeled auxiliary graph used to top up samples for rare labels. Its
/// entities are never merged into the target graph.
#[derive(Debug, Clone)]
pub struct AuxiliaryPatterns {
    graph: GraphStore,
}

impl AuxiliaryPatterns {
    pub fn new(graph: GraphStore) -> Self {
        AuxiliaryPatterns { graph }
    }

    pub fn graph(&self) -> &GraphStore {
        &self.graph
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Valid,
    Invalid,
    Unknown,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Valid => "Valid",
            Status::Invalid => "Invalid",
            Status::Unknown => "Unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub center: Tuple,
    pub source: PatternSource,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportReport {
    pub tuple: Tuple,
    pub support_count: usize,
    /// Unset until the tuple is classified.
    pub status: Option<Status>,
    pub witnesses: Vec<Witness>,
    pub escalated: bool,
    /// Set when an Invalid verdict relies on the invalidity conditions at l > 1.
    pub heuristic: bool,
    /// Number of sampled patterns compared before escalation.
    pub sampled: usize,
    /// Mean similarity over the sample, used as the linkage estimate.
    pub mean_similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledCenter {
    pub center: Tuple,
    pub source: PatternSource,
}

#[derive(Debug, Clone)]
pub struct SampledPattern {
    pub pattern: LocalizedPattern,
    pub source: PatternSource,
}

/// Intermediate state of one tuple's support computation.
#[derive(Debug, Clone)]
pub struct Evidence {
    report: SupportReport,
    own: Arc<PathEmbedding>,
    sampled: HashSet<(Tuple, PatternSource)>,
}

impl Evidence {
    pub fn report(&self) -> &SupportReport {
        &self.report
    }

    pub fn embedding(&self) -> &PathEmbedding {
        &self.own
    }
}

/// Validates candidates against a snapshot.
///
/// Samples are drawn from `base` (the stored graph); candidate patterns are
/// cut from `context`, which is `base` or `base ∪ instance`.
pub struct Validator<'a> {
    base: &'a GraphStore,
    context: &'a dyn GraphRead,
    aux: Option<&'a AuxiliaryPatterns>,
    cache: Option<&'a EmbeddingCache>,
    cfg: &'a ValidationConfig,
    classifications: AtomicUsize,
}

impl<'a> Validator<'a> {
    pub fn new(base: &'a GraphStore, cfg: &'a ValidationConfig) -> Self {
        Validator {
            base,
            context: base,
            aux: None,
            cache: None,
            cfg,
            classifications: AtomicUsize::new(0),
        }
    }

    pub fn with_context(mut self, context: &'a dyn GraphRead) -> Self {
        self.context = context;
        self
    }

    pub fn with_aux(mut self, aux: Option<&'a AuxiliaryPatterns>) -> Self {
        self.aux = aux;
        self
    }

    pub fn with_cache(mut self, cache: Option<&'a EmbeddingCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn config(&self) -> &ValidationConfig {
        self.cfg
    }

    pub fn base(&self) -> &GraphStore {
        self.base
    }

    /// Number of completed classifications (instrumentation).
    pub fn classifications(&self) -> usize {
        self.classifications.load(Ordering::Relaxed)
    }

    fn sample_rng(&self, r: RelationLabel, exclude: &Tuple) -> ChaCha8Rng {
        let sym = self.base.symbols();
        let (h, er, t) = sym.tuple_names(exclude);
        let seed = StableHasher::new(self.cfg.seed)
            .write_str(&sym.relation_name(r))
            .write_str(&h)
            .write_str(&er)
            .write_str(&t)
            .write_u64(self.base.version())
            .finish();
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Seeded uniform sample of occurrences of `r` without replacement,
    /// skipping `exclude`; topped up from the auxiliary graph when the
    /// target graph has fewer than `sample_size` usable occurrences.
    pub fn sample_centers(&self, r: RelationLabel, exclude: &Tuple) -> Vec<SampledCenter> {
        let n = self.cfg.sample_size;
        let mut rng = self.sample_rng(r, exclude);
        let mut out = Vec::with_capacity(n);

        if let Some(occ) = self.base.occurrences(r) {
            let skip = occ.get_index_of(exclude);
            let available = occ.len() - usize::from(skip.is_some());
            let take = n.min(available);
            let mut picks = rand::seq::index::sample(&mut rng, available, take).into_vec();
            picks.sort_unstable();
            for i in picks {
                let i = match skip {
                    Some(x) if i >= x => i + 1,
                    _ => i,
                };
                out.push(SampledCenter {
                    center: occ[i],
                    source: PatternSource::Native,
                });
            }
        }

        let need = n - out.len();
        if need > 0 {
            if let Some(occ) = self.aux.and_then(|a| a.graph.occurrences(r)) {
                let take = need.min(occ.len());
                let mut picks = rand::seq::index::sample(&mut rng, occ.len(), take).into_vec();
                picks.sort_unstable();
                out.extend(picks.into_iter().map(|i| SampledCenter {
                    center: occ[i],
                    source: PatternSource::Auxiliary,
                }));
            }
        }
        out
    }

    pub fn sample_patterns(&self, r: RelationLabel, exclude: &Tuple) -> Result<Vec<SampledPattern>> {
        self.sample_centers(r, exclude)
            .into_iter()
            .map(|c| {
                Ok(SampledPattern {
                    pattern: extract_pattern(self.source_graph(c.source), c.center, self.cfg.l, self.cfg.rule)?,
                    source: c.source,
                })
            })
            .collect()
    }

    fn source_graph(&self, source: PatternSource) -> &GraphStore {
        match source {
            PatternSource::Native => self.base,
            PatternSource::Auxiliary => self.aux.map(|a| &a.graph).unwrap_or(self.base),
        }
    }

    fn stored_embedding(&self, center: Tuple, source: PatternSource) -> Result<Arc<PathEmbedding>> {
        let graph = self.source_graph(source);
        let compute = || {
            let p = extract_pattern(graph, center, self.cfg.l, self.cfg.rule)?;
            traverse_r(&p, self.cfg.l, self.cfg.embedding)
        };
        match self.cache {
            Some(cache) => cache.get_or_try_insert(
                CacheKey {
                    center,
                    radius: self.cfg.l,
                    options: self.cfg.embedding,
                    rule: self.cfg.rule,
                    origin: source.origin(),
                    version: graph.version(),
                },
                compute,
            ),
            None => compute().map(Arc::new),
        }
    }

    /// Embedding of the candidate's pattern over `context ∪ {s}`.
    pub fn candidate_embedding(&self, s: &Tuple) -> Result<PathEmbedding> {
        let p = extract_pattern(self.context, *s, self.cfg.l, self.cfg.rule)?;
        traverse_r(&p, self.cfg.l, self.cfg.embedding)
    }

    /// Support over the sample only; no escalation, no status.
    pub fn evidence(&self, s: &Tuple) -> Result<Evidence> {
        if s.relation.is_na() {
            return Err(Error::NALabelRejected);
        }
        let own = Arc::new(self.candidate_embedding(s)?);
        let sample = self.sample_centers(s.relation, s);
        let mut report = SupportReport {
            tuple: *s,
            support_count: 0,
            status: None,
            witnesses: Vec::new(),
            escalated: false,
            heuristic: false,
            sampled: sample.len(),
            mean_similarity: 0.0,
        };
        let sampled: HashSet<_> = sample.iter().map(|c| (c.center, c.source)).collect();
        if !own.is_empty() && !sample.is_empty() {
            let mut total = 0.0;
            for c in &sample {
                let sim = similarity(&own, &*self.stored_embedding(c.center, c.source)?, self.cfg.edit_tolerance)?;
                total += sim;
                if sim > self.cfg.theta {
                    report.support_count += 1;
                    report.witnesses.push(Witness {
                        center: c.center,
                        source: c.source,
                        similarity: sim,
                    });
                }
            }
            report.mean_similarity = total / sample.len() as f64;
        }
        Ok(Evidence { report, own, sampled })
    }

    fn escalate(&self, ev: &mut Evidence) -> Result<()> {
        let cfg = self.cfg;
        if ev.report.support_count >= cfg.delta || !cfg.escalate_full_scan || ev.own.is_empty() {
            return Ok(());
        }
        ev.report.escalated = true;
        let s = ev.report.tuple;
        let mut scanned = 0;
        let sources = [
            (PatternSource::Native, self.base.occurrences(s.relation)),
            (PatternSource::Auxiliary, self.aux.and_then(|a| a.graph.occurrences(s.relation))),
        ];
        for (source, occ) in sources {
            let Some(occ) = occ else { continue };
            for &center in occ {
                if scanned >= cfg.scan_cap || ev.report.support_count >= cfg.delta {
                    return Ok(());
                }
                if (source == PatternSource::Native && center == s) || ev.sampled.contains(&(center, source)) {
                    continue;
                }
                scanned += 1;
                let sim = similarity(&ev.own, &*self.stored_embedding(center, source)?, cfg.edit_tolerance)?;
                if sim > cfg.theta {
                    ev.report.support_count += 1;
                    ev.report.witnesses.push(Witness {
                        center,
                        source,
                        similarity: sim,
                    });
                }
            }
        }
        Ok(())
    }

    /// Support with escalation applied; status left unset.
    pub fn support(&self, s: &Tuple) -> Result<SupportReport> {
        let mut ev = self.evidence(s)?;
        self.escalate(&mut ev)?;
        Ok(ev.report)
    }

    /// Escalates if needed and assigns the status.
    pub fn conclude(&self, mut ev: Evidence) -> Result<SupportReport> {
        self.escalate(&mut ev)?;
        let mut report = ev.report;
        let status = if report.support_count >= self.cfg.delta {
            Status::Valid
        } else if report.support_count == 0 && self.has_invalidity_evidence(&report.tuple) {
            report.heuristic = self.cfg.l > 1;
            Status::Invalid
        } else {
            Status::Unknown
        };
        report.status = Some(status);
        self.classifications.fetch_add(1, Ordering::Relaxed);
        Ok(report)
    }

    pub fn classify(&self, s: &Tuple) -> Result<SupportReport> {
        let ev = self.evidence(s)?;
        self.conclude(ev)
    }

    /// Invalidity conditions over the stored graph: another label already
    /// joins `h -> t`, or nothing joins them but either endpoint has edges.
    fn has_invalidity_evidence(&self, s: &Tuple) -> bool {
        let mut any_between = false;
        for r in self.base.labels_between(s.head, s.tail) {
            if r != s.relation {
                return true;
            }
            any_between = true;
        }
        !any_between && (self.base.has_vertex(s.head) || self.base.has_vertex(s.tail))
    }

    /// Linkage estimate: mean similarity of the hypothetical tuple's pattern
    /// to the sampled patterns of `r`; 0 when nothing can be sampled.
    pub fn predict_link(&self, head: EntityId, tail: EntityId, r: RelationLabel) -> Result<f64> {
        Ok(self.evidence(&Tuple::new(head, r, tail))?.report.mean_similarity)
    }
}

#[derive(Debug, Clone)]
pub struct InstanceValidation {
    pub reports: Vec<SupportReport>,
    /// No tuple classified Invalid.
    pub legal: bool,
}

/// Classifies every tuple of an instance against `graph ∪ instance`.
pub fn validate_instance(
    graph: &GraphStore,
    instance: &[Tuple],
    cfg: &ValidationConfig,
    aux: Option<&AuxiliaryPatterns>,
    cache: Option<&EmbeddingCache>,
) -> Result<InstanceValidation> {
    cfg.check()?;
    let snapshot = Overlay::new(graph, instance.iter().copied())?;
    let validator = Validator::new(graph, cfg)
        .with_context(&snapshot)
        .with_aux(aux)
        .with_cache(cache);
    let reports = instance
        .par_iter()
        .map(|s| validator.classify(s))
        .collect::<Result<Vec<_>>>()?;
    let legal = reports.iter().all(|r| r.status != Some(Status::Invalid));
    Ok(InstanceValidation { reports, legal })
}
