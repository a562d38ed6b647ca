//! Sliced enhancement loop: repair a slice, commit it, retry held records.
//!
//! Each slice is repaired against a frozen snapshot (read-only, parallel),
//! then committed by the single writer. Records held for lack of evidence
//! are retried with the next slice until their counter runs out.

use std::collections::{BTreeMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use parking_lot::{RwLock, RwLockReadGuard};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingCache;
use crate::error::{Error, Result};
use crate::graph_store::{parse_tuple_line, GraphStore, Symbols, Tuple, NA_STR};
use crate::repair::{repair_instance, DecisionStatus, PredictionRecord, RepairConfig, RepairDecision};
use crate::validation::AuxiliaryPatterns;

/// Prefix keeping auxiliary entities apart from target entities in the
/// shared symbol table.
const AUX_ENTITY_PREFIX: &str = "aux::";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamConfig {
    pub slice_size: usize,
    pub repair: RepairConfig,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            slice_size: 1000,
            repair: RepairConfig::default(),
        }
    }
}

impl StreamConfig {
    pub fn check(&self) -> Result<()> {
        if self.slice_size < 1 {
            return Err(Error::Config("slice size must be at least 1".into()));
        }
        self.repair.check()
    }
}

/// Per-slice metrics, written one JSON object per line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceResult {
    pub slice: usize,
    /// Records repaired in this slice, retries included.
    pub records: usize,
    pub malformed: usize,
    pub retried: usize,
    pub accepted: usize,
    pub repaired: usize,
    pub rejected: usize,
    /// Records waiting in the hold buffer after this slice.
    pub held: usize,
    /// Holds that ran out of retries in this slice.
    pub held_terminal: usize,
    pub committed: usize,
    pub per_tuple_ms: f64,
    pub version: u64,
}

#[derive(Debug, Clone)]
struct HeldRecord {
    record: PredictionRecord,
    retries: u32,
}

/// Records waiting for more context, in arrival order.
#[derive(Debug, Clone)]
pub struct HoldBuffer {
    entries: VecDeque<HeldRecord>,
    max_retries: u32,
}

impl HoldBuffer {
    pub fn new(max_retries: u32) -> Self {
        HoldBuffer {
            entries: VecDeque::new(),
            max_retries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes and returns every buffered record with its retry count so far.
    fn drain(&mut self) -> Vec<HeldRecord> {
        self.entries.drain(..).collect()
    }

    /// Buffers a record that was just held. Returns false when it has
    /// already used up its retries.
    fn hold(&mut self, record: PredictionRecord, retries: u32) -> bool {
        if retries >= self.max_retries {
            return false;
        }
        self.entries.push_back(HeldRecord { record, retries });
        true
    }
}

/// Inserts the committed finals, invalidates the cache and bumps the version.
pub fn commit(g: &mut GraphStore, decisions: &[RepairDecision], cache: Option<&EmbeddingCache>) -> Result<u64> {
    for s in decisions.iter().filter_map(RepairDecision::final_tuple) {
        g.add_tuple(s)?;
    }
    if let Some(cache) = cache {
        cache.clear();
    }
    Ok(g.bump_version())
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    /// Decision log in emission order. Held records appear once resolved
    /// or once their retries expire (`terminal`).
    pub decisions: Vec<RepairDecision>,
    pub slices: Vec<SliceResult>,
    pub malformed: usize,
    pub classifications: usize,
}

/// Runs the enhancement loop over `stream`, mutating `g` in place.
///
/// Malformed records are skipped and counted. Records still held when the
/// stream ends get one more retry in a closing retry-only slice, after
/// which they are logged as terminal holds.
pub fn run(
    g: &mut GraphStore,
    stream: impl IntoIterator<Item = Result<PredictionRecord>>,
    cfg: &StreamConfig,
    aux: Option<&AuxiliaryPatterns>,
) -> Result<RunOutput> {
    cfg.check()?;
    let cache = EmbeddingCache::new();
    let mut holds = HoldBuffer::new(cfg.repair.max_hold_iterations);
    let mut out = RunOutput::default();
    let mut stream = stream.into_iter().peekable();

    while stream.peek().is_some() {
        let mut result = SliceResult::default();
        let mut batch = Vec::new();
        for item in stream.by_ref().take(cfg.slice_size) {
            match item {
                Ok(rec) => batch.push(rec),
                Err(e) => {
                    log::warn!("skipping malformed record: {e}");
                    result.malformed += 1;
                }
            }
        }
        out.malformed += result.malformed;
        run_slice(g, batch, &mut holds, result, false, cfg, aux, &cache, &mut out)?;
    }
    if !holds.is_empty() {
        // one last retry against the final graph; whatever is still held is terminal
        run_slice(g, Vec::new(), &mut holds, SliceResult::default(), true, cfg, aux, &cache, &mut out)?;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_slice(
    g: &mut GraphStore,
    fresh: Vec<PredictionRecord>,
    holds: &mut HoldBuffer,
    mut result: SliceResult,
    last: bool,
    cfg: &StreamConfig,
    aux: Option<&AuxiliaryPatterns>,
    cache: &EmbeddingCache,
    out: &mut RunOutput,
) -> Result<()> {
    result.slice = out.slices.len();
    let retries = holds.drain();
    result.retried = retries.len();
    let mut counters: Vec<u32> = retries.iter().map(|h| h.retries + 1).collect();
    let mut batch: Vec<PredictionRecord> = retries.into_iter().map(|h| h.record).collect();
    counters.resize(counters.len() + fresh.len(), 0);
    batch.extend(fresh);
    result.records = batch.len();

    let started = Instant::now();
    let outcome = repair_instance(g, &batch, &cfg.repair, aux, Some(cache))?;
    if !batch.is_empty() {
        result.per_tuple_ms = started.elapsed().as_secs_f64() * 1e3 / batch.len() as f64;
    }
    out.classifications += outcome.classifications;

    let mut emitted = Vec::with_capacity(outcome.decisions.len());
    for ((mut d, rec), retries) in outcome.decisions.into_iter().zip(batch).zip(counters) {
        match d.status {
            DecisionStatus::Accepted => result.accepted += 1,
            DecisionStatus::Repaired => result.repaired += 1,
            DecisionStatus::Rejected => result.rejected += 1,
            DecisionStatus::Held => {
                if !last && holds.hold(rec, retries) {
                    continue;
                }
                d.terminal = true;
                result.held_terminal += 1;
            }
        }
        emitted.push(d);
    }
    result.held = holds.len();
    result.committed = result.accepted + result.repaired;
    result.version = commit(g, &emitted, Some(cache))?;
    log::debug!(
        "slice {}: discovery skipped, constraints stay implicit in the stored patterns",
        result.slice
    );
    out.decisions.extend(emitted);
    out.slices.push(result);
    Ok(())
}

/// Graph behind a reader/writer lock: repair phases hold read guards,
/// commits take the write lock, so no reader sees a half-applied slice.
#[derive(Debug, Clone)]
pub struct SharedGraph {
    inner: Arc<RwLock<GraphStore>>,
}

impl SharedGraph {
    pub fn new(g: GraphStore) -> Self {
        SharedGraph {
            inner: Arc::new(RwLock::new(g)),
        }
    }

    pub fn snapshot(&self) -> RwLockReadGuard<'_, GraphStore> {
        self.inner.read()
    }

    pub fn commit(&self, decisions: &[RepairDecision], cache: Option<&EmbeddingCache>) -> Result<u64> {
        commit(&mut self.inner.write(), decisions, cache)
    }

    pub fn into_inner(self) -> Option<GraphStore> {
        Arc::try_unwrap(self.inner).ok().map(RwLock::into_inner)
    }
}

/// Mapping from auxiliary relation labels to target labels. Labels without
/// an entry are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap {
    map: BTreeMap<String, String>,
}

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a mapping. A target of `NA` is the same as no mapping.
    pub fn insert(&mut self, aux: impl Into<String>, target: impl Into<String>) {
        let aux = aux.into();
        let target = target.into();
        if target == NA_STR {
            self.map.remove(&aux);
        } else {
            self.map.insert(aux, target);
        }
    }

    pub fn get(&self, aux: &str) -> Option<&str> {
        self.map.get(aux).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Reads `aux_label<TAB>target_label` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let mut map = LabelMap::new();
        for (idx, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            let Some(fields) = parse_tuple_line(&line) else {
                continue;
            };
            match fields[..] {
                [a, t] if !a.is_empty() && !t.is_empty() => map.insert(a, t),
                _ => return Err(Error::format(path, idx + 1, "expected aux_label<TAB>target_label")),
            }
        }
        Ok(map)
    }
}

/// Builds the auxiliary pattern source from an auxiliary graph file.
/// Edges are relabeled through `map`; unmapped edges are dropped.
pub fn integrate_aux(symbols: &Arc<Symbols>, aux_graph: &Path, map: &LabelMap) -> Result<AuxiliaryPatterns> {
    let mut g = GraphStore::new(symbols.clone());
    let mut dropped = 0usize;
    for (idx, line) in BufReader::new(File::open(aux_graph)?).lines().enumerate() {
        let line = line?;
        let Some(fields) = parse_tuple_line(&line) else {
            continue;
        };
        let [h, r, t] = fields[..] else {
            return Err(Error::format(
                aux_graph,
                idx + 1,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        let Some(target) = map.get(r) else {
            dropped += 1;
            continue;
        };
        let head = symbols.entity(&format!("{AUX_ENTITY_PREFIX}{h}"));
        let tail = symbols.entity(&format!("{AUX_ENTITY_PREFIX}{t}"));
        g.add_tuple(Tuple::new(head, symbols.relation(target), tail))?;
    }
    log::info!(
        "auxiliary graph: {} mapped edges, {} unmapped edges dropped",
        g.edge_count(),
        dropped
    );
    Ok(AuxiliaryPatterns::new(g))
}
