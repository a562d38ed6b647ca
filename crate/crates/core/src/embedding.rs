//! Central-relation-focused path embeddings of localized patterns.
//!
//! An embedding is a multiset of relation-label sequences. Each sequence is
//! the center label plus the labels of a walk pair: a walk of `a` edges
//! leaving the head and a walk of `b` edges leaving the tail, `a + b = l`.
//! Walks follow pattern edges in either direction and may revisit vertices.
//! Edges joining the head and tail (any label, either orientation) are not
//! walked. The count of a sequence is the number of walk pairs producing it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::graph_store::{EntityId, RelationLabel, Symbols, Tuple};
use crate::pattern::{LocalizedPattern, NeighborhoodRule};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Canonicalization {
    /// Sequences are sorted, so only the multiset of labels matters.
    #[default]
    Sorted,
    /// Sequences read from the far end of the head walk to the far end of
    /// the tail walk.
    Positional,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Traversal {
    /// Labels are recorded without direction.
    #[default]
    Undirected,
    /// Side labels carry `+` when the edge was walked head-to-tail and `-`
    /// when walked against its direction.
    DirectionMarked,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingOptions {
    pub canonicalization: Canonicalization,
    pub traversal: Traversal,
}

impl EmbeddingOptions {
    pub fn positional() -> Self {
        EmbeddingOptions {
            canonicalization: Canonicalization::Positional,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StepDirection {
    Plain,
    Forward,
    Backward,
}

/// One label in a path sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub label: RelationLabel,
    pub direction: StepDirection,
}

impl Step {
    pub fn plain(label: RelationLabel) -> Self {
        Step {
            label,
            direction: StepDirection::Plain,
        }
    }

    pub fn name(&self, symbols: &Symbols) -> String {
        let label = symbols.relation_name(self.label);
        match self.direction {
            StepDirection::Plain => label.to_string(),
            StepDirection::Forward => format!("{label}+"),
            StepDirection::Backward => format!("{label}-"),
        }
    }
}

pub type PathKey = SmallVec<[Step; 4]>;

/// Output of [`traverse_r`]: canonical label sequences with walk-pair counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathEmbedding {
    center: RelationLabel,
    radius: u32,
    options: EmbeddingOptions,
    paths: BTreeMap<PathKey, u64>,
    size: u64,
}

impl PathEmbedding {
    pub fn empty(center: RelationLabel, radius: u32, options: EmbeddingOptions) -> Self {
        PathEmbedding {
            center,
            radius,
            options,
            paths: BTreeMap::new(),
            size: 0,
        }
    }

    /// Builds an embedding from raw sequences, canonicalizing them per `options`.
    /// Zero counts are dropped.
    pub fn from_paths(
        center: RelationLabel,
        radius: u32,
        options: EmbeddingOptions,
        paths: impl IntoIterator<Item = (PathKey, u64)>,
    ) -> Self {
        let mut m = PathEmbedding::empty(center, radius, options);
        for (mut key, count) in paths {
            if count == 0 {
                continue;
            }
            if options.canonicalization == Canonicalization::Sorted {
                key.sort_unstable();
            }
            *m.paths.entry(key).or_default() += count;
            m.size += count;
        }
        m
    }

    pub fn center(&self) -> RelationLabel {
        self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn options(&self) -> EmbeddingOptions {
        self.options
    }

    /// Multiset size: the sum of all counts.
    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn distinct(&self) -> usize {
        self.paths.len()
    }

    pub fn count(&self, key: &[Step]) -> u64 {
        self.paths.get(key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PathKey, u64)> + '_ {
        self.paths.iter().map(|(k, &c)| (k, c))
    }

    /// Sequences rendered as label strings. Sorted mode re-sorts each
    /// sequence by string so the rendering is independent of interning order.
    pub fn named(&self, symbols: &Symbols) -> BTreeMap<Vec<String>, u64> {
        let mut out = BTreeMap::new();
        for (key, count) in self.iter() {
            let mut names: Vec<String> = key.iter().map(|s| s.name(symbols)).collect();
            if self.options.canonicalization == Canonicalization::Sorted {
                names.sort();
            }
            *out.entry(names).or_default() += count;
        }
        out
    }

    /// `label1,label2,...<TAB>count` lines, sorted lexicographically.
    pub fn lines(&self, symbols: &Symbols) -> Vec<String> {
        let mut lines: Vec<String> = self
            .named(symbols)
            .into_iter()
            .map(|(names, count)| format!("{}\t{count}", names.join(",")))
            .collect();
        lines.sort();
        lines
    }
}

type SidePath = SmallVec<[Step; 4]>;

struct LocalAdjacency {
    adj: HashMap<EntityId, Vec<(Step, EntityId)>>,
}

impl LocalAdjacency {
    fn new(p: &LocalizedPattern, traversal: Traversal) -> Self {
        let c = p.center();
        let mut adj: HashMap<EntityId, Vec<(Step, EntityId)>> = HashMap::new();
        let mark = |label, dir| Step {
            label,
            direction: match traversal {
                Traversal::Undirected => StepDirection::Plain,
                Traversal::DirectionMarked => dir,
            },
        };
        for e in p.edges() {
            if e.joins(c.head, c.tail) {
                continue;
            }
            adj.entry(e.head)
                .or_default()
                .push((mark(e.relation, StepDirection::Forward), e.tail));
            if e.head != e.tail {
                adj.entry(e.tail)
                    .or_default()
                    .push((mark(e.relation, StepDirection::Backward), e.head));
            }
        }
        LocalAdjacency { adj }
    }

    /// Walk label sequences of each length 0..=l leaving `start`, with counts.
    fn side_walks(&self, start: EntityId, l: u32, sorted: bool) -> Vec<HashMap<SidePath, u64>> {
        let mut by_len = Vec::with_capacity(l as usize + 1);
        let mut frontier: HashMap<(EntityId, SidePath), u64> = HashMap::new();
        frontier.insert((start, SidePath::new()), 1);
        by_len.push(HashMap::from([(SidePath::new(), 1)]));
        for _ in 0..l {
            let mut next: HashMap<(EntityId, SidePath), u64> = HashMap::new();
            for ((v, path), count) in &frontier {
                let Some(edges) = self.adj.get(v) else { continue };
                for &(step, w) in edges {
                    let mut extended = path.clone();
                    if sorted {
                        let at = extended.partition_point(|s| *s <= step);
                        extended.insert(at, step);
                    } else {
                        extended.push(step);
                    }
                    *next.entry((w, extended)).or_default() += count;
                }
            }
            let mut layer: HashMap<SidePath, u64> = HashMap::new();
            for ((_, path), count) in &next {
                *layer.entry(path.clone()).or_default() += count;
            }
            by_len.push(layer);
            frontier = next;
        }
        by_len
    }
}

/// Computes the central-walk embedding of `p` for walk budget `l`.
pub fn traverse_r(p: &LocalizedPattern, l: u32, options: EmbeddingOptions) -> Result<PathEmbedding> {
    if l < 1 || l > p.radius() {
        return Err(Error::Config(format!(
            "embedding length {l} must be within 1..={}",
            p.radius()
        )));
    }
    let c = p.center();
    let sorted = options.canonicalization == Canonicalization::Sorted;
    let local = LocalAdjacency::new(p, options.traversal);
    let head = local.side_walks(c.head, l, sorted);
    let tail = local.side_walks(c.tail, l, sorted);
    let center_step = Step::plain(c.relation);

    let mut paths: BTreeMap<PathKey, u64> = BTreeMap::new();
    for (a, head_walks) in head.iter().enumerate().take(l as usize + 1) {
        let b = l as usize - a;
        for (hp, hc) in head_walks {
            for (tp, tc) in &tail[b] {
                let mut key = PathKey::with_capacity(l as usize + 1);
                if sorted {
                    key.extend(hp.iter().copied());
                    key.push(center_step);
                    key.extend(tp.iter().copied());
                    key.sort_unstable();
                } else {
                    key.extend(hp.iter().rev().copied());
                    key.push(center_step);
                    key.extend(tp.iter().copied());
                }
                *paths.entry(key).or_default() += hc * tc;
            }
        }
    }
    let size = paths.values().sum();
    Ok(PathEmbedding {
        center: c.relation,
        radius: l,
        options,
        paths,
        size,
    })
}

fn check_comparable(m1: &PathEmbedding, m2: &PathEmbedding) -> Result<()> {
    if m1.center != m2.center {
        return Err(Error::Incomparable("center labels differ".into()));
    }
    if m1.radius != m2.radius {
        return Err(Error::Incomparable(format!("lengths differ ({} vs {})", m1.radius, m2.radius)));
    }
    if m1.options != m2.options {
        return Err(Error::Incomparable("canonicalization or traversal modes differ".into()));
    }
    Ok(())
}

/// Distance between two sequences: multiset distance for sorted keys,
/// Levenshtein distance for positional keys.
fn sequence_distance(a: &[Step], b: &[Step], canonicalization: Canonicalization) -> usize {
    match canonicalization {
        Canonicalization::Sorted => {
            let (mut i, mut j, mut common) = (0, 0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        common += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            (a.len() - common).max(b.len() - common)
        }
        Canonicalization::Positional => {
            let mut prev: Vec<usize> = (0..=b.len()).collect();
            let mut cur = vec![0; b.len() + 1];
            for (i, x) in a.iter().enumerate() {
                cur[0] = i + 1;
                for (j, y) in b.iter().enumerate() {
                    let sub = prev[j] + usize::from(x != y);
                    cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
                }
                std::mem::swap(&mut prev, &mut cur);
            }
            prev[b.len()]
        }
    }
}

/// Size of the multiset intersection. With `tolerance > 0`, sequences within
/// that edit distance may be matched; each count is consumed at most once and
/// the largest total matching is taken.
pub fn intersection_size(m1: &PathEmbedding, m2: &PathEmbedding, tolerance: usize) -> Result<u64> {
    check_comparable(m1, m2)?;
    if tolerance == 0 {
        let (small, large) = if m1.distinct() <= m2.distinct() { (m1, m2) } else { (m2, m1) };
        return Ok(small.iter().map(|(k, c)| c.min(large.count(k))).sum());
    }
    let left: Vec<_> = m1.iter().collect();
    let right: Vec<_> = m2.iter().collect();
    let mut links = vec![Vec::new(); left.len()];
    for (i, (a, _)) in left.iter().enumerate() {
        for (j, (b, _)) in right.iter().enumerate() {
            if sequence_distance(a, b, m1.options.canonicalization) <= tolerance {
                links[i].push(j);
            }
        }
    }
    let supply: Vec<u64> = left.iter().map(|&(_, c)| c).collect();
    let demand: Vec<u64> = right.iter().map(|&(_, c)| c).collect();
    Ok(transport_max_flow(&supply, &demand, &links))
}

/// Maximum flow through a bipartite network with capacitated sources and
/// sinks and uncapacitated links (Edmonds-Karp).
fn transport_max_flow(supply: &[u64], demand: &[u64], links: &[Vec<usize>]) -> u64 {
    let n1 = supply.len();
    let n2 = demand.len();
    let source = n1 + n2;
    let sink = source + 1;
    let n = sink + 1;
    // residual[u] maps v -> capacity
    let mut residual: Vec<HashMap<usize, u64>> = vec![HashMap::new(); n];
    for (i, &s) in supply.iter().enumerate() {
        residual[source].insert(i, s);
        residual[i].entry(source).or_insert(0);
    }
    for (j, &d) in demand.iter().enumerate() {
        residual[n1 + j].insert(sink, d);
        residual[sink].entry(n1 + j).or_insert(0);
    }
    for (i, targets) in links.iter().enumerate() {
        for &j in targets {
            residual[i].insert(n1 + j, u64::MAX);
            residual[n1 + j].entry(i).or_insert(0);
        }
    }
    let mut total = 0u64;
    loop {
        let mut parent = vec![usize::MAX; n];
        parent[source] = source;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            let mut next: Vec<usize> = residual[u]
                .iter()
                .filter(|&(&v, &cap)| cap > 0 && parent[v] == usize::MAX)
                .map(|(&v, _)| v)
                .collect();
            next.sort_unstable();
            for v in next {
                parent[v] = u;
                queue.push_back(v);
            }
        }
        if parent[sink] == usize::MAX {
            return total;
        }
        let mut bottleneck = u64::MAX;
        let mut v = sink;
        while v != source {
            let u = parent[v];
            bottleneck = bottleneck.min(residual[u][&v]);
            v = u;
        }
        let mut v = sink;
        while v != source {
            let u = parent[v];
            let fwd = residual[u].get_mut(&v).expect("edge on path");
            if *fwd != u64::MAX {
                *fwd -= bottleneck;
            }
            let back = residual[v].entry(u).or_insert(0);
            *back = back.saturating_add(bottleneck);
            v = u;
        }
        total += bottleneck;
    }
}

/// `|M1 ∩ M2| / min(|M1|, |M2|)`, or 0 when either side is empty.
pub fn similarity(m1: &PathEmbedding, m2: &PathEmbedding, tolerance: usize) -> Result<f64> {
    let common = intersection_size(m1, m2, tolerance)?;
    let denom = m1.size.min(m2.size);
    if denom == 0 {
        return Ok(0.0);
    }
    Ok(common as f64 / denom as f64)
}

/// Key for cached embeddings of stored (non-hypothetical) patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub center: Tuple,
    pub radius: u32,
    pub options: EmbeddingOptions,
    pub rule: NeighborhoodRule,
    /// Distinguishes graphs that share a symbol table (target vs auxiliary).
    pub origin: u8,
    pub version: u64,
}

/// Concurrent embedding cache. Racing inserts are benign: the value for a
/// key is deterministic, so the last writer wins.
#[derive(Default)]
pub struct EmbeddingCache {
    map: DashMap<CacheKey, Arc<PathEmbedding>>,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_try_insert(
        &self,
        key: CacheKey,
        compute: impl FnOnce() -> Result<PathEmbedding>,
    ) -> Result<Arc<PathEmbedding>> {
        if let Some(hit) = self.map.get(&key) {
            return Ok(hit.clone());
        }
        let value = Arc::new(compute()?);
        self.map.insert(key, value.clone());
        Ok(value)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn clear(&self) {
        self.map.clear();
    }
}

impl fmt::Debug for EmbeddingCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmbeddingCache").field("entries", &self.map.len()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::GraphStore;
    use crate::pattern::extract_pattern;

    fn embedding(sym: &Symbols, center: &str, paths: &[(&[&str], u64)]) -> PathEmbedding {
        PathEmbedding::from_paths(
            sym.relation(center),
            1,
            EmbeddingOptions::default(),
            paths.iter().map(|(labels, c)| {
                (labels.iter().map(|l| Step::plain(sym.relation(l))).collect(), *c)
            }),
        )
    }

    #[test]
    fn single_edge_embeds_to_empty() {
        let sym = Symbols::new();
        let c = sym.tuple("h", "r", "t");
        let g = GraphStore::from_tuples(sym.clone(), [c]).unwrap();
        let p = extract_pattern(&g, c, 1, NeighborhoodRule::Union).unwrap();
        let m = traverse_r(&p, 1, EmbeddingOptions::default()).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn parallel_center_edges_are_not_walked() {
        let sym = Symbols::new();
        let c = sym.tuple("h", "r", "t");
        let g = GraphStore::from_tuples(
            sym.clone(),
            [c, sym.tuple("t", "x", "h"), sym.tuple("h", "y", "t"), sym.tuple("h", "z", "a")],
        )
        .unwrap();
        let p = extract_pattern(&g, c, 1, NeighborhoodRule::Union).unwrap();
        let m = traverse_r(&p, 1, EmbeddingOptions::default()).unwrap();
        assert_eq!(m.lines(&sym), vec!["r,z\t1"]);
    }

    #[test]
    fn length_must_fit_radius() {
        let sym = Symbols::new();
        let c = sym.tuple("h", "r", "t");
        let g = GraphStore::from_tuples(sym.clone(), [c]).unwrap();
        let p = extract_pattern(&g, c, 1, NeighborhoodRule::Union).unwrap();
        assert!(traverse_r(&p, 2, EmbeddingOptions::default()).is_err());
        assert!(traverse_r(&p, 0, EmbeddingOptions::default()).is_err());
    }

    #[test]
    fn intersection_examples() {
        let sym = Symbols::new();
        let m1 = embedding(&sym, "C", &[(&["C", "p"], 2), (&["C", "q"], 1)]);
        let m2 = embedding(&sym, "C", &[(&["C", "p"], 1), (&["C", "s"], 5)]);
        assert_eq!(intersection_size(&m1, &m1, 0).unwrap(), 3);
        assert_eq!(intersection_size(&m1, &m2, 0).unwrap(), 1);
        let m3 = embedding(&sym, "C", &[(&["C", "z"], 4)]);
        assert_eq!(intersection_size(&m1, &m3, 0).unwrap(), 0);
        assert!((similarity(&m1, &m2, 0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(similarity(&m1, &m1, 0).unwrap(), 1.0);
    }

    #[test]
    fn empty_side_has_zero_similarity() {
        let sym = Symbols::new();
        let m1 = embedding(&sym, "C", &[(&["C", "p"], 2)]);
        let empty = PathEmbedding::empty(sym.relation("C"), 1, EmbeddingOptions::default());
        assert_eq!(similarity(&m1, &empty, 0).unwrap(), 0.0);
        assert_eq!(similarity(&empty, &empty, 0).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_embeddings_are_rejected() {
        let sym = Symbols::new();
        let m1 = embedding(&sym, "C", &[(&["C", "p"], 2)]);
        let m2 = embedding(&sym, "D", &[(&["D", "p"], 2)]);
        assert!(matches!(similarity(&m1, &m2, 0), Err(Error::Incomparable(_))));
        let m3 = PathEmbedding::empty(sym.relation("C"), 2, EmbeddingOptions::default());
        assert!(similarity(&m1, &m3, 0).is_err());
        let m4 = PathEmbedding::empty(sym.relation("C"), 1, EmbeddingOptions::positional());
        assert!(similarity(&m1, &m4, 0).is_err());
    }

    #[test]
    fn tolerance_merges_near_sequences() {
        let sym = Symbols::new();
        let m1 = embedding(&sym, "C", &[(&["C", "p"], 2), (&["C", "q"], 1)]);
        let m2 = embedding(&sym, "C", &[(&["C", "s"], 5)]);
        // every (C,x) is one substitution away from (C,s)
        assert_eq!(intersection_size(&m1, &m2, 0).unwrap(), 0);
        assert_eq!(intersection_size(&m1, &m2, 1).unwrap(), 3);
        assert_eq!(intersection_size(&m2, &m1, 1).unwrap(), 3);
        assert_eq!(similarity(&m1, &m2, 1).unwrap(), 1.0);
    }

    #[test]
    fn levenshtein_on_positional_keys() {
        let sym = Symbols::new();
        let s = |names: &[&str]| -> Vec<Step> { names.iter().map(|n| Step::plain(sym.relation(n))).collect() };
        let d = |a: &[&str], b: &[&str]| sequence_distance(&s(a), &s(b), Canonicalization::Positional);
        assert_eq!(d(&["a", "C", "b"], &["a", "C", "b"]), 0);
        assert_eq!(d(&["a", "C", "b"], &["b", "C", "a"]), 2);
        assert_eq!(d(&["a", "C"], &["C", "a"]), 2);
        assert_eq!(d(&["a", "C", "b"], &["a", "C"]), 1);
    }

    #[test]
    fn max_flow_beats_greedy_order() {
        // greedy left-to-right would pair 0->0 and strand 1
        let flow = transport_max_flow(&[1, 1], &[1, 1], &[vec![0, 1], vec![0]]);
        assert_eq!(flow, 2);
    }

    #[test]
    fn cache_returns_stored_value() {
        let sym = Symbols::new();
        let cache = EmbeddingCache::new();
        let key = CacheKey {
            center: sym.tuple("a", "r", "b"),
            radius: 1,
            options: EmbeddingOptions::default(),
            rule: NeighborhoodRule::Union,
            origin: 0,
            version: 0,
        };
        let first = cache
            .get_or_try_insert(key, || Ok(embedding(&sym, "r", &[(&["r", "x"], 1)])))
            .unwrap();
        let second = cache.get_or_try_insert(key, || panic!("should hit")).unwrap();
        assert_eq!(first, second);
        assert_eq!(cache.len(), 1);
        cache.clear();
        assert!(cache.is_empty());
    }
}
