//! Brute-force reference implementations for tiny inputs.
//!
//! Everything here is deliberately naive: explicit walk enumeration,
//! all-pairs shortest paths, and backtracking subgraph matching. Inputs are
//! capped hard so the tests that use these stay fast.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use kgrepair::embedding::{Canonicalization, EmbeddingOptions, Traversal};
use kgrepair::pattern::{extract_pattern, LocalizedPattern, NeighborhoodRule};
use kgrepair::{EntityId, GraphStore, Symbols, Tuple};

pub mod gen;

pub const MAX_WALK_VERTICES: usize = 12;
pub const MAX_WALK_LENGTH: u32 = 3;
pub const MAX_SUPPORT_VERTICES: usize = 12;
pub const MAX_SIM_VERTICES: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("input too large for the oracle: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Core(#[from] kgrepair::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;

fn too_large(what: &str, got: usize, cap: usize) -> OracleError {
    OracleError::TooLarge(format!("{what} {got} exceeds {cap}"))
}

/// One side step: the edge walked and whether it was walked head to tail.
#[derive(Clone, Copy)]
struct Walked {
    edge: Tuple,
    forward: bool,
}

fn step_name(w: Walked, symbols: &Symbols, traversal: Traversal) -> String {
    let label = symbols.relation_name(w.edge.relation).to_string();
    match traversal {
        Traversal::Undirected => label,
        Traversal::DirectionMarked if w.forward => format!("{label}+"),
        Traversal::DirectionMarked => format!("{label}-"),
    }
}

/// Every walk of exactly `len` edges leaving `v`, as explicit edge lists.
fn walks_from(edges: &[Tuple], v: EntityId, len: u32, prefix: &mut Vec<Walked>, out: &mut Vec<Vec<Walked>>) {
    if len == 0 {
        out.push(prefix.clone());
        return;
    }
    for &e in edges {
        if e.head == v {
            prefix.push(Walked { edge: e, forward: true });
            walks_from(edges, e.tail, len - 1, prefix, out);
            prefix.pop();
        }
        // a self-loop is one way of leaving v, not two
        if e.tail == v && e.head != v {
            prefix.push(Walked { edge: e, forward: false });
            walks_from(edges, e.head, len - 1, prefix, out);
            prefix.pop();
        }
    }
}

/// Exhaustive central-walk multiset: for each split `a + b = l`, every walk
/// of `a` edges from the head paired with every walk of `b` edges from the
/// tail, never walking an edge that joins head and tail.
pub fn enumerate_central_walks(
    p: &LocalizedPattern,
    l: u32,
    options: EmbeddingOptions,
    symbols: &Symbols,
) -> Result<BTreeMap<Vec<String>, u64>> {
    if p.size() > MAX_WALK_VERTICES {
        return Err(too_large("pattern vertex count", p.size(), MAX_WALK_VERTICES));
    }
    if l > MAX_WALK_LENGTH {
        return Err(too_large("walk length", l as usize, MAX_WALK_LENGTH as usize));
    }
    let c = p.center();
    let walkable: Vec<Tuple> = p.edges().iter().copied().filter(|e| !e.joins(c.head, c.tail)).collect();
    let center = symbols.relation_name(c.relation).to_string();

    let mut out = BTreeMap::new();
    for a in 0..=l {
        let mut heads = Vec::new();
        let mut tails = Vec::new();
        walks_from(&walkable, c.head, a, &mut Vec::new(), &mut heads);
        walks_from(&walkable, c.tail, l - a, &mut Vec::new(), &mut tails);
        for hw in &heads {
            for tw in &tails {
                let mut seq: Vec<String> = hw.iter().rev().map(|&w| step_name(w, symbols, options.traversal)).collect();
                seq.push(center.clone());
                seq.extend(tw.iter().map(|&w| step_name(w, symbols, options.traversal)));
                if options.canonicalization == Canonicalization::Sorted {
                    seq.sort();
                }
                *out.entry(seq).or_insert(0) += 1;
            }
        }
    }
    Ok(out)
}

/// Pattern vertex set and edge set computed from the definition: all-pairs
/// hop distances over `g ∪ {center}` ignoring direction, then the
/// neighborhood predicate, then every edge with both endpoints inside.
pub fn predicate_pattern(
    g: &GraphStore,
    center: Tuple,
    l: u32,
    rule: NeighborhoodRule,
) -> (BTreeSet<EntityId>, BTreeSet<Tuple>) {
    let mut all: Vec<Tuple> = g.sorted_tuples();
    if !g.contains(&center) {
        all.push(center);
    }
    let mut verts: Vec<EntityId> = all.iter().flat_map(|e| [e.head, e.tail]).collect();
    verts.sort();
    verts.dedup();
    let idx = |v: EntityId| verts.binary_search(&v).unwrap();
    let n = verts.len();
    const INF: u32 = u32::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in &all {
        let (a, b) = (idx(e.head), idx(e.tail));
        if a != b {
            d[a][b] = 1;
            d[b][a] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let (h, t) = (idx(center.head), idx(center.tail));
    let inside: BTreeSet<EntityId> = (0..n)
        .filter(|&v| match rule {
            NeighborhoodRule::Union => d[h][v] <= l || d[t][v] <= l,
            NeighborhoodRule::Intersection => d[h][v] <= l && d[t][v] <= l,
        })
        .map(|v| verts[v])
        .collect();
    let edges = all
        .into_iter()
        .filter(|e| inside.contains(&e.head) && inside.contains(&e.tail))
        .collect();
    (inside, edges)
}

/// Whether the edge set `sub` (containing `sub_center`) maps into `target`
/// by an injective, label- and direction-preserving vertex map sending the
/// center tuple onto `target_center`.
pub fn embeds_into(sub: &BTreeSet<Tuple>, sub_center: Tuple, target: &BTreeSet<Tuple>, target_center: Tuple) -> bool {
    if sub_center.relation != target_center.relation {
        return false;
    }
    let mut map: BTreeMap<EntityId, EntityId> = BTreeMap::new();
    let mut used: HashSet<EntityId> = HashSet::new();
    if !bind(&mut map, &mut used, sub_center.head, target_center.head)
        || !bind(&mut map, &mut used, sub_center.tail, target_center.tail)
    {
        return false;
    }
    let mut verts: Vec<EntityId> = sub.iter().flat_map(|e| [e.head, e.tail]).collect();
    verts.sort();
    verts.dedup();
    verts.retain(|v| !map.contains_key(v));
    let target_verts: Vec<EntityId> = {
        let mut v: Vec<EntityId> = target.iter().flat_map(|e| [e.head, e.tail]).collect();
        v.sort();
        v.dedup();
        v
    };
    extend_map(sub, target, &verts, &target_verts, &mut map, &mut used)
}

fn bind(map: &mut BTreeMap<EntityId, EntityId>, used: &mut HashSet<EntityId>, a: EntityId, b: EntityId) -> bool {
    match map.get(&a) {
        Some(&x) => x == b,
        None => {
            if !used.insert(b) {
                return false;
            }
            map.insert(a, b);
            true
        }
    }
}

fn consistent(sub: &BTreeSet<Tuple>, target: &BTreeSet<Tuple>, map: &BTreeMap<EntityId, EntityId>) -> bool {
    sub.iter().all(|e| match (map.get(&e.head), map.get(&e.tail)) {
        (Some(&h), Some(&t)) => target.contains(&Tuple::new(h, e.relation, t)),
        _ => true,
    })
}

fn extend_map(
    sub: &BTreeSet<Tuple>,
    target: &BTreeSet<Tuple>,
    rest: &[EntityId],
    target_verts: &[EntityId],
    map: &mut BTreeMap<EntityId, EntityId>,
    used: &mut HashSet<EntityId>,
) -> bool {
    if !consistent(sub, target, map) {
        return false;
    }
    let Some((&v, rest)) = rest.split_first() else {
        return true;
    };
    for &w in target_verts {
        if used.contains(&w) {
            continue;
        }
        map.insert(v, w);
        used.insert(w);
        if extend_map(sub, target, rest, target_verts, map, used) {
            return true;
        }
        map.remove(&v);
        used.remove(&w);
    }
    false
}

/// Supporting subgraphs of `pattern` in `g`: for every other occurrence `s'`
/// of the center label, each connected edge subset of `s'`'s localized
/// pattern that contains `s'`, has at most `max_edges` edges and embeds into
/// `pattern` with `s'` sent onto the center. Distinct edge sets are returned.
pub fn exact_support(g: &GraphStore, pattern: &LocalizedPattern, max_edges: usize) -> Result<Vec<BTreeSet<Tuple>>> {
    if g.vertex_count() > MAX_SUPPORT_VERTICES {
        return Err(too_large("graph vertex count", g.vertex_count(), MAX_SUPPORT_VERTICES));
    }
    let c = pattern.center();
    let target: BTreeSet<Tuple> = pattern.edges().iter().copied().collect();
    let mut found: BTreeSet<BTreeSet<Tuple>> = BTreeSet::new();
    for s in g.tuples_with_relation(c.relation) {
        if s == c {
            continue;
        }
        let other = extract_pattern(g, s, pattern.radius(), pattern.rule())?;
        let pool: Vec<Tuple> = other.edges().to_vec();
        let start = BTreeSet::from([s]);
        if !embeds_into(&start, s, &target, c) {
            continue;
        }
        let mut seen: HashSet<BTreeSet<Tuple>> = HashSet::new();
        grow(&start, s, &pool, &target, c, max_edges, &mut seen);
        found.extend(seen);
    }
    Ok(found.into_iter().collect())
}

fn grow(
    current: &BTreeSet<Tuple>,
    s: Tuple,
    pool: &[Tuple],
    target: &BTreeSet<Tuple>,
    c: Tuple,
    max_edges: usize,
    seen: &mut HashSet<BTreeSet<Tuple>>,
) {
    if !seen.insert(current.clone()) || current.len() >= max_edges {
        return;
    }
    let touched: HashSet<EntityId> = current.iter().flat_map(|e| [e.head, e.tail]).collect();
    for &e in pool {
        if current.contains(&e) || !(touched.contains(&e.head) || touched.contains(&e.tail)) {
            continue;
        }
        let mut next = current.clone();
        next.insert(e);
        if seen.contains(&next) || !embeds_into(&next, s, target, c) {
            continue;
        }
        grow(&next, s, pool, target, c, max_edges, seen);
    }
}

/// A vertex correspondence between two patterns, center endpoints included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchWitness {
    pub pairs: BTreeMap<EntityId, EntityId>,
}

impl MatchWitness {
    pub fn matched(&self) -> usize {
        self.pairs.len()
    }
}

/// Largest vertex correspondence whose preserved edges connect all matched
/// vertices, with the center tuples forced to correspond. `None` when the
/// center labels differ.
pub fn best_matching(p1: &LocalizedPattern, p2: &LocalizedPattern) -> Result<Option<MatchWitness>> {
    for p in [p1, p2] {
        if p.size() > MAX_SIM_VERTICES {
            return Err(too_large("pattern vertex count", p.size(), MAX_SIM_VERTICES));
        }
    }
    let (c1, c2) = (p1.center(), p2.center());
    if c1.relation != c2.relation {
        return Ok(None);
    }
    let e1: Vec<Tuple> = p1.edges().to_vec();
    let e2: BTreeSet<Tuple> = p2.edges().iter().copied().collect();
    let mut start = BTreeMap::from([(c1.head, c2.head)]);
    if start.insert(c1.tail, c2.tail).is_some_and(|prev| prev != c2.tail) || (c1.head == c1.tail) != (c2.head == c2.tail) {
        return Ok(None);
    }
    let mut best = start.clone();
    let mut visited: HashSet<Vec<(EntityId, EntityId)>> = HashSet::new();
    search(&e1, &e2, start, &mut best, &mut visited);
    Ok(Some(MatchWitness { pairs: best }))
}

fn search(
    e1: &[Tuple],
    e2: &BTreeSet<Tuple>,
    map: BTreeMap<EntityId, EntityId>,
    best: &mut BTreeMap<EntityId, EntityId>,
    visited: &mut HashSet<Vec<(EntityId, EntityId)>>,
) {
    if !visited.insert(map.iter().map(|(&a, &b)| (a, b)).collect()) {
        return;
    }
    if map.len() > best.len() {
        *best = map.clone();
    }
    let image: HashSet<EntityId> = map.values().copied().collect();
    for e in e1 {
        // extend across an edge with exactly one matched endpoint
        let (known, fresh, forward) = match (map.get(&e.head), map.get(&e.tail)) {
            (Some(&h), None) => (h, e.tail, true),
            (None, Some(&t)) => (t, e.head, false),
            _ => continue,
        };
        for f in e2 {
            if f.relation != e.relation {
                continue;
            }
            let candidate = match forward {
                true if f.head == known => f.tail,
                false if f.tail == known => f.head,
                _ => continue,
            };
            if image.contains(&candidate) {
                continue;
            }
            let mut next = map.clone();
            next.insert(fresh, candidate);
            search(e1, e2, next, best, visited);
        }
    }
}

/// Matched vertex count of the best matching over the smaller pattern size.
pub fn exact_sim(p1: &LocalizedPattern, p2: &LocalizedPattern) -> Result<f64> {
    Ok(match best_matching(p1, p2)? {
        Some(m) => m.matched() as f64 / p1.size().min(p2.size()) as f64,
        None => 0.0,
    })
}
