//! Indexed directed multigraph of RDF tuples.
//!
//! Tuples use set semantics: inserting an identical tuple twice is a no-op,
//! but parallel edges with different labels between the same endpoints are
//! kept. A vertex exists exactly while it has at least one incident edge.

mod symbols;
mod tsv;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use indexmap::IndexSet;
use serde::Serialize;

use crate::error::{Error, Result};

pub use symbols::{DisplayTuple, EntityId, RelationLabel, Symbols, Tuple, NA_STR};
pub use tsv::{parse_tuple_line, read_tuples, write_tuples};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    Inserted,
    AlreadyPresent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Removal {
    Removed,
    NotFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DegreeStats {
    /// Maximum of in-degree + out-degree over all vertices.
    pub max_degree: usize,
    pub vertices: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, Default)]
struct Adjacency {
    out: Vec<(RelationLabel, EntityId)>,
    inc: Vec<(RelationLabel, EntityId)>,
}

impl Adjacency {
    fn degree(&self) -> usize {
        self.out.len() + self.inc.len()
    }
}

/// Read access shared by the stored graph and cheap overlay snapshots.
pub trait GraphRead: Sync {
    fn symbols(&self) -> &Arc<Symbols>;

    fn contains(&self, s: &Tuple) -> bool;

    fn has_vertex(&self, v: EntityId) -> bool;

    /// Visits every tuple with `v` as head or tail. Self-loops are visited twice.
    fn for_each_incident(&self, v: EntityId, f: &mut dyn FnMut(Tuple));
}

#[derive(Debug, Clone)]
pub struct GraphStore {
    symbols: Arc<Symbols>,
    edges: HashSet<Tuple>,
    adjacency: HashMap<EntityId, Adjacency>,
    by_relation: HashMap<RelationLabel, IndexSet<Tuple>>,
    // degree -> number of vertices with that total degree
    degree_histogram: BTreeMap<usize, usize>,
    version: u64,
}

impl GraphStore {
    pub fn new(symbols: Arc<Symbols>) -> Self {
        GraphStore {
            symbols,
            edges: HashSet::new(),
            adjacency: HashMap::new(),
            by_relation: HashMap::new(),
            degree_histogram: BTreeMap::new(),
            version: 0,
        }
    }

    /// Builds a graph from tuples; errors on the first NA-labeled tuple.
    pub fn from_tuples(symbols: Arc<Symbols>, tuples: impl IntoIterator<Item = Tuple>) -> Result<Self> {
        let mut g = GraphStore::new(symbols);
        for s in tuples {
            g.add_tuple(s)?;
        }
        Ok(g)
    }

    pub fn symbols(&self) -> &Arc<Symbols> {
        &self.symbols
    }

    /// Snapshot version, bumped once per commit.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn bump_version(&mut self) -> u64 {
        self.version += 1;
        self.version
    }

    pub fn add_tuple(&mut self, s: Tuple) -> Result<Insertion> {
        if s.relation.is_na() {
            return Err(Error::NALabelRejected);
        }
        if !self.edges.insert(s) {
            return Ok(Insertion::AlreadyPresent);
        }
        self.by_relation.entry(s.relation).or_default().insert(s);

        let before_head = self.degree(s.head);
        self.adjacency
            .entry(s.head)
            .or_default()
            .out
            .push((s.relation, s.tail));
        self.move_degree(before_head, self.degree(s.head));

        let before_tail = self.degree(s.tail);
        self.adjacency
            .entry(s.tail)
            .or_default()
            .inc
            .push((s.relation, s.head));
        self.move_degree(before_tail, self.degree(s.tail));
        Ok(Insertion::Inserted)
    }

    pub fn remove_tuple(&mut self, s: &Tuple) -> Removal {
        if !self.edges.remove(s) {
            return Removal::NotFound;
        }
        if let Some(occ) = self.by_relation.get_mut(&s.relation) {
            occ.swap_remove(s);
            if occ.is_empty() {
                self.by_relation.remove(&s.relation);
            }
        }

        let before_head = self.degree(s.head);
        if let Some(adj) = self.adjacency.get_mut(&s.head) {
            if let Some(pos) = adj.out.iter().position(|&e| e == (s.relation, s.tail)) {
                adj.out.swap_remove(pos);
            }
        }
        self.move_degree(before_head, self.degree(s.head));
        self.drop_if_isolated(s.head);

        let before_tail = self.degree(s.tail);
        if let Some(adj) = self.adjacency.get_mut(&s.tail) {
            if let Some(pos) = adj.inc.iter().position(|&e| e == (s.relation, s.head)) {
                adj.inc.swap_remove(pos);
            }
        }
        self.move_degree(before_tail, self.degree(s.tail));
        self.drop_if_isolated(s.tail);
        Removal::Removed
    }

    fn drop_if_isolated(&mut self, v: EntityId) {
        if self.adjacency.get(&v).is_some_and(|a| a.degree() == 0) {
            self.adjacency.remove(&v);
        }
    }

    fn move_degree(&mut self, before: usize, after: usize) {
        if before == after {
            return;
        }
        if before > 0 {
            if let Some(n) = self.degree_histogram.get_mut(&before) {
                *n -= 1;
                if *n == 0 {
                    self.degree_histogram.remove(&before);
                }
            }
        }
        if after > 0 {
            *self.degree_histogram.entry(after).or_default() += 1;
        }
    }

    pub fn contains(&self, s: &Tuple) -> bool {
        self.edges.contains(s)
    }

    pub fn has_vertex(&self, v: EntityId) -> bool {
        self.adjacency.contains_key(&v)
    }

    /// Total degree (in + out) of `v`; 0 for unknown vertices.
    pub fn degree(&self, v: EntityId) -> usize {
        self.adjacency.get(&v).map_or(0, Adjacency::degree)
    }

    pub fn out_edges(&self, v: EntityId) -> &[(RelationLabel, EntityId)] {
        self.adjacency.get(&v).map_or(&[], |a| a.out.as_slice())
    }

    pub fn in_edges(&self, v: EntityId) -> &[(RelationLabel, EntityId)] {
        self.adjacency.get(&v).map_or(&[], |a| a.inc.as_slice())
    }

    /// Relation labels of edges `head -> tail`.
    pub fn labels_between(&self, head: EntityId, tail: EntityId) -> impl Iterator<Item = RelationLabel> + '_ {
        self.out_edges(head)
            .iter()
            .filter(move |&&(_, t)| t == tail)
            .map(|&(r, _)| r)
    }

    /// Occurrences of `r` in index order. The order is a function of the
    /// insertion/removal history, which makes seeded sampling reproducible.
    pub fn occurrences(&self, r: RelationLabel) -> Option<&IndexSet<Tuple>> {
        self.by_relation.get(&r)
    }

    pub fn occurrence_count(&self, r: RelationLabel) -> usize {
        self.by_relation.get(&r).map_or(0, IndexSet::len)
    }

    /// Tuples labeled `r`, sorted by head string then tail string.
    pub fn tuples_with_relation(&self, r: RelationLabel) -> Vec<Tuple> {
        let Some(occ) = self.by_relation.get(&r) else {
            return Vec::new();
        };
        let mut keyed: Vec<_> = occ
            .iter()
            .map(|s| (self.symbols.entity_name(s.head), self.symbols.entity_name(s.tail), *s))
            .collect();
        keyed.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        keyed.into_iter().map(|(_, _, s)| s).collect()
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationLabel> + '_ {
        self.by_relation.keys().copied()
    }

    pub fn vertices(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn tuples(&self) -> impl Iterator<Item = &Tuple> + '_ {
        self.edges.iter()
    }

    /// All tuples sorted by (head, relation, tail) strings.
    pub fn sorted_tuples(&self) -> Vec<Tuple> {
        let mut keyed: Vec<_> = self
            .edges
            .iter()
            .map(|s| (self.symbols.tuple_names(s), *s))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.into_iter().map(|(_, s)| s).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree_stats(&self) -> DegreeStats {
        DegreeStats {
            max_degree: self.degree_histogram.keys().next_back().copied().unwrap_or(0),
            vertices: self.vertex_count(),
            edges: self.edge_count(),
        }
    }
}

impl GraphRead for GraphStore {
    fn symbols(&self) -> &Arc<Symbols> {
        &self.symbols
    }

    fn contains(&self, s: &Tuple) -> bool {
        self.edges.contains(s)
    }

    fn has_vertex(&self, v: EntityId) -> bool {
        self.adjacency.contains_key(&v)
    }

    fn for_each_incident(&self, v: EntityId, f: &mut dyn FnMut(Tuple)) {
        if let Some(adj) = self.adjacency.get(&v) {
            for &(r, t) in &adj.out {
                f(Tuple::new(v, r, t));
            }
            for &(r, h) in &adj.inc {
                f(Tuple::new(h, r, v));
            }
        }
    }
}

/// A stored graph plus extra tuples, read as their union without copying
/// the base. Extra tuples already present in the base are ignored.
#[derive(Debug, Clone)]
pub struct Overlay<'a> {
    base: &'a GraphStore,
    extra: GraphStore,
}

impl<'a> Overlay<'a> {
    pub fn new(base: &'a GraphStore, extra: impl IntoIterator<Item = Tuple>) -> Result<Self> {
        let mut overlay = GraphStore::new(base.symbols.clone());
        for s in extra {
            if !base.contains(&s) {
                overlay.add_tuple(s)?;
            }
        }
        Ok(Overlay { base, extra: overlay })
    }

    pub fn base(&self) -> &'a GraphStore {
        self.base
    }

    pub fn extra(&self) -> &GraphStore {
        &self.extra
    }
}

impl GraphRead for Overlay<'_> {
    fn symbols(&self) -> &Arc<Symbols> {
        &self.base.symbols
    }

    fn contains(&self, s: &Tuple) -> bool {
        self.base.contains(s) || self.extra.contains(s)
    }

    fn has_vertex(&self, v: EntityId) -> bool {
        self.base.has_vertex(v) || self.extra.has_vertex(v)
    }

    fn for_each_incident(&self, v: EntityId, f: &mut dyn FnMut(Tuple)) {
        self.base.for_each_incident(v, f);
        self.extra.for_each_incident(v, f);
    }
}
