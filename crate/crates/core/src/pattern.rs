//! Localized patterns: the l-neighborhood subgraph around a center tuple.
//!
//! The center may be hypothetical (a candidate not yet in the graph); all
//! distances are then measured in `g ∪ {center}` so the center edge itself
//! connects fresh entities.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_store::{EntityId, GraphRead, Symbols, Tuple};

/// How the two endpoint neighborhoods combine into the pattern vertex set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeighborhoodRule {
    /// Vertices within `l` of the head OR the tail.
    #[default]
    Union,
    /// Vertices within `l` of the head AND the tail.
    Intersection,
}

impl NeighborhoodRule {
    pub fn name(self) -> &'static str {
        match self {
            NeighborhoodRule::Union => "union (dist to head <= l OR dist to tail <= l)",
            NeighborhoodRule::Intersection => "intersection (dist to head <= l AND dist to tail <= l)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalizedPattern {
    center: Tuple,
    radius: u32,
    rule: NeighborhoodRule,
    vertices: BTreeSet<EntityId>,
    /// Sorted, deduplicated; always contains the center.
    edges: Vec<Tuple>,
    hypothetical: bool,
}

impl LocalizedPattern {
    pub fn center(&self) -> Tuple {
        self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn rule(&self) -> NeighborhoodRule {
        self.rule
    }

    pub fn vertices(&self) -> &BTreeSet<EntityId> {
        &self.vertices
    }

    pub fn edges(&self) -> &[Tuple] {
        &self.edges
    }

    /// True when the center edge was not part of the graph the pattern was cut from.
    pub fn is_hypothetical(&self) -> bool {
        self.hypothetical
    }

    /// Pattern size as a vertex count.
    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn contains_edge(&self, s: &Tuple) -> bool {
        self.edges.binary_search(s).is_ok()
    }

    /// Whether `self` is a subgraph of `other`.
    pub fn is_subgraph_of(&self, other: &LocalizedPattern) -> bool {
        self.vertices.is_subset(&other.vertices) && self.edges.iter().all(|e| other.contains_edge(e))
    }

    /// TSV dump preceded by a `# center: h r t, l=N` header line.
    pub fn to_tsv(&self, symbols: &Symbols) -> String {
        let (h, r, t) = symbols.tuple_names(&self.center);
        let mut out = format!("# center: {h} {r} {t}, l={}\n", self.radius);
        let mut lines: Vec<String> = self.edges.iter().map(|e| symbols.display(e).to_string()).collect();
        lines.sort();
        for line in lines {
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

fn neighbors_with_center<G: GraphRead + ?Sized>(g: &G, center: Option<&Tuple>, v: EntityId, f: &mut dyn FnMut(EntityId)) {
    g.for_each_incident(v, &mut |s| f(if s.head == v { s.tail } else { s.head }));
    if let Some(c) = center {
        if c.head == v {
            f(c.tail);
        }
        if c.tail == v {
            f(c.head);
        }
    }
}

/// BFS distances from `source` ignoring edge direction, up to `cap` hops.
fn bounded_bfs<G: GraphRead + ?Sized>(
    g: &G,
    center: Option<&Tuple>,
    source: EntityId,
    cap: u32,
) -> HashMap<EntityId, u32> {
    let mut dist = HashMap::new();
    dist.insert(source, 0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == cap {
            continue;
        }
        neighbors_with_center(g, center, v, &mut |w| {
            if let Entry::Vacant(e) = dist.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
            }
        });
    }
    dist
}

/// Shortest undirected hop count between `u` and `v`, or `None` when it
/// exceeds `cap` or either vertex is unknown.
pub fn undirected_dist<G: GraphRead + ?Sized>(g: &G, u: EntityId, v: EntityId, cap: u32) -> Option<u32> {
    if u == v {
        return Some(0);
    }
    if !g.has_vertex(u) || !g.has_vertex(v) {
        return None;
    }
    bounded_bfs(g, None, u, cap).get(&v).copied()
}

/// Extracts the localized pattern of `center` with radius `l` over `g ∪ {center}`.
pub fn extract_pattern<G: GraphRead + ?Sized>(
    g: &G,
    center: Tuple,
    l: u32,
    rule: NeighborhoodRule,
) -> Result<LocalizedPattern> {
    if l < 1 {
        return Err(Error::Config("pattern radius must be at least 1".into()));
    }
    if center.relation.is_na() {
        return Err(Error::NALabelRejected);
    }
    let hypothetical = !g.contains(&center);
    let extra = hypothetical.then_some(&center);
    let from_head = bounded_bfs(g, extra, center.head, l);
    let from_tail = bounded_bfs(g, extra, center.tail, l);

    let vertices: BTreeSet<EntityId> = match rule {
        NeighborhoodRule::Union => from_head.keys().chain(from_tail.keys()).copied().collect(),
        NeighborhoodRule::Intersection => from_head
            .keys()
            .filter(|v| from_tail.contains_key(v))
            .copied()
            .collect(),
    };

    let mut edges = vec![center];
    for &v in &vertices {
        g.for_each_incident(v, &mut |s| {
            // visit each edge once, from its head
            if s.head == v && vertices.contains(&s.tail) {
                edges.push(s);
            }
        });
    }
    edges.sort_unstable();
    edges.dedup();

    Ok(LocalizedPattern {
        center,
        radius: l,
        rule,
        vertices,
        edges,
        hypothetical,
    })
}

/// Upper bound `2 * d_M^l + 2` on the pattern vertex count.
pub fn size_bound(max_degree: usize, l: u32) -> u128 {
    2 * (max_degree as u128).saturating_pow(l) + 2
}
