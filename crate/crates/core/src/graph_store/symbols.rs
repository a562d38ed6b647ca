use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

/// Interned entity handle.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(u32);

impl EntityId {
    pub fn index(self) -> u32 {
        self.0
    }
}

/// Interned relation label handle. Handle 0 is reserved for [`RelationLabel::NA`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationLabel(u32);

impl RelationLabel {
    /// The negative label: "no relation". Never stored as an edge.
    pub const NA: RelationLabel = RelationLabel(0);

    pub fn is_na(self) -> bool {
        self == Self::NA
    }

    pub fn index(self) -> u32 {
        self.0
    }
}

pub const NA_STR: &str = "NA";

/// One RDF fact `<head, relation, tail>`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple {
    pub head: EntityId,
    pub relation: RelationLabel,
    pub tail: EntityId,
}

impl Tuple {
    pub fn new(head: EntityId, relation: RelationLabel, tail: EntityId) -> Self {
        Tuple { head, relation, tail }
    }

    /// True when the tuple joins `a` and `b` in either orientation.
    pub fn joins(&self, a: EntityId, b: EntityId) -> bool {
        (self.head == a && self.tail == b) || (self.head == b && self.tail == a)
    }

    pub fn with_relation(self, relation: RelationLabel) -> Self {
        Tuple { relation, ..self }
    }
}

#[derive(Default)]
struct Interner {
    ids: HashMap<Arc<str>, u32>,
    names: Vec<Arc<str>>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = u32::try_from(self.names.len()).expect("interner overflow");
        let name: Arc<str> = Arc::from(name);
        self.names.push(name.clone());
        self.ids.insert(name, id);
        id
    }
}

/// Shared, append-only string interner for entities and relation labels.
///
/// Every graph that exchanges tuples (the target graph, instance overlays,
/// auxiliary graphs) must share one table so handles compare directly.
pub struct Symbols {
    entities: RwLock<Interner>,
    relations: RwLock<Interner>,
}

impl Symbols {
    pub fn new() -> Arc<Self> {
        let mut relations = Interner::default();
        let na = relations.intern(NA_STR);
        debug_assert_eq!(na, RelationLabel::NA.0);
        Arc::new(Symbols {
            entities: RwLock::new(Interner::default()),
            relations: RwLock::new(relations),
        })
    }

    pub fn entity(&self, name: &str) -> EntityId {
        if let Some(&id) = self.entities.read().ids.get(name) {
            return EntityId(id);
        }
        EntityId(self.entities.write().intern(name))
    }

    /// Interns a relation label; the string `"NA"` maps to [`RelationLabel::NA`].
    pub fn relation(&self, name: &str) -> RelationLabel {
        if let Some(&id) = self.relations.read().ids.get(name) {
            return RelationLabel(id);
        }
        RelationLabel(self.relations.write().intern(name))
    }

    pub fn lookup_entity(&self, name: &str) -> Option<EntityId> {
        self.entities.read().ids.get(name).map(|&id| EntityId(id))
    }

    pub fn lookup_relation(&self, name: &str) -> Option<RelationLabel> {
        self.relations.read().ids.get(name).map(|&id| RelationLabel(id))
    }

    pub fn entity_name(&self, id: EntityId) -> Arc<str> {
        self.entities.read().names[id.0 as usize].clone()
    }

    pub fn relation_name(&self, id: RelationLabel) -> Arc<str> {
        self.relations.read().names[id.0 as usize].clone()
    }

    pub fn tuple(&self, head: &str, relation: &str, tail: &str) -> Tuple {
        Tuple::new(self.entity(head), self.relation(relation), self.entity(tail))
    }

    pub fn tuple_names(&self, s: &Tuple) -> (Arc<str>, Arc<str>, Arc<str>) {
        (
            self.entity_name(s.head),
            self.relation_name(s.relation),
            self.entity_name(s.tail),
        )
    }

    pub fn display<'a>(&'a self, s: &'a Tuple) -> DisplayTuple<'a> {
        DisplayTuple { symbols: self, tuple: s }
    }

    pub fn entity_count(&self) -> usize {
        self.entities.read().names.len()
    }
}

impl fmt::Debug for Symbols {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbols")
            .field("entities", &self.entities.read().names.len())
            .field("relations", &self.relations.read().names.len())
            .finish()
    }
}

/// Tab-separated rendering `head<TAB>relation<TAB>tail`.
pub struct DisplayTuple<'a> {
    symbols: &'a Symbols,
    tuple: &'a Tuple,
}

impl fmt::Display for DisplayTuple<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (h, r, t) = self.symbols.tuple_names(self.tuple);
        write!(f, "{h}\t{r}\t{t}")
    }
}
