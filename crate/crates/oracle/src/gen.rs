//! Seeded random inputs for oracle comparisons.

use kgrepair::{GraphStore, Symbols, Tuple};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random graph over `vertices` named entities `v0..` with up to `edges`
/// distinct tuples drawn from `labels` labels `L0..`. No self-loops.
pub fn random_graph<R: Rng>(rng: &mut R, vertices: usize, edges: usize, labels: usize) -> GraphStore {
    assert!(vertices >= 2 && labels >= 1);
    let sym = Symbols::new();
    let mut g = GraphStore::new(sym.clone());
    for _ in 0..edges {
        let h = rng.gen_range(0..vertices);
        let mut t = rng.gen_range(0..vertices - 1);
        if t >= h {
            t += 1;
        }
        let r = rng.gen_range(0..labels);
        g.add_tuple(sym.tuple(&format!("v{h}"), &format!("L{r}"), &format!("v{t}")))
            .expect("generated labels are never NA");
    }
    g
}

/// A center for `g`: an existing edge, or with probability `hypothetical`
/// a fresh tuple between two stored vertices.
pub fn random_center<R: Rng>(rng: &mut R, g: &GraphStore, labels: usize, hypothetical: f64) -> Option<Tuple> {
    let sym = g.symbols();
    let verts: Vec<_> = g.vertices().collect();
    if verts.len() >= 2 && rng.gen::<f64>() < hypothetical {
        let mut pick = verts.clone();
        pick.sort();
        pick.shuffle(rng);
        let r = sym.relation(&format!("L{}", rng.gen_range(0..labels)));
        return Some(Tuple::new(pick[0], r, pick[1]));
    }
    let mut tuples = g.sorted_tuples();
    if tuples.is_empty() {
        return None;
    }
    tuples.shuffle(rng);
    Some(tuples[0])
}

/// Same graph with every entity renamed through a seeded permutation.
pub fn renamed<R: Rng>(rng: &mut R, g: &GraphStore) -> (GraphStore, impl Fn(Tuple) -> Tuple) {
    let sym = g.symbols();
    let mut names: Vec<String> = (0..sym.entity_count()).map(|i| format!("w{i}")).collect();
    names.shuffle(rng);
    let fresh = Symbols::new();
    let old = sym.clone();
    let new = fresh.clone();
    let rename = move |s: Tuple| {
        new.tuple(
            &names[s.head.index() as usize],
            &old.relation_name(s.relation),
            &names[s.tail.index() as usize],
        )
    };
    let out = GraphStore::from_tuples(fresh, g.sorted_tuples().into_iter().map(&rename))
        .expect("renaming keeps labels");
    (out, rename)
}
