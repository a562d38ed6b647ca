//! Seeded comparisons of the fast paths against the brute-force oracle.

use kgrepair::embedding::{similarity, traverse_r, Canonicalization, EmbeddingOptions, Traversal};
use kgrepair::pattern::{extract_pattern, size_bound, NeighborhoodRule};
use kgrepair_oracle::gen::{random_center, random_graph};
use kgrepair_oracle::{enumerate_central_walks, exact_sim, predicate_pattern};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALL_OPTIONS: [EmbeddingOptions; 4] = [
    EmbeddingOptions {
        canonicalization: Canonicalization::Sorted,
        traversal: Traversal::Undirected,
    },
    EmbeddingOptions {
        canonicalization: Canonicalization::Positional,
        traversal: Traversal::Undirected,
    },
    EmbeddingOptions {
        canonicalization: Canonicalization::Sorted,
        traversal: Traversal::DirectionMarked,
    },
    EmbeddingOptions {
        canonicalization: Canonicalization::Positional,
        traversal: Traversal::DirectionMarked,
    },
];

#[test]
fn traverse_r_matches_walk_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    while compared < 300 {
        let n = rng.gen_range(2..=10);
        let m = rng.gen_range(1..=2 * n);
        let g = random_graph(&mut rng, n, m, 3);
        let Some(c) = random_center(&mut rng, &g, 3, 0.3) else { continue };
        let radius = rng.gen_range(1..=3);
        let p = extract_pattern(&g, c, radius, NeighborhoodRule::Union).unwrap();
        for l in 1..=radius {
            for opts in ALL_OPTIONS {
                let fast = traverse_r(&p, l, opts).unwrap().named(g.symbols());
                let slow = enumerate_central_walks(&p, l, opts, g.symbols()).unwrap();
                assert_eq!(fast, slow, "center {:?}, l = {l}, {opts:?}", g.symbols().tuple_names(&c));
            }
        }
        compared += 1;
    }
}

#[test]
fn extract_pattern_matches_distance_predicate() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let n = rng.gen_range(2..=50);
        let m = rng.gen_range(1..=2 * n);
        let g = random_graph(&mut rng, n, m, 4);
        let Some(c) = random_center(&mut rng, &g, 4, 0.3) else { continue };
        let d = {
            // the hypothetical center can raise the maximum degree by one
            let mut with = g.clone();
            let _ = with.add_tuple(c);
            with.degree_stats().max_degree
        };
        for rule in [NeighborhoodRule::Union, NeighborhoodRule::Intersection] {
            let mut prev = None;
            for l in 1..=3 {
                let p = extract_pattern(&g, c, l, rule).unwrap();
                let (verts, edges) = predicate_pattern(&g, c, l, rule);
                assert_eq!(p.vertices(), &verts);
                assert_eq!(p.edges().iter().copied().collect::<std::collections::BTreeSet<_>>(), edges);
                assert!(p.size() as u128 <= size_bound(d, l));
                if let Some(smaller) = prev.replace(p.clone()) {
                    assert!(kgrepair::pattern::LocalizedPattern::is_subgraph_of(&smaller, &p));
                }
            }
        }
    }
}

#[test]
fn positive_similarity_implies_a_shared_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let opts = EmbeddingOptions {
        canonicalization: Canonicalization::Positional,
        traversal: Traversal::DirectionMarked,
    };
    let mut positives = 0;
    for _ in 0..400 {
        let g = random_graph(&mut rng, 10, 14, 2);
        let tuples = g.sorted_tuples();
        let a = tuples[rng.gen_range(0..tuples.len())];
        let b = tuples[rng.gen_range(0..tuples.len())];
        if a.relation != b.relation || a == b {
            continue;
        }
        let l = rng.gen_range(1..=2);
        let pa = extract_pattern(&g, a, l, NeighborhoodRule::Union).unwrap();
        let pb = extract_pattern(&g, b, l, NeighborhoodRule::Union).unwrap();
        if pa.size() > 10 || pb.size() > 10 {
            continue;
        }
        let ma = traverse_r(&pa, l, opts).unwrap();
        let mb = traverse_r(&pb, l, opts).unwrap();
        if similarity(&ma, &mb, 0).unwrap() > 0.0 {
            positives += 1;
            let exact = exact_sim(&pa, &pb).unwrap();
            let matched = exact * pa.size().min(pb.size()) as f64;
            assert!(matched >= 2.999, "shared walk but only {matched} matched vertices");
        }
    }
    assert!(positives > 20, "too few positive pairs exercised: {positives}");
}
