use std::collections::{BTreeMap, BTreeSet};

use super::{AdjacencyGraph, Edge, UnitId};
use crate::error::LoadError;

/// Cuts weak adjacencies. Visiting units in ascending id order, a unit with
/// at least three neighbors loses the edge to the neighbor with the shortest
/// shared boundary, unless that would leave either endpoint without edges.
/// Ties on length go to the smaller neighbor id.
pub fn prune_weak_edges(graph: &AdjacencyGraph) -> Result<AdjacencyGraph, LoadError> {
    let mut out = AdjacencyGraph::default();
    for (&level, edges) in &graph.levels {
        let mut adj: BTreeMap<UnitId, BTreeMap<UnitId, f64>> = BTreeMap::new();
        for e in edges {
            let len = e.shared_boundary_len.ok_or_else(|| LoadError::Consistency(format!(
                "edge ({}, {}) at level {} has no shared boundary length",
                e.a, e.b, level
            )))?;
            adj.entry(e.a).or_default().insert(e.b, len);
            adj.entry(e.b).or_default().insert(e.a, len);
        }
        let order: Vec<UnitId> = adj.keys().copied().collect();
        for u in order {
            let nbrs = &adj[&u];
            if nbrs.len() < 3 {
                continue;
            }
            let (&weakest, _) = nbrs
                .iter()
                .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)))
                .expect("at least three neighbors");
            if adj[&weakest].len() <= 1 {
                continue;
            }
            adj.get_mut(&u).unwrap().remove(&weakest);
            adj.get_mut(&weakest).unwrap().remove(&u);
        }
        let mut kept: BTreeSet<(UnitId, UnitId)> = BTreeSet::new();
        let mut level_edges = Vec::new();
        for (&a, nbrs) in &adj {
            for (&b, &len) in nbrs {
                let key = if a < b { (a, b) } else { (b, a) };
                if kept.insert(key) {
                    level_edges.push(Edge::new(key.0, key.1, Some(len)));
                }
            }
        }
        out.levels.insert(level, level_edges);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(edges: &[(u32, u32, f64)]) -> AdjacencyGraph {
        let mut g = AdjacencyGraph::default();
        g.levels.insert(
            1,
            edges
                .iter()
                .map(|&(a, b, l)| Edge::new(UnitId(a), UnitId(b), Some(l)))
                .collect(),
        );
        g
    }

    fn pairs(g: &AdjacencyGraph) -> Vec<(u32, u32)> {
        g.edges(1).iter().map(|e| (e.a.0, e.b.0)).collect()
    }

    #[test]
    fn star_loses_shortest_edge() {
        // center 10 with neighbors 1, 2, 4 at lengths 5, 1, 7; leaves also
        // linked so the cut cannot isolate anyone
        let g = graph(&[(10, 1, 5.0), (10, 2, 1.0), (10, 4, 7.0), (1, 2, 3.0), (2, 4, 3.0)]);
        let p = prune_weak_edges(&g).unwrap();
        assert!(!pairs(&p).contains(&(2, 10)));
        assert_eq!(p.edge_count(), 4);
    }

    #[test]
    fn path_unchanged() {
        let g = graph(&[(1, 2, 1.0), (2, 3, 0.5), (3, 4, 2.0)]);
        assert_eq!(prune_weak_edges(&g).unwrap(), g);
    }

    #[test]
    fn isolation_guard_keeps_pendant_edge() {
        // unit 5 has neighbors 6, 7, 8; 6 is pendant and has the shortest edge
        let g = graph(&[(5, 6, 0.1), (5, 7, 1.0), (5, 8, 1.0), (7, 8, 1.0)]);
        let p = prune_weak_edges(&g).unwrap();
        assert!(pairs(&p).contains(&(5, 6)));
    }

    #[test]
    fn missing_length_is_an_error() {
        let mut g = graph(&[(1, 2, 1.0)]);
        g.levels.get_mut(&1).unwrap()[0].shared_boundary_len = None;
        assert!(prune_weak_edges(&g).is_err());
    }

    proptest! {
        #[test]
        fn never_raises_degree_nor_isolates(
            raw in proptest::collection::vec((0u32..12, 0u32..12, 0.1f64..10.0), 1..40)
        ) {
            let edges: Vec<_> = raw.into_iter().filter(|(a, b, _)| a != b).collect();
            prop_assume!(!edges.is_empty());
            let mut g = graph(&edges);
            let mut seen = BTreeSet::new();
            g.levels.get_mut(&1).unwrap().retain(|e| seen.insert((e.a, e.b)));
            let before = g.degree_map(1);
            let after = prune_weak_edges(&g).unwrap().degree_map(1);
            for (u, d) in &before {
                let d2 = after.get(u).copied().unwrap_or(0);
                prop_assert!(d2 <= *d);
                prop_assert!(d2 >= 1);
            }
        }
    }
}
