use std::collections::{BTreeMap, BTreeSet};

use log::warn;

use super::geometry::{isoperimetric, Shape};
use super::{AdjacencyGraph, Edge, Level, PlanningUnit, UnitId};
use crate::error::LoadError;

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub units: Vec<PlanningUnit>,
    pub graph: AdjacencyGraph,
    pub geometry: BTreeMap<UnitId, Shape>,
    /// Original unit id to the id of the unit that absorbed it (identity for
    /// survivors).
    pub mapping: BTreeMap<UnitId, UnitId>,
    /// False when merging stopped early because no legal merge remained.
    pub reached_target: bool,
}

struct Piece {
    unit: PlanningUnit,
    shape: Shape,
    area: f64,
    perimeter: f64,
}

impl Piece {
    fn score(&self) -> f64 {
        isoperimetric(self.area, self.perimeter)
    }
}

/// Greedy compactness-driven merging of planning units.
///
/// Repeatedly takes the least compact unit (isoperimetric quotient, ties by
/// id) and merges it into the adjacent unit with the same status-quo school
/// that yields the most compact union. Stops at `target_count` units or when
/// no unit has a legal partner. The absorbing neighbor keeps its id; counts
/// are summed and shapes united.
pub fn merge_units_greedy(
    units: &[PlanningUnit],
    graph: &AdjacencyGraph,
    geometry: &BTreeMap<UnitId, Shape>,
    target_count: usize,
) -> Result<MergeOutcome, LoadError> {
    let mut pieces: BTreeMap<UnitId, Piece> = BTreeMap::new();
    for u in units {
        let shape = geometry.get(&u.id).cloned().ok_or_else(|| {
            LoadError::Consistency(format!("unit {} has no geometry to merge", u.id))
        })?;
        let (area, perimeter) = (shape.area(), shape.perimeter());
        pieces.insert(
            u.id,
            Piece {
                unit: u.clone(),
                shape,
                area,
                perimeter,
            },
        );
    }
    let mut adj: BTreeMap<UnitId, BTreeMap<UnitId, f64>> =
        pieces.keys().map(|&id| (id, BTreeMap::new())).collect();
    for (_, e) in graph.all_edges() {
        let (Some(pa), Some(pb)) = (pieces.get(&e.a), pieces.get(&e.b)) else {
            continue;
        };
        let len = e
            .shared_boundary_len
            .unwrap_or_else(|| pa.shape.shared_boundary(&pb.shape));
        adj.get_mut(&e.a).unwrap().insert(e.b, len);
        adj.get_mut(&e.b).unwrap().insert(e.a, len);
    }
    let mut mapping: BTreeMap<UnitId, UnitId> = pieces.keys().map(|&id| (id, id)).collect();
    let mut reached_target = true;

    while pieces.len() > target_count {
        let mut order: Vec<(f64, UnitId)> = pieces.iter().map(|(&id, p)| (p.score(), id)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut chosen = None;
        for &(_, x) in &order {
            let px = &pieces[&x];
            let best = adj[&x]
                .iter()
                .filter(|(y, _)| pieces[*y].unit.sq_school == px.unit.sq_school)
                .map(|(&y, &shared)| {
                    let py = &pieces[&y];
                    let s = isoperimetric(
                        px.area + py.area,
                        px.perimeter + py.perimeter - 2.0 * shared,
                    );
                    (s, y)
                })
                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
            if let Some((_, y)) = best {
                chosen = Some((x, y));
                break;
            }
        }
        let Some((x, y)) = chosen else {
            warn!(
                "unit merging stopped at {} units; target {} unreachable",
                pieces.len(),
                target_count
            );
            reached_target = false;
            break;
        };
        absorb(&mut pieces, &mut adj, x, y);
        for v in mapping.values_mut() {
            if *v == x {
                *v = y;
            }
        }
    }

    let mut out_graph = AdjacencyGraph::default();
    let mut seen = BTreeSet::new();
    for (&a, nbrs) in &adj {
        let level: Level = pieces[&a].unit.level;
        for (&b, &len) in nbrs {
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                out_graph
                    .levels
                    .entry(level)
                    .or_default()
                    .push(Edge::new(key.0, key.1, Some(len)));
            }
        }
    }
    let mut out_units = Vec::with_capacity(pieces.len());
    let mut out_geom = BTreeMap::new();
    for (id, p) in pieces {
        out_units.push(p.unit);
        out_geom.insert(id, p.shape);
    }
    Ok(MergeOutcome {
        units: out_units,
        graph: out_graph,
        geometry: out_geom,
        mapping,
        reached_target,
    })
}

fn absorb(
    pieces: &mut BTreeMap<UnitId, Piece>,
    adj: &mut BTreeMap<UnitId, BTreeMap<UnitId, f64>>,
    x: UnitId,
    y: UnitId,
) {
    let px = pieces.remove(&x).expect("live piece");
    let shared = adj[&x][&y];
    let py = pieces.get_mut(&y).expect("live piece");
    let total_area = px.area + py.area;
    py.unit.centroid = match (px.unit.centroid, py.unit.centroid) {
        (Some(cx), Some(cy)) if total_area > 0.0 => Some((
            (cx.0 * px.area + cy.0 * py.area) / total_area,
            (cx.1 * px.area + cy.1 * py.area) / total_area,
        )),
        _ => None,
    };
    py.unit.n_students += px.unit.n_students;
    py.unit.n_group += px.unit.n_group;
    py.shape = py.shape.union_adjacent(&px.shape);
    py.area = total_area;
    py.perimeter = px.perimeter + py.perimeter - 2.0 * shared;
    if py.unit.centroid.is_none() && px.unit.centroid.is_some() {
        py.unit.centroid = py.shape.centroid();
    }

    let x_nbrs = adj.remove(&x).expect("live piece");
    adj.get_mut(&y).unwrap().remove(&x);
    for (z, len) in x_nbrs {
        if z == y {
            continue;
        }
        let zn = adj.get_mut(&z).unwrap();
        zn.remove(&x);
        *zn.entry(y).or_insert(0.0) += len;
        *adj.get_mut(&y).unwrap().entry(z).or_insert(0.0) += len;
    }
}
