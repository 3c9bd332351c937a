//! Incremental zoning state for local search.
//!
//! Enrollment, group and distance sums are kept per school as exact
//! integers (distances in fixed point), so moves and their reversal never
//! drift. Only the running objective is a float; it is resynchronized from
//! the aggregates periodically.

use crate::constraints::{component_counts, dissimilarity_active, dissimilarity_bounds, pattern_count};
use crate::instance::{eliminate_candidates, Instance};
use crate::objectives::{balance_term, group_share, Objective, ObjectiveConfig};

const SCALE: f64 = (1u64 << 40) as f64;

fn obj_ix(o: Objective) -> usize {
    match o {
        Objective::Distance => 0,
        Objective::Balance => 1,
        Objective::Compact => 2,
        Objective::Feeder => 3,
        Objective::Capacity => 4,
    }
}

/// Everything about a solve that does not change during search.
pub(crate) struct Problem<'a> {
    pub inst: &'a Instance,
    pub config: &'a ObjectiveConfig,
    /// Candidate school indices per unit: status-quo school first, then by id.
    pub cand: Vec<Vec<usize>>,
    /// Units with more than one candidate.
    pub movable: Vec<usize>,
    /// Edges over all levels, as unit index pairs.
    pub edges: Vec<(usize, usize)>,
    unit_num: Vec<Vec<Option<i128>>>,
    unit_den: Vec<i128>,
    /// Student transitions out of a unit (unit at l, unit at l + 1, count).
    lower_links: Vec<Vec<(usize, u64)>>,
    /// Student transitions into a unit from the level below.
    upper_links: Vec<Vec<(usize, u64)>>,
    /// `b * w` per school and objective; `b` alone per level for compactness.
    coef: Vec<[f64; 5]>,
    compact_b: Vec<f64>,
    /// Reciprocal of the students transitioning out of each level.
    flow_scale: Vec<f64>,
    selected: [bool; 5],
    share: Vec<f64>,
    sq_comps: Vec<usize>,
    dis_bound: Vec<f64>,
    sq_patterns: Vec<u64>,
    check_capacity: bool,
    check_contiguity: bool,
    check_dissimilarity: bool,
    check_feeder: bool,
}

impl<'a> Problem<'a> {
    pub fn new(inst: &'a Instance, config: &'a ObjectiveConfig) -> Self {
        let ix = &inst.ix;
        let cands = eliminate_candidates(inst, &config.constraints);
        let cand: Vec<Vec<usize>> = inst
            .units()
            .iter()
            .enumerate()
            .map(|(u, unit)| {
                let mut v = vec![ix.unit_sq[u]];
                for sid in cands.get(unit.id).into_iter().flatten() {
                    let s = ix.school_pos[sid];
                    if s != ix.unit_sq[u] {
                        v.push(s);
                    }
                }
                v
            })
            .collect();
        let movable = (0..cand.len()).filter(|&u| cand[u].len() > 1).collect();
        let edges = ix.level_edges.iter().flatten().copied().collect();

        let mut unit_num = Vec::with_capacity(inst.units().len());
        let mut unit_den = Vec::with_capacity(inst.units().len());
        for u in 0..inst.units().len() {
            let l = ix.unit_level[u];
            let k = ix.level_schools[l].len();
            let mut num = vec![Some(0i128); k];
            let mut den = 0i128;
            for &st in &ix.unit_students[u] {
                for (local, slot) in num.iter_mut().enumerate() {
                    let d = ix.student_dist[st][local];
                    *slot = if d.is_nan() {
                        None
                    } else {
                        slot.map(|x| x + (d * SCALE).round() as i128)
                    };
                }
                den += (ix.student_sq_dist[st] * SCALE).round() as i128;
            }
            unit_num.push(num);
            unit_den.push(den);
        }

        let mut lower_links = vec![Vec::new(); inst.units().len()];
        let mut upper_links = vec![Vec::new(); inst.units().len()];
        for trans in &ix.transitions {
            for &(a, b, c) in trans {
                lower_links[a].push((b, c));
                upper_links[b].push((a, c));
            }
        }

        let mut selected = [false; 5];
        for &o in &config.selected {
            selected[obj_ix(o)] = true;
        }
        let coef = inst
            .schools()
            .iter()
            .enumerate()
            .map(|(s, school)| {
                let level = inst.level_at(ix.school_level[s]);
                let mut c = [0.0; 5];
                for o in Objective::ALL {
                    if selected[obj_ix(o)] {
                        c[obj_ix(o)] = config.calibration(level, o) * config.weights.get(school.id, o);
                    }
                }
                c
            })
            .collect();
        let nl = inst.levels().len();
        let compact_b = (0..nl)
            .map(|l| {
                if selected[obj_ix(Objective::Compact)] {
                    config.calibration(inst.level_at(l), Objective::Compact)
                } else {
                    0.0
                }
            })
            .collect();
        let flow_scale = ix
            .transitions
            .iter()
            .map(|t| 1.0 / t.iter().map(|&(_, _, c)| c).sum::<u64>().max(1) as f64)
            .collect();
        let sq = inst.sq_dense();
        let c = &config.constraints;
        Problem {
            inst,
            config,
            cand,
            movable,
            edges,
            unit_num,
            unit_den,
            lower_links,
            upper_links,
            coef,
            compact_b,
            flow_scale,
            selected,
            share: (0..nl).map(|l| group_share(inst, l)).collect(),
            sq_comps: component_counts(inst, &sq),
            dis_bound: dissimilarity_bounds(inst, c),
            sq_patterns: (0..nl.saturating_sub(1))
                .map(|l| pattern_count(inst, &sq, l, c.epsilon))
                .collect(),
            check_capacity: c.enforce_capacity,
            check_contiguity: c.enforce_contiguity,
            check_dissimilarity: dissimilarity_active(config),
            check_feeder: c.enforce_feeder_no_increase,
        }
    }

    pub fn is_candidate(&self, u: usize, s: usize) -> bool {
        self.cand[u].contains(&s)
    }
}

#[derive(Clone)]
pub(crate) struct State {
    pub assign: Vec<usize>,
    n: Vec<u64>,
    g: Vec<u64>,
    num: Vec<i128>,
    /// Units assigned to the school that lack a distance to it.
    missing: Vec<u32>,
    den: Vec<i128>,
    members: Vec<Vec<usize>>,
    member_pos: Vec<usize>,
    comps: Vec<usize>,
    cut: Vec<u64>,
    /// Per level below the top: student counts on (local s1, local s2),
    /// row-major with row length = schools at the next level.
    feeder: Vec<Vec<u64>>,
    patterns: Vec<u64>,
    pub objective: f64,
    /// Concave penalty on feeder flow sizes, `coef * sqrt(share)` summed over
    /// transitions; lower when flows are concentrated. Zero unless the feeder
    /// objective is selected.
    guide: f64,
    /// Change in `guide` from the last accepted [`State::try_moves`].
    pub last_guide: f64,
}

impl State {
    pub fn new(p: &Problem, assign: Vec<usize>) -> Self {
        let inst = p.inst;
        let ix = &inst.ix;
        let ns = inst.schools().len();
        let nl = inst.levels().len();
        let mut st = State {
            assign,
            n: vec![0; ns],
            g: vec![0; ns],
            num: vec![0; ns],
            missing: vec![0; ns],
            den: vec![0; ns],
            members: vec![Vec::new(); ns],
            member_pos: vec![0; inst.units().len()],
            comps: Vec::new(),
            cut: vec![0; nl],
            feeder: (0..nl.saturating_sub(1))
                .map(|l| vec![0; ix.level_schools[l].len() * ix.level_schools[l + 1].len()])
                .collect(),
            patterns: vec![0; nl.saturating_sub(1)],
            objective: 0.0,
            guide: 0.0,
            last_guide: 0.0,
        };
        for u in 0..st.assign.len() {
            let s = st.assign[u];
            st.add_unit(p, u, s);
        }
        for l in 0..nl {
            st.cut[l] = ix.level_edges[l]
                .iter()
                .filter(|&&(a, b)| st.assign[a] != st.assign[b])
                .count() as u64;
        }
        for (l, trans) in ix.transitions.iter().enumerate() {
            for &(a, b, c) in trans {
                let i = st.feeder_ix(p, l, st.assign[a], st.assign[b]);
                st.feeder[l][i] += c;
            }
            st.patterns[l] = st.feeder[l]
                .iter()
                .filter(|&&c| c >= p.config.constraints.epsilon)
                .count() as u64;
            if p.selected[3] {
                let k2 = ix.level_schools[l + 1].len();
                for (i, &c) in st.feeder[l].iter().enumerate() {
                    st.guide += p.coef[ix.level_schools[l][i / k2]][3] * (c as f64 * p.flow_scale[l]).sqrt();
                }
            }
        }
        st.comps = component_counts(inst, &st.assign);
        st.objective = st.full_objective(p).unwrap_or(f64::NAN);
        st
    }

    fn feeder_ix(&self, p: &Problem, l: usize, s1: usize, s2: usize) -> usize {
        let ix = &p.inst.ix;
        ix.school_local[s1] * ix.level_schools[l + 1].len() + ix.school_local[s2]
    }

    fn add_unit(&mut self, p: &Problem, u: usize, s: usize) {
        let ix = &p.inst.ix;
        self.n[s] += ix.unit_n[u];
        self.g[s] += ix.unit_g[u];
        self.den[s] += p.unit_den[u];
        match p.unit_num[u][ix.school_local[s]] {
            Some(x) => self.num[s] += x,
            None => self.missing[s] += 1,
        }
        self.member_pos[u] = self.members[s].len();
        self.members[s].push(u);
    }

    fn remove_unit(&mut self, p: &Problem, u: usize, s: usize) {
        let ix = &p.inst.ix;
        self.n[s] -= ix.unit_n[u];
        self.g[s] -= ix.unit_g[u];
        self.den[s] -= p.unit_den[u];
        match p.unit_num[u][ix.school_local[s]] {
            Some(x) => self.num[s] -= x,
            None => self.missing[s] -= 1,
        }
        let pos = self.member_pos[u];
        self.members[s].swap_remove(pos);
        if let Some(&moved) = self.members[s].get(pos) {
            self.member_pos[moved] = pos;
        }
    }

    /// Weighted, calibrated contribution of the per-school terms of `s`;
    /// `None` when a selected term is undefined.
    fn school_value(&self, p: &Problem, s: usize) -> Option<f64> {
        let c = &p.coef[s];
        let mut v = 0.0;
        let n = self.n[s];
        if p.selected[0] {
            if n == 0 || self.missing[s] > 0 || self.den[s] <= 0 {
                return None;
            }
            v += c[0] * (self.num[s] as f64 / self.den[s] as f64);
        }
        if p.selected[1] {
            if n == 0 {
                return None;
            }
            let l = p.inst.ix.school_level[s];
            v += c[1] * balance_term(n, self.g[s], p.share[l], p.config.constraints.lambda);
        }
        if p.selected[4] {
            let desired = p.inst.schools()[s].cap_desired;
            if desired == 0 {
                return None;
            }
            v += c[4] * (1.0 - n as f64 / desired as f64).abs();
        }
        Some(v)
    }

    /// Objective recomputed from the aggregates.
    pub fn full_objective(&self, p: &Problem) -> Option<f64> {
        let mut total = 0.0;
        for s in 0..self.n.len() {
            total += self.school_value(p, s)?;
        }
        for (l, &c) in self.cut.iter().enumerate() {
            total += p.compact_b[l] * c as f64;
        }
        if p.selected[3] {
            let ix = &p.inst.ix;
            let eps = p.config.constraints.epsilon;
            for (l, counts) in self.feeder.iter().enumerate() {
                let k2 = ix.level_schools[l + 1].len();
                for (i, &c) in counts.iter().enumerate() {
                    if c >= eps {
                        total += p.coef[ix.level_schools[l][i / k2]][3];
                    }
                }
            }
        }
        Some(total)
    }

    /// Re-derives every aggregate from the assignment.
    pub fn resync(&mut self, p: &Problem) {
        *self = State::new(p, std::mem::take(&mut self.assign));
    }

    fn bump_feeder(&mut self, p: &Problem, l: usize, s1: usize, s2: usize, c: u64, add: bool) -> f64 {
        let eps = p.config.constraints.epsilon;
        let i = self.feeder_ix(p, l, s1, s2);
        let old = self.feeder[l][i];
        if add {
            self.feeder[l][i] += c;
        } else {
            self.feeder[l][i] -= c;
        }
        let new = self.feeder[l][i];
        if p.selected[3] {
            let f = p.flow_scale[l];
            self.guide += p.coef[s1][3] * ((new as f64 * f).sqrt() - (old as f64 * f).sqrt());
        }
        let (before, after) = (old >= eps, new >= eps);
        match (before, after) {
            (false, true) => {
                self.patterns[l] += 1;
                p.coef[s1][3]
            }
            (true, false) => {
                self.patterns[l] -= 1;
                -p.coef[s1][3]
            }
            _ => 0.0,
        }
    }

    /// Moves unit `u` to school `to`, updating aggregates. Returns the change
    /// in the edge-cut and feeder parts of the objective.
    fn relocate(&mut self, p: &Problem, u: usize, to: usize) -> f64 {
        let ix = &p.inst.ix;
        let from = self.assign[u];
        let l = ix.unit_level[u];
        let mut delta = 0.0;

        // neighbours in the donor and receiving schools, read before the move
        let mut in_from = 0;
        let mut in_to = 0;
        for &v in &ix.neighbors[u] {
            let sv = self.assign[v];
            if sv == from {
                in_from += 1;
            } else if sv == to {
                in_to += 1;
            }
        }
        // edges to `from` become cut, edges to `to` stop being cut
        let cut_change = in_from as i64 - in_to as i64;
        self.cut[l] = (self.cut[l] as i64 + cut_change) as u64;
        delta += p.compact_b[l] * cut_change as f64;

        for k in 0..p.lower_links[u].len() {
            let (up, c) = p.lower_links[u][k];
            let s2 = self.assign[up];
            delta += self.bump_feeder(p, l, from, s2, c, false);
            delta += self.bump_feeder(p, l, to, s2, c, true);
        }
        for k in 0..p.upper_links[u].len() {
            let (low, c) = p.upper_links[u][k];
            let s1 = self.assign[low];
            delta += self.bump_feeder(p, l - 1, s1, from, c, false);
            delta += self.bump_feeder(p, l - 1, s1, to, c, true);
        }

        self.remove_unit(p, u, from);
        self.assign[u] = to;
        self.add_unit(p, u, to);

        if p.check_contiguity {
            self.comps[from] = match in_from {
                0 => self.comps[from] - 1,
                1 => self.comps[from],
                _ => self.count_components(p, from),
            };
            self.comps[to] = match in_to {
                0 => self.comps[to] + 1,
                1 => self.comps[to],
                _ => self.count_components(p, to),
            };
        }
        delta
    }

    /// Units currently assigned to school `s`, in no particular order.
    pub fn members(&self, s: usize) -> &[usize] {
        &self.members[s]
    }

    fn count_components(&self, p: &Problem, s: usize) -> usize {
        p.inst.components_of(&self.members[s], |v| self.assign[v] == s)
    }

    fn locally_feasible(&self, p: &Problem, schools: &[usize], levels: &[usize]) -> bool {
        for &s in schools {
            let school = &p.inst.schools()[s];
            if p.check_capacity && (self.n[s] < school.cap_min || self.n[s] > school.cap_max) {
                return false;
            }
            if p.check_contiguity && self.comps[s] > p.sq_comps[s] {
                return false;
            }
            if p.check_dissimilarity && self.n[s] > 0 {
                let l = p.inst.ix.school_level[s];
                let d = (self.g[s] as f64 / self.n[s] as f64 - p.share[l]).abs();
                if d > p.dis_bound[s] {
                    return false;
                }
            }
        }
        if p.check_feeder {
            for &l in levels {
                if l < self.patterns.len() && self.patterns[l] > p.sq_patterns[l] {
                    return false;
                }
            }
        }
        true
    }

    /// Applies `moves` (unit, new school) in order. If the result is feasible
    /// and every selected term is defined, keeps it and returns the
    /// objective change; otherwise restores the previous state.
    pub fn try_moves(&mut self, p: &Problem, moves: &[(usize, usize)]) -> Option<f64> {
        let mut schools: Vec<usize> = Vec::with_capacity(4);
        let mut levels: Vec<usize> = Vec::with_capacity(4);
        for &(u, to) in moves {
            for s in [self.assign[u], to] {
                if !schools.contains(&s) {
                    schools.push(s);
                }
            }
            let l = p.inst.ix.unit_level[u];
            for cand in [Some(l), l.checked_sub(1)].into_iter().flatten() {
                if !levels.contains(&cand) {
                    levels.push(cand);
                }
            }
        }
        let mut before = 0.0;
        for &s in &schools {
            before += self.school_value(p, s)?;
        }
        let guide_before = self.guide;
        let mut undo: Vec<(usize, usize)> = Vec::with_capacity(moves.len());
        let mut delta = 0.0;
        for &(u, to) in moves {
            debug_assert_ne!(self.assign[u], to);
            undo.push((u, self.assign[u]));
            delta += self.relocate(p, u, to);
        }
        let after: Option<f64> = schools.iter().map(|&s| self.school_value(p, s)).sum();
        match after {
            Some(a) if self.locally_feasible(p, &schools, &levels) => {
                let d = delta + a - before;
                self.objective += d;
                self.last_guide = self.guide - guide_before;
                Some(d)
            }
            _ => {
                self.revert(p, &undo);
                self.guide = guide_before;
                None
            }
        }
    }

    /// Undoes a move list previously applied, given as (unit, old school).
    pub fn revert(&mut self, p: &Problem, undo: &[(usize, usize)]) {
        for &(u, s) in undo.iter().rev() {
            self.relocate(p, u, s);
        }
    }

    /// Reverts an accepted [`State::try_moves`] call and its objective change.
    pub fn undo_accepted(&mut self, p: &Problem, undo: &[(usize, usize)], delta: f64) {
        self.revert(p, undo);
        self.objective -= delta;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::feasible_dense;
    use crate::fixtures::tiny1;
    use crate::instance::ConstraintConfig;
    use crate::objectives::total_dense;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tiny1_moves_track_pure_evaluation() {
        let inst = tiny1(&ConstraintConfig::default());
        let cfg = ObjectiveConfig::new(
            [Objective::Distance, Objective::Balance, Objective::Compact],
            ConstraintConfig {
                enforce_dissimilarity_bound: true,
                ..ConstraintConfig::default()
            },
        );
        let p = Problem::new(&inst, &cfg);
        let mut st = State::new(&p, inst.sq_dense());
        assert!((st.objective - (2.0 + 0.4 + 1.0)).abs() < 1e-12);
        // p2 -> B is feasible
        let d = st.try_moves(&p, &[(1, 1)]).expect("feasible");
        let pure = total_dense(&inst, &st.assign, &cfg).unwrap();
        assert!((st.objective - pure).abs() < 1e-9);
        assert!(d < 0.5);
        // p3 -> A would leave A as {p1, p3}, two pieces
        assert!(st.try_moves(&p, &[(2, 0)]).is_none());
        assert_eq!(st.assign, vec![0, 1, 1, 1]);
    }

    #[test]
    fn random_moves_match_pure_evaluation() {
        let inst = crate::fixtures::two_level(&ConstraintConfig::default());
        let mut cfg = ObjectiveConfig::new(Objective::ALL, ConstraintConfig {
            enforce_capacity: false,
            enforce_contiguity: false,
            enforce_travel: false,
            ..ConstraintConfig::default()
        });
        cfg.calibrations.insert((1, Objective::Feeder), 0.7);
        let p = Problem::new(&inst, &cfg);
        let mut st = State::new(&p, inst.sq_dense());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let u = rng.random_range(0..inst.units().len());
            let s = p.cand[u][rng.random_range(0..p.cand[u].len())];
            let old = st.assign[u];
            if s == old {
                continue;
            }
            let Some(d) = st.try_moves(&p, &[(u, s)]) else { continue };
            if rng.random_bool(0.3) {
                st.undo_accepted(&p, &[(u, old)], d);
                st.resync(&p);
            }
            match total_dense(&inst, &st.assign, &cfg) {
                Ok(pure) => assert!((st.objective - pure).abs() < 1e-9),
                Err(_) => unreachable!("accepted states have defined objectives"),
            }
            assert!(feasible_dense(&inst, &st.assign, &cfg).unwrap().ok);
            let fresh = State::new(&p, st.assign.clone());
            assert!((st.guide - fresh.guide).abs() < 1e-9);
        }
    }

    #[test]
    fn guide_only_tracks_selected_feeder() {
        let inst = crate::fixtures::two_level(&ConstraintConfig::default());
        let cfg = ObjectiveConfig::single(Objective::Feeder, ConstraintConfig::default());
        let p = Problem::new(&inst, &cfg);
        let st = State::new(&p, inst.sq_dense());
        assert!(st.guide > 0.0);
        let off = ObjectiveConfig::single(Objective::Distance, ConstraintConfig::default());
        assert_eq!(State::new(&Problem::new(&inst, &off), inst.sq_dense()).guide, 0.0);
    }
}
