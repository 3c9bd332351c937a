//! District data model, ingestion and preprocessing.

mod candidates;
pub mod geometry;
mod load;
mod merge;
mod prune;
mod ses;
mod types;
mod write;

use std::collections::{BTreeMap, HashMap, HashSet};

pub use candidates::eliminate_candidates;
pub use geometry::{Polygon, Shape};
pub use load::{load_instance, InstancePaths};
pub use merge::{merge_units_greedy, MergeOutcome};
pub use prune::prune_weak_edges;
pub use ses::{classify_ses, read_block_groups, BlockGroup, SesClass, SesClassification};
pub use types::*;
pub use write::write_instance_files;

use crate::error::{EvalError, LoadError};

/// Raw district data before validation and indexing.
#[derive(Debug, Clone, Default)]
pub struct InstanceData {
    pub levels: LevelSet,
    pub schools: Vec<School>,
    pub units: Vec<PlanningUnit>,
    pub students: Vec<Student>,
    pub adjacency: AdjacencyGraph,
    pub geometry: BTreeMap<UnitId, Shape>,
}

/// Dense lookup tables derived from an [`InstanceData`]. All vectors are
/// indexed by the position of the entity in the id-sorted instance lists.
#[derive(Debug, Clone, Default)]
pub(crate) struct Index {
    pub school_pos: HashMap<SchoolId, usize>,
    pub unit_pos: HashMap<UnitId, usize>,
    pub school_level: Vec<usize>,
    /// Position of a school within its level's school list.
    pub school_local: Vec<usize>,
    pub unit_level: Vec<usize>,
    pub level_schools: Vec<Vec<usize>>,
    pub level_units: Vec<Vec<usize>>,
    pub level_students: Vec<Vec<usize>>,
    pub level_edges: Vec<Vec<(usize, usize)>>,
    pub neighbors: Vec<Vec<usize>>,
    pub unit_students: Vec<Vec<usize>>,
    pub unit_sq: Vec<usize>,
    pub unit_n: Vec<u64>,
    pub unit_g: Vec<u64>,
    pub level_n: Vec<u64>,
    pub level_g: Vec<u64>,
    pub student_level: Vec<usize>,
    /// Residence unit per level position; `None` below the student's level.
    pub student_residence: Vec<Vec<Option<usize>>>,
    pub student_sq: Vec<usize>,
    /// Distance to each school of the student's level (local order); NaN if unknown.
    pub student_dist: Vec<Vec<f64>>,
    pub student_sq_dist: Vec<f64>,
    /// For each level position `l` below the top: aggregated student
    /// transitions `(unit at l, unit at l+1, count)`.
    pub transitions: Vec<Vec<(usize, usize, u64)>>,
}

/// Immutable, validated district snapshot.
#[derive(Debug, Clone)]
pub struct Instance {
    data: InstanceData,
    sq_zoning: Zoning,
    candidates: CandidateSets,
    pub(crate) ix: Index,
}

fn consistency(msg: impl Into<String>) -> LoadError {
    LoadError::Consistency(msg.into())
}

impl Instance {
    /// Validates `data`, derives status-quo enrollments and indexes, and
    /// computes candidate sets under `config`.
    pub fn build(mut data: InstanceData, config: &ConstraintConfig) -> Result<Self, LoadError> {
        config.validate().map_err(consistency)?;
        data.schools.sort_by_key(|s| s.id);
        data.units.sort_by_key(|u| u.id);
        data.students.sort_by_key(|s| s.id);
        let ix = build_index(&mut data)?;
        let sq_zoning = Zoning::new(data.units.iter().map(|u| (u.id, u.sq_school)).collect());
        let mut inst = Instance {
            data,
            sq_zoning,
            candidates: CandidateSets::default(),
            ix,
        };
        inst.candidates = eliminate_candidates(&inst, config);
        Ok(inst)
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn into_data(self) -> InstanceData {
        self.data
    }

    pub fn levels(&self) -> &LevelSet {
        &self.data.levels
    }

    pub fn schools(&self) -> &[School] {
        &self.data.schools
    }

    pub fn units(&self) -> &[PlanningUnit] {
        &self.data.units
    }

    pub fn students(&self) -> &[Student] {
        &self.data.students
    }

    pub fn adjacency(&self) -> &AdjacencyGraph {
        &self.data.adjacency
    }

    pub fn geometry(&self) -> &BTreeMap<UnitId, Shape> {
        &self.data.geometry
    }

    pub fn sq_zoning(&self) -> &Zoning {
        &self.sq_zoning
    }

    pub fn candidates(&self) -> &CandidateSets {
        &self.candidates
    }

    pub fn school(&self, id: SchoolId) -> Option<&School> {
        self.ix.school_pos.get(&id).map(|&i| &self.data.schools[i])
    }

    pub fn unit(&self, id: UnitId) -> Option<&PlanningUnit> {
        self.ix.unit_pos.get(&id).map(|&i| &self.data.units[i])
    }

    pub fn schools_at(&self, level: Level) -> impl Iterator<Item = &School> + '_ {
        self.level_pos(level)
            .into_iter()
            .flat_map(move |l| self.ix.level_schools[l].iter().map(|&i| &self.data.schools[i]))
    }

    pub fn units_at(&self, level: Level) -> impl Iterator<Item = &PlanningUnit> + '_ {
        self.level_pos(level)
            .into_iter()
            .flat_map(move |l| self.ix.level_units[l].iter().map(|&i| &self.data.units[i]))
    }

    pub fn students_at(&self, level: Level) -> impl Iterator<Item = &Student> + '_ {
        self.level_pos(level).into_iter().flat_map(move |l| {
            self.ix.level_students[l]
                .iter()
                .map(|&i| &self.data.students[i])
        })
    }

    /// `|N^l|`: students currently at `level`.
    pub fn level_students(&self, level: Level) -> u64 {
        self.level_pos(level).map_or(0, |l| self.ix.level_n[l])
    }

    /// `|G^l|`: group students currently at `level`.
    pub fn level_group(&self, level: Level) -> u64 {
        self.level_pos(level).map_or(0, |l| self.ix.level_g[l])
    }

    pub(crate) fn level_pos(&self, level: Level) -> Option<usize> {
        self.data.levels.position(level)
    }

    pub(crate) fn level_at(&self, pos: usize) -> Level {
        self.data.levels.levels()[pos]
    }

    /// Distance from a student (by index) to a school (by index), if known
    /// and the school is at the student's level.
    pub(crate) fn distance_ix(&self, student: usize, school: usize) -> Option<f64> {
        if self.ix.school_level[school] != self.ix.student_level[student] {
            return None;
        }
        let d = self.ix.student_dist[student][self.ix.school_local[school]];
        (!d.is_nan()).then_some(d)
    }

    /// Converts a zoning to a dense vector of school indices per unit index,
    /// validating totality and level agreement.
    pub(crate) fn dense(&self, zoning: &Zoning) -> Result<Vec<usize>, EvalError> {
        let mut out = Vec::with_capacity(self.data.units.len());
        for (ui, unit) in self.data.units.iter().enumerate() {
            let sid = zoning.get(unit.id).ok_or(EvalError::Unassigned(unit.id))?;
            let si = *self
                .ix
                .school_pos
                .get(&sid)
                .ok_or(EvalError::UnknownSchool(sid))?;
            if self.ix.school_level[si] != self.ix.unit_level[ui] {
                return Err(EvalError::WrongLevel {
                    unit: unit.id,
                    school: sid,
                });
            }
            out.push(si);
        }
        for u in zoning.assignment.keys() {
            if !self.ix.unit_pos.contains_key(u) {
                return Err(EvalError::UnknownUnit(*u));
            }
        }
        Ok(out)
    }

    pub(crate) fn zoning_from_dense(&self, assign: &[usize]) -> Zoning {
        Zoning::new(
            self.data
                .units
                .iter()
                .zip(assign)
                .map(|(u, &s)| (u.id, self.data.schools[s].id))
                .collect(),
        )
    }

    pub(crate) fn sq_dense(&self) -> Vec<usize> {
        self.ix.unit_sq.clone()
    }

    /// Number of connected components of the subgraph induced by `units`
    /// (unit indices) on the level adjacency graph.
    pub(crate) fn components_of(&self, units: &[usize], member: impl Fn(usize) -> bool) -> usize {
        let mut seen: HashSet<usize> = HashSet::with_capacity(units.len());
        let mut comps = 0;
        let mut stack = Vec::new();
        for &start in units {
            if !seen.insert(start) {
                continue;
            }
            comps += 1;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in &self.ix.neighbors[u] {
                    if member(v) && seen.insert(v) {
                        stack.push(v);
                    }
                }
            }
        }
        comps
    }
}

fn build_index(data: &mut InstanceData) -> Result<Index, LoadError> {
    let levels = data.levels.clone();
    let nl = levels.len();
    let mut ix = Index {
        level_schools: vec![Vec::new(); nl],
        level_units: vec![Vec::new(); nl],
        level_students: vec![Vec::new(); nl],
        level_edges: vec![Vec::new(); nl],
        level_n: vec![0; nl],
        level_g: vec![0; nl],
        ..Index::default()
    };
    let level_pos = |l: Level, what: &str| {
        levels
            .position(l)
            .ok_or_else(|| consistency(format!("{what} has level {l} outside the level set")))
    };

    let mut seen_ids = HashSet::new();
    for (i, s) in data.schools.iter().enumerate() {
        if !seen_ids.insert(s.id.0) || ix.school_pos.insert(s.id, i).is_some() {
            return Err(consistency(format!("duplicate school id {}", s.id)));
        }
        if !(s.cap_min <= s.cap_desired && s.cap_desired <= s.cap_max) {
            return Err(consistency(format!(
                "school {}: capacities must satisfy cap_min <= cap_desired <= cap_max",
                s.id
            )));
        }
        let l = level_pos(s.level, &format!("school {}", s.id))?;
        ix.school_level.push(l);
        ix.school_local.push(ix.level_schools[l].len());
        ix.level_schools[l].push(i);
    }
    let mut seen_units = HashSet::new();
    for (i, u) in data.units.iter().enumerate() {
        if !seen_units.insert(u.id) {
            return Err(consistency(format!("duplicate unit id {}", u.id)));
        }
        ix.unit_pos.insert(u.id, i);
        let l = level_pos(u.level, &format!("unit {}", u.id))?;
        let si = *ix.school_pos.get(&u.sq_school).ok_or_else(|| {
            consistency(format!("unit {} references unknown school {}", u.id, u.sq_school))
        })?;
        if ix.school_level[si] != l {
            return Err(consistency(format!(
                "unit {} status-quo school {} is at another level",
                u.id, u.sq_school
            )));
        }
        if u.n_group > u.n_students {
            return Err(consistency(format!("unit {}: n_group exceeds n_students", u.id)));
        }
        ix.unit_level.push(l);
        ix.level_units[l].push(i);
        ix.unit_sq.push(si);
        ix.unit_n.push(u.n_students);
        ix.unit_g.push(u.n_group);
        ix.level_n[l] += u.n_students;
        ix.level_g[l] += u.n_group;
    }
    for s in &data.schools {
        if let Some(site) = s.site_unit {
            if !ix.unit_pos.contains_key(&site) {
                return Err(consistency(format!(
                    "school {} site unit {} is unknown",
                    s.id, site
                )));
            }
        }
    }

    // adjacency
    ix.neighbors = vec![Vec::new(); data.units.len()];
    for (level, edges) in data.adjacency.levels.iter_mut() {
        let l = level_pos(*level, "adjacency")?;
        let mut seen = HashSet::new();
        edges.retain(|e| seen.insert((e.a, e.b)));
        edges.sort_by_key(|e| (e.a, e.b));
        for e in edges.iter() {
            if e.a == e.b {
                return Err(consistency(format!("self-loop on unit {}", e.a)));
            }
            let pa = *ix.unit_pos.get(&e.a).ok_or_else(|| {
                consistency(format!("adjacency references unknown unit {}", e.a))
            })?;
            let pb = *ix.unit_pos.get(&e.b).ok_or_else(|| {
                consistency(format!("adjacency references unknown unit {}", e.b))
            })?;
            if ix.unit_level[pa] != l || ix.unit_level[pb] != l {
                return Err(consistency(format!(
                    "edge ({}, {}) does not join two units of level {}",
                    e.a, e.b, level
                )));
            }
            ix.level_edges[l].push((pa, pb));
            ix.neighbors[pa].push(pb);
            ix.neighbors[pb].push(pa);
        }
    }

    // students
    ix.unit_students = vec![Vec::new(); data.units.len()];
    let mut unit_counts = vec![(0u64, 0u64); data.units.len()];
    let mut seen_students = HashSet::new();
    let mut transitions: Vec<BTreeMap<(usize, usize), u64>> = vec![BTreeMap::new(); nl];
    for (i, st) in data.students.iter().enumerate() {
        if !seen_students.insert(st.id) {
            return Err(consistency(format!("duplicate student id {}", st.id)));
        }
        let l = level_pos(st.level, &format!("student {}", st.id))?;
        let mut residence = vec![None; nl];
        for (k, &lv) in levels.levels().iter().enumerate().skip(l) {
            let uid = *st.residence_units.get(&lv).ok_or_else(|| {
                consistency(format!(
                    "student {} has no residence unit at level {}",
                    st.id, lv
                ))
            })?;
            let up = *ix.unit_pos.get(&uid).ok_or_else(|| {
                consistency(format!(
                    "student {} references unknown unit {}",
                    st.id, uid
                ))
            })?;
            if ix.unit_level[up] != k {
                return Err(consistency(format!(
                    "student {}: unit {} is not a level-{} unit",
                    st.id, uid, lv
                )));
            }
            residence[k] = Some(up);
        }
        let home = residence[l].expect("own level filled above");
        let sq = *ix.school_pos.get(&st.sq_school).ok_or_else(|| {
            consistency(format!(
                "student {} references unknown school {}",
                st.id, st.sq_school
            ))
        })?;
        if ix.school_level[sq] != l {
            return Err(consistency(format!(
                "student {}: status-quo school {} is at another level",
                st.id, st.sq_school
            )));
        }
        let mut dist = vec![f64::NAN; ix.level_schools[l].len()];
        for (sid, &d) in &st.distances {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(consistency(format!(
                    "student {}: invalid distance {} to school {}",
                    st.id, d, sid
                )));
            }
            if let Some(&si) = ix.school_pos.get(sid) {
                if ix.school_level[si] == l {
                    dist[ix.school_local[si]] = d;
                }
            } else {
                return Err(consistency(format!(
                    "student {} has a distance to unknown school {}",
                    st.id, sid
                )));
            }
        }
        let sq_dist = dist[ix.school_local[sq]];
        if sq_dist.is_nan() {
            return Err(consistency(format!(
                "student {} has no distance to its status-quo school {}",
                st.id, st.sq_school
            )));
        }
        if l + 1 < nl {
            let up = residence[l + 1].expect("higher levels filled above");
            *transitions[l].entry((home, up)).or_insert(0) += 1;
        }
        unit_counts[home].0 += 1;
        unit_counts[home].1 += u64::from(st.in_group);
        ix.unit_students[home].push(i);
        ix.level_students[l].push(i);
        ix.student_level.push(l);
        ix.student_residence.push(residence);
        ix.student_sq.push(sq);
        ix.student_dist.push(dist);
        ix.student_sq_dist.push(sq_dist);
    }
    for (ui, u) in data.units.iter().enumerate() {
        let (n, g) = unit_counts[ui];
        if n != u.n_students || g != u.n_group {
            return Err(consistency(format!(
                "unit {} declares {} students ({} in group) but {} students ({} in group) reside there",
                u.id, u.n_students, u.n_group, n, g
            )));
        }
    }
    ix.transitions = transitions
        .into_iter()
        .take(nl.saturating_sub(1))
        .map(|m| m.into_iter().map(|((a, b), c)| (a, b, c)).collect())
        .collect();

    // status-quo enrollments
    let mut enrolled = vec![(0u64, 0u64); data.schools.len()];
    for ui in 0..data.units.len() {
        enrolled[ix.unit_sq[ui]].0 += ix.unit_n[ui];
        enrolled[ix.unit_sq[ui]].1 += ix.unit_g[ui];
    }
    for (s, (n, g)) in data.schools.iter_mut().zip(enrolled) {
        s.sq_enrolled = n;
        s.sq_group = g;
    }
    Ok(ix)
}
