//! Synthetic grid districts with controllable segregation.
//!
//! Every level shares one `rows x cols` grid of square cells; each cell is a
//! planning unit at every level, so residence across levels follows from the
//! cell. Students are sampled per level. The target group is concentrated in
//! a band of columns on the west side whose width matches `group_share`;
//! `clustering` blends uniform placement (0) with full confinement to that
//! band (1).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::LoadError;
use crate::instance::{
    AdjacencyGraph, ConstraintConfig, Edge, Instance, InstanceData, Level, LevelSet, PlanningUnit, Polygon, School,
    SchoolId, Shape, Student, StudentId, UnitId,
};

/// Driving distance over straight-line distance.
pub const ROAD_FACTOR: f64 = 1.3;
/// Floor, in cells, on the distance from a cell to a school in it.
pub const SAME_CELL_FLOOR: f64 = 0.5;

const UNIT_STRIDE: u32 = 100_000;
const SCHOOL_STRIDE: u32 = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub rows: usize,
    pub cols: usize,
    pub levels: Vec<Level>,
    /// One entry per level.
    pub schools_per_level: Vec<usize>,
    /// Inclusive range of students per unit and level.
    pub students_per_unit: (u64, u64),
    pub group_share: f64,
    pub clustering: f64,
    /// Capacity bounds are the status-quo enrollment times `1 -/+ slack`; the
    /// desired capacity is the even share, clamped into those bounds.
    pub capacity_slack: f64,
    /// Cell side in miles.
    pub cell_miles: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 10,
            levels: vec![1],
            schools_per_level: vec![4],
            students_per_unit: (10, 30),
            group_share: 0.3,
            clustering: 0.5,
            capacity_slack: 0.2,
            cell_miles: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic parameters: {0}")]
    Invalid(String),
    #[error("cannot partition level {level} among its schools: {reason}")]
    Partition { level: Level, reason: String },
    #[error(transparent)]
    Load(#[from] LoadError),
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.rows < 2 || self.cols < 2 {
            return bad(format!("grid must be at least 2x2, got {}x{}", self.rows, self.cols));
        }
        let cells = self.rows * self.cols;
        if cells >= UNIT_STRIDE as usize {
            return bad(format!("grid of {cells} cells is too large"));
        }
        if LevelSet::new(self.levels.clone()).is_none() {
            return bad("levels must be distinct and positive".into());
        }
        if self.schools_per_level.len() != self.levels.len() {
            return bad("schools_per_level needs one entry per level".into());
        }
        for &k in &self.schools_per_level {
            if k == 0 || k > cells || k >= SCHOOL_STRIDE as usize {
                return bad(format!("{k} schools do not fit a grid of {cells} cells"));
            }
        }
        let (lo, hi) = self.students_per_unit;
        if lo == 0 || lo > hi {
            return bad(format!("students per unit range {lo}..={hi} is invalid"));
        }
        if !(0.0..=1.0).contains(&self.group_share) || !(0.0..=1.0).contains(&self.clustering) {
            return bad("group_share and clustering must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.capacity_slack) {
            return bad("capacity_slack must lie in [0, 1)".into());
        }
        if !(self.cell_miles > 0.0 && self.cell_miles.is_finite()) {
            return bad("cell_miles must be positive".into());
        }
        Ok(())
    }

    fn cell_xy(&self, c: usize) -> (f64, f64) {
        ((c % self.cols) as f64 + 0.5, (c / self.cols) as f64 + 0.5)
    }

    fn cell_distance(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.cell_xy(a);
        let (bx, by) = self.cell_xy(b);
        ROAD_FACTOR * self.cell_miles * (ax - bx).hypot(ay - by).max(SAME_CELL_FLOOR)
    }

    fn neighbours(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, q) = (c / self.cols, c % self.cols);
        let up = (r > 0).then(|| c - self.cols);
        let down = (r + 1 < self.rows).then(|| c + self.cols);
        let left = (q > 0).then(|| c - 1);
        let right = (q + 1 < self.cols).then(|| c + 1);
        [up, down, left, right].into_iter().flatten()
    }

    /// Probability that a student in cell `c` is in the group.
    pub fn group_probability(&self, c: usize) -> f64 {
        let (x, _) = self.cell_xy(c);
        let inside = if x / (self.cols as f64) < self.group_share { 1.0 } else { 0.0 };
        (1.0 - self.clustering) * self.group_share + self.clustering * inside
    }
}

pub fn unit_id(level: Level, cell: usize) -> UnitId {
    UnitId(level * UNIT_STRIDE + cell as u32 + 1)
}

pub fn school_id(level: Level, k: usize) -> SchoolId {
    SchoolId(level * SCHOOL_STRIDE + k as u32 + 1)
}

/// Site cells for `k` schools: rows of evenly spaced blocks, the last row
/// spread over its own width.
fn school_sites(p: &SynthParams, k: usize) -> Vec<usize> {
    let gx = ((k as f64 * p.cols as f64 / p.rows as f64).sqrt().ceil() as usize).clamp(1, k);
    let gy = k.div_ceil(gx);
    let mut used = vec![false; p.rows * p.cols];
    let mut sites = Vec::with_capacity(k);
    for by in 0..gy {
        let m = gx.min(k - by * gx);
        let row = (((by as f64 + 0.5) * p.rows as f64 / gy as f64) as usize).min(p.rows - 1);
        for bx in 0..m {
            let col = (((bx as f64 + 0.5) * p.cols as f64 / m as f64) as usize).min(p.cols - 1);
            let want = row * p.cols + col;
            let cell = (0..used.len())
                .filter(|&c| !used[c])
                .min_by(|&a, &b| p.cell_distance(a, want).total_cmp(&p.cell_distance(b, want)).then(a.cmp(&b)))
                .expect("fewer schools than cells");
            used[cell] = true;
            sites.push(cell);
        }
    }
    sites
}

/// Grows one region per school from its site. The school with the lowest
/// load that can still grow takes its nearest frontier cell.
fn grow_regions(p: &SynthParams, sites: &[usize], load: &[u64], level: Level) -> Result<Vec<usize>, SynthError> {
    let n = p.rows * p.cols;
    let mut owner = vec![usize::MAX; n];
    let mut total = vec![0u64; sites.len()];
    for (s, &c) in sites.iter().enumerate() {
        owner[c] = s;
        total[s] += load[c];
    }
    let mut left = n - sites.len();
    while left > 0 {
        let mut order: Vec<usize> = (0..sites.len()).collect();
        order.sort_by_key(|&s| (total[s], s));
        let pick = order.into_iter().find_map(|s| {
            (0..n)
                .filter(|&c| owner[c] == usize::MAX && p.neighbours(c).any(|d| owner[d] == s))
                .min_by(|&a, &b| {
                    p.cell_distance(a, sites[s])
                        .total_cmp(&p.cell_distance(b, sites[s]))
                        .then(a.cmp(&b))
                })
                .map(|c| (s, c))
        });
        let Some((s, c)) = pick else {
            return Err(SynthError::Partition {
                level,
                reason: format!("{left} cells unreachable"),
            });
        };
        owner[c] = s;
        total[s] += load[c];
        left -= 1;
    }
    Ok(owner)
}

/// Raw instance tables for `params`.
pub fn generate_data(params: &SynthParams) -> Result<InstanceData, SynthError> {
    params.validate()?;
    let p = params;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.rows * p.cols;
    let mut levels = p.levels.clone();
    levels.sort_unstable();
    let mut schools_per_level: Vec<(Level, usize)> = p.levels.iter().copied().zip(p.schools_per_level.iter().copied()).collect();
    schools_per_level.sort_unstable();

    let mut data = InstanceData {
        levels: LevelSet::new(levels.clone()).expect("validated"),
        adjacency: AdjacencyGraph::default(),
        ..InstanceData::default()
    };
    let mut next_student = 1u64;
    for &(level, k) in &schools_per_level {
        // (group, size) per student, sampled cell by cell
        let mut cell_students: Vec<Vec<bool>> = Vec::with_capacity(n);
        for c in 0..n {
            let count = rng.random_range(p.students_per_unit.0..=p.students_per_unit.1);
            let prob = p.group_probability(c);
            cell_students.push((0..count).map(|_| rng.random_bool(prob)).collect());
        }
        let load: Vec<u64> = cell_students.iter().map(|v| v.len() as u64).collect();
        let sites = school_sites(p, k);
        let owner = grow_regions(p, &sites, &load, level)?;

        let mut enrolled = vec![0u64; k];
        for c in 0..n {
            enrolled[owner[c]] += load[c];
        }
        let total: u64 = load.iter().sum();
        for s in 0..k {
            let e = enrolled[s] as f64;
            let cap_min = (e * (1.0 - p.capacity_slack)).floor() as u64;
            let cap_max = (e * (1.0 + p.capacity_slack)).ceil() as u64;
            let even = (total as f64 / k as f64).round() as u64;
            data.schools.push(School {
                id: school_id(level, s),
                level,
                cap_min,
                cap_max,
                cap_desired: even.clamp(cap_min.max(1), cap_max),
                sq_enrolled: 0,
                sq_group: 0,
                site_unit: Some(unit_id(level, sites[s])),
            });
        }
        for c in 0..n {
            let (x, y) = p.cell_xy(c);
            data.units.push(PlanningUnit {
                id: unit_id(level, c),
                level,
                n_students: load[c],
                n_group: cell_students[c].iter().filter(|&&g| g).count() as u64,
                sq_school: school_id(level, owner[c]),
                centroid: Some((x * p.cell_miles, y * p.cell_miles)),
            });
            let x0 = (c % p.cols) as f64 * p.cell_miles;
            let y0 = (c / p.cols) as f64 * p.cell_miles;
            data.geometry.insert(
                unit_id(level, c),
                Shape::from_polygon(Polygon::rect(x0, y0, x0 + p.cell_miles, y0 + p.cell_miles)),
            );
            let edges = data.adjacency.levels.entry(level).or_default();
            for d in p.neighbours(c).filter(|&d| d > c) {
                edges.push(Edge::new(unit_id(level, c), unit_id(level, d), Some(p.cell_miles)));
            }
            let distances: BTreeMap<SchoolId, f64> =
                (0..k).map(|s| (school_id(level, s), p.cell_distance(c, sites[s]))).collect();
            let residence: BTreeMap<Level, UnitId> =
                levels.iter().filter(|&&l| l >= level).map(|&l| (l, unit_id(l, c))).collect();
            for &g in &cell_students[c] {
                data.students.push(Student {
                    id: StudentId(next_student),
                    level,
                    residence_units: residence.clone(),
                    sq_school: school_id(level, owner[c]),
                    in_group: g,
                    distances: distances.clone(),
                });
                next_student += 1;
            }
        }
    }
    Ok(data)
}

/// Generates and indexes a synthetic district.
pub fn generate(params: &SynthParams, config: &ConstraintConfig) -> Result<Instance, SynthError> {
    Ok(Instance::build(generate_data(params)?, config)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::check_feasible;
    use crate::eval::evaluate;
    use crate::instance::write_instance_files;
    use crate::objectives::{edge_cut_compactness, ObjectiveConfig};

    fn params(rows: usize, cols: usize, k: usize, clustering: f64, seed: u64) -> SynthParams {
        SynthParams {
            rows,
            cols,
            schools_per_level: vec![k],
            clustering,
            seed,
            ..SynthParams::default()
        }
    }

    #[test]
    fn single_school_degenerate() {
        let inst = generate(&params(2, 2, 1, 0.5, 3), &ConstraintConfig::default()).unwrap();
        assert!(inst.units().iter().all(|u| u.sq_school == school_id(1, 0)));
        assert_eq!(edge_cut_compactness(inst.sq_zoning(), &inst, 1).unwrap(), 0);
        let d = evaluate(inst.sq_zoning(), &inst, &ObjectiveConfig::default()).unwrap().levels[0].district_dissimilarity;
        assert!(d.is_none_or(|d| d.abs() < 1e-12));
    }

    #[test]
    fn no_clustering_gives_low_dissimilarity() {
        for seed in 0..20 {
            let inst = generate(&params(10, 10, 4, 0.0, seed), &ConstraintConfig::default()).unwrap();
            let d = evaluate(inst.sq_zoning(), &inst, &ObjectiveConfig::default()).unwrap().levels[0]
                .district_dissimilarity
                .unwrap();
            assert!(d < 0.15, "seed {seed}: {d}");
        }
    }

    #[test]
    fn full_clustering_split_along_the_band() {
        let p = SynthParams {
            group_share: 0.5,
            ..params(10, 10, 2, 1.0, 7)
        };
        let inst = generate(&p, &ConstraintConfig::default()).unwrap();
        let d = evaluate(inst.sq_zoning(), &inst, &ObjectiveConfig::default()).unwrap().levels[0]
            .district_dissimilarity
            .unwrap();
        assert!(d > 0.8, "{d}");
    }

    #[test]
    fn status_quo_is_feasible() {
        for (seed, (r, c, k)) in [(2, 2, 1usize), (3, 4, 3), (10, 10, 4), (5, 7, 6), (2, 9, 2)].into_iter().enumerate() {
            for levels in [vec![1], vec![1, 2]] {
                let p = SynthParams {
                    schools_per_level: levels.iter().map(|&l| if l == 1 { k } else { k.div_ceil(2) }).collect(),
                    levels,
                    ..params(r, c, k, 0.7, seed as u64)
                };
                let inst = generate(&p, &ConstraintConfig::default()).unwrap();
                let cfg = ObjectiveConfig::default();
                assert!(check_feasible(inst.sq_zoning(), &inst, &cfg).unwrap().ok);
                for s in inst.schools() {
                    assert!(s.sq_enrolled > 0);
                    let comps = crate::constraints::check_contiguity(inst.sq_zoning(), &inst, s.level).unwrap();
                    assert!(comps.is_empty());
                }
            }
        }
    }

    #[test]
    fn regions_are_contiguous() {
        let p = params(8, 9, 5, 0.3, 11);
        let data = generate_data(&p).unwrap();
        let inst = Instance::build(data, &ConstraintConfig::default()).unwrap();
        for s in inst.schools() {
            let members: Vec<usize> = (0..inst.units().len()).filter(|&u| inst.units()[u].sq_school == s.id).collect();
            let set: std::collections::BTreeSet<usize> = members.iter().copied().collect();
            let mut seen = std::collections::BTreeSet::from([members[0]]);
            let mut stack = vec![members[0]];
            while let Some(u) = stack.pop() {
                let c = (inst.units()[u].id.0 - UNIT_STRIDE - 1) as usize;
                for d in p.neighbours(c) {
                    if set.contains(&d) && seen.insert(d) {
                        stack.push(d);
                    }
                }
            }
            assert_eq!(seen.len(), members.len(), "school {}", s.id);
        }
    }

    #[test]
    fn same_seed_same_files() {
        let p = SynthParams {
            levels: vec![1, 2],
            schools_per_level: vec![4, 2],
            ..params(6, 6, 4, 0.5, 42)
        };
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            write_instance_files(&generate(&p, &ConstraintConfig::default()).unwrap(), d.path()).unwrap();
        }
        let mut names: Vec<_> = std::fs::read_dir(dirs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 6);
        for name in names {
            let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&name)).unwrap();
            assert_eq!(a, b, "{name:?}");
        }
        let other = generate_data(&SynthParams { seed: 43, ..p.clone() }).unwrap();
        assert_ne!(other.students, generate_data(&p).unwrap().students);
    }

    #[test]
    fn distances_and_residence() {
        let p = SynthParams {
            levels: vec![1, 2],
            schools_per_level: vec![2, 1],
            ..params(3, 3, 2, 0.0, 1)
        };
        let data = generate_data(&p).unwrap();
        let st = data.students.iter().find(|s| s.level == 1).unwrap();
        assert_eq!(st.residence_units.len(), 2);
        let c = (st.residence_units[&1].0 - UNIT_STRIDE - 1) as usize;
        assert_eq!(st.residence_units[&2], unit_id(2, c));
        for (&s, &d) in &st.distances {
            assert!(d >= ROAD_FACTOR * p.cell_miles * SAME_CELL_FLOOR);
            let site = data.schools.iter().find(|x| x.id == s).unwrap().site_unit.unwrap();
            let sc = (site.0 - UNIT_STRIDE - 1) as usize;
            assert!((d - p.cell_distance(c, sc)).abs() < 1e-12);
        }
        assert!(matches!(
            generate_data(&SynthParams { rows: 1, ..p.clone() }),
            Err(SynthError::Invalid(_))
        ));
    }
}
