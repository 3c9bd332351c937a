use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// School level identifier (1 = elementary by convention).
pub type Level = u32;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident, $inner:ty) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl From<$inner> for $name {
            fn from(v: $inner) -> Self {
                Self(v)
            }
        }
    };
}

id_newtype!(
    /// Globally unique school id (unique across all levels).
    SchoolId,
    u32
);
id_newtype!(
    /// Globally unique planning-unit id (unique across all levels).
    UnitId,
    u32
);
id_newtype!(StudentId, u64);

/// Ordered set of school levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSet {
    levels: Vec<Level>,
}

impl LevelSet {
    pub fn new(mut levels: Vec<Level>) -> Option<Self> {
        if levels.is_empty() || levels.contains(&0) {
            return None;
        }
        let n = levels.len();
        levels.sort_unstable();
        levels.dedup();
        if levels.len() != n {
            return None;
        }
        Some(Self { levels })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn max_level(&self) -> Level {
        *self.levels.last().expect("nonempty by construction")
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn position(&self, level: Level) -> Option<usize> {
        self.levels.binary_search(&level).ok()
    }

    /// The level following `level`, if any.
    pub fn next(&self, level: Level) -> Option<Level> {
        let pos = self.position(level)?;
        self.levels.get(pos + 1).copied()
    }
}

impl Default for LevelSet {
    fn default() -> Self {
        Self {
            levels: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct School {
    pub id: SchoolId,
    pub level: Level,
    pub cap_min: u64,
    pub cap_max: u64,
    pub cap_desired: u64,
    /// Status-quo enrollment, derived from the status-quo zoning at build time.
    pub sq_enrolled: u64,
    /// Status-quo group enrollment, derived likewise.
    pub sq_group: u64,
    pub site_unit: Option<UnitId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningUnit {
    pub id: UnitId,
    pub level: Level,
    pub n_students: u64,
    pub n_group: u64,
    pub sq_school: SchoolId,
    pub centroid: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Student {
    pub id: StudentId,
    pub level: Level,
    pub residence_units: BTreeMap<Level, UnitId>,
    pub sq_school: SchoolId,
    pub in_group: bool,
    pub distances: BTreeMap<SchoolId, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: UnitId,
    pub b: UnitId,
    pub shared_boundary_len: Option<f64>,
}

impl Edge {
    pub fn new(a: UnitId, b: UnitId, shared_boundary_len: Option<f64>) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        Self {
            a,
            b,
            shared_boundary_len,
        }
    }

    pub fn other(&self, u: UnitId) -> UnitId {
        if self.a == u {
            self.b
        } else {
            self.a
        }
    }
}

/// Per-level planning-unit adjacency. Edges are stored with `a < b`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    pub levels: BTreeMap<Level, Vec<Edge>>,
}

impl AdjacencyGraph {
    pub fn edges(&self, level: Level) -> &[Edge] {
        self.levels.get(&level).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_edges(&self) -> impl Iterator<Item = (Level, &Edge)> {
        self.levels
            .iter()
            .flat_map(|(l, es)| es.iter().map(move |e| (*l, e)))
    }

    pub fn degree_map(&self, level: Level) -> BTreeMap<UnitId, usize> {
        let mut deg = BTreeMap::new();
        for e in self.edges(level) {
            *deg.entry(e.a).or_insert(0) += 1;
            *deg.entry(e.b).or_insert(0) += 1;
        }
        deg
    }

    pub fn edge_count(&self) -> usize {
        self.levels.values().map(Vec::len).sum()
    }
}

/// Complete assignment of planning units to schools.
///
/// The binary indicator view `z(p, s)` is derived: it is true exactly when
/// `assignment[p] == s`, so every unit is zoned to exactly one school.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Zoning {
    pub assignment: BTreeMap<UnitId, SchoolId>,
}

impl Zoning {
    pub fn new(assignment: BTreeMap<UnitId, SchoolId>) -> Self {
        Self { assignment }
    }

    pub fn get(&self, unit: UnitId) -> Option<SchoolId> {
        self.assignment.get(&unit).copied()
    }

    pub fn set(&mut self, unit: UnitId, school: SchoolId) {
        self.assignment.insert(unit, school);
    }

    pub fn indicator(&self, unit: UnitId, school: SchoolId) -> bool {
        self.get(unit) == Some(school)
    }

    /// Returns a copy with the given reassignments applied.
    pub fn with(&self, changes: &[(UnitId, SchoolId)]) -> Self {
        let mut z = self.clone();
        for &(u, s) in changes {
            z.set(u, s);
        }
        z
    }
}

/// Admissible schools per unit after travel-based elimination.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CandidateSets {
    pub sets: BTreeMap<UnitId, BTreeSet<SchoolId>>,
}

impl CandidateSets {
    pub fn get(&self, unit: UnitId) -> Option<&BTreeSet<SchoolId>> {
        self.sets.get(&unit)
    }

    pub fn contains(&self, unit: UnitId, school: SchoolId) -> bool {
        self.sets.get(&unit).is_some_and(|s| s.contains(&school))
    }

    pub fn is_subset_of(&self, other: &CandidateSets) -> bool {
        self.sets.iter().all(|(u, s)| {
            other
                .sets
                .get(u)
                .is_some_and(|o| s.iter().all(|x| o.contains(x)))
        })
    }

    /// Size of the assignment search space, saturating at `f64::MAX`.
    pub fn space_size(&self) -> f64 {
        self.sets.values().map(|s| s.len() as f64).product()
    }
}

/// How the status-quo deviation enters the dissimilarity bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundDeviation {
    /// `d_s <= max(lambda, |sq share - district share|)`; the status quo always satisfies it.
    #[default]
    Absolute,
    /// `d_s <= max(lambda, sq share - district share)`, taken literally.
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    /// Relative travel slack, uniform over students.
    pub mu_ratio: f64,
    /// Per-student overrides of `mu_ratio`.
    #[serde(default)]
    pub mu_ratio_overrides: BTreeMap<StudentId, f64>,
    pub mu_abs: Option<f64>,
    pub lambda: f64,
    pub epsilon: u64,
    pub enforce_travel: bool,
    pub enforce_capacity: bool,
    pub enforce_contiguity: bool,
    pub enforce_dissimilarity_bound: bool,
    pub enforce_feeder_no_increase: bool,
    #[serde(default)]
    pub bound_deviation: BoundDeviation,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            mu_ratio: 1.0,
            mu_ratio_overrides: BTreeMap::new(),
            mu_abs: None,
            lambda: 0.15,
            epsilon: 1,
            enforce_travel: true,
            enforce_capacity: true,
            enforce_contiguity: true,
            enforce_dissimilarity_bound: false,
            enforce_feeder_no_increase: false,
            bound_deviation: BoundDeviation::Absolute,
        }
    }
}

impl ConstraintConfig {
    pub fn mu_ratio_for(&self, student: StudentId) -> f64 {
        self.mu_ratio_overrides
            .get(&student)
            .copied()
            .unwrap_or(self.mu_ratio)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.mu_ratio >= 0.0) || self.mu_ratio_overrides.values().any(|m| !(*m >= 0.0)) {
            return Err("mu_ratio must be nonnegative".into());
        }
        if let Some(a) = self.mu_abs {
            if !(a >= 0.0) {
                return Err("mu_abs must be nonnegative".into());
            }
        }
        if !(0.0..=0.5).contains(&self.lambda) {
            return Err(format!("lambda must lie in [0, 0.5], got {}", self.lambda));
        }
        if self.epsilon < 1 {
            return Err("epsilon must be at least 1".into());
        }
        Ok(())
    }

    /// True when the travel bound admits distance `to` for a student whose
    /// status-quo distance is `sq`.
    pub fn travel_ok(&self, student: StudentId, to: f64, sq: f64) -> bool {
        let ratio_ok = to <= (1.0 + self.mu_ratio_for(student)) * sq;
        let abs_ok = self.mu_abs.is_none_or(|a| to <= sq + a);
        ratio_ok && abs_ok
    }
}
