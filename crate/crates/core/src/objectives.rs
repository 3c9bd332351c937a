//! Objective terms and their calibrated weighted sum.
//!
//! Every evaluator here works from the student list and the zoning alone,
//! with no cached state, so the solver can use them as a reference for its
//! incremental bookkeeping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::instance::{ConstraintConfig, Instance, Level, SchoolId, UnitId, Zoning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Distance,
    Balance,
    Compact,
    Feeder,
    Capacity,
}

impl Objective {
    pub const ALL: [Objective; 5] = [
        Objective::Distance,
        Objective::Balance,
        Objective::Compact,
        Objective::Feeder,
        Objective::Capacity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Distance => "distance",
            Objective::Balance => "balance",
            Objective::Compact => "compact",
            Objective::Feeder => "feeder",
            Objective::Capacity => "capacity",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown objective `{s}`"))
    }
}

/// Per-school objective weights. Missing entries weigh 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SchoolWeights {
    pub map: BTreeMap<SchoolId, BTreeMap<Objective, f64>>,
}

impl SchoolWeights {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn get(&self, school: SchoolId, obj: Objective) -> f64 {
        self.map
            .get(&school)
            .and_then(|m| m.get(&obj))
            .copied()
            .unwrap_or(1.0)
    }

    pub fn set(&mut self, school: SchoolId, obj: Objective, w: f64) {
        self.map.entry(school).or_default().insert(obj, w);
    }

    pub fn is_uniform(&self) -> bool {
        self.map.values().all(|m| m.values().all(|&w| w == 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    pub selected: BTreeSet<Objective>,
    /// `b` per (level, objective); missing entries are 1.
    pub calibrations: BTreeMap<(Level, Objective), f64>,
    pub weights: SchoolWeights,
    pub constraints: ConstraintConfig,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self::new([], ConstraintConfig::default())
    }
}

impl ObjectiveConfig {
    pub fn new(selected: impl IntoIterator<Item = Objective>, constraints: ConstraintConfig) -> Self {
        Self {
            selected: selected.into_iter().collect(),
            calibrations: BTreeMap::new(),
            weights: SchoolWeights::uniform(),
            constraints,
        }
    }

    pub fn single(obj: Objective, constraints: ConstraintConfig) -> Self {
        Self::new([obj], constraints)
    }

    pub fn calibration(&self, level: Level, obj: Objective) -> f64 {
        self.calibrations.get(&(level, obj)).copied().unwrap_or(1.0)
    }

    pub fn with_calibration(mut self, level: Level, obj: Objective, b: f64) -> Self {
        self.calibrations.insert((level, obj), b);
        self
    }

    pub fn is_selected(&self, obj: Objective) -> bool {
        self.selected.contains(&obj)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.constraints.validate()?;
        if let Some(((l, o), b)) = self.calibrations.iter().find(|(_, b)| !(**b >= 0.0)) {
            return Err(format!("calibration for ({l}, {o}) must be nonnegative, got {b}"));
        }
        for (s, m) in &self.weights.map {
            if let Some((o, w)) = m.iter().find(|(_, w)| !(**w >= 0.0)) {
                return Err(format!("weight of school {s} for {o} must be nonnegative, got {w}"));
            }
        }
        Ok(())
    }
}

/// What a single objective term is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum TermEntity {
    School(SchoolId),
    Edge(UnitId, UnitId),
}

impl fmt::Display for TermEntity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermEntity::School(s) => write!(f, "school {s}"),
            TermEntity::Edge(a, b) => write!(f, "edge {a}-{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermValue {
    pub entity: TermEntity,
    /// Unweighted, uncalibrated term.
    pub value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelTerm {
    pub level: Level,
    pub objective: Objective,
    pub selected: bool,
    /// Weighted objective value `f_obj(l)`; NaN when it is undefined for an
    /// unselected objective.
    pub raw: f64,
    pub calibration: f64,
    /// `b * f` for selected objectives, 0 otherwise.
    pub calibrated: f64,
    pub terms: Vec<TermValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveBreakdown {
    pub entries: Vec<LevelTerm>,
    pub total: f64,
}

impl ObjectiveBreakdown {
    pub fn entry(&self, level: Level, obj: Objective) -> Option<&LevelTerm> {
        self.entries
            .iter()
            .find(|e| e.level == level && e.objective == obj)
    }

    pub fn raw(&self, level: Level, obj: Objective) -> Option<f64> {
        self.entry(level, obj).map(|e| e.raw)
    }
}

/// Students, group members and distance sums per school of one level, by
/// local school position.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SchoolTotals {
    pub n: Vec<u64>,
    pub g: Vec<u64>,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// Distance sums are only accumulated when `with_distance` is set, since
/// students may lack distances to schools outside their candidate sets.
pub(crate) fn school_totals(
    inst: &Instance,
    assign: &[usize],
    l: usize,
    with_distance: bool,
) -> Result<SchoolTotals, EvalError> {
    let ix = &inst.ix;
    let k = ix.level_schools[l].len();
    let mut t = SchoolTotals {
        n: vec![0; k],
        g: vec![0; k],
        num: vec![0.0; k],
        den: vec![0.0; k],
    };
    for &st in &ix.level_students[l] {
        let home = ix.student_residence[st][l].expect("own-level residence");
        let s = assign[home];
        let local = ix.school_local[s];
        let d = if with_distance { ix.student_dist[st][local] } else { 0.0 };
        if d.is_nan() {
            return Err(EvalError::MissingDistance {
                student: inst.students()[st].id.0,
                school: inst.schools()[s].id,
            });
        }
        t.n[local] += 1;
        t.g[local] += u64::from(inst.students()[st].in_group);
        t.num[local] += d;
        t.den[local] += ix.student_sq_dist[st];
    }
    Ok(t)
}

fn school_id(inst: &Instance, l: usize, local: usize) -> SchoolId {
    inst.schools()[inst.ix.level_schools[l][local]].id
}

/// `max(|g/n - share|, lambda)`, the per-school balance term.
pub(crate) fn balance_term(n: u64, g: u64, share: f64, lambda: f64) -> f64 {
    ((g as f64 / n as f64 - share).abs()).max(lambda)
}

pub(crate) fn group_share(inst: &Instance, l: usize) -> f64 {
    let n = inst.ix.level_n[l];
    if n == 0 {
        0.0
    } else {
        inst.ix.level_g[l] as f64 / n as f64
    }
}

/// Unweighted per-term values of `obj` at level position `l`.
pub(crate) fn level_terms(
    inst: &Instance,
    assign: &[usize],
    l: usize,
    obj: Objective,
    constraints: &ConstraintConfig,
) -> Result<Vec<(TermEntity, f64)>, EvalError> {
    let ix = &inst.ix;
    let k = ix.level_schools[l].len();
    match obj {
        Objective::Distance | Objective::Balance | Objective::Capacity => {
            let t = school_totals(inst, assign, l, obj == Objective::Distance)?;
            let share = group_share(inst, l);
            (0..k)
                .map(|local| {
                    let sid = school_id(inst, l, local);
                    let v = match obj {
                        Objective::Distance => {
                            if t.n[local] == 0 {
                                return Err(EvalError::EmptySchool(sid));
                            }
                            if t.den[local] <= 0.0 {
                                return Err(EvalError::ZeroDenominator(sid));
                            }
                            t.num[local] / t.den[local]
                        }
                        Objective::Balance => {
                            if t.n[local] == 0 {
                                return Err(EvalError::EmptySchool(sid));
                            }
                            balance_term(t.n[local], t.g[local], share, constraints.lambda)
                        }
                        _ => {
                            let desired = inst.schools()[ix.level_schools[l][local]].cap_desired;
                            if desired == 0 {
                                return Err(EvalError::NonpositiveDesired(sid));
                            }
                            (1.0 - t.n[local] as f64 / desired as f64).abs()
                        }
                    };
                    Ok((TermEntity::School(sid), v))
                })
                .collect()
        }
        Objective::Compact => Ok(ix.level_edges[l]
            .iter()
            .map(|&(a, b)| {
                let cut = assign[a] != assign[b];
                (
                    TermEntity::Edge(inst.units()[a].id, inst.units()[b].id),
                    if cut { 1.0 } else { 0.0 },
                )
            })
            .collect()),
        Objective::Feeder => {
            if l + 1 >= ix.level_n.len() {
                return Ok(Vec::new());
            }
            let counts = feeder_counts(inst, assign, l);
            let mut per = vec![0u64; k];
            for (&(s1, _), &c) in &counts {
                if c >= constraints.epsilon {
                    per[ix.school_local[s1]] += 1;
                }
            }
            Ok((0..k)
                .map(|local| (TermEntity::School(school_id(inst, l, local)), per[local] as f64))
                .collect())
        }
    }
}

/// Student counts per (school at `l`, school at `l + 1`), keyed by school
/// index, taken student by student.
pub(crate) fn feeder_counts(inst: &Instance, assign: &[usize], l: usize) -> BTreeMap<(usize, usize), u64> {
    let ix = &inst.ix;
    let mut counts = BTreeMap::new();
    for &st in &ix.level_students[l] {
        let lower = ix.student_residence[st][l].expect("own-level residence");
        let upper = ix.student_residence[st][l + 1].expect("validated at build");
        *counts.entry((assign[lower], assign[upper])).or_insert(0) += 1;
    }
    counts
}

fn weighted(obj: Objective, weights: &SchoolWeights, terms: &[(TermEntity, f64)]) -> f64 {
    terms
        .iter()
        .map(|(e, v)| match e {
            TermEntity::School(s) => weights.get(*s, obj) * v,
            TermEntity::Edge(..) => *v,
        })
        .sum()
}

fn level_index(inst: &Instance, level: Level) -> Result<usize, EvalError> {
    inst.level_pos(level).ok_or(EvalError::UnknownLevel(level))
}

/// `sum_s w_s * (sum of distances to s) / (sum of status-quo distances)`
/// over the students zoned to each school of `level`.
pub fn travel_distance_ratio(
    zoning: &Zoning,
    inst: &Instance,
    level: Level,
    weights: &SchoolWeights,
) -> Result<f64, EvalError> {
    let l = level_index(inst, level)?;
    let assign = inst.dense(zoning)?;
    let terms = level_terms(inst, &assign, l, Objective::Distance, &ConstraintConfig::default())?;
    Ok(weighted(Objective::Distance, weights, &terms))
}

/// `sum_s w_s * |1 - o_s / o_s*|`.
pub fn capacity_objective(
    zoning: &Zoning,
    inst: &Instance,
    level: Level,
    weights: &SchoolWeights,
) -> Result<f64, EvalError> {
    let l = level_index(inst, level)?;
    let assign = inst.dense(zoning)?;
    let terms = level_terms(inst, &assign, l, Objective::Capacity, &ConstraintConfig::default())?;
    Ok(weighted(Objective::Capacity, weights, &terms))
}

/// `sum_s w_s * max(d_s, lambda)` with `d_s` the gap between the school's
/// group share and the level's.
pub fn balance_objective(
    zoning: &Zoning,
    inst: &Instance,
    level: Level,
    weights: &SchoolWeights,
    lambda: f64,
) -> Result<f64, EvalError> {
    let l = level_index(inst, level)?;
    let assign = inst.dense(zoning)?;
    let cfg = ConstraintConfig {
        lambda,
        ..ConstraintConfig::default()
    };
    let terms = level_terms(inst, &assign, l, Objective::Balance, &cfg)?;
    Ok(weighted(Objective::Balance, weights, &terms))
}

/// Number of adjacency edges at `level` whose endpoints go to different schools.
pub fn edge_cut_compactness(zoning: &Zoning, inst: &Instance, level: Level) -> Result<u64, EvalError> {
    let l = level_index(inst, level)?;
    let assign = inst.dense(zoning)?;
    Ok(inst.ix.level_edges[l]
        .iter()
        .filter(|&&(a, b)| assign[a] != assign[b])
        .count() as u64)
}

/// Active feeder patterns out of `level`: pairs (s1, s2) followed by at
/// least `epsilon` students. Returns the count and the sum weighted by the
/// feeding school's weight; both are zero at the top level.
pub fn feeder_patterns(
    zoning: &Zoning,
    inst: &Instance,
    level: Level,
    epsilon: u64,
    weights: &SchoolWeights,
) -> Result<(u64, f64), EvalError> {
    let l = level_index(inst, level)?;
    let assign = inst.dense(zoning)?;
    let cfg = ConstraintConfig {
        epsilon,
        ..ConstraintConfig::default()
    };
    let terms = level_terms(inst, &assign, l, Objective::Feeder, &cfg)?;
    let count = terms.iter().map(|(_, v)| *v as u64).sum();
    Ok((count, weighted(Objective::Feeder, weights, &terms)))
}

pub(crate) fn breakdown_dense(
    inst: &Instance,
    assign: &[usize],
    config: &ObjectiveConfig,
) -> Result<ObjectiveBreakdown, EvalError> {
    let mut entries = Vec::new();
    let mut total = 0.0;
    for (l, &level) in inst.levels().levels().iter().enumerate() {
        for obj in Objective::ALL {
            let selected = config.is_selected(obj);
            let b = config.calibration(level, obj);
            let terms = match level_terms(inst, assign, l, obj, &config.constraints) {
                Ok(t) => t,
                Err(e) if selected => return Err(e),
                Err(_) => {
                    entries.push(LevelTerm {
                        level,
                        objective: obj,
                        selected,
                        raw: f64::NAN,
                        calibration: b,
                        calibrated: 0.0,
                        terms: Vec::new(),
                    });
                    continue;
                }
            };
            let raw = weighted(obj, &config.weights, &terms);
            let calibrated = if selected { b * raw } else { 0.0 };
            total += calibrated;
            entries.push(LevelTerm {
                level,
                objective: obj,
                selected,
                raw,
                calibration: b,
                calibrated,
                terms: terms
                    .into_iter()
                    .map(|(entity, value)| TermValue {
                        entity,
                        value,
                        weight: match entity {
                            TermEntity::School(s) => config.weights.get(s, obj),
                            TermEntity::Edge(..) => 1.0,
                        },
                    })
                    .collect(),
            });
        }
    }
    Ok(ObjectiveBreakdown { entries, total })
}

/// Selected-objective total only, skipping unselected diagnostics.
pub(crate) fn total_dense(inst: &Instance, assign: &[usize], config: &ObjectiveConfig) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for (l, &level) in inst.levels().levels().iter().enumerate() {
        for &obj in &config.selected {
            let terms = level_terms(inst, assign, l, obj, &config.constraints)?;
            total += config.calibration(level, obj) * weighted(obj, &config.weights, &terms);
        }
    }
    Ok(total)
}

/// `sum_l sum_obj b_{l,obj} f_obj(l)` over the selected objectives, with
/// every objective's raw value reported.
pub fn total_objective(
    zoning: &Zoning,
    inst: &Instance,
    config: &ObjectiveConfig,
) -> Result<ObjectiveBreakdown, EvalError> {
    let assign = inst.dense(zoning)?;
    breakdown_dense(inst, &assign, config)
}
