//! Feasibility checks for the constraint families.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::EvalError;
use crate::instance::{BoundDeviation, ConstraintConfig, Instance, Level, SchoolId, StudentId, Zoning};
use crate::objectives::{feeder_counts, group_share, school_totals, Objective, ObjectiveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Travel,
    Capacity,
    Contiguity,
    DissimilarityBound,
    FeederNoIncrease,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Travel => "travel",
            Family::Capacity => "capacity",
            Family::Contiguity => "contiguity",
            Family::DissimilarityBound => "dissimilarity_bound",
            Family::FeederNoIncrease => "feeder_no_increase",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    Student(StudentId),
    School(SchoolId),
    Level(Level),
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Student(s) => write!(f, "student {s}"),
            Entity::School(s) => write!(f, "school {s}"),
            Entity::Level(l) => write!(f, "level {l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub family: Family,
    pub entity: Entity,
    /// Measured value (distance, enrollment, component count, deviation or
    /// pattern count).
    pub value: f64,
    /// The bound it breaks.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn count(&self, family: Family) -> usize {
        self.violations.iter().filter(|v| v.family == family).count()
    }

    /// `(family, entity, value, bound)` rows.
    pub fn rows(&self) -> Vec<(String, String, f64, f64)> {
        self.violations
            .iter()
            .map(|v| (v.family.name().to_string(), v.entity.to_string(), v.value, v.bound))
            .collect()
    }

    pub fn to_text(&self) -> String {
        if self.ok {
            return "feasible\n".to_string();
        }
        let mut out = format!("infeasible: {} violation(s)\n", self.violations.len());
        for v in &self.violations {
            out.push_str(&format!(
                "  {:<20} {:<16} value {} bound {}\n",
                v.family.name(),
                v.entity.to_string(),
                v.value,
                v.bound
            ));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["family", "entity", "value", "bound"])?;
        for (f, e, v, b) in self.rows() {
            wr.write_record([f, e, v.to_string(), b.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Students whose assigned school is farther than the travel bound allows.
/// A missing distance counts as a violation with infinite value.
pub fn check_travel(zoning: &Zoning, inst: &Instance, config: &ConstraintConfig) -> Result<Vec<Violation>, EvalError> {
    let assign = inst.dense(zoning)?;
    Ok(travel_dense(inst, &assign, config))
}

pub(crate) fn travel_dense(inst: &Instance, assign: &[usize], config: &ConstraintConfig) -> Vec<Violation> {
    let ix = &inst.ix;
    let mut out = Vec::new();
    for (n, st) in inst.students().iter().enumerate() {
        let l = ix.student_level[n];
        let s = assign[ix.student_residence[n][l].expect("own-level residence")];
        let sq = ix.student_sq_dist[n];
        let d = inst.distance_ix(n, s).unwrap_or(f64::INFINITY);
        if !config.travel_ok(st.id, d, sq) {
            let mut bound = (1.0 + config.mu_ratio_for(st.id)) * sq;
            if let Some(a) = config.mu_abs {
                bound = bound.min(sq + a);
            }
            out.push(Violation {
                family: Family::Travel,
                entity: Entity::Student(st.id),
                value: d,
                bound,
            });
        }
    }
    out
}

/// Schools whose enrollment leaves `[cap_min, cap_max]`.
pub fn check_capacity(zoning: &Zoning, inst: &Instance) -> Result<Vec<Violation>, EvalError> {
    let assign = inst.dense(zoning)?;
    Ok(capacity_dense(inst, &assign))
}

pub(crate) fn enrollments(inst: &Instance, assign: &[usize]) -> Vec<u64> {
    let mut o = vec![0u64; inst.schools().len()];
    for (u, &s) in assign.iter().enumerate() {
        o[s] += inst.ix.unit_n[u];
    }
    o
}

pub(crate) fn capacity_dense(inst: &Instance, assign: &[usize]) -> Vec<Violation> {
    let o = enrollments(inst, assign);
    let mut out = Vec::new();
    for (s, school) in inst.schools().iter().enumerate() {
        let bound = if o[s] < school.cap_min {
            school.cap_min
        } else if o[s] > school.cap_max {
            school.cap_max
        } else {
            continue;
        };
        out.push(Violation {
            family: Family::Capacity,
            entity: Entity::School(school.id),
            value: o[s] as f64,
            bound: bound as f64,
        });
    }
    out
}

/// Connected components of each school's assigned units, by school index.
pub(crate) fn component_counts(inst: &Instance, assign: &[usize]) -> Vec<usize> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); inst.schools().len()];
    for (u, &s) in assign.iter().enumerate() {
        members[s].push(u);
    }
    members
        .iter()
        .enumerate()
        .map(|(s, units)| inst.components_of(units, |v| assign[v] == s))
        .collect()
}

/// Schools at `level` whose assigned units split into more connected pieces
/// than their status-quo units did. Schools with no units are left to the
/// capacity check.
pub fn check_contiguity(zoning: &Zoning, inst: &Instance, level: Level) -> Result<Vec<Violation>, EvalError> {
    let assign = inst.dense(zoning)?;
    let l = inst.level_pos(level).ok_or(EvalError::UnknownLevel(level))?;
    let sq = component_counts(inst, &inst.sq_dense());
    let now = component_counts(inst, &assign);
    Ok(contiguity_dense(inst, &now, &sq, Some(l)))
}

pub(crate) fn contiguity_dense(
    inst: &Instance,
    now: &[usize],
    sq: &[usize],
    level: Option<usize>,
) -> Vec<Violation> {
    inst.schools()
        .iter()
        .enumerate()
        .filter(|&(s, _)| level.is_none_or(|l| inst.ix.school_level[s] == l))
        .filter(|&(s, _)| now[s] > 0 && now[s] > sq[s])
        .map(|(s, school)| Violation {
            family: Family::Contiguity,
            entity: Entity::School(school.id),
            value: now[s] as f64,
            bound: sq[s] as f64,
        })
        .collect()
}

/// Upper bound on a school's deviation from the level's group share.
pub(crate) fn dissimilarity_bound(sq_dev_signed: f64, config: &ConstraintConfig) -> f64 {
    let dev = match config.bound_deviation {
        BoundDeviation::Absolute => sq_dev_signed.abs(),
        BoundDeviation::Signed => sq_dev_signed,
    };
    config.lambda.max(dev)
}

/// Per school index: the status-quo bound, or lambda when the school was
/// empty in the status quo.
pub(crate) fn dissimilarity_bounds(inst: &Instance, config: &ConstraintConfig) -> Vec<f64> {
    let ix = &inst.ix;
    inst.schools()
        .iter()
        .enumerate()
        .map(|(s, school)| {
            if school.sq_enrolled == 0 {
                return config.lambda;
            }
            let share = group_share(inst, ix.school_level[s]);
            let dev = school.sq_group as f64 / school.sq_enrolled as f64 - share;
            dissimilarity_bound(dev, config)
        })
        .collect()
}

/// Schools whose group share moved outside `max(lambda, status-quo deviation)`.
pub fn check_dissimilarity_bound(
    zoning: &Zoning,
    inst: &Instance,
    config: &ConstraintConfig,
) -> Result<Vec<Violation>, EvalError> {
    let assign = inst.dense(zoning)?;
    dissimilarity_dense(inst, &assign, config)
}

pub(crate) fn dissimilarity_dense(
    inst: &Instance,
    assign: &[usize],
    config: &ConstraintConfig,
) -> Result<Vec<Violation>, EvalError> {
    let bounds = dissimilarity_bounds(inst, config);
    let mut out = Vec::new();
    for l in 0..inst.levels().len() {
        let t = school_totals(inst, assign, l, false)?;
        let share = group_share(inst, l);
        for (local, &s) in inst.ix.level_schools[l].iter().enumerate() {
            if t.n[local] == 0 {
                continue;
            }
            let d = (t.g[local] as f64 / t.n[local] as f64 - share).abs();
            if d > bounds[s] {
                out.push(Violation {
                    family: Family::DissimilarityBound,
                    entity: Entity::School(inst.schools()[s].id),
                    value: d,
                    bound: bounds[s],
                });
            }
        }
    }
    Ok(out)
}

/// Levels below the top whose feeder pattern count exceeds the status quo's.
pub fn check_feeder_no_increase(
    zoning: &Zoning,
    inst: &Instance,
    config: &ConstraintConfig,
) -> Result<Vec<Violation>, EvalError> {
    let assign = inst.dense(zoning)?;
    Ok(feeder_dense(inst, &assign, config))
}

pub(crate) fn pattern_count(inst: &Instance, assign: &[usize], l: usize, epsilon: u64) -> u64 {
    feeder_counts(inst, assign, l)
        .values()
        .filter(|&&c| c >= epsilon)
        .count() as u64
}

pub(crate) fn feeder_dense(inst: &Instance, assign: &[usize], config: &ConstraintConfig) -> Vec<Violation> {
    let sq = inst.sq_dense();
    let mut out = Vec::new();
    for l in 0..inst.levels().len().saturating_sub(1) {
        let now = pattern_count(inst, assign, l, config.epsilon);
        let before = pattern_count(inst, &sq, l, config.epsilon);
        if now > before {
            out.push(Violation {
                family: Family::FeederNoIncrease,
                entity: Entity::Level(inst.level_at(l)),
                value: now as f64,
                bound: before as f64,
            });
        }
    }
    out
}

/// Union of the constraint families switched on in `config`. The
/// dissimilarity bound applies only when balance is a selected objective.
pub fn check_feasible(zoning: &Zoning, inst: &Instance, config: &ObjectiveConfig) -> Result<FeasibilityReport, EvalError> {
    let assign = inst.dense(zoning)?;
    feasible_dense(inst, &assign, config)
}

pub(crate) fn feasible_dense(
    inst: &Instance,
    assign: &[usize],
    config: &ObjectiveConfig,
) -> Result<FeasibilityReport, EvalError> {
    let c = &config.constraints;
    let mut v = Vec::new();
    if c.enforce_travel {
        v.extend(travel_dense(inst, assign, c));
    }
    if c.enforce_capacity {
        v.extend(capacity_dense(inst, assign));
    }
    if c.enforce_contiguity {
        let sq = component_counts(inst, &inst.sq_dense());
        let now = component_counts(inst, assign);
        v.extend(contiguity_dense(inst, &now, &sq, None));
    }
    if dissimilarity_active(config) {
        v.extend(dissimilarity_dense(inst, assign, c)?);
    }
    if c.enforce_feeder_no_increase {
        v.extend(feeder_dense(inst, assign, c));
    }
    Ok(FeasibilityReport::from_violations(v))
}

pub(crate) fn dissimilarity_active(config: &ObjectiveConfig) -> bool {
    config.constraints.enforce_dissimilarity_bound && config.is_selected(Objective::Balance)
}
