use std::collections::BTreeSet;

use super::{CandidateSets, ConstraintConfig, Instance};

/// Removes every (unit, school) pair that would push some resident student
/// past the travel bound. A unit moves as a whole, so a school is kept only
/// if all of its residents satisfy the bound; the status-quo school is always
/// kept. With travel enforcement off, every same-level school is admissible.
pub fn eliminate_candidates(instance: &Instance, config: &ConstraintConfig) -> CandidateSets {
    let ix = &instance.ix;
    let mut out = CandidateSets::default();
    for (ui, unit) in instance.units().iter().enumerate() {
        let level = ix.unit_level[ui];
        let mut set = BTreeSet::new();
        for &si in &ix.level_schools[level] {
            let admissible = si == ix.unit_sq[ui]
                || !config.enforce_travel
                || ix.unit_students[ui].iter().all(|&n| {
                    let student = &instance.students()[n];
                    instance
                        .distance_ix(n, si)
                        .is_some_and(|d| config.travel_ok(student.id, d, ix.student_sq_dist[n]))
                });
            if admissible {
                set.insert(instance.schools()[si].id);
            }
        }
        out.sets.insert(unit.id, set);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{tiny1, P1, P2, P3, P4, SCHOOL_A, SCHOOL_B};

    fn set(ids: &[crate::instance::SchoolId]) -> BTreeSet<crate::instance::SchoolId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn tiny1_unit_slack() {
        let inst = tiny1(&ConstraintConfig::default());
        let c = inst.candidates();
        assert_eq!(c.get(P1).unwrap(), &set(&[SCHOOL_A]));
        assert_eq!(c.get(P2).unwrap(), &set(&[SCHOOL_A, SCHOOL_B]));
        assert_eq!(c.get(P3).unwrap(), &set(&[SCHOOL_A, SCHOOL_B]));
        assert_eq!(c.get(P4).unwrap(), &set(&[SCHOOL_B]));
    }

    #[test]
    fn zero_slack_forces_status_quo() {
        let cfg = ConstraintConfig {
            mu_ratio: 0.0,
            ..ConstraintConfig::default()
        };
        let inst = tiny1(&cfg);
        for u in inst.units() {
            assert_eq!(inst.candidates().get(u.id).unwrap(), &set(&[u.sq_school]));
        }
    }

    #[test]
    fn absolute_slack_tightens() {
        let cfg = ConstraintConfig {
            mu_abs: Some(0.5),
            ..ConstraintConfig::default()
        };
        let inst = tiny1(&cfg);
        // p2 -> B would add a full mile
        assert_eq!(inst.candidates().get(P2).unwrap(), &set(&[SCHOOL_A]));
    }

    #[test]
    fn travel_toggle_admits_everything() {
        let cfg = ConstraintConfig {
            enforce_travel: false,
            ..ConstraintConfig::default()
        };
        let inst = tiny1(&cfg);
        assert_eq!(inst.candidates().get(P1).unwrap().len(), 2);
    }
}
