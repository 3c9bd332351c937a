use std::time::Instant;

use super::{warm_start, SolveResult, TraceEntry};
use crate::constraints::feasible_dense;
use crate::error::SolveError;
use crate::instance::{eliminate_candidates, Instance};
use crate::objectives::{breakdown_dense, total_dense, ObjectiveConfig};

/// Largest candidate-product the oracle will enumerate.
pub const ORACLE_LIMIT: f64 = 1e7;

/// Exhaustive search over every assignment inside the candidate sets.
///
/// Candidate sets are recomputed from `config`'s constraints. Each unit's
/// candidates are ordered status-quo school first, then by school id, and
/// ties on the objective go to the lexicographically smallest assignment
/// vector over units in id order, so the status quo wins any tie it is in.
/// Zonings on which a selected objective is undefined are skipped.
pub fn enumerate_optimal(inst: &Instance, config: &ObjectiveConfig) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    config.validate().map_err(SolveError::Invalid)?;
    let ix = &inst.ix;
    let cands = eliminate_candidates(inst, &config.constraints);
    let options: Vec<Vec<usize>> = inst
        .units()
        .iter()
        .enumerate()
        .map(|(u, unit)| {
            let sq = ix.unit_sq[u];
            let mut v = vec![sq];
            v.extend(
                cands
                    .get(unit.id)
                    .into_iter()
                    .flatten()
                    .map(|s| ix.school_pos[s])
                    .filter(|&s| s != sq),
            );
            v
        })
        .collect();
    let estimate: f64 = options.iter().map(|o| o.len() as f64).product();
    if estimate > ORACLE_LIMIT {
        return Err(SolveError::SpaceTooLarge {
            estimate,
            limit: ORACLE_LIMIT,
        });
    }
    let sq_objective = warm_start(inst, config).unwrap_or(f64::NAN);

    let n = options.len();
    let mut digits = vec![0usize; n];
    let mut assign: Vec<usize> = options.iter().map(|o| o[0]).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut visited = 0u64;
    'outer: loop {
        visited += 1;
        if feasible_dense(inst, &assign, config)?.ok {
            if let Ok(v) = total_dense(inst, &assign, config) {
                if best.as_ref().is_none_or(|(b, _)| v < *b - 1e-12) {
                    best = Some((v, assign.clone()));
                }
            }
        }
        // odometer: the last unit varies fastest, giving lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < options[i].len() {
                assign[i] = options[i][digits[i]];
                break;
            }
            digits[i] = 0;
            assign[i] = options[i][0];
        }
    }

    let (value, zoning) = best.ok_or(SolveError::NoFeasibleZoning)?;
    let breakdown = breakdown_dense(inst, &zoning, config)?;
    let wall = start.elapsed().as_secs_f64();
    Ok(SolveResult {
        seed: 0,
        best_zoning: inst.zoning_from_dense(&zoning),
        best_breakdown: breakdown,
        sq_objective,
        iterations: visited,
        accepted: 0,
        wall_time: wall,
        proven_optimal: true,
        initial_temperature: 0.0,
        trace: vec![TraceEntry {
            iteration: visited,
            wall_seconds: wall,
            objective: value,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{tiny1, FixtureBuilder, P2, P3, SCHOOL_A, SCHOOL_B};
    use crate::instance::ConstraintConfig;
    use crate::objectives::Objective;

    #[test]
    fn tiny1_oracle_values() {
        let inst = tiny1(&ConstraintConfig::default());
        let c = ConstraintConfig::default();

        let r = enumerate_optimal(&inst, &ObjectiveConfig::single(Objective::Distance, c.clone())).unwrap();
        assert!(r.proven_optimal);
        assert_eq!(&r.best_zoning, inst.sq_zoning());
        assert!((r.objective() - 2.0).abs() < 1e-12);

        let r = enumerate_optimal(&inst, &ObjectiveConfig::single(Objective::Compact, c.clone())).unwrap();
        assert_eq!(r.objective(), 1.0);
        assert_eq!(&r.best_zoning, inst.sq_zoning());

        let bound = ConstraintConfig {
            enforce_dissimilarity_bound: true,
            ..c
        };
        let r = enumerate_optimal(&inst, &ObjectiveConfig::single(Objective::Balance, bound)).unwrap();
        assert!((r.objective() - 0.3).abs() < 1e-12);
        assert_eq!(r.best_zoning, inst.sq_zoning().with(&[(P2, SCHOOL_B)]));
    }

    #[test]
    fn tiny1_has_three_feasible_zonings() {
        let inst = tiny1(&ConstraintConfig::default());
        let cfg = ObjectiveConfig::single(Objective::Distance, ConstraintConfig::default());
        let mut feasible = Vec::new();
        for a in [SCHOOL_A, SCHOOL_B] {
            for b in [SCHOOL_A, SCHOOL_B] {
                for c in [SCHOOL_A, SCHOOL_B] {
                    for d in [SCHOOL_A, SCHOOL_B] {
                        let z = inst.sq_zoning().with(&[
                            (crate::fixtures::P1, a),
                            (P2, b),
                            (P3, c),
                            (crate::fixtures::P4, d),
                        ]);
                        let in_cands = z.assignment.iter().all(|(u, s)| inst.candidates().contains(*u, *s));
                        if in_cands && crate::constraints::check_feasible(&z, &inst, &cfg).unwrap().ok {
                            feasible.push(z);
                        }
                    }
                }
            }
        }
        assert_eq!(feasible.len(), 3);
        assert!(feasible.contains(inst.sq_zoning()));
        assert!(feasible.contains(&inst.sq_zoning().with(&[(P2, SCHOOL_B)])));
        assert!(feasible.contains(&inst.sq_zoning().with(&[(P3, SCHOOL_A)])));
    }

    #[test]
    fn guard_refuses_large_spaces() {
        let mut b = FixtureBuilder::new(vec![1]);
        for s in 1..=5 {
            b = b.school(s, 1, (0, 1000, 10));
        }
        let dists: Vec<(u32, f64)> = (1..=5).map(|s| (s, 1.0)).collect();
        for u in 1..=20 {
            b = b.unit(100 + u, 1, 1 + (u % 5));
        }
        for u in 1..=20 {
            b = b.students(100 + u, 1, 0, &[], &dists);
            if u > 1 {
                b = b.edge(1, 100 + u - 1, 100 + u, Some(1.0));
            }
        }
        let inst = b.build(&ConstraintConfig::default());
        let err = enumerate_optimal(&inst, &ObjectiveConfig::single(Objective::Compact, ConstraintConfig::default()))
            .unwrap_err();
        match err {
            SolveError::SpaceTooLarge { estimate, .. } => assert!((estimate - 5f64.powi(20)).abs() < 1.0),
            other => panic!("unexpected {other}"),
        }
    }
}
