//! Cross-objective scaling from single-objective runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, LoadError, SolveError};
use crate::instance::{ConstraintConfig, Instance, Level};
use crate::objectives::{level_terms, Objective, ObjectiveConfig};
use crate::solver::{solve, SolveResult, SolverParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationEntry {
    pub level: Level,
    pub objective: Objective,
    pub n_terms: usize,
    /// Mean absolute per-term change from the status quo.
    pub abs_delta: f64,
    /// Mean signed per-term change, kept for diagnostics.
    pub mean_delta: f64,
    pub b: f64,
    /// Set when no term moved and `b` fell back to `1/N`.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub entries: Vec<CalibrationEntry>,
    /// The single-objective run behind each objective's entries.
    pub source_runs: BTreeMap<Objective, SolveResult>,
}

/// The configuration a single-objective calibration run uses for `obj`:
/// unit weights, `b = 1`, and the dissimilarity bound on for balance.
pub fn calibration_config(obj: Objective, constraints: &ConstraintConfig) -> ObjectiveConfig {
    let mut c = constraints.clone();
    if obj == Objective::Balance {
        c.enforce_dissimilarity_bound = true;
    }
    ObjectiveConfig::single(obj, c)
}

/// Per-level entries from the status quo and one run's zoning.
pub fn entries_from_zoning(
    inst: &Instance,
    obj: Objective,
    constraints: &ConstraintConfig,
    after: &crate::instance::Zoning,
) -> Result<Vec<CalibrationEntry>, SolveError> {
    let sq = inst.sq_dense();
    let best = inst.dense(after)?;
    let mut out = Vec::new();
    for (l, &level) in inst.levels().levels().iter().enumerate() {
        let before = level_terms(inst, &sq, l, obj, constraints)?;
        let now = level_terms(inst, &best, l, obj, constraints)?;
        if before.is_empty() {
            continue;
        }
        let n = before.len();
        let (abs, signed) = before
            .iter()
            .zip(&now)
            .fold((0.0, 0.0), |(a, s), ((_, x), (_, y))| (a + (y - x).abs(), s + (y - x)));
        let abs_delta = abs / n as f64;
        let fallback = abs_delta == 0.0;
        if fallback {
            log::warn!("calibration: no movement for {obj} at level {level}; using b = 1/{n}");
        }
        out.push(CalibrationEntry {
            level,
            objective: obj,
            n_terms: n,
            abs_delta,
            mean_delta: signed / n as f64,
            b: if fallback { 1.0 / n as f64 } else { 1.0 / (n as f64 * abs_delta) },
            fallback,
        });
    }
    Ok(out)
}

/// One solve per objective (at `params.seed`), run concurrently.
pub fn calibrate(
    inst: &Instance,
    objectives: &BTreeSet<Objective>,
    constraints: &ConstraintConfig,
    params: &SolverParams,
) -> Result<CalibrationResult, SolveError> {
    let runs: Vec<(Objective, Result<SolveResult, SolveError>)> = objectives
        .par_iter()
        .map(|&obj| (obj, solve(inst, &calibration_config(obj, constraints), params)))
        .collect();
    let mut entries = Vec::new();
    let mut source_runs = BTreeMap::new();
    for (obj, run) in runs {
        let run = run?;
        entries.extend(entries_from_zoning(inst, obj, constraints, &run.best_zoning)?);
        source_runs.insert(obj, run);
    }
    entries.sort_by_key(|e| (e.level, e.objective));
    Ok(CalibrationResult { entries, source_runs })
}

impl CalibrationResult {
    pub fn b(&self, level: Level, obj: Objective) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.level == level && e.objective == obj)
            .map(|e| e.b)
    }

    /// Copies every `b` into `config`'s calibration map.
    pub fn apply(&self, config: &mut ObjectiveConfig) {
        for e in &self.entries {
            config.calibrations.insert((e.level, e.objective), e.b);
        }
    }

    pub fn to_csv(&self) -> String {
        entries_to_csv(&self.entries)
    }
}

pub fn entries_to_csv(entries: &[CalibrationEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "objective", "n_terms", "abs_delta", "b", "fallback"])
        .expect("in-memory write");
    for e in entries {
        w.write_record([
            e.level.to_string(),
            e.objective.to_string(),
            e.n_terms.to_string(),
            e.abs_delta.to_string(),
            e.b.to_string(),
            e.fallback.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Reads `level,objective,b` (other columns ignored) from a calibration table.
pub fn read_calibration(path: &Path) -> Result<BTreeMap<(Level, Objective), f64>, Error> {
    let file = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| LoadError::Format {
        file: file.clone(),
        message: e.to_string(),
    })?;
    let headers = r
        .headers()
        .map_err(|e| LoadError::Format {
            file: file.clone(),
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| LoadError::Format {
            file: file.clone(),
            message: format!("missing column `{name}`"),
        })
    };
    let (cl, co, cb) = (col("level")?, col("objective")?, col("b")?);
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| LoadError::Format {
            file: file.clone(),
            message: e.to_string(),
        })?;
        let field = |c: usize, name: &str, message: String| LoadError::Field {
            file: file.clone(),
            row,
            field: name.into(),
            message: format!("{message}: `{}`", rec.get(c).unwrap_or("")),
        };
        let level: Level = rec[cl].trim().parse().map_err(|_| field(cl, "level", "not a level".into()))?;
        let obj: Objective = rec[co].trim().parse().map_err(|e: String| field(co, "objective", e))?;
        let b: f64 = rec[cb].trim().parse().map_err(|_| field(cb, "b", "not a number".into()))?;
        if !(b.is_finite() && b > 0.0) {
            return Err(field(cb, "b", "must be positive".into()).into());
        }
        out.insert((level, obj), b);
    }
    Ok(out)
}
