//! Evaluation metrics, run comparison and zoning exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::constraints::pattern_count;
use crate::error::{Error, EvalError};
use crate::instance::geometry::shape_to_geometry;
use crate::instance::{Instance, Level, Zoning};
use crate::objectives::{school_totals, ObjectiveConfig};
use crate::solver::SolveResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelMetrics {
    pub level: Level,
    pub students: u64,
    pub group_students: u64,
    pub units: u64,
    pub avg_driving_miles: f64,
    /// `None` when every or no student at the level is in the group.
    pub district_dissimilarity: Option<f64>,
    /// `None` at the top level.
    pub feeder_count: Option<u64>,
    pub rezoned_students: u64,
    pub rezoned_group_students: u64,
    pub rezoned_units: u64,
    pub rezoned_students_pct: f64,
    pub rezoned_group_students_pct: f64,
    pub rezoned_units_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub levels: Vec<LevelMetrics>,
}

fn pct(count: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    (count as f64 * 10_000.0 / total as f64).round() / 100.0
}

/// `1/2 sum_s |g_s / G - (n_s - g_s) / (N - G)|`, undefined when the group
/// is empty or everyone.
pub fn dissimilarity_index(n: &[u64], g: &[u64]) -> Option<f64> {
    let big_n: u64 = n.iter().sum();
    let big_g: u64 = g.iter().sum();
    if big_g == 0 || big_g == big_n {
        return None;
    }
    let rest = (big_n - big_g) as f64;
    let sum: f64 = n
        .iter()
        .zip(g)
        .map(|(&ns, &gs)| (gs as f64 / big_g as f64 - (ns - gs) as f64 / rest).abs())
        .sum();
    Some(0.5 * sum)
}

pub(crate) fn evaluate_dense(inst: &Instance, assign: &[usize], epsilon: u64) -> Result<MetricsReport, EvalError> {
    let ix = &inst.ix;
    let sq = inst.sq_dense();
    let nl = inst.levels().len();
    let mut levels = Vec::with_capacity(nl);
    for l in 0..nl {
        let t = school_totals(inst, assign, l, true)?;
        let total_students = ix.level_n[l];
        let total_group = ix.level_g[l];
        let miles: f64 = t.num.iter().sum();
        let mut rezoned = (0u64, 0u64, 0u64);
        for &u in &ix.level_units[l] {
            if assign[u] != sq[u] {
                rezoned.0 += ix.unit_n[u];
                rezoned.1 += ix.unit_g[u];
                rezoned.2 += 1;
            }
        }
        let units = ix.level_units[l].len() as u64;
        levels.push(LevelMetrics {
            level: inst.level_at(l),
            students: total_students,
            group_students: total_group,
            units,
            avg_driving_miles: if total_students == 0 { 0.0 } else { miles / total_students as f64 },
            district_dissimilarity: dissimilarity_index(&t.n, &t.g),
            feeder_count: (l + 1 < nl).then(|| pattern_count(inst, assign, l, epsilon)),
            rezoned_students: rezoned.0,
            rezoned_group_students: rezoned.1,
            rezoned_units: rezoned.2,
            rezoned_students_pct: pct(rezoned.0, total_students),
            rezoned_group_students_pct: pct(rezoned.1, total_group),
            rezoned_units_pct: pct(rezoned.2, units),
        });
    }
    Ok(MetricsReport { levels })
}

/// Per-level evaluation metrics of `zoning` against the status quo.
pub fn evaluate(zoning: &Zoning, inst: &Instance, config: &ObjectiveConfig) -> Result<MetricsReport, EvalError> {
    let assign = inst.dense(zoning)?;
    evaluate_dense(inst, &assign, config.constraints.epsilon)
}

impl MetricsReport {
    /// Flat `level<l>.<metric>` map; undefined values are `null` with a
    /// matching `<metric>_defined: false` flag.
    pub fn to_flat_json(&self) -> Value {
        let mut m = Map::new();
        for lm in &self.levels {
            let k = |name: &str| format!("level{}.{}", lm.level, name);
            m.insert(k("students"), json!(lm.students));
            m.insert(k("group_students"), json!(lm.group_students));
            m.insert(k("units"), json!(lm.units));
            m.insert(k("avg_driving_miles"), json!(lm.avg_driving_miles));
            m.insert(k("district_dissimilarity"), json!(lm.district_dissimilarity));
            m.insert(k("district_dissimilarity_defined"), json!(lm.district_dissimilarity.is_some()));
            m.insert(k("feeder_patterns"), json!(lm.feeder_count));
            m.insert(k("rezoned_students"), json!(lm.rezoned_students));
            m.insert(k("rezoned_students_pct"), json!(lm.rezoned_students_pct));
            m.insert(k("rezoned_group_students"), json!(lm.rezoned_group_students));
            m.insert(k("rezoned_group_students_pct"), json!(lm.rezoned_group_students_pct));
            m.insert(k("rezoned_units"), json!(lm.rezoned_units));
            m.insert(k("rezoned_units_pct"), json!(lm.rezoned_units_pct));
        }
        Value::Object(m)
    }

    pub fn level(&self, level: Level) -> Option<&LevelMetrics> {
        self.levels.iter().find(|l| l.level == level)
    }
}

/// Writes `zoning.csv`: unit_id, level, school_id, sq_school_id, changed.
pub fn export_zoning(zoning: &Zoning, inst: &Instance, path: &Path) -> Result<(), Error> {
    inst.dense(zoning)?;
    let ctx = || path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = csv::Writer::from_writer(file);
    let wrap = |e: csv::Error| Error::io(ctx(), std::io::Error::other(e));
    w.write_record(["unit_id", "level", "school_id", "sq_school_id", "changed"])
        .map_err(wrap)?;
    for u in inst.units() {
        let s = zoning.get(u.id).expect("validated above");
        w.write_record([
            u.id.to_string(),
            u.level.to_string(),
            s.to_string(),
            u.sq_school.to_string(),
            (s != u.sq_school).to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

/// GeoJSON FeatureCollection of the units with their assignment.
pub fn export_geojson(zoning: &Zoning, inst: &Instance, path: &Path) -> Result<(), Error> {
    inst.dense(zoning)?;
    let mut features = Vec::with_capacity(inst.units().len());
    for u in inst.units() {
        let shape = inst
            .geometry()
            .get(&u.id)
            .ok_or_else(|| Error::Config(format!("unit {} has no geometry to export", u.id)))?;
        let s = zoning.get(u.id).expect("validated above");
        features.push(json!({
            "type": "Feature",
            "properties": {
                "unit_id": u.id.0,
                "level": u.level,
                "school_id": s.0,
                "sq_school_id": u.sq_school.0,
                "changed": s != u.sq_school,
            },
            "geometry": shape_to_geometry(shape),
        }));
    }
    let doc = json!({ "type": "FeatureCollection", "features": features });
    let text = serde_json::to_string_pretty(&doc).expect("geojson serializes") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    /// Standard error of the mean; 0 for a single sample.
    pub se: f64,
    pub n: usize,
    pub single_sample: bool,
}

/// Mean and standard error (sample standard deviation over sqrt(n)).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn run_metrics(inst: &Instance, config: &ObjectiveConfig, zoning: &Zoning, objective: f64) -> Result<Vec<(String, f64)>, EvalError> {
    let report = evaluate(zoning, inst, config)?;
    let mut out = vec![("objective".to_string(), objective)];
    for lm in &report.levels {
        let k = |name: &str| format!("level{}.{}", lm.level, name);
        out.push((k("avg_driving_miles"), lm.avg_driving_miles));
        out.push((k("district_dissimilarity"), lm.district_dissimilarity.unwrap_or(f64::NAN)));
        if let Some(f) = lm.feeder_count {
            out.push((k("feeder_patterns"), f as f64));
        }
        out.push((k("rezoned_students"), lm.rezoned_students as f64));
        out.push((k("rezoned_group_students"), lm.rezoned_group_students as f64));
        out.push((k("rezoned_units"), lm.rezoned_units as f64));
    }
    Ok(out)
}

/// Per-metric mean and standard error over a set of runs. Undefined metric
/// values are left out of their metric's sample.
pub fn summarize(inst: &Instance, config: &ObjectiveConfig, runs: &[&SolveResult]) -> Result<Vec<MetricSummary>, EvalError> {
    let mut samples: BTreeMap<String, (usize, Vec<f64>)> = BTreeMap::new();
    for r in runs {
        for (i, (name, v)) in run_metrics(inst, config, &r.best_zoning, r.objective())?.into_iter().enumerate() {
            let e = samples.entry(name).or_insert((i, Vec::new()));
            if !v.is_nan() {
                e.1.push(v);
            }
        }
    }
    let mut out: Vec<(usize, MetricSummary)> = samples
        .into_iter()
        .map(|(name, (order, vals))| {
            let (mean, se) = mean_se(&vals);
            (
                order,
                MetricSummary {
                    name,
                    mean,
                    se,
                    n: vals.len(),
                    single_sample: vals.len() == 1,
                },
            )
        })
        .collect();
    out.sort_by_key(|(o, _)| *o);
    Ok(out.into_iter().map(|(_, m)| m).collect())
}

/// Runs of one experiment, for [`compare_runs`].
#[derive(Debug, Clone)]
pub struct RunSet {
    pub name: String,
    pub config: ObjectiveConfig,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub zoning: Zoning,
    pub objective: f64,
    pub proven_optimal: bool,
}

impl From<&SolveResult> for RunRecord {
    fn from(r: &SolveResult) -> Self {
        Self {
            zoning: r.best_zoning.clone(),
            objective: r.objective(),
            proven_optimal: r.proven_optimal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Absent for optimal rows and single runs.
    pub se: Option<f64>,
}

impl Stat {
    fn render(&self, digits: usize) -> String {
        if self.mean.is_nan() {
            return "-".into();
        }
        match self.se {
            Some(se) => format!("{:.*} ({:.*})", digits, self.mean, digits, se),
            None => format!("{:.*}", digits, self.mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub experiment: String,
    pub level: Level,
    pub runs: usize,
    pub optimal: bool,
    pub objective: Stat,
    pub avg_driving_miles: Stat,
    pub district_dissimilarity: Stat,
    pub feeder_patterns: Option<Stat>,
    pub rezoned_students: Stat,
    pub rezoned_students_pct: Stat,
    pub rezoned_group_students: Stat,
    pub rezoned_group_students_pct: Stat,
    pub rezoned_units: Stat,
    pub rezoned_units_pct: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Mean and standard error of each metric per experiment and level. When a
/// run is proven optimal, that run alone is reported.
pub fn compare_runs(sets: &[RunSet], inst: &Instance) -> Result<ComparisonTable, EvalError> {
    let mut rows = Vec::new();
    for set in sets {
        let optimal: Vec<&RunRecord> = set.runs.iter().filter(|r| r.proven_optimal).take(1).collect();
        let used: Vec<&RunRecord> = if optimal.is_empty() {
            set.runs.iter().collect()
        } else {
            optimal
        };
        let is_opt = used.iter().any(|r| r.proven_optimal);
        let reports = used
            .iter()
            .map(|r| evaluate(&r.zoning, inst, &set.config))
            .collect::<Result<Vec<_>, _>>()?;
        let objective: Vec<f64> = used.iter().map(|r| r.objective).collect();
        for (li, &level) in inst.levels().levels().iter().enumerate() {
            let stat = |f: &dyn Fn(&LevelMetrics) -> Option<f64>| {
                let vals: Vec<f64> = reports.iter().filter_map(|r| f(&r.levels[li])).collect();
                let (mean, se) = mean_se(&vals);
                Stat {
                    mean,
                    se: (!is_opt && vals.len() > 1).then_some(se),
                }
            };
            let (omean, ose) = mean_se(&objective);
            rows.push(ComparisonRow {
                experiment: set.name.clone(),
                level,
                runs: used.len(),
                optimal: is_opt,
                objective: Stat {
                    mean: omean,
                    se: (!is_opt && objective.len() > 1).then_some(ose),
                },
                avg_driving_miles: stat(&|m| Some(m.avg_driving_miles)),
                district_dissimilarity: stat(&|m| m.district_dissimilarity),
                feeder_patterns: reports
                    .first()
                    .and_then(|r| r.levels[li].feeder_count)
                    .map(|_| stat(&|m| m.feeder_count.map(|f| f as f64))),
                rezoned_students: stat(&|m| Some(m.rezoned_students as f64)),
                rezoned_students_pct: stat(&|m| Some(m.rezoned_students_pct)),
                rezoned_group_students: stat(&|m| Some(m.rezoned_group_students as f64)),
                rezoned_group_students_pct: stat(&|m| Some(m.rezoned_group_students_pct)),
                rezoned_units: stat(&|m| Some(m.rezoned_units as f64)),
                rezoned_units_pct: stat(&|m| Some(m.rezoned_units_pct)),
            });
        }
    }
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    const HEADER: [&'static str; 11] = [
        "experiment",
        "runs",
        "optimal",
        "objective",
        "avg_driving_miles",
        "district_dissimilarity",
        "feeder_patterns",
        "rezoned_students",
        "rezoned_students_pct",
        "rezoned_group_students_pct",
        "rezoned_units_pct",
    ];

    fn cells(r: &ComparisonRow) -> Vec<String> {
        vec![
            r.experiment.clone(),
            r.runs.to_string(),
            r.optimal.to_string(),
            r.objective.render(4),
            r.avg_driving_miles.render(3),
            r.district_dissimilarity.render(3),
            r.feeder_patterns.map_or("-".into(), |s| s.render(1)),
            r.rezoned_students.render(1),
            r.rezoned_students_pct.render(2),
            r.rezoned_group_students_pct.render(2),
            r.rezoned_units_pct.render(2),
        ]
    }

    /// CSV with one row per experiment and level; each statistic gets a mean
    /// and a standard error column.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let stats = [
            "objective",
            "avg_driving_miles",
            "district_dissimilarity",
            "feeder_patterns",
            "rezoned_students",
            "rezoned_students_pct",
            "rezoned_group_students",
            "rezoned_group_students_pct",
            "rezoned_units",
            "rezoned_units_pct",
        ];
        let mut header = vec!["experiment".to_string(), "level".into(), "runs".into(), "optimal".into()];
        for s in stats {
            header.push(format!("{s}_mean"));
            header.push(format!("{s}_se"));
        }
        w.write_record(&header).expect("in-memory write");
        let fmt = |s: Option<Stat>| match s {
            Some(s) if !s.mean.is_nan() => (s.mean.to_string(), s.se.map_or(String::new(), |x| x.to_string())),
            _ => (String::new(), String::new()),
        };
        for r in &self.rows {
            let mut rec = vec![r.experiment.clone(), r.level.to_string(), r.runs.to_string(), r.optimal.to_string()];
            for s in [
                Some(r.objective),
                Some(r.avg_driving_miles),
                Some(r.district_dissimilarity),
                r.feeder_patterns,
                Some(r.rezoned_students),
                Some(r.rezoned_students_pct),
                Some(r.rezoned_group_students),
                Some(r.rezoned_group_students_pct),
                Some(r.rezoned_units),
                Some(r.rezoned_units_pct),
            ] {
                let (m, e) = fmt(s);
                rec.push(m);
                rec.push(e);
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Aligned text, one sub-table per level, standard errors in parentheses.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut levels: Vec<Level> = self.rows.iter().map(|r| r.level).collect();
        levels.dedup();
        levels.sort_unstable();
        levels.dedup();
        for level in levels {
            let body: Vec<Vec<String>> = self.rows.iter().filter(|r| r.level == level).map(Self::cells).collect();
            let mut width: Vec<usize> = Self::HEADER.iter().map(|h| h.len()).collect();
            for row in &body {
                for (w, c) in width.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let _ = writeln!(out, "level {level}");
            let line = |cells: Vec<String>| {
                cells
                    .iter()
                    .zip(&width)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            let _ = writeln!(out, "{}", line(Self::HEADER.iter().map(|s| s.to_string()).collect()));
            for row in body {
                let _ = writeln!(out, "{}", line(row));
            }
            out.push('\n');
        }
        out
    }
}
