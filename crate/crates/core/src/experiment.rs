//! Config-driven experiment runs and their on-disk artifacts.
//!
//! A config is a TOML file:
//!
//! ```toml
//! name = "M-NW"
//! preset = "M-NW"            # optional; later keys override it
//! objectives = ["distance", "balance", "compact", "feeder"]
//! weights = "uniform"        # or "survey" with weights_file
//! weights_file = "weights.csv"
//! calibration = "compute"    # "unit" or "from-file" with calibration_file
//! seeds = 30
//! first_seed = 0
//! time_limit = 60.0
//! geojson = false
//!
//! [constraints]              # any ConstraintConfig field
//! lambda = 0.15
//! enforce_dissimilarity_bound = true
//!
//! [solver]                   # any SolverParams field
//! max_iterations = 200000
//!
//! [data]
//! capacity_from_serviceable = false
//! ```
//!
//! Relative file paths resolve against the config file's directory.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::calibration::{calibrate, read_calibration, CalibrationEntry};
use crate::constraints::check_feasible;
use crate::error::Error;
use crate::eval::{compare_runs, evaluate, export_geojson, export_zoning, RunRecord, RunSet};
use crate::instance::{load_instance, BoundDeviation, ConstraintConfig, Instance, InstancePaths, StudentId};
use crate::objectives::{Objective, ObjectiveConfig, SchoolWeights};
use crate::solver::{batch_solve, SolveResult, SolverParams};
use crate::weights::read_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "SQ")]
    StatusQuo,
    #[serde(rename = "S-TR")]
    Distance,
    #[serde(rename = "S-DB")]
    Balance,
    #[serde(rename = "S-C")]
    Compact,
    #[serde(rename = "S-FP")]
    Feeder,
    #[serde(rename = "M-NW")]
    MultiUniform,
    #[serde(rename = "M-SW")]
    MultiSurvey,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::StatusQuo,
        Preset::Distance,
        Preset::Balance,
        Preset::Compact,
        Preset::Feeder,
        Preset::MultiUniform,
        Preset::MultiSurvey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::StatusQuo => "SQ",
            Preset::Distance => "S-TR",
            Preset::Balance => "S-DB",
            Preset::Compact => "S-C",
            Preset::Feeder => "S-FP",
            Preset::MultiUniform => "M-NW",
            Preset::MultiSurvey => "M-SW",
        }
    }

    pub fn objectives(self) -> BTreeSet<Objective> {
        use Objective::*;
        match self {
            Preset::StatusQuo => BTreeSet::new(),
            Preset::Distance => [Distance].into(),
            Preset::Balance => [Balance].into(),
            Preset::Compact => [Compact].into(),
            Preset::Feeder => [Feeder].into(),
            Preset::MultiUniform | Preset::MultiSurvey => [Distance, Balance, Compact, Feeder].into(),
        }
    }

    pub fn dissimilarity_bound(self) -> bool {
        matches!(self, Preset::Balance | Preset::MultiUniform | Preset::MultiSurvey)
    }

    pub fn weight_mode(self) -> WeightMode {
        if self == Preset::MultiSurvey {
            WeightMode::Survey
        } else {
            WeightMode::Uniform
        }
    }

    pub fn calibration_mode(self) -> CalibrationMode {
        if matches!(self, Preset::MultiUniform | Preset::MultiSurvey) {
            CalibrationMode::Compute
        } else {
            CalibrationMode::Unit
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    Uniform,
    Survey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMode {
    Compute,
    FromFile,
    Unit,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSection {
    mu_ratio: Option<f64>,
    mu_abs: Option<f64>,
    lambda: Option<f64>,
    epsilon: Option<u64>,
    enforce_travel: Option<bool>,
    enforce_capacity: Option<bool>,
    enforce_contiguity: Option<bool>,
    enforce_dissimilarity_bound: Option<bool>,
    enforce_feeder_no_increase: Option<bool>,
    bound_deviation: Option<BoundDeviation>,
    #[serde(default)]
    mu_ratio_overrides: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    #[serde(default)]
    capacity_from_serviceable: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    preset: Option<Preset>,
    objectives: Option<Vec<Objective>>,
    weights: Option<WeightMode>,
    weights_file: Option<PathBuf>,
    calibration: Option<CalibrationMode>,
    calibration_file: Option<PathBuf>,
    seeds: Option<usize>,
    #[serde(default)]
    first_seed: u64,
    time_limit: Option<f64>,
    #[serde(default)]
    geojson: bool,
    #[serde(default)]
    constraints: ConstraintSection,
    #[serde(default)]
    solver: Option<SolverParams>,
    #[serde(default)]
    data: DataSection,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub preset: Option<Preset>,
    pub objectives: BTreeSet<Objective>,
    pub weight_mode: WeightMode,
    pub weights_file: Option<PathBuf>,
    pub calibration_mode: CalibrationMode,
    pub calibration_file: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub geojson: bool,
    pub constraints: ConstraintConfig,
    pub solver: SolverParams,
    pub capacity_from_serviceable: bool,
}

pub const DEFAULT_SEEDS: usize = 30;

impl ExperimentConfig {
    /// Defaults for a named preset.
    pub fn preset(p: Preset) -> Self {
        Self {
            name: p.name().into(),
            preset: Some(p),
            objectives: p.objectives(),
            weight_mode: p.weight_mode(),
            weights_file: None,
            calibration_mode: p.calibration_mode(),
            calibration_file: None,
            seeds: (0..DEFAULT_SEEDS as u64).collect(),
            geojson: false,
            constraints: ConstraintConfig {
                enforce_dissimilarity_bound: p.dissimilarity_bound(),
                ..ConstraintConfig::default()
            },
            solver: SolverParams::default(),
            capacity_from_serviceable: false,
        }
    }

    /// Parses TOML text; relative paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, Error> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut c = match raw.preset {
            Some(p) => Self::preset(p),
            None => Self {
                name: String::new(),
                preset: None,
                objectives: BTreeSet::new(),
                weight_mode: WeightMode::Uniform,
                weights_file: None,
                calibration_mode: CalibrationMode::Unit,
                calibration_file: None,
                seeds: (0..DEFAULT_SEEDS as u64).collect(),
                geojson: false,
                constraints: ConstraintConfig::default(),
                solver: SolverParams::default(),
                capacity_from_serviceable: false,
            },
        };
        if let Some(n) = raw.name {
            c.name = n;
        }
        if c.name.is_empty() {
            return Err(Error::Config("`name` is required when no preset is given".into()));
        }
        if let Some(o) = raw.objectives {
            c.objectives = o.into_iter().collect();
            if raw.calibration.is_none() && raw.preset.is_none() && c.objectives.len() > 1 {
                c.calibration_mode = CalibrationMode::Compute;
            }
        }
        if let Some(w) = raw.weights {
            c.weight_mode = w;
        }
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        c.weights_file = raw.weights_file.map(resolve);
        if let Some(m) = raw.calibration {
            c.calibration_mode = m;
        }
        c.calibration_file = raw.calibration_file.map(resolve);
        if let Some(s) = raw.solver {
            c.solver = s;
        }
        if let Some(t) = raw.time_limit {
            c.solver.time_limit = t;
        }
        let n = raw.seeds.unwrap_or(DEFAULT_SEEDS);
        c.seeds = (raw.first_seed..raw.first_seed + n as u64).collect();
        c.geojson = raw.geojson;
        c.capacity_from_serviceable = raw.data.capacity_from_serviceable;

        let k = raw.constraints;
        let cc = &mut c.constraints;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = k.$f { cc.$f = v; } )* };
        }
        set!(
            mu_ratio,
            lambda,
            epsilon,
            enforce_travel,
            enforce_capacity,
            enforce_contiguity,
            enforce_dissimilarity_bound,
            enforce_feeder_no_increase,
            bound_deviation
        );
        if k.mu_abs.is_some() {
            cc.mu_abs = k.mu_abs;
        }
        for (id, v) in k.mu_ratio_overrides {
            let id: u64 = id
                .parse()
                .map_err(|_| Error::Config(format!("mu_ratio_overrides: `{id}` is not a student id")))?;
            cc.mu_ratio_overrides.insert(StudentId(id), v);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), Error> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.weight_mode == WeightMode::Survey && self.weights_file.is_none() {
            return cfg(format!("experiment {}: survey weights need `weights_file`", self.name));
        }
        if self.calibration_mode == CalibrationMode::FromFile && self.calibration_file.is_none() {
            return cfg(format!("experiment {}: calibration from file needs `calibration_file`", self.name));
        }
        if !self.objectives.is_empty() && self.seeds.is_empty() {
            return cfg(format!("experiment {}: at least one seed is required", self.name));
        }
        self.constraints.validate().map_err(Error::Config)?;
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn is_evaluation_only(&self) -> bool {
        self.objectives.is_empty()
    }

    pub fn instance_paths(&self, data_dir: &Path) -> InstancePaths {
        InstancePaths {
            capacity_from_serviceable: self.capacity_from_serviceable,
            ..InstancePaths::in_dir(data_dir)
        }
    }

    /// Objective configuration before calibration.
    pub fn objective_config(&self) -> Result<ObjectiveConfig, Error> {
        let mut oc = ObjectiveConfig::new(self.objectives.iter().copied(), self.constraints.clone());
        if self.weight_mode == WeightMode::Survey {
            let path = self.weights_file.as_ref().expect("validated");
            oc.weights = read_weights(path)?;
        } else {
            oc.weights = SchoolWeights::uniform();
        }
        Ok(oc)
    }
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seeds: Option<usize>,
    pub time_limit: Option<f64>,
    /// Worker threads for seed-parallel solving; all cores when `None`.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ObjectiveConfig,
    pub runs: Vec<SolveResult>,
    pub calibration: Option<Vec<CalibrationEntry>>,
    pub artifacts: Vec<PathBuf>,
}

fn mkdir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(p) = path.parent() {
        mkdir(p)?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Output files written so far, relative to the output directory.
struct Artifacts {
    out: PathBuf,
    list: Vec<PathBuf>,
}

impl Artifacts {
    /// Records `rel` and returns its absolute path, creating parent directories.
    fn path(&mut self, rel: &str) -> Result<PathBuf, Error> {
        let p = self.out.join(rel);
        if let Some(d) = p.parent() {
            mkdir(d)?;
        }
        self.list.push(PathBuf::from(rel));
        Ok(p)
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), Error> {
        let p = self.path(rel)?;
        std::fs::write(&p, bytes).map_err(|e| Error::io(p.display().to_string(), e))
    }
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s.into_bytes()
}

/// Runs `exp` on an already loaded instance, writing artifacts to `out`.
pub fn run_on_instance(exp: &ExperimentConfig, inst: &Instance, out: &Path, opts: &RunOptions) -> Result<ExperimentOutcome, Error> {
    let mut exp = exp.clone();
    if let Some(n) = opts.seeds {
        let first = exp.seeds.first().copied().unwrap_or(0);
        exp.seeds = (first..first + n as u64).collect();
    }
    if let Some(t) = opts.time_limit {
        exp.solver.time_limit = t;
    }
    exp.validate()?;
    let mut config = exp.objective_config()?;
    let sq = check_feasible(inst.sq_zoning(), inst, &config)?;
    if !sq.ok {
        return Err(crate::SolveError::InfeasibleWarmStart(sq.to_text()).into());
    }

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = opts.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?
    };

    let mut artifacts = Artifacts {
        out: out.to_path_buf(),
        list: Vec::new(),
    };

    let mut calibration = None;
    if !exp.is_evaluation_only() {
        match exp.calibration_mode {
            CalibrationMode::Unit => {}
            CalibrationMode::FromFile => {
                let map = read_calibration(exp.calibration_file.as_ref().expect("validated"))?;
                config.calibrations.extend(map);
            }
            CalibrationMode::Compute => {
                let params = exp.solver.clone().with_seed(exp.seeds[0]);
                let r = pool.install(|| calibrate(inst, &exp.objectives, &exp.constraints, &params))?;
                r.apply(&mut config);
                artifacts.write("calibration.csv", r.to_csv().as_bytes())?;
                calibration = Some(r.entries);
            }
        }
    }

    let sq_record = RunRecord {
        zoning: inst.sq_zoning().clone(),
        objective: crate::objectives::total_objective(inst.sq_zoning(), inst, &config)?.total,
        proven_optimal: false,
    };
    let mut sets = vec![RunSet {
        name: "SQ".into(),
        config: config.clone(),
        runs: vec![sq_record],
    }];

    let mut runs = Vec::new();
    let mut run_json = Vec::new();
    if exp.is_evaluation_only() {
        let dir = "runs/status-quo";
        export_zoning(inst.sq_zoning(), inst, &artifacts.path(&format!("{dir}/zoning.csv"))?)?;
        if exp.geojson {
            export_geojson(inst.sq_zoning(), inst, &artifacts.path(&format!("{dir}/zoning.geojson"))?)?;
        }
        let m = evaluate(inst.sq_zoning(), inst, &config)?;
        run_json.push(json!({ "run": "status-quo", "metrics": m.to_flat_json() }));
    } else {
        let batch = pool.install(|| batch_solve(inst, &config, &exp.seeds, &exp.solver))?;
        for r in batch.runs {
            runs.push(r?);
        }
        for r in &runs {
            let dir = format!("runs/seed-{}", r.seed);
            export_zoning(&r.best_zoning, inst, &artifacts.path(&format!("{dir}/zoning.csv"))?)?;
            if exp.geojson {
                export_geojson(&r.best_zoning, inst, &artifacts.path(&format!("{dir}/zoning.geojson"))?)?;
            }
            let mut trace = String::from("iteration,objective\n");
            for t in &r.trace {
                trace.push_str(&format!("{},{}\n", t.iteration, t.objective));
            }
            artifacts.write(&format!("{dir}/trace.csv"), trace.as_bytes())?;
            let feasible = check_feasible(&r.best_zoning, inst, &config)?;
            let m = evaluate(&r.best_zoning, inst, &config)?;
            run_json.push(json!({
                "run": format!("seed-{}", r.seed),
                "seed": r.seed,
                "objective": r.objective(),
                "sq_objective": r.sq_objective,
                "feasible": feasible.ok,
                "violations": feasible.violations.len(),
                "metrics": m.to_flat_json(),
            }));
        }
        let summary = crate::eval::summarize(inst, &config, &runs.iter().collect::<Vec<_>>())?;
        run_json.push(json!({ "run": "summary", "metrics": summary }));
        sets.push(RunSet {
            name: exp.name.clone(),
            config: config.clone(),
            runs: runs.iter().map(RunRecord::from).collect(),
        });
    }

    let metrics = json!({
        "experiment": exp.name,
        "objectives": exp.objectives.iter().map(|o| o.name()).collect::<Vec<_>>(),
        "constraints": exp.constraints,
        "runs": run_json,
    });
    artifacts.write("metrics.json", &json_bytes(&metrics))?;

    let table = compare_runs(&sets, inst)?;
    artifacts.write("comparison.csv", table.to_csv().as_bytes())?;
    artifacts.write("comparison.txt", table.to_text().as_bytes())?;

    let mut artifacts = artifacts.list;
    artifacts.sort();
    let mut entries = Vec::new();
    for rel in &artifacts {
        let bytes = std::fs::read(out.join(rel)).map_err(|e| Error::io(rel.display().to_string(), e))?;
        entries.push(json!({
            "path": rel.to_string_lossy().replace('\\', "/"),
            "bytes": bytes.len(),
            "sha256": format!("{:x}", Sha256::digest(&bytes)),
        }));
    }
    write(&out.join("manifest.json"), &json_bytes(&json!({ "experiment": exp.name, "artifacts": entries })))?;
    artifacts.push(PathBuf::from("manifest.json"));

    Ok(ExperimentOutcome {
        config,
        runs,
        calibration,
        artifacts,
    })
}

/// Loads the instance from `data_dir` and runs the experiment.
pub fn run_experiment(exp: &ExperimentConfig, data_dir: &Path, out: &Path, opts: &RunOptions) -> Result<ExperimentOutcome, Error> {
    exp.validate()?;
    let inst = load_instance(&exp.instance_paths(data_dir), &exp.constraints)?;
    run_on_instance(exp, &inst, out, opts)
}

/// Thread count from `REZONE_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>, Error> {
    match std::env::var("REZONE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("REZONE_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiny1;

    #[test]
    fn presets_match_definitions() {
        for p in Preset::ALL {
            let c = ExperimentConfig::preset(p);
            assert_eq!(c.constraints.enforce_dissimilarity_bound, p.dissimilarity_bound());
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!(ExperimentConfig::preset(Preset::StatusQuo).is_evaluation_only());
        assert_eq!(Preset::MultiUniform.objectives().len(), 4);
        assert!(!Preset::MultiUniform.objectives().contains(&Objective::Capacity));
        assert_eq!(Preset::MultiSurvey.weight_mode(), WeightMode::Survey);
        assert_eq!(Preset::MultiUniform.weight_mode(), WeightMode::Uniform);
    }

    #[test]
    fn survey_preset_without_file_is_rejected() {
        let e = ExperimentConfig::from_toml_str("preset = \"M-SW\"\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("weights_file")), "{e}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = ExperimentConfig::from_toml_str("preset = \"S-TR\"\nseeds = \"many\"\n", Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = ExperimentConfig::from_toml_str("preset = \"S-TR\"\n\n[constraints]\nlamda = 0.1\n", Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 4") && e.contains("lamda"), "{e}");
    }

    #[test]
    fn overrides_apply() {
        let text = r#"
name = "custom"
preset = "S-DB"
seeds = 3
first_seed = 5
time_limit = 2.5
weights = "survey"
weights_file = "w.csv"

[constraints]
lambda = 0.1
mu_ratio_overrides = { "7" = 0.5 }

[solver]
max_iterations = 10
"#;
        let c = ExperimentConfig::from_toml_str(text, Path::new("/data")).unwrap();
        assert_eq!(c.name, "custom");
        assert_eq!(c.seeds, vec![5, 6, 7]);
        assert_eq!(c.solver.time_limit, 2.5);
        assert_eq!(c.solver.max_iterations, 10);
        assert_eq!(c.constraints.lambda, 0.1);
        assert!(c.constraints.enforce_dissimilarity_bound);
        assert_eq!(c.constraints.mu_ratio_for(StudentId(7)), 0.5);
        assert_eq!(c.weights_file.unwrap(), PathBuf::from("/data/w.csv"));
    }

    fn quick(p: Preset, seeds: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(p);
        c.seeds = (0..seeds as u64).collect();
        c.solver.max_iterations = 3_000;
        c
    }

    #[test]
    fn status_quo_preset_only_evaluates() {
        let inst = tiny1(&ConstraintConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let o = run_on_instance(&quick(Preset::StatusQuo, 1), &inst, dir.path(), &RunOptions::default()).unwrap();
        assert!(o.runs.is_empty());
        assert!(dir.path().join("runs/status-quo/zoning.csv").exists());
        assert!(!dir.path().join("calibration.csv").exists());
        let m: Value = serde_json::from_slice(&std::fs::read(dir.path().join("metrics.json")).unwrap()).unwrap();
        assert_eq!(m["runs"][0]["metrics"]["level1.avg_driving_miles"], 1.0);
    }

    #[test]
    fn balance_preset_on_tiny1() {
        let inst = tiny1(&ConstraintConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let o = run_on_instance(&quick(Preset::Balance, 3), &inst, dir.path(), &RunOptions::default()).unwrap();
        assert_eq!(o.runs.len(), 3);
        for r in &o.runs {
            assert!((r.objective() - 0.3).abs() < 1e-12);
        }
        assert!(o.config.constraints.enforce_dissimilarity_bound);
        let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        let listed: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap()).collect();
        assert!(listed.contains(&"runs/seed-2/zoning.csv"));
        assert!(listed.contains(&"comparison.txt"));
    }

    #[test]
    fn rerun_is_byte_identical_across_thread_counts() {
        let inst = tiny1(&ConstraintConfig::default());
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let exp = quick(Preset::MultiUniform, 4);
        run_on_instance(&exp, &inst, a.path(), &RunOptions { threads: Some(1), ..RunOptions::default() }).unwrap();
        run_on_instance(&exp, &inst, b.path(), &RunOptions { threads: Some(3), ..RunOptions::default() }).unwrap();
        for f in ["manifest.json", "metrics.json", "calibration.csv", "runs/seed-3/zoning.csv", "comparison.csv"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }
}
