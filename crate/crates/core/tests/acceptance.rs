//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rezone::calibration::{calibrate, calibration_config};
use rezone::constraints::check_feasible;
use rezone::eval::{evaluate, mean_se};
use rezone::experiment::{run_on_instance, ExperimentConfig, Preset, RunOptions};
use rezone::fixtures::{tiny1, P2, SCHOOL_B};
use rezone::instance::{ConstraintConfig, Instance, Level, SchoolId, Zoning};
use rezone::objectives::{edge_cut_compactness, total_objective, Objective, ObjectiveConfig};
use rezone::solver::{enumerate_optimal, solve, SolverParams};
use rezone::synth::{generate, SynthParams};
use rezone::weights::{derive_weights, SchoolDemographics, SurveyResponse};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Every zoning emitted anywhere in the run, with the configuration it was
/// produced under, plus warm-start comparisons.
#[derive(Default)]
struct Matrix {
    zonings: usize,
    violations: usize,
    runs: usize,
    worse_than_sq: Vec<String>,
}

impl Matrix {
    fn emitted(&mut self, inst: &Instance, z: &Zoning, cfg: &ObjectiveConfig) {
        self.zonings += 1;
        self.violations += check_feasible(z, inst, cfg).unwrap().violations.len();
    }

    fn run(&mut self, label: String, objective: f64, sq: f64) {
        self.runs += 1;
        if objective > sq {
            self.worse_than_sq.push(format!("{label}: {objective} > {sq}"));
        }
    }
}

fn synth(rows: usize, cols: usize, levels: &[Level], schools: &[usize], clustering: f64, seed: u64) -> Instance {
    let p = SynthParams {
        rows,
        cols,
        levels: levels.to_vec(),
        schools_per_level: schools.to_vec(),
        clustering,
        seed,
        ..SynthParams::default()
    };
    generate(&p, &ConstraintConfig::default()).unwrap()
}

/// Students and group members per school at `level`, straight from units.
fn enrollment(inst: &Instance, z: &Zoning, level: Level) -> BTreeMap<SchoolId, (u64, u64)> {
    let mut out: BTreeMap<SchoolId, (u64, u64)> = inst.schools_at(level).map(|s| (s.id, (0, 0))).collect();
    for u in inst.units_at(level) {
        let e = out.get_mut(&z.get(u.id).unwrap()).unwrap();
        e.0 += u.n_students;
        e.1 += u.n_group;
    }
    out
}

fn dissimilarity_oracle(inst: &Instance, z: &Zoning, level: Level) -> Option<f64> {
    let e = enrollment(inst, z, level);
    let n: u64 = e.values().map(|x| x.0).sum();
    let g: u64 = e.values().map(|x| x.1).sum();
    if g == 0 || g == n {
        return None;
    }
    Some(
        0.5 * e
            .values()
            .map(|&(ns, gs)| (gs as f64 / g as f64 - (ns - gs) as f64 / (n - g) as f64).abs())
            .sum::<f64>(),
    )
}

fn distance_ratio_oracle(inst: &Instance, z: &Zoning, level: Level) -> f64 {
    let mut num: BTreeMap<SchoolId, f64> = BTreeMap::new();
    let mut den: BTreeMap<SchoolId, f64> = BTreeMap::new();
    for st in inst.students().iter().filter(|s| s.level == level) {
        let s = z.get(st.residence_units[&level]).unwrap();
        *num.entry(s).or_default() += st.distances[&s];
        *den.entry(s).or_default() += st.distances[&st.sq_school];
    }
    num.iter().map(|(s, x)| x / den[s]).sum()
}

fn balance_oracle(inst: &Instance, z: &Zoning, level: Level, lambda: f64) -> f64 {
    let e = enrollment(inst, z, level);
    let n: u64 = e.values().map(|x| x.0).sum();
    let g: u64 = e.values().map(|x| x.1).sum();
    let share = g as f64 / n as f64;
    e.values()
        .map(|&(ns, gs)| (gs as f64 / ns as f64 - share).abs().max(lambda))
        .sum()
}

fn cut_oracle(inst: &Instance, z: &Zoning, level: Level) -> u64 {
    inst.adjacency()
        .edges(level)
        .iter()
        .filter(|e| z.get(e.a) != z.get(e.b))
        .count() as u64
}

/// Every assignment of units to schools of their level.
fn all_zonings(inst: &Instance) -> Vec<Zoning> {
    let mut out = vec![Zoning::new(BTreeMap::new())];
    for u in inst.units() {
        let schools: Vec<SchoolId> = inst.schools_at(u.level).map(|s| s.id).collect();
        out = out
            .into_iter()
            .flat_map(|z| schools.iter().map(move |&s| z.with(&[(u.id, s)])))
            .collect();
    }
    out
}

fn criterion_1(m: &mut Matrix) -> Verdict {
    let objective_sets: [&[Objective]; 8] = [
        &[Objective::Distance],
        &[Objective::Balance],
        &[Objective::Compact],
        &[Objective::Capacity],
        &[Objective::Feeder],
        &[Objective::Distance, Objective::Balance, Objective::Compact],
        &[Objective::Distance, Objective::Compact, Objective::Feeder],
        &[Objective::Distance, Objective::Balance, Objective::Compact, Objective::Feeder],
    ];
    let mut matched = 0;
    let mut slowest: f64 = 0.0;
    let mut misses = Vec::new();
    for i in 0..50u64 {
        let two = i % 2 == 1;
        let k = 2 + (i as usize / 2) % 2;
        let inst = if two {
            synth(2, 3, &[1, 2], &[k, 2], 0.5, i)
        } else {
            synth(3, 4, &[1], &[k + 1], 0.5, i)
        };
        assert!(inst.units().len() <= 12);
        let mut objs = objective_sets[i as usize % 8].to_vec();
        if !two {
            objs.retain(|&o| o != Objective::Feeder);
            if objs.is_empty() {
                objs = vec![Objective::Distance, Objective::Balance];
            }
        }
        let constraints = ConstraintConfig {
            enforce_dissimilarity_bound: objs.contains(&Objective::Balance) && i % 3 == 0,
            ..ConstraintConfig::default()
        };
        let cfg = ObjectiveConfig::new(objs, constraints);
        let params = SolverParams {
            seed: i,
            time_limit: 60.0,
            ..SolverParams::default()
        };
        let t = Instant::now();
        let found = solve(&inst, &cfg, &params).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let best = enumerate_optimal(&inst, &cfg).unwrap();
        m.emitted(&inst, &found.best_zoning, &cfg);
        m.emitted(&inst, &best.best_zoning, &cfg);
        m.run(format!("oracle instance {i}"), found.objective(), found.sq_objective);
        if (found.objective() - best.objective()).abs() <= 1e-9 {
            matched += 1;
        } else {
            misses.push(format!("#{i} {} vs {}", found.objective(), best.objective()));
        }
    }
    verdict(
        matched >= 48 && slowest < 60.0,
        format!(
            "{matched}/50 searches match exhaustive optimum within 1e-9 (need 48); slowest solve {slowest:.2} s{}",
            if misses.is_empty() { String::new() } else { format!("; misses: {}", misses.join(", ")) }
        ),
    )
}

fn criterion_2(m: &mut Matrix) -> Verdict {
    let base = ConstraintConfig::default();
    let inst = tiny1(&base);
    let bound = ConstraintConfig {
        enforce_dissimilarity_bound: true,
        ..base.clone()
    };
    let cases = [
        ("distance", ObjectiveConfig::single(Objective::Distance, base.clone()), 2.0, Some(inst.sq_zoning().clone())),
        (
            "balance",
            ObjectiveConfig::single(Objective::Balance, bound),
            0.3,
            Some(inst.sq_zoning().with(&[(P2, SCHOOL_B)])),
        ),
        ("compact", ObjectiveConfig::single(Objective::Compact, base.clone()), 1.0, None),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, cfg, expected, at) in cases {
        let value = |z: &Zoning| match name {
            "distance" => distance_ratio_oracle(&inst, z, 1),
            "balance" => balance_oracle(&inst, z, 1, cfg.constraints.lambda),
            _ => cut_oracle(&inst, z, 1) as f64,
        };
        let brute = all_zonings(&inst)
            .into_iter()
            .filter(|z| check_feasible(z, &inst, &cfg).unwrap().ok)
            .map(|z| value(&z))
            .fold(f64::INFINITY, f64::min);
        let exact = enumerate_optimal(&inst, &cfg).unwrap();
        let found = solve(&inst, &cfg, &SolverParams::default()).unwrap();
        m.emitted(&inst, &exact.best_zoning, &cfg);
        m.emitted(&inst, &found.best_zoning, &cfg);
        m.run(format!("TINY-1 {name}"), found.objective(), found.sq_objective);
        let good = (brute - expected).abs() <= 1e-9
            && (exact.objective() - expected).abs() <= 1e-9
            && (found.objective() - expected).abs() <= 1e-9
            && at.as_ref().is_none_or(|z| *z == exact.best_zoning && *z == found.best_zoning);
        ok &= good;
        parts.push(format!("{name} {} (expected {expected})", exact.objective()));
    }
    verdict(ok, parts.join(", "))
}

fn criterion_5(m: &mut Matrix) -> Verdict {
    let inst = synth(5, 10, &[1, 2], &[4, 2], 0.5, 0);
    assert_eq!(inst.units().len(), 100);
    let mut exp = ExperimentConfig::preset(Preset::Feeder);
    exp.seeds = (0..10).collect();
    exp.solver.time_limit = 60.0;
    let dir = tempfile::tempdir().unwrap();
    let out = run_on_instance(&exp, &inst, dir.path(), &RunOptions::default()).unwrap();
    let counts: Vec<f64> = out
        .runs
        .iter()
        .map(|r| {
            m.emitted(&inst, &r.best_zoning, &out.config);
            m.run(format!("S-FP seed {}", r.seed), r.objective(), r.sq_objective);
            evaluate(&r.best_zoning, &inst, &out.config).unwrap().levels[0].feeder_count.unwrap() as f64
        })
        .collect();
    let slowest = out.runs.iter().map(|r| r.wall_time).fold(0.0, f64::max);
    let (mean, se) = mean_se(&counts);
    // each lower-level school feeds at least one upper-level school
    let floor = inst.schools_at(1).count() as f64;
    let sq = evaluate(inst.sq_zoning(), &inst, &out.config).unwrap().levels[0].feeder_count.unwrap();
    verdict(
        se == 0.0 && slowest < 60.0 && counts.len() == 10,
        format!(
            "feeder patterns {mean} over 10 seeds, SE {se} (status quo {sq}, lower bound {floor}{}); slowest run {slowest:.2} s",
            if mean == floor { ", optimal" } else { "" }
        ),
    )
}

fn criterion_6(inst: &Instance, experiment_b: &[(Level, Objective, f64)]) -> Verdict {
    let exp = ExperimentConfig::preset(Preset::MultiUniform);
    let params = exp.solver.clone().with_seed(0);
    let r = calibrate(inst, &exp.objectives, &exp.constraints, &params).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut fallbacks = 0;
    let mut ok = true;
    for e in &r.entries {
        // recompute N and the mean absolute term change from the breakdowns
        let cfg = calibration_config(e.objective, &exp.constraints);
        let before = total_objective(inst.sq_zoning(), inst, &cfg).unwrap();
        let after = &r.source_runs[&e.objective].best_breakdown;
        let tb = &before.entry(e.level, e.objective).unwrap().terms;
        let ta = &after.entry(e.level, e.objective).unwrap().terms;
        let n = tb.len() as f64;
        let delta = tb.iter().zip(ta).map(|(x, y)| (y.value - x.value).abs()).sum::<f64>() / n;
        if delta == 0.0 {
            fallbacks += 1;
            ok &= e.fallback && (e.b * n - 1.0).abs() <= 1e-12;
            continue;
        }
        checked += 1;
        worst = worst.max((e.b * n * delta - 1.0).abs());
    }
    let same = experiment_b.len() == r.entries.len()
        && experiment_b
            .iter()
            .zip(&r.entries)
            .all(|(x, e)| *x == (e.level, e.objective, e.b));
    ok &= worst <= 1e-12 && checked > 0 && same;
    verdict(
        ok,
        format!(
            "max |b*N*|delta| - 1| = {worst:.1e} over {checked} entries; {fallbacks} entries without movement use b = 1/N; experiment table {}",
            if same { "matches" } else { "differs" }
        ),
    )
}

fn response(id: usize, race: Option<&str>, schools: &[u32], ranks: [u32; 3]) -> SurveyResponse {
    SurveyResponse {
        respondent_id: id.to_string(),
        race: race.map(String::from),
        affiliations: schools.iter().map(|&s| SchoolId(s)).collect(),
        ranks,
    }
}

/// Random survey over the instance's schools with two race labels matching
/// each school's status-quo group share.
fn random_survey(inst: &Instance, per_school: usize, seed: u64) -> (Vec<SurveyResponse>, SchoolDemographics) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut demo = SchoolDemographics::default();
    for s in inst.schools() {
        let share = s.sq_group as f64 / s.sq_enrolled as f64;
        demo.shares.insert(s.id, [("group".to_string(), share), ("other".to_string(), 1.0 - share)].into());
    }
    let ids: Vec<u32> = inst.schools().iter().map(|s| s.id.0).collect();
    let mut out = Vec::new();
    for &s in &ids {
        for _ in 0..per_school {
            let share = demo.shares[&SchoolId(s)]["group"];
            let race = match rng.random_range(0..10) {
                0 => None,
                _ if rng.random_bool(share) => Some("group"),
                _ => Some("other"),
            };
            let mut schools = vec![s];
            if rng.random_bool(0.2) {
                let extra = ids[rng.random_range(0..ids.len())];
                if extra != s {
                    schools.push(extra);
                }
            }
            let mut ranks = [1, 2, 3];
            ranks.shuffle(&mut rng);
            if rng.random_bool(0.1) {
                ranks[rng.random_range(0..3)] = 1;
            }
            out.push(response(out.len(), race, &schools, ranks));
        }
    }
    (out, demo)
}

fn criterion_7(inst: &Instance) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut schools = 0;
    for seed in 0..20 {
        let (rs, demo) = random_survey(inst, 1 + seed as usize % 12, seed);
        for row in derive_weights(&rs, &demo).unwrap().rows {
            schools += 1;
            worst = worst.max((row.w.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let demo = SchoolDemographics {
        shares: [(SchoolId(1), [("Black".to_string(), 0.5), ("White".to_string(), 0.5)].into())].into(),
    };
    let rs = vec![
        response(1, Some("White"), &[1], [1, 2, 3]),
        response(2, Some("White"), &[1], [1, 3, 2]),
        response(3, Some("White"), &[1], [2, 1, 3]),
        response(4, Some("Black"), &[1], [3, 2, 1]),
    ];
    let got = derive_weights(&rs, &demo).unwrap().get(SchoolId(1)).unwrap();
    // White factor 0.5/0.75, Black factor 0.5/0.25; total mass 4
    let white = 0.5 / 0.75;
    let expected = [2.0 * white / 4.0, white / 4.0, 2.0 / 4.0];
    let exact = got == expected && expected == [1.0 / 3.0, 1.0 / 6.0, 0.5];
    verdict(
        worst <= 1e-9 && exact,
        format!("max |sum w - 1| = {worst:.1e} over {schools} schools; worked example gives {got:?}"),
    )
}

fn criterion_8() -> Verdict {
    let inst = synth(6, 6, &[1, 2], &[4, 2], 0.6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lo: f64 = 1.0;
    let mut hi: f64 = 0.0;
    let mut mismatch: f64 = 0.0;
    let mut defined = 0;
    for _ in 0..1000 {
        let mut z = inst.sq_zoning().clone();
        for u in inst.units() {
            let s: Vec<SchoolId> = inst.schools_at(u.level).map(|s| s.id).collect();
            z.set(u.id, s[rng.random_range(0..s.len())]);
        }
        let report = evaluate(&z, &inst, &ObjectiveConfig::default()).unwrap();
        for lm in &report.levels {
            let oracle = dissimilarity_oracle(&inst, &z, lm.level);
            if let (Some(d), Some(o)) = (lm.district_dissimilarity, oracle) {
                defined += 1;
                lo = lo.min(d);
                hi = hi.max(d);
                mismatch = mismatch.max((d - o).abs());
            } else if lm.district_dissimilarity.is_some() != oracle.is_some() {
                mismatch = f64::INFINITY;
            }
        }
    }
    let sq_d = |inst: &Instance| evaluate(inst.sq_zoning(), inst, &ObjectiveConfig::default()).unwrap().levels[0]
        .district_dissimilarity
        .unwrap();
    let mixed = (0..20).map(|seed| sq_d(&synth(10, 10, &[1], &[4], 0.0, seed))).fold(0.0, f64::max);
    let segregated = sq_d(&generate(
        &SynthParams {
            group_share: 0.5,
            clustering: 1.0,
            schools_per_level: vec![2],
            seed: 7,
            ..SynthParams::default()
        },
        &ConstraintConfig::default(),
    )
    .unwrap());
    verdict(
        lo >= 0.0 && hi <= 1.0 && mismatch <= 1e-12 && mixed < 0.15 && segregated > 0.8,
        format!(
            "{defined} values in [{lo:.3}, {hi:.3}], max deviation from direct computation {mismatch:.1e}; unclustered max {mixed:.3} over 20 seeds; split halves {segregated:.3}"
        ),
    )
}

fn tree_bytes(dir: &Path, files: &[std::path::PathBuf]) -> BTreeMap<String, Vec<u8>> {
    files
        .iter()
        .map(|f| (f.display().to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

fn criterion_9(m: &mut Matrix) -> Verdict {
    let inst = synth(6, 6, &[1, 2], &[3, 2], 0.6, 9);
    let mut ok = true;
    let mut notes = Vec::new();
    for preset in [Preset::MultiUniform, Preset::Feeder] {
        let mut exp = ExperimentConfig::preset(preset);
        exp.seeds = (0..4).collect();
        exp.solver.max_iterations = 30_000;
        let runs: Vec<_> = [1, 1, 3]
            .into_iter()
            .map(|threads| {
                let dir = tempfile::tempdir().unwrap();
                let opts = RunOptions {
                    threads: Some(threads),
                    ..RunOptions::default()
                };
                let out = run_on_instance(&exp, &inst, dir.path(), &opts).unwrap();
                for r in &out.runs {
                    m.emitted(&inst, &r.best_zoning, &out.config);
                    m.run(format!("{} seed {}", preset.name(), r.seed), r.objective(), r.sq_objective);
                }
                tree_bytes(dir.path(), &out.artifacts)
            })
            .collect();
        let zonings = runs[0].keys().filter(|k| k.ends_with("zoning.csv")).count();
        let same = runs[1] == runs[0] && runs[2] == runs[0];
        ok &= same && zonings == 4 && runs[0].contains_key("metrics.json");
        notes.push(format!("{}: {} artifacts incl. {zonings} zonings {}", preset.name(), runs[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    verdict(ok, format!("{} across repeat and 1 vs 3 threads", notes.join("; ")))
}

#[derive(Debug, Default, Clone)]
struct PresetMetrics {
    drive: Vec<f64>,
    dissimilarity: Vec<f64>,
    cut: Vec<f64>,
    feeder: f64,
}

fn metrics_of(inst: &Instance, zonings: &[Zoning]) -> PresetMetrics {
    let levels = inst.levels().levels().to_vec();
    let n = zonings.len() as f64;
    let mut m = PresetMetrics {
        drive: vec![0.0; levels.len()],
        dissimilarity: vec![0.0; levels.len()],
        cut: vec![0.0; levels.len()],
        feeder: 0.0,
    };
    for z in zonings {
        let r = evaluate(z, inst, &ObjectiveConfig::default()).unwrap();
        for (i, lm) in r.levels.iter().enumerate() {
            m.drive[i] += lm.avg_driving_miles / n;
            m.dissimilarity[i] += lm.district_dissimilarity.unwrap() / n;
            m.cut[i] += edge_cut_compactness(z, inst, levels[i]).unwrap() as f64 / n;
        }
        m.feeder += r.levels[0].feeder_count.unwrap() as f64 / n;
    }
    m
}

fn criterion_10(m: &mut Matrix, inst: &Instance) -> (Verdict, Vec<(Level, Objective, f64)>) {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("weights.csv");
    let (rs, demo) = random_survey(inst, 30, 10);
    derive_weights(&rs, &demo).unwrap().write_csv(&weights).unwrap();

    let mut results: BTreeMap<&'static str, PresetMetrics> = BTreeMap::new();
    let mut calibration = Vec::new();
    for preset in Preset::ALL {
        let mut exp = ExperimentConfig::preset(preset);
        exp.seeds = (0..10).collect();
        exp.weights_file = Some(weights.clone());
        let out = run_on_instance(&exp, inst, &dir.path().join(preset.name()), &RunOptions::default()).unwrap();
        let zonings: Vec<Zoning> = if out.runs.is_empty() {
            vec![inst.sq_zoning().clone()]
        } else {
            out.runs.iter().map(|r| r.best_zoning.clone()).collect()
        };
        for r in &out.runs {
            m.emitted(inst, &r.best_zoning, &out.config);
            m.run(format!("{} seed {}", preset.name(), r.seed), r.objective(), r.sq_objective);
        }
        if preset == Preset::MultiUniform {
            calibration = out.calibration.unwrap().iter().map(|e| (e.level, e.objective, e.b)).collect();
        }
        results.insert(preset.name(), metrics_of(inst, &zonings));
    }

    type Get = fn(&PresetMetrics) -> f64;
    let metrics: [(&str, &str, Get); 7] = [
        ("driving miles L1", "S-TR", |m| m.drive[0]),
        ("driving miles L2", "S-TR", |m| m.drive[1]),
        ("dissimilarity L1", "S-DB", |m| m.dissimilarity[0]),
        ("dissimilarity L2", "S-DB", |m| m.dissimilarity[1]),
        ("cut edges L1", "S-C", |m| m.cut[0]),
        ("cut edges L2", "S-C", |m| m.cut[1]),
        ("feeder patterns", "S-FP", |m| m.feeder),
    ];
    let tol = 1e-12;
    let mut failures = Vec::new();
    let mut table = Vec::new();
    for (name, owner, get) in metrics {
        let own = get(&results[owner]);
        let sq = get(&results["SQ"]);
        for (p, pm) in &results {
            let v = get(pm);
            if p.starts_with("S-") && v < own - tol {
                failures.push(format!("{p} beats {owner} on {name} ({v:.4} < {own:.4})"));
            }
            if p.starts_with("M-") && !(v >= own.min(sq) - tol && v <= own.max(sq) + tol) {
                failures.push(format!("{p} {name} {v:.4} outside [{:.4}, {:.4}]", own.min(sq), own.max(sq)));
            }
        }
        table.push(format!("{name}: SQ {sq:.4}, {owner} {own:.4}, M-NW {:.4}, M-SW {:.4}", get(&results["M-NW"]), get(&results["M-SW"])));
    }
    for line in &table {
        println!("      {line}");
    }
    let pass = failures.is_empty();
    let detail = if pass {
        "single-objective presets best on their own metrics; multi-objective presets between SQ and those optima on all 7 metrics".to_string()
    } else {
        failures.join("; ")
    };
    (verdict(pass, detail), calibration)
}

fn main() {
    let started = Instant::now();
    let mut m = Matrix::default();
    let district = synth(10, 10, &[1, 2], &[4, 2], 0.5, 0);

    let mut verdicts: BTreeMap<u32, (&str, Verdict)> = BTreeMap::new();
    let mut record = |id: u32, name: &'static str, v: Verdict| {
        eprintln!("criterion {id} done after {:.0} s", started.elapsed().as_secs_f64());
        verdicts.insert(id, (name, v));
    };
    record(1, "oracle equivalence", criterion_1(&mut m));
    record(2, "TINY-1 ground truths", criterion_2(&mut m));
    record(5, "feeder tractability", criterion_5(&mut m));
    let (v10, experiment_b) = criterion_10(&mut m, &district);
    record(10, "trade-off direction", v10);
    record(6, "calibration identity", criterion_6(&district, &experiment_b));
    record(7, "weight properties", criterion_7(&district));
    record(8, "dissimilarity bounds", criterion_8());
    record(9, "determinism", criterion_9(&mut m));
    record(
        3,
        "warm-start dominance",
        verdict(
            m.worse_than_sq.is_empty(),
            format!("{} runs, {} end above the status quo {}", m.runs, m.worse_than_sq.len(), m.worse_than_sq.join(", ")),
        ),
    );
    record(
        4,
        "feasibility",
        verdict(m.violations == 0, format!("{} emitted zonings, {} violations", m.zonings, m.violations)),
    );

    let mut failed = 0;
    for (id, (name, v)) in &verdicts {
        println!("{} {id:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria pass ({:.0} s)", verdicts.len() - failed, verdicts.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
