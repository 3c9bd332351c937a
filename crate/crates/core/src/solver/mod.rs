//! Feasibility-preserving simulated annealing and an exhaustive oracle.

mod oracle;
mod state;

use std::io::Write;
use std::time::Instant;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use oracle::{enumerate_optimal, ORACLE_LIMIT};

use crate::constraints::feasible_dense;
use crate::error::SolveError;
use crate::eval::{summarize, MetricSummary};
use crate::instance::{Instance, Zoning};
use crate::objectives::{breakdown_dense, total_dense, ObjectiveBreakdown, ObjectiveConfig};
use state::{Problem, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub seed: u64,
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    /// Proposal budget; the usual stopping rule, so runs are reproducible.
    pub max_iterations: u64,
    /// Fixed starting temperature; estimated from sampled moves when unset.
    pub initial_temperature: Option<f64>,
    /// Temperature factor applied after each accepted move.
    pub cooling_rate: f64,
    /// Probability of proposing an adjacent-pair swap instead of a single
    /// reassignment.
    pub swap_probability: f64,
    /// Probability of proposing an exchange: a unit moves to another school
    /// and units of the receiving schools move on until the cycle returns,
    /// over two or three schools. Reaches trades that tight capacity windows
    /// rule out for single moves.
    pub exchange_probability: f64,
    /// Moves sampled to estimate the starting temperature.
    pub temperature_samples: usize,
    /// Proposals without a new best, once the schedule has cooled below
    /// [`FROZEN`] times the starting temperature, before the search restarts
    /// from the best zoning at the starting temperature. 0 disables restarts.
    pub reheat_after: u64,
    /// Stop early after this many proposals without a new best. 0 disables.
    pub stall_limit: u64,
    /// Finish with a first-improvement descent from the best zoning.
    pub polish: bool,
    /// Check every accepted state with the from-scratch feasibility and
    /// objective evaluators (slow; for testing).
    pub verify: bool,
    /// Accepted moves between full recomputations of the search state.
    pub resync_every: u64,
    /// Weight of the flow-concentration tie-breaker in the acceptance test
    /// when the feeder objective is selected. Pattern counts are flat under
    /// most moves; the tie-breaker steers the search toward merging flows.
    /// It never affects the reported objective. 0 disables it.
    pub feeder_guide: f64,
}

/// Fraction of the starting temperature below which a cycle counts as cooled.
pub const FROZEN: f64 = 1e-3;

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            seed: 0,
            time_limit: 60.0,
            max_iterations: 200_000,
            initial_temperature: None,
            cooling_rate: 0.999,
            swap_probability: 0.2,
            exchange_probability: 0.2,
            temperature_samples: 1000,
            reheat_after: 5_000,
            stall_limit: 0,
            polish: true,
            verify: false,
            resync_every: 10_000,
            feeder_guide: 0.5,
        }
    }
}

impl SolverParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Invalid(m.to_string()));
        if !(self.time_limit > 0.0) {
            return bad("time_limit must be positive");
        }
        if !(0.0..=1.0).contains(&self.swap_probability) {
            return bad("swap_probability must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.exchange_probability) || self.swap_probability + self.exchange_probability > 1.0 {
            return bad("exchange_probability must lie in [0, 1 - swap_probability]");
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate <= 1.0) {
            return bad("cooling_rate must lie in (0, 1]");
        }
        if !(self.feeder_guide >= 0.0) {
            return bad("feeder_guide must be non-negative");
        }
        if self.initial_temperature.is_some_and(|t| !(t > 0.0)) {
            return bad("initial_temperature must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: u64,
    pub wall_seconds: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub seed: u64,
    pub best_zoning: Zoning,
    pub best_breakdown: ObjectiveBreakdown,
    /// Objective of the status-quo zoning under the same configuration.
    pub sq_objective: f64,
    pub iterations: u64,
    pub accepted: u64,
    pub wall_time: f64,
    pub proven_optimal: bool,
    pub initial_temperature: f64,
    /// Improvements of the best objective, starting with the status quo.
    pub trace: Vec<TraceEntry>,
}

impl SolveResult {
    pub fn objective(&self) -> f64 {
        self.best_breakdown.total
    }

    /// Writes the improvement trace as `<wall_seconds> <objective>` lines.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for t in &self.trace {
            writeln!(w, "{} {}", t.wall_seconds, t.objective)?;
        }
        Ok(())
    }
}

/// Validates the status quo as a starting point and returns its objective.
fn warm_start(inst: &Instance, config: &ObjectiveConfig) -> Result<f64, SolveError> {
    config.validate().map_err(SolveError::Invalid)?;
    let sq = inst.sq_dense();
    let report = feasible_dense(inst, &sq, config)?;
    if !report.ok {
        return Err(SolveError::InfeasibleWarmStart(report.to_text()));
    }
    total_dense(inst, &sq, config)
        .map_err(|e| SolveError::InfeasibleWarmStart(format!("objective undefined: {e}")))
}

fn propose(p: &Problem, st: &State, rng: &mut ChaCha8Rng, params: &SolverParams) -> Option<Vec<(usize, usize)>> {
    let r: f64 = rng.random();
    if r < params.swap_probability {
        if p.edges.is_empty() {
            return None;
        }
        let (a, b) = p.edges[rng.random_range(0..p.edges.len())];
        let (sa, sb) = (st.assign[a], st.assign[b]);
        if sa == sb || !p.is_candidate(a, sb) || !p.is_candidate(b, sa) {
            return None;
        }
        return Some(vec![(a, sb), (b, sa)]);
    }
    if p.movable.is_empty() {
        return None;
    }
    let u = p.movable[rng.random_range(0..p.movable.len())];
    let cur = st.assign[u];
    let k = rng.random_range(0..p.cand[u].len() - 1);
    let to = p.cand[u].iter().copied().filter(|&s| s != cur).nth(k)?;
    if r < params.swap_probability + params.exchange_probability {
        return exchange(p, st, rng, u, to);
    }
    Some(vec![(u, to)])
}

fn random_member(st: &State, rng: &mut ChaCha8Rng, s: usize) -> Option<usize> {
    let m = st.members(s);
    (!m.is_empty()).then(|| m[rng.random_range(0..m.len())])
}

/// `u` moves to `to` and the cycle closes back at `u`'s school, either
/// directly through a member of `to` or through a member of a third school.
fn exchange(p: &Problem, st: &State, rng: &mut ChaCha8Rng, u: usize, to: usize) -> Option<Vec<(usize, usize)>> {
    let from = st.assign[u];
    let v = random_member(st, rng, to)?;
    if rng.random_bool(0.5) {
        return p.is_candidate(v, from).then(|| vec![(u, to), (v, from)]);
    }
    let thirds: Vec<usize> = p.cand[v].iter().copied().filter(|&c| c != to && c != from).collect();
    if thirds.is_empty() {
        return None;
    }
    let c = thirds[rng.random_range(0..thirds.len())];
    let w = random_member(st, rng, c)?;
    p.is_candidate(w, from).then(|| vec![(u, to), (v, c), (w, from)])
}

/// Median absolute objective change of sampled feasible moves from the
/// status quo, scaled so that it is accepted with probability one half.
///
/// When most moves leave the objective unchanged the median is zero; the
/// median of the nonzero changes is used instead, taken along a random walk
/// of feasible moves if none of the status-quo moves changes the objective.
fn estimate_temperature(p: &Problem, st: &mut State, rng: &mut ChaCha8Rng, params: &SolverParams) -> f64 {
    let mut deltas = Vec::with_capacity(params.temperature_samples);
    let max_attempts = params.temperature_samples * 20;
    for _ in 0..max_attempts {
        if deltas.len() >= params.temperature_samples {
            break;
        }
        let Some(moves) = propose(p, st, rng, params) else { continue };
        let undo: Vec<_> = moves.iter().map(|&(u, _)| (u, st.assign[u])).collect();
        if let Some(d) = st.try_moves(p, &moves) {
            deltas.push(d.abs());
            st.undo_accepted(p, &undo, d);
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.get(v.len() / 2).copied()
    };
    if let Some(m) = median(&mut deltas).filter(|&m| m > 1e-12) {
        return m / std::f64::consts::LN_2;
    }
    let mut nonzero: Vec<f64> = deltas.into_iter().filter(|&d| d > 1e-12).collect();
    if nonzero.is_empty() {
        let start = st.assign.clone();
        for _ in 0..max_attempts {
            if nonzero.len() >= params.temperature_samples {
                break;
            }
            let Some(moves) = propose(p, st, rng, params) else { continue };
            if let Some(d) = st.try_moves(p, &moves) {
                if d.abs() > 1e-12 {
                    nonzero.push(d.abs());
                }
            }
        }
        *st = State::new(p, start);
    }
    median(&mut nonzero).unwrap_or(1.0) / std::f64::consts::LN_2
}

/// Single-unit moves and adjacent swaps from `st`, taking the first
/// improvement until none is left.
fn polish(p: &Problem, st: &mut State, budget: u64) -> u64 {
    let mut tried = 0;
    loop {
        let mut improved = false;
        for &u in &p.movable {
            for k in 0..p.cand[u].len() {
                let s = p.cand[u][k];
                if s == st.assign[u] {
                    continue;
                }
                tried += 1;
                let undo = [(u, st.assign[u])];
                if let Some(d) = st.try_moves(p, &[(u, s)]) {
                    if d < -1e-12 {
                        improved = true;
                    } else {
                        st.undo_accepted(p, &undo, d);
                    }
                }
            }
        }
        for &(a, b) in &p.edges {
            let (sa, sb) = (st.assign[a], st.assign[b]);
            if sa == sb || !p.is_candidate(a, sb) || !p.is_candidate(b, sa) {
                continue;
            }
            tried += 1;
            let undo = [(a, sa), (b, sb)];
            if let Some(d) = st.try_moves(p, &[(a, sb), (b, sa)]) {
                if d < -1e-12 {
                    improved = true;
                } else {
                    st.undo_accepted(p, &undo, d);
                }
            }
        }
        if !improved || tried >= budget {
            return tried;
        }
    }
}

/// Minimizes the configured objective from the status-quo warm start.
///
/// Every visited state satisfies the active constraint families; the best
/// zoning is re-evaluated from scratch before it is returned. Results depend
/// only on the inputs and the seed unless the time limit cuts the run short.
pub fn solve(inst: &Instance, config: &ObjectiveConfig, params: &SolverParams) -> Result<SolveResult, SolveError> {
    params.validate()?;
    let start = Instant::now();
    let sq_objective = warm_start(inst, config)?;
    let p = Problem::new(inst, config);
    let mut st = State::new(&p, inst.sq_dense());
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let t0 = match params.initial_temperature {
        Some(t) => t,
        None => estimate_temperature(&p, &mut st, &mut rng, params),
    };
    st.resync(&p);
    debug!("seed {}: starting temperature {t0:.6}", params.seed);

    let mut temp = t0;
    let mut best = st.assign.clone();
    let mut best_obj = st.objective;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        wall_seconds: start.elapsed().as_secs_f64(),
        objective: sq_objective,
    }];
    let mut accepted = 0u64;
    let mut last_best = 0u64;
    let mut since_reheat = 0u64;
    let mut it = 0u64;
    let verify = |st: &State| {
        let report = feasible_dense(inst, &st.assign, config).expect("dense zoning");
        assert!(report.ok, "accepted an infeasible state: {}", report.to_text());
        let pure = total_dense(inst, &st.assign, config).expect("defined objective");
        assert!((pure - st.objective).abs() < 1e-9, "objective drift {pure} vs {}", st.objective);
    };

    while it < params.max_iterations {
        if it % 256 == 0 && start.elapsed().as_secs_f64() >= params.time_limit {
            break;
        }
        it += 1;
        since_reheat += 1;
        let Some(moves) = propose(&p, &st, &mut rng, params) else { continue };
        let undo: Vec<_> = moves.iter().map(|&(u, _)| (u, st.assign[u])).collect();
        let Some(d) = st.try_moves(&p, &moves) else { continue };
        let e = d + params.feeder_guide * st.last_guide;
        let accept = e <= 0.0 || rng.random::<f64>() < (-e / temp).exp();
        if !accept {
            st.undo_accepted(&p, &undo, d);
            continue;
        }
        accepted += 1;
        temp *= params.cooling_rate;
        if params.resync_every > 0 && accepted % params.resync_every == 0 {
            st.resync(&p);
        }
        if params.verify {
            verify(&st);
        }
        if st.objective < best_obj - 1e-12 {
            best_obj = st.objective;
            best.clone_from(&st.assign);
            last_best = it;
            since_reheat = 0;
            trace.push(TraceEntry {
                iteration: it,
                wall_seconds: start.elapsed().as_secs_f64(),
                objective: best_obj,
            });
        }
        if params.stall_limit > 0 && it - last_best >= params.stall_limit {
            break;
        }
        if params.reheat_after > 0 && since_reheat >= params.reheat_after && temp < t0 * FROZEN {
            st = State::new(&p, best.clone());
            temp = t0;
            since_reheat = 0;
        }
    }

    if params.polish {
        let mut pst = State::new(&p, best.clone());
        it += polish(&p, &mut pst, params.max_iterations.max(10_000));
        if pst.objective < best_obj - 1e-12 {
            best_obj = pst.objective;
            best = pst.assign;
            trace.push(TraceEntry {
                iteration: it,
                wall_seconds: start.elapsed().as_secs_f64(),
                objective: best_obj,
            });
        }
    }

    let report = feasible_dense(inst, &best, config)?;
    debug_assert!(report.ok);
    if !report.ok {
        return Err(SolveError::Invalid(format!("search ended infeasible: {}", report.to_text())));
    }
    let breakdown = breakdown_dense(inst, &best, config)?;
    if let Some(last) = trace.last_mut() {
        last.objective = breakdown.total;
    }
    info!(
        "seed {}: objective {:.6} (status quo {:.6}) after {} iterations",
        params.seed, breakdown.total, sq_objective, it
    );
    Ok(SolveResult {
        seed: params.seed,
        best_zoning: inst.zoning_from_dense(&best),
        best_breakdown: breakdown,
        sq_objective,
        iterations: it,
        accepted,
        wall_time: start.elapsed().as_secs_f64(),
        proven_optimal: false,
        initial_temperature: t0,
        trace,
    })
}

#[derive(Debug)]
pub struct BatchResult {
    /// One entry per seed, in seed order.
    pub runs: Vec<Result<SolveResult, SolveError>>,
    /// Mean and standard error of each evaluation metric over the
    /// successful runs.
    pub summary: Vec<MetricSummary>,
}

impl BatchResult {
    pub fn successes(&self) -> impl Iterator<Item = &SolveResult> {
        self.runs.iter().filter_map(|r| r.as_ref().ok())
    }
}

/// Independent runs, one per seed, executed on the current rayon pool.
pub fn batch_solve(
    inst: &Instance,
    config: &ObjectiveConfig,
    seeds: &[u64],
    params: &SolverParams,
) -> Result<BatchResult, SolveError> {
    if seeds.is_empty() {
        return Err(SolveError::Invalid("seed list is empty".into()));
    }
    let runs: Vec<Result<SolveResult, SolveError>> = seeds
        .par_iter()
        .map(|&seed| solve(inst, config, &params.clone().with_seed(seed)))
        .collect();
    let ok: Vec<&SolveResult> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let summary = summarize(inst, config, &ok)?;
    Ok(BatchResult { runs, summary })
}
