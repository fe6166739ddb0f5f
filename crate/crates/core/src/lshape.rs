//! Stage-wise decomposition: a first-stage master with aggregate feedback cuts,
//! closed-form second stage and one third-stage MILP per takeoff scenario.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::milp::{LinExpr, MilpProblem, MilpSolver, MilpStatus, Relation, SolveLimits, VarId};
use crate::model::blocks::{
    add_breakdown_block, add_first_stage, add_order_block, add_symmetry_breaking, decode_first_stage, FirstStageRules,
};
use crate::model::{check_inputs, evaluate_plan, CostBreakdown, FirstStagePlan, ModelError};
use crate::scenario::{BreakdownScenario, ScenarioSpace, TakeoffScenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackParameters {
    /// `[customer - 1][drone]`
    pub e_penalty: Vec<Vec<f64>>,
    pub e_travel: Vec<Vec<f64>>,
    pub e_repair: Vec<Vec<f64>>,
    /// `[takeoff][customer - 1][drone]`
    pub e_penalty_aux: Vec<Vec<Vec<f64>>>,
    pub e_repair_aux: Vec<Vec<Vec<f64>>>,
}

impl FeedbackParameters {
    /// Per-drone repair bound: the largest `E_repair` over customers.
    pub fn repair_bound(&self, drone: usize) -> f64 {
        self.e_repair.iter().map(|row| row[drone]).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn compute_feedback(instance: &Instance, scenarios: &ScenarioSpace) -> FeedbackParameters {
    let n = instance.num_customers();
    let drones = instance.num_drones();
    let p = instance.costs.penalty;
    let m = instance.costs.repair;
    let grid = || vec![vec![0.0; drones]; n];
    let mut e_penalty = grid();
    let mut e_travel = grid();
    let mut e_repair = grid();
    let mut e_penalty_aux = Vec::with_capacity(scenarios.takeoff.len());
    let mut e_repair_aux = Vec::with_capacity(scenarios.takeoff.len());
    for w in &scenarios.takeoff {
        let mut ep = grid();
        let mut em = grid();
        for i in 1..=n {
            for d in 0..drones {
                let r = if w.flies(d) { 0.0 } else { 1.0 };
                let broken: f64 = scenarios
                    .breakdown
                    .iter()
                    .map(|l| l.probability * (1.0 - r) * if l.breaks_at(i, d) { 1.0 } else { 0.0 })
                    .sum();
                ep[i - 1][d] = p * broken;
                em[i - 1][d] = m * broken;
                e_travel[i - 1][d] -= instance.costs.drone_trip(i) * w.probability * (1.0 - r);
                e_penalty[i - 1][d] -= w.probability * (p * r + ep[i - 1][d]);
                e_repair[i - 1][d] -= w.probability * em[i - 1][d];
            }
        }
        e_penalty_aux.push(ep);
        e_repair_aux.push(em);
    }
    FeedbackParameters { e_penalty, e_travel, e_repair, e_penalty_aux, e_repair_aux }
}

/// Second-stage outcome in one takeoff scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondStage {
    /// `[customer - 1][drone]`
    pub takeoff_penalties: Vec<Vec<bool>>,
    pub travel: f64,
    pub penalty: f64,
}

impl SecondStage {
    pub fn cost(&self) -> f64 {
        self.travel + self.penalty
    }
}

/// Grounded drones pay a penalty per assigned customer; flying ones pay travel.
pub fn solve_second_stage(assign: &[Vec<bool>], instance: &Instance, takeoff: &TakeoffScenario) -> SecondStage {
    let mut travel = 0.0;
    let mut penalty = 0.0;
    let takeoff_penalties: Vec<Vec<bool>> = assign
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(d, &x)| {
                    let z = x && !takeoff.flies(d);
                    if z {
                        penalty += instance.costs.penalty;
                    } else if x {
                        travel += instance.costs.drone_trip(i + 1);
                    }
                    z
                })
                .collect()
        })
        .collect();
    SecondStage { takeoff_penalties, travel, penalty }
}

/// Serving orders chosen for one takeoff scenario and their expected
/// breakdown penalty plus repair cost over the breakdown scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdStage {
    /// Customers per drone in serving order; empty for grounded drones.
    pub orders: Vec<Vec<usize>>,
    pub expected_cost: f64,
    pub status: MilpStatus,
}

pub fn solve_third_stage(
    assign: &[Vec<bool>],
    instance: &Instance,
    takeoff: &TakeoffScenario,
    breakdowns: &[BreakdownScenario],
    solver: &dyn MilpSolver,
    limits: &SolveLimits,
) -> Result<ThirdStage, ModelError> {
    let n = instance.num_customers();
    let drones = instance.num_drones();
    let mut p = MilpProblem::new();
    let fixed: Vec<Vec<VarId>> = (1..=n)
        .map(|i| {
            (0..drones)
                .map(|d| {
                    let v = if assign[i - 1][d] { 1.0 } else { 0.0 };
                    p.add_var(format!("Xd_{i}_{d}"), v, v, true, 0.0)
                })
                .collect()
        })
        .collect();
    let mut orders: Vec<Option<Vec<VarId>>> = vec![None; drones];
    for d in 0..drones {
        let serves = (0..n).any(|i| assign[i][d]);
        if !takeoff.flies(d) || !serves {
            continue;
        }
        let order = add_order_block(&mut p, instance, d, &fixed);
        for (l, lam) in breakdowns.iter().enumerate() {
            if lam.any_break_for(d) {
                let label = l.to_string();
                add_breakdown_block(&mut p, instance, d, |i| lam.breaks_at(i, d), &fixed, &order, lam.probability, &label);
            }
        }
        orders[d] = Some(order.order);
    }
    let solution = solver.solve(&p, limits)?;
    if !solution.has_incumbent() {
        return Err(ModelError::NoPlan(solution.status));
    }
    let v = &solution.values;
    let orders = (0..drones)
        .map(|d| match &orders[d] {
            Some(u) => {
                let mut served: Vec<usize> = (1..=n).filter(|&i| assign[i - 1][d]).collect();
                served.sort_by(|&a, &b| v[u[a - 1].0].total_cmp(&v[u[b - 1].0]).then(a.cmp(&b)));
                served
            }
            None => Vec::new(),
        })
        .collect();
    Ok(ThirdStage { orders, expected_cost: solution.objective, status: solution.status })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LShapeOptions {
    pub max_iterations: usize,
    /// Solve the per-scenario sub-problems on the rayon pool.
    pub parallel: bool,
    pub limits: SolveLimits,
}

impl Default for LShapeOptions {
    fn default() -> Self {
        Self { max_iterations: 10, parallel: true, limits: SolveLimits::default() }
    }
}

#[derive(Debug, Error)]
pub enum LShapeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no convergence after {0} master iterations")]
    NonConvergence(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemCost {
    pub probability: f64,
    pub second_stage: f64,
    pub third_stage: f64,
    pub third_stage_status: MilpStatus,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `None` while the cuts are absent (the first master solve).
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub master_objective: f64,
    pub master_status: MilpStatus,
    pub convergence_b: f64,
    pub subproblems: Vec<SubproblemCost>,
    /// Feedback parameters computed after this iteration's sub-problems.
    pub feedback: FeedbackParameters,
    pub master_time_s: f64,
    pub subproblem_time_s: f64,
}

/// Master state after the final iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterState {
    pub iteration: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub incumbent: FirstStagePlan,
    pub convergence_b: f64,
    pub m_d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LShapeReport {
    pub plan: FirstStagePlan,
    pub cost: CostBreakdown,
    pub master_solves: usize,
    pub iterations: Vec<IterationRecord>,
    pub state: MasterState,
    pub feedback: FeedbackParameters,
    pub wall_time_s: f64,
}

struct Master {
    problem: MilpProblem,
    first: crate::model::blocks::FirstStageVars,
    thetas: Option<(VarId, VarId)>,
}

fn build_master(instance: &Instance, scenarios: &ScenarioSpace, feedback: Option<&FeedbackParameters>) -> Master {
    let mut problem = MilpProblem::new();
    let first = add_first_stage(&mut problem, instance, FirstStageRules { daily_limits: true, time_windows: true });
    add_symmetry_breaking(&mut problem, instance, &first, Some(scenarios));
    let thetas = feedback.map(|f| {
        let t1 = problem.add_continuous("theta1", 0.0, f64::INFINITY, 1.0);
        let t2 = problem.add_continuous("theta2", 0.0, f64::INFINITY, 1.0);
        let mut e = LinExpr::new().term(t1, 1.0);
        for i in 0..instance.num_customers() {
            for d in 0..instance.num_drones() {
                e.add_term(first.drone_assign[i][d], f.e_penalty[i][d] + f.e_travel[i][d]);
            }
        }
        problem.add_row("feedback_travel_penalty", e, Relation::Ge, 0.0);
        for i in 0..instance.num_customers() {
            let mut e = LinExpr::new().term(t2, 1.0);
            for d in 0..instance.num_drones() {
                e.add_term(first.drone_used[d], f.e_repair[i][d]);
            }
            problem.add_row(format!("feedback_repair_{}", i + 1), e, Relation::Ge, 0.0);
        }
        (t1, t2)
    });
    Master { problem, first, thetas }
}

type CacheKey = (Vec<Vec<bool>>, usize);

#[derive(Clone)]
struct ScenarioResult {
    second: SecondStage,
    third: ThirdStage,
}

/// Runs the decomposition loop until `θ₁ + θ₂ ≥ B`.
pub fn run(
    instance: &Instance,
    scenarios: &ScenarioSpace,
    options: &LShapeOptions,
    solver: &dyn MilpSolver,
) -> Result<LShapeReport, LShapeError> {
    let start = Instant::now();
    check_inputs(instance, scenarios)?;
    let n = instance.num_customers();
    let drones = instance.num_drones();
    let mut previous: Option<FeedbackParameters> = None;
    let cache: Mutex<HashMap<CacheKey, ScenarioResult>> = Mutex::new(HashMap::new());
    let mut iterations = Vec::new();

    for k in 0..options.max_iterations {
        let t0 = Instant::now();
        let master = build_master(instance, scenarios, previous.as_ref());
        let solution = solver.solve(&master.problem, &options.limits).map_err(ModelError::from)?;
        if !solution.has_incumbent() {
            return Err(ModelError::NoPlan(solution.status).into());
        }
        let master_time_s = t0.elapsed().as_secs_f64();
        let v = &solution.values;
        let mut plan = decode_first_stage(v, instance, &master.first, &vec![None; drones]);
        let assign = plan.drone_assignment_matrix(n);

        let t1 = Instant::now();
        let solve_one = |idx: usize| -> Result<(ScenarioResult, bool), ModelError> {
            let key = (assign.clone(), idx);
            if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
                return Ok((hit.clone(), true));
            }
            let w = &scenarios.takeoff[idx];
            let second = solve_second_stage(&assign, instance, w);
            let third = solve_third_stage(&assign, instance, w, &scenarios.breakdown, solver, &options.limits)?;
            let result = ScenarioResult { second, third };
            cache.lock().expect("cache lock").insert(key, result.clone());
            Ok((result, false))
        };
        let results: Vec<(ScenarioResult, bool)> = if options.parallel {
            (0..scenarios.takeoff.len()).into_par_iter().map(solve_one).collect::<Result<_, _>>()?
        } else {
            (0..scenarios.takeoff.len()).map(solve_one).collect::<Result<_, _>>()?
        };
        let subproblem_time_s = t1.elapsed().as_secs_f64();

        for d in 0..drones {
            if let Some(w) = scenarios.takeoff.iter().position(|w| w.flies(d)) {
                plan.drone_orders[d] = results[w].0.third.orders[d].clone();
            }
        }
        let feedback = compute_feedback(instance, scenarios);
        let m_d: Vec<f64> = (0..drones).map(|d| feedback.repair_bound(d)).collect();
        let convergence_b: f64 = (0..n)
            .flat_map(|i| (0..drones).map(move |d| (i, d)))
            .filter(|&(i, d)| assign[i][d])
            .map(|(i, d)| feedback.e_penalty[i][d] + feedback.e_travel[i][d])
            .sum::<f64>()
            + (0..drones).filter(|&d| plan.drone_used[d]).map(|d| m_d[d]).sum::<f64>();
        let thetas = master.thetas.map(|(a, b)| (v[a.0], v[b.0]));
        iterations.push(IterationRecord {
            k,
            theta1: thetas.map(|t| t.0),
            theta2: thetas.map(|t| t.1),
            master_objective: solution.objective,
            master_status: solution.status,
            convergence_b,
            subproblems: scenarios
                .takeoff
                .iter()
                .zip(&results)
                .map(|(w, (r, cached))| SubproblemCost {
                    probability: w.probability,
                    second_stage: r.second.cost(),
                    third_stage: r.third.expected_cost,
                    third_stage_status: r.third.status,
                    cached: *cached,
                })
                .collect(),
            feedback: feedback.clone(),
            master_time_s,
            subproblem_time_s,
        });

        // Without cuts the θ terms are unbounded below, so the test cannot pass at k = 0.
        if let Some((theta1, theta2)) = thetas {
            if theta1 + theta2 >= convergence_b - 1e-9 {
                let cost = evaluate_plan(&plan, instance, scenarios).map_err(ModelError::from)?;
                let expected: f64 = cost.first_stage()
                    + results
                        .iter()
                        .zip(&scenarios.takeoff)
                        .map(|((r, _), w)| w.probability * (r.second.cost() + r.third.expected_cost))
                        .sum::<f64>();
                if (expected - cost.total).abs() > 1e-6 {
                    return Err(ModelError::DecodeMismatch { decoded: cost.total, objective: expected }.into());
                }
                return Ok(LShapeReport {
                    state: MasterState {
                        iteration: k,
                        theta1,
                        theta2,
                        incumbent: plan.clone(),
                        convergence_b,
                        m_d,
                    },
                    plan,
                    cost,
                    master_solves: k + 1,
                    iterations,
                    feedback,
                    wall_time_s: start.elapsed().as_secs_f64(),
                });
            }
        }
        previous = Some(feedback);
    }
    Err(LShapeError::NonConvergence(options.max_iterations))
}
