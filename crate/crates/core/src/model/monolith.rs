//! Deterministic-equivalent MILP over all three stages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::blocks::{
    add_breakdown_block, add_first_stage, add_order_block, add_symmetry_breaking, decode_first_stage, BreakdownBlock,
    FirstStageRules, FirstStageVars,
};
use super::evaluate::{evaluate_plan, CostBreakdown, InfeasiblePlan, RecourseOutcome};
use super::plan::FirstStagePlan;
use crate::instance::{Instance, InvalidInput};
use crate::milp::{LinExpr, MilpError, MilpProblem, MilpSolution, MilpSolver, MilpStatus, Relation, SolveLimits, VarId};
use crate::scenario::ScenarioSpace;

/// Tolerance between a decoded plan's exact cost and the MILP objective.
pub const DECODE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonolithOptions {
    /// Drop recourse variables that are provably zero: takeoff penalties are
    /// folded into the assignment cost, and breakdown blocks are only built for
    /// flying drones in scenarios where they can break at a customer they can serve.
    pub fix_inert: bool,
    /// Merge breakdown blocks that are identical across takeoff scenarios (and
    /// across breakdown scenarios with the same failure column), summing their weights.
    pub share_flying_blocks: bool,
    /// Order reservations and assignments within runs of interchangeable vehicles.
    pub break_symmetry: bool,
    pub max_vars: usize,
}

impl Default for MonolithOptions {
    fn default() -> Self {
        Self { fix_inert: true, share_flying_blocks: true, break_symmetry: true, max_vars: 20_000 }
    }
}

impl MonolithOptions {
    /// One variable per index of the formulation, nothing merged or dropped.
    pub fn literal() -> Self {
        Self { fix_inert: false, share_flying_blocks: false, break_symmetry: false, ..Self::default() }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Invalid(#[from] InvalidInput),
    #[error("model has {vars} variables, cap is {cap}")]
    ModelTooLarge { vars: usize, cap: usize },
    #[error("solver failed: {0}")]
    Solver(#[from] MilpError),
    #[error("solver finished with status {0:?} and no plan")]
    NoPlan(MilpStatus),
    #[error("decoded plan costs {decoded}, solver objective is {objective}")]
    DecodeMismatch { decoded: f64, objective: f64 },
    #[error("decoded plan is infeasible: {0}")]
    Infeasible(#[from] InfeasiblePlan),
}

pub(crate) fn check_inputs(instance: &Instance, scenarios: &ScenarioSpace) -> Result<(), ModelError> {
    let mut violations = instance.validate();
    violations.extend(scenarios.validate(instance.num_customers(), instance.num_drones()));
    if violations.is_empty() {
        Ok(())
    } else {
        Err(InvalidInput { violations }.into())
    }
}

/// Where the recourse indicators of each `(takeoff, breakdown, drone)` live.
#[derive(Debug)]
pub struct MonolithDecoder {
    first: FirstStageVars,
    orders: Vec<Option<Vec<VarId>>>,
    /// `[takeoff][customer - 1][drone]`
    takeoff: Vec<Vec<Vec<Option<VarId>>>>,
    /// `[takeoff][breakdown][drone]` index into `blocks`
    block_of: Vec<Vec<Vec<Option<usize>>>>,
    blocks: Vec<BreakdownBlock>,
    instance: Instance,
    scenarios: ScenarioSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub plan: FirstStagePlan,
    pub recourse: RecourseOutcome,
    pub cost: CostBreakdown,
}

/// Solved monolith with search statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonolithReport {
    pub decoded: Decoded,
    pub status: MilpStatus,
    pub objective: f64,
    pub bound: f64,
    pub nodes_explored: u64,
    pub simplex_iterations: u64,
    pub num_vars: usize,
    pub num_constraints: usize,
    pub wall_time_s: f64,
}

pub fn build_monolith(
    instance: &Instance,
    scenarios: &ScenarioSpace,
    options: &MonolithOptions,
) -> Result<(MilpProblem, MonolithDecoder), ModelError> {
    check_inputs(instance, scenarios)?;
    let n = instance.num_customers();
    let drones = instance.num_drones();
    let penalty = instance.costs.penalty;
    let mut p = MilpProblem::new();
    let first = add_first_stage(&mut p, instance, FirstStageRules { daily_limits: true, time_windows: true });
    if options.break_symmetry {
        add_symmetry_breaking(&mut p, instance, &first, Some(scenarios));
    }

    // Drone travel (and, folded, grounded penalties) on the assignment variables.
    let mut takeoff: Vec<Vec<Vec<Option<VarId>>>> = vec![vec![vec![None; drones]; n]; scenarios.takeoff.len()];
    for i in 1..=n {
        for d in 0..drones {
            let x = first.drone_assign[i - 1][d];
            let flying: f64 = scenarios.takeoff.iter().filter(|w| w.flies(d)).map(|w| w.probability).sum();
            p.add_cost(x, instance.costs.drone_trip(i) * flying);
            for (k, w) in scenarios.takeoff.iter().enumerate() {
                let grounded = if w.flies(d) { 0.0 } else { 1.0 };
                if options.fix_inert {
                    p.add_cost(x, w.probability * penalty * grounded);
                } else {
                    let z = p.add_binary(format!("Zb_{i}_{d}_{k}"), w.probability * penalty);
                    let e = LinExpr::new().term(z, 1.0).term(x, -grounded);
                    p.add_row(format!("takeoff_penalty_{i}_{d}_{k}"), e, Relation::Eq, 0.0);
                    takeoff[k][i - 1][d] = Some(z);
                }
            }
        }
    }

    let mut blocks = Vec::new();
    let mut block_of = vec![vec![vec![None; drones]; scenarios.breakdown.len()]; scenarios.takeoff.len()];
    let mut orders: Vec<Option<Vec<VarId>>> = vec![None; drones];
    for d in 0..drones {
        // (takeoff, breakdown) pairs that get their own block, grouped by merge key.
        let mut groups: BTreeMap<(Option<usize>, Vec<bool>), Vec<(usize, usize)>> = BTreeMap::new();
        for (k, w) in scenarios.takeoff.iter().enumerate() {
            for (l, lam) in scenarios.breakdown.iter().enumerate() {
                let column: Vec<bool> = (1..=n)
                    .map(|i| w.flies(d) && lam.breaks_at(i, d) && (!options.fix_inert || instance.drone_can_serve(d, i)))
                    .collect();
                if options.fix_inert && !column.contains(&true) {
                    continue;
                }
                let key = if options.share_flying_blocks { (None, column) } else { (Some(k * scenarios.breakdown.len() + l), column) };
                groups.entry(key).or_default().push((k, l));
            }
        }
        if groups.is_empty() && options.fix_inert && !instance.has_time_windows() {
            continue;
        }
        let order = add_order_block(&mut p, instance, d, &first.drone_assign);
        for ((_, column), members) in groups {
            let weight: f64 = members
                .iter()
                .map(|&(k, l)| scenarios.takeoff[k].probability * scenarios.breakdown[l].probability)
                .sum();
            let label = format!("{}_{}", members[0].0, members[0].1);
            let block = add_breakdown_block(&mut p, instance, d, |i| column[i - 1], &first.drone_assign, &order, weight, &label);
            for (k, l) in members {
                block_of[k][l][d] = Some(blocks.len());
            }
            blocks.push(block);
        }
        orders[d] = Some(order.order);
    }

    if p.num_vars() > options.max_vars {
        return Err(ModelError::ModelTooLarge { vars: p.num_vars(), cap: options.max_vars });
    }
    let decoder = MonolithDecoder {
        first,
        orders,
        takeoff,
        block_of,
        blocks,
        instance: instance.clone(),
        scenarios: scenarios.clone(),
    };
    Ok((p, decoder))
}

impl MonolithDecoder {
    pub fn decode(&self, solution: &MilpSolution) -> Result<Decoded, ModelError> {
        if !solution.has_incumbent() {
            return Err(ModelError::NoPlan(solution.status));
        }
        let v = &solution.values;
        let inst = &self.instance;
        let plan = decode_first_stage(v, inst, &self.first, &self.orders);
        let cost = evaluate_plan(&plan, inst, &self.scenarios)?;
        let slack = (cost.total - solution.objective).abs();
        let ok = match solution.status {
            MilpStatus::Optimal => slack <= DECODE_TOL,
            _ => cost.total <= solution.objective + DECODE_TOL,
        };
        if !ok {
            return Err(ModelError::DecodeMismatch { decoded: cost.total, objective: solution.objective });
        }
        let recourse = self.recourse(v, &plan);
        Ok(Decoded { plan, recourse, cost })
    }

    fn recourse(&self, v: &[f64], plan: &FirstStagePlan) -> RecourseOutcome {
        let n = self.instance.num_customers();
        let drones = self.instance.num_drones();
        let on = |x: VarId| v[x.0] > 0.5;
        let assign = plan.drone_assignment_matrix(n);
        let mut out = RecourseOutcome { takeoff_penalties: Vec::new(), breakdown_penalties: Vec::new(), repairs: Vec::new() };
        for (k, w) in self.scenarios.takeoff.iter().enumerate() {
            out.takeoff_penalties.push(
                (0..n)
                    .map(|i| {
                        (0..drones)
                            .map(|d| match self.takeoff[k][i][d] {
                                Some(z) => on(z),
                                None => assign[i][d] && !w.flies(d),
                            })
                            .collect()
                    })
                    .collect(),
            );
            let mut per_l = Vec::new();
            let mut rep_l = Vec::new();
            for l in 0..self.scenarios.breakdown.len() {
                let mut z = vec![vec![false; drones]; n];
                let mut rep = vec![false; drones];
                for d in 0..drones {
                    if let Some(b) = self.block_of[k][l][d] {
                        let block = &self.blocks[b];
                        for i in 0..n {
                            z[i][d] = on(block.stranded[i]);
                        }
                        rep[d] = on(block.repair);
                    }
                }
                per_l.push(z);
                rep_l.push(rep);
            }
            out.breakdown_penalties.push(per_l);
            out.repairs.push(rep_l);
        }
        out
    }
}

/// Builds, solves and decodes the monolith.
pub fn solve_monolith(
    instance: &Instance,
    scenarios: &ScenarioSpace,
    options: &MonolithOptions,
    solver: &dyn MilpSolver,
    limits: &SolveLimits,
) -> Result<MonolithReport, ModelError> {
    let (problem, decoder) = build_monolith(instance, scenarios, options)?;
    let solution = solver.solve(&problem, limits)?;
    let decoded = decoder.decode(&solution)?;
    Ok(MonolithReport {
        decoded,
        status: solution.status,
        objective: solution.objective,
        bound: solution.bound,
        nodes_explored: solution.nodes_explored,
        simplex_iterations: solution.simplex_iterations,
        num_vars: problem.num_vars(),
        num_constraints: problem.num_constraints(),
        wall_time_s: solution.wall_time_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::line_instance;
    use crate::milp::BranchAndBound;
    use crate::model::evaluate::recourse_outcome;
    use crate::scenario::{two_point_spaces, BreakdownScenario, TakeoffScenario};

    fn run(inst: &Instance, s: &ScenarioSpace, opts: &MonolithOptions) -> MonolithReport {
        solve_monolith(inst, s, opts, &BranchAndBound, &SolveLimits::default()).unwrap()
    }

    #[test]
    fn single_customer_goes_to_cheaper_drone() {
        let inst = line_instance(1);
        let s = ScenarioSpace::deterministic(1, 1);
        let r = run(&inst, &s, &MonolithOptions::default());
        assert_eq!(r.decoded.plan.drone_orders, vec![vec![1]]);
        let expected = 100.0 + inst.costs.drone_trip(1);
        assert!((r.decoded.cost.total - expected).abs() < 1e-9);
        assert!((r.objective - expected).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_customer_rides_the_truck() {
        let mut inst = line_instance(2);
        inst.drones[0].trip_distance_km = 3.0;
        let s = ScenarioSpace::deterministic(2, 1);
        let r = run(&inst, &s, &MonolithOptions::default());
        assert!(!r.decoded.plan.drone_assign(2, 0));
        assert!(r.decoded.plan.truck_assign(2, 0));
    }

    #[test]
    fn zero_customers() {
        let inst = line_instance(0);
        let s = ScenarioSpace::deterministic(0, 1);
        let r = run(&inst, &s, &MonolithOptions::default());
        assert_eq!(r.decoded.cost.total, 0.0);
        assert_eq!(r.decoded.plan, FirstStagePlan::empty(1, 1));
    }

    #[test]
    fn literal_and_reduced_models_agree() {
        let mut inst = line_instance(4);
        inst.trucks[0].initial_cost = 120.0;
        let s = ScenarioSpace {
            takeoff: vec![
                TakeoffScenario { grounded: vec![false], probability: 0.8 },
                TakeoffScenario { grounded: vec![true], probability: 0.2 },
            ],
            breakdown: vec![
                BreakdownScenario { breaks: vec![vec![false]; 4], probability: 0.7 },
                BreakdownScenario { breaks: vec![vec![true], vec![false], vec![false], vec![true]], probability: 0.3 },
            ],
        };
        let reduced = run(&inst, &s, &MonolithOptions::default());
        let literal = run(&inst, &s, &MonolithOptions::literal());
        assert!((reduced.objective - literal.objective).abs() < 1e-6);
        assert!(literal.num_vars > reduced.num_vars);
        // Minimization makes every recourse indicator tight.
        let exact = recourse_outcome(&literal.decoded.plan, &inst, &s);
        assert_eq!(literal.decoded.recourse, exact);
        let exact = recourse_outcome(&reduced.decoded.plan, &inst, &s);
        assert_eq!(reduced.decoded.recourse, exact);
    }

    #[test]
    fn uncertainty_moves_customers_to_the_truck() {
        let mut inst = line_instance(4);
        inst.drones[0].daily_distance_km = 1000.0;
        inst.drones[0].trip_distance_km = 100.0;
        let det = run(&inst, &ScenarioSpace::deterministic(4, 1), &MonolithOptions::default());
        let s = two_point_spaces(0.1, 0.1, 0.5, &inst).unwrap();
        let random = run(&inst, &s, &MonolithOptions::default());
        assert!(random.decoded.plan.drone_customer_count() <= det.decoded.plan.drone_customer_count());
    }

    #[test]
    fn size_cap() {
        let inst = line_instance(3);
        let opts = MonolithOptions { max_vars: 5, ..MonolithOptions::default() };
        let err = build_monolith(&inst, &ScenarioSpace::deterministic(3, 1), &opts).unwrap_err();
        assert!(matches!(err, ModelError::ModelTooLarge { .. }));
    }
}
