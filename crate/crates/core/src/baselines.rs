//! Reference planners: the expected value formulation and a payment-minimizing
//! parallel drone scheduling TSP.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::milp::{MilpProblem, MilpSolution, MilpSolver, MilpStatus, SolveLimits, VarId};
use crate::model::blocks::{
    add_first_stage, add_order_block, add_symmetry_breaking, decode_first_stage, FirstStageRules, FirstStageVars,
};
use crate::model::{check_inputs, expected_cost, CostBreakdown, FirstStagePlan, InfeasiblePlan, ModelError};
use crate::scenario::ScenarioSpace;

/// Collapsed failure probabilities used by the expected value formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvfProbabilities {
    /// Probability that each drone cannot take off.
    pub ground_prob: Vec<f64>,
    /// Probability that a breakdown happens on the trip to each customer.
    pub break_prob: Vec<f64>,
    /// Probability that each drone needs a repair.
    pub repair_prob: Vec<f64>,
}

impl EvfProbabilities {
    /// Marginals of a scenario space. A customer's break probability is averaged over drones.
    pub fn from_scenarios(instance: &Instance, scenarios: &ScenarioSpace) -> Self {
        let n = instance.num_customers();
        let drones = instance.num_drones();
        let ground_prob = (0..drones).map(|d| scenarios.ground_probability(d)).collect();
        let break_prob = (1..=n)
            .map(|i| {
                if drones == 0 {
                    return 0.0;
                }
                let sum: f64 = (0..drones)
                    .map(|d| scenarios.breakdown.iter().filter(|l| l.breaks_at(i, d)).map(|l| l.probability).sum::<f64>())
                    .sum();
                sum / drones as f64
            })
            .collect();
        let repair_prob = (0..drones)
            .map(|d| scenarios.breakdown.iter().filter(|l| l.any_break_for(d)).map(|l| l.probability).sum())
            .collect();
        Self { ground_prob, break_prob, repair_prob }
    }

    pub fn zero(instance: &Instance) -> Self {
        Self {
            ground_prob: vec![0.0; instance.num_drones()],
            break_prob: vec![0.0; instance.num_customers()],
            repair_prob: vec![0.0; instance.num_drones()],
        }
    }
}

/// How the expected drone cost terms are paired with the grounding probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvfVariant {
    /// Travel paid when the drone flies, penalty when it is grounded.
    #[default]
    Corrected,
    /// Travel weighted by the grounding probability and penalty by its complement.
    Literal,
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("this planner needs exactly one truck, instance has {0}")]
    UnsupportedFleet(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Infeasible(#[from] InfeasiblePlan),
}

#[derive(Debug)]
pub struct BaselineDecoder {
    first: FirstStageVars,
    orders: Vec<Option<Vec<VarId>>>,
    instance: Instance,
}

impl BaselineDecoder {
    pub fn decode(&self, solution: &MilpSolution) -> Result<FirstStagePlan, ModelError> {
        if !solution.has_incumbent() {
            return Err(ModelError::NoPlan(solution.status));
        }
        Ok(decode_first_stage(&solution.values, &self.instance, &self.first, &self.orders))
    }
}

/// Solved baseline with its exact expected payment under a scenario space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub plan: FirstStagePlan,
    pub status: MilpStatus,
    /// Optimum of the planner's own objective.
    pub model_objective: f64,
    /// Payment of the plan under the true scenario space.
    pub cost: CostBreakdown,
    pub wall_time_s: f64,
}

pub fn build_evf(
    instance: &Instance,
    probs: &EvfProbabilities,
    variant: EvfVariant,
) -> Result<(MilpProblem, BaselineDecoder), ModelError> {
    build_evf_with(instance, probs, variant, None)
}

fn build_evf_with(
    instance: &Instance,
    probs: &EvfProbabilities,
    variant: EvfVariant,
    scenarios: Option<&ScenarioSpace>,
) -> Result<(MilpProblem, BaselineDecoder), ModelError> {
    instance.ensure_valid()?;
    let n = instance.num_customers();
    let drones = instance.num_drones();
    let p = instance.costs.penalty;
    let m = instance.costs.repair;
    let mut problem = MilpProblem::new();
    let first = add_first_stage(&mut problem, instance, FirstStageRules { daily_limits: true, time_windows: true });
    if let Some(s) = scenarios {
        add_symmetry_breaking(&mut problem, instance, &first, Some(s));
    }
    for i in 1..=n {
        for d in 0..drones {
            let pd = probs.ground_prob[d];
            let pi = probs.break_prob[i - 1];
            let travel = instance.costs.drone_trip(i);
            let coef = match variant {
                EvfVariant::Corrected => travel * (1.0 - pd) + p * pd + p * (1.0 - pd) * pi,
                EvfVariant::Literal => travel * pd + p * (1.0 - pd) + p * (1.0 - pd) * pi,
            };
            problem.add_cost(first.drone_assign[i - 1][d], coef);
        }
    }
    // The repair term does not depend on any decision.
    problem.objective_offset += (0..drones).map(|d| m * (1.0 - probs.ground_prob[d]) * probs.repair_prob[d]).sum::<f64>();
    let orders = (0..drones).map(|d| Some(add_order_block(&mut problem, instance, d, &first.drone_assign).order)).collect();
    Ok((problem, BaselineDecoder { first, orders, instance: instance.clone() }))
}

/// Single-truck routing plus drone assignment by range and payload, minimizing
/// reservation and travel cost with no daily limits and no uncertainty.
pub fn build_pdstsp(instance: &Instance) -> Result<(MilpProblem, BaselineDecoder), BaselineError> {
    if instance.num_trucks() != 1 {
        return Err(BaselineError::UnsupportedFleet(instance.num_trucks()));
    }
    instance.ensure_valid().map_err(ModelError::from)?;
    let mut problem = MilpProblem::new();
    let first = add_first_stage(&mut problem, instance, FirstStageRules { daily_limits: false, time_windows: false });
    add_symmetry_breaking(&mut problem, instance, &first, None);
    for i in 1..=instance.num_customers() {
        for d in 0..instance.num_drones() {
            problem.add_cost(first.drone_assign[i - 1][d], instance.costs.drone_trip(i));
        }
    }
    let orders = vec![None; instance.num_drones()];
    Ok((problem, BaselineDecoder { first, orders, instance: instance.clone() }))
}

fn finish(
    problem: &MilpProblem,
    decoder: &BaselineDecoder,
    instance: &Instance,
    scenarios: &ScenarioSpace,
    solver: &dyn MilpSolver,
    limits: &SolveLimits,
) -> Result<BaselineReport, BaselineError> {
    let solution = solver.solve(problem, limits).map_err(ModelError::from)?;
    let plan = decoder.decode(&solution)?;
    let cost = expected_cost(&plan, instance, scenarios)?;
    Ok(BaselineReport {
        plan,
        status: solution.status,
        model_objective: solution.objective,
        cost,
        wall_time_s: solution.wall_time_s,
    })
}

pub fn solve_evf(
    instance: &Instance,
    scenarios: &ScenarioSpace,
    variant: EvfVariant,
    solver: &dyn MilpSolver,
    limits: &SolveLimits,
) -> Result<BaselineReport, BaselineError> {
    check_inputs(instance, scenarios)?;
    let probs = EvfProbabilities::from_scenarios(instance, scenarios);
    let (problem, decoder) = build_evf_with(instance, &probs, variant, Some(scenarios))?;
    finish(&problem, &decoder, instance, scenarios, solver, limits)
}

pub fn solve_pdstsp(
    instance: &Instance,
    scenarios: &ScenarioSpace,
    solver: &dyn MilpSolver,
    limits: &SolveLimits,
) -> Result<BaselineReport, BaselineError> {
    check_inputs(instance, scenarios)?;
    let (problem, decoder) = build_pdstsp(instance)?;
    finish(&problem, &decoder, instance, scenarios, solver, limits)
}
