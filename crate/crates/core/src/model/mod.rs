//! The three-stage model: plans, exact evaluation and the deterministic-equivalent MILP.

pub(crate) mod blocks;
mod evaluate;
mod monolith;
mod plan;

pub use evaluate::{
    check_first_stage, check_structure, evaluate_plan, expected_cost, realized_payment, recourse_outcome,
    scenario_costs, second_stage_cost, stranded_suffix, third_stage_cost, CostBreakdown, InfeasiblePlan, Payment,
    RecourseOutcome, ScenarioCost, LIMIT_TOL,
};
pub use monolith::{
    build_monolith, solve_monolith, Decoded, ModelError, MonolithDecoder, MonolithOptions, MonolithReport,
    DECODE_TOL,
};
pub(crate) use monolith::check_inputs;
pub use plan::{ArcMismatch, DronePlan, FirstStagePlan, PlanDocument, TruckPlan};
