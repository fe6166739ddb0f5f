//! Exact expected payment of a plan and first-stage feasibility checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::plan::FirstStagePlan;
use crate::instance::{Instance, WindowClass};
use crate::scenario::{BreakdownScenario, ScenarioSpace, TakeoffScenario};

/// Slack allowed on distance, time and capacity limits.
pub const LIMIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub truck_initial: f64,
    pub drone_initial: f64,
    pub truck_travel: f64,
    pub expected_drone_travel: f64,
    pub expected_penalty: f64,
    pub expected_repair: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub(crate) fn with_total(mut self) -> Self {
        self.total = self.truck_initial
            + self.drone_initial
            + self.truck_travel
            + self.expected_drone_travel
            + self.expected_penalty
            + self.expected_repair;
        self
    }

    /// Reservation and truck driving costs, paid in every scenario.
    pub fn first_stage(&self) -> f64 {
        self.truck_initial + self.drone_initial + self.truck_travel
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("infeasible plan: {constraint}: {detail}")]
pub struct InfeasiblePlan {
    pub constraint: &'static str,
    pub detail: String,
}

fn fail(constraint: &'static str, detail: impl Into<String>) -> InfeasiblePlan {
    InfeasiblePlan { constraint, detail: detail.into() }
}

/// Penalty, repair and travel indicators implied by a plan.
/// Indices: `[takeoff][breakdown][customer - 1][drone]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecourseOutcome {
    pub takeoff_penalties: Vec<Vec<Vec<bool>>>,
    pub breakdown_penalties: Vec<Vec<Vec<Vec<bool>>>>,
    pub repairs: Vec<Vec<Vec<bool>>>,
}

/// Expected second- and third-stage cost conditional on one takeoff scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCost {
    pub probability: f64,
    /// Drone travel plus grounded penalties.
    pub second_stage: f64,
    /// Breakdown penalties plus repairs, averaged over breakdown scenarios.
    pub third_stage: f64,
}

/// Realized payment of one day, split by category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Payment {
    pub fixed: f64,
    pub drone_travel: f64,
    pub penalty: f64,
    pub repair: f64,
}

impl Payment {
    pub fn total(&self) -> f64 {
        self.fixed + self.drone_travel + self.penalty + self.repair
    }
}

/// Number of customers a flying drone fails to serve: everything from the first
/// customer (in serving order) at which it breaks down.
pub fn stranded_suffix(order: &[usize], drone: usize, breakdown: &BreakdownScenario) -> usize {
    order
        .iter()
        .position(|&c| breakdown.breaks_at(c, drone))
        .map_or(0, |k| order.len() - k)
}

/// Shape, assignment, reservation, payload and per-trip range rules.
pub fn check_structure(plan: &FirstStagePlan, instance: &Instance) -> Result<(), InfeasiblePlan> {
    let n = instance.num_customers();
    if plan.truck_routes.len() != instance.num_trucks() || plan.truck_used.len() != instance.num_trucks() {
        return Err(fail("fleet", format!("plan lists {} trucks, instance has {}", plan.truck_routes.len(), instance.num_trucks())));
    }
    if plan.drone_orders.len() != instance.num_drones() || plan.drone_used.len() != instance.num_drones() {
        return Err(fail("fleet", format!("plan lists {} drones, instance has {}", plan.drone_orders.len(), instance.num_drones())));
    }
    let mut seen = vec![0usize; n + 1];
    for &c in plan.truck_routes.iter().chain(&plan.drone_orders).flatten() {
        if c == 0 || c > n {
            return Err(fail("allocation", format!("unknown customer {c}")));
        }
        seen[c] += 1;
    }
    if let Some(c) = (1..=n).find(|&c| seen[c] != 1) {
        return Err(fail("allocation", format!("customer {c} is served {} times", seen[c])));
    }
    for (t, route) in plan.truck_routes.iter().enumerate() {
        if !route.is_empty() && !plan.truck_used[t] {
            return Err(fail("truck initial cost", format!("truck {t} serves customers but is not reserved")));
        }
    }
    for (d, order) in plan.drone_orders.iter().enumerate() {
        if !order.is_empty() && !plan.drone_used[d] {
            return Err(fail("drone initial cost", format!("drone {d} serves customers but is not reserved")));
        }
        let spec = &instance.drones[d];
        for &c in order {
            if instance.customer(c).package_weight_kg > spec.capacity_kg + LIMIT_TOL {
                return Err(fail("drone capacity", format!("customer {c} exceeds drone {d} payload")));
            }
            if instance.roundtrip_km(c) > spec.trip_distance_km + LIMIT_TOL {
                return Err(fail("drone trip range", format!("customer {c} is out of range of drone {d}")));
            }
        }
    }
    Ok(())
}

/// Every first-stage constraint: structure plus capacities, daily limits and time windows.
pub fn check_first_stage(plan: &FirstStagePlan, instance: &Instance) -> Result<(), InfeasiblePlan> {
    check_structure(plan, instance)?;
    let windows = instance.has_time_windows();
    let class = |c: usize| instance.customer(c).window_class;
    for (t, route) in plan.truck_routes.iter().enumerate() {
        let spec = &instance.trucks[t];
        let load: f64 = route.iter().map(|&c| instance.customer(c).package_weight_kg).sum();
        if load > spec.capacity_kg + LIMIT_TOL {
            return Err(fail("truck capacity", format!("truck {t} carries {load} kg")));
        }
        let arcs = plan.truck_arcs(t);
        let km: f64 = arcs.iter().map(|&(a, b)| instance.distance(a, b)).sum();
        if km > spec.daily_distance_km + LIMIT_TOL {
            return Err(fail("truck daily distance", format!("truck {t} drives {km} km")));
        }
        let hours: f64 = arcs.iter().map(|&(a, b)| instance.truck_arc_hours(t, a, b)).sum();
        if hours > spec.daily_time_h + LIMIT_TOL {
            return Err(fail("truck working hours", format!("truck {t} needs {hours} h")));
        }
        if windows {
            if let Some(k) = first_order_break(route, class) {
                return Err(fail("truck time window order", format!("truck {t} visits customer {} too late", route[k])));
            }
            let morning: f64 = arcs
                .iter()
                .filter(|&&(_, b)| b != 0 && class(b) == WindowClass::Morning)
                .map(|&(a, b)| instance.truck_arc_hours(t, a, b))
                .sum();
            if morning > instance.morning_limit_h.unwrap_or(f64::INFINITY) + LIMIT_TOL {
                return Err(fail("truck morning limit", format!("truck {t} needs {morning} h")));
            }
            let afternoon: f64 = arcs
                .iter()
                .filter(|&&(a, b)| a != 0 && (b == 0 || class(b) == WindowClass::Afternoon))
                .map(|&(a, b)| instance.truck_arc_hours(t, a, b))
                .sum();
            if afternoon > instance.afternoon_limit_h.unwrap_or(f64::INFINITY) + LIMIT_TOL {
                return Err(fail("truck afternoon limit", format!("truck {t} needs {afternoon} h")));
            }
        }
    }
    for (d, order) in plan.drone_orders.iter().enumerate() {
        let spec = &instance.drones[d];
        let km: f64 = order.iter().map(|&c| instance.roundtrip_km(c)).sum();
        if km > spec.daily_distance_km + LIMIT_TOL {
            return Err(fail("drone daily distance", format!("drone {d} flies {km} km")));
        }
        if windows {
            if let Some(k) = first_order_break(order, class) {
                return Err(fail("drone time window order", format!("drone {d} serves customer {} too late", order[k])));
            }
            for (limit, wanted, name) in [
                (instance.morning_limit_h, WindowClass::Morning, "drone morning limit"),
                (instance.afternoon_limit_h, WindowClass::Afternoon, "drone afternoon limit"),
            ] {
                let hours: f64 = order
                    .iter()
                    .filter(|&&c| class(c) == wanted)
                    .map(|&c| instance.drone_roundtrip_hours(d, c).unwrap_or(f64::INFINITY))
                    .sum();
                if hours > limit.unwrap_or(f64::INFINITY) + LIMIT_TOL {
                    return Err(fail(name, format!("drone {d} needs {hours} h")));
                }
            }
        }
    }
    Ok(())
}

/// Index of the first morning customer that follows an afternoon customer.
fn first_order_break(sequence: &[usize], class: impl Fn(usize) -> WindowClass) -> Option<usize> {
    let mut afternoon_seen = false;
    for (k, &c) in sequence.iter().enumerate() {
        match class(c) {
            WindowClass::Afternoon => afternoon_seen = true,
            WindowClass::Morning if afternoon_seen => return Some(k),
            _ => {}
        }
    }
    None
}

fn first_stage_costs(plan: &FirstStagePlan, instance: &Instance) -> CostBreakdown {
    let truck_initial = (0..instance.num_trucks())
        .filter(|&t| plan.truck_used[t])
        .map(|t| instance.trucks[t].initial_cost)
        .sum();
    let drone_initial = (0..instance.num_drones())
        .filter(|&d| plan.drone_used[d])
        .map(|d| instance.drones[d].initial_cost)
        .sum();
    let truck_travel = (0..instance.num_trucks())
        .flat_map(|t| plan.truck_arcs(t))
        .map(|(a, b)| instance.costs.truck_arc_cost[a][b])
        .sum();
    CostBreakdown { truck_initial, drone_initial, truck_travel, ..Default::default() }
}

/// Second-stage cost in one takeoff scenario: drone travel when flying, penalties when grounded.
pub fn second_stage_cost(plan: &FirstStagePlan, instance: &Instance, takeoff: &TakeoffScenario) -> (f64, f64) {
    let mut travel = 0.0;
    let mut penalty = 0.0;
    for (d, order) in plan.drone_orders.iter().enumerate() {
        if takeoff.flies(d) {
            travel += order.iter().map(|&c| instance.costs.drone_trip(c)).sum::<f64>();
        } else {
            penalty += instance.costs.penalty * order.len() as f64;
        }
    }
    (travel, penalty)
}

/// Third-stage breakdown penalties and repairs in one `(takeoff, breakdown)` pair.
pub fn third_stage_cost(
    plan: &FirstStagePlan,
    instance: &Instance,
    takeoff: &TakeoffScenario,
    breakdown: &BreakdownScenario,
) -> (f64, f64) {
    let mut penalty = 0.0;
    let mut repair = 0.0;
    for (d, order) in plan.drone_orders.iter().enumerate() {
        if !takeoff.flies(d) {
            continue;
        }
        let stranded = stranded_suffix(order, d, breakdown);
        if stranded > 0 {
            penalty += instance.costs.penalty * stranded as f64;
            repair += instance.costs.repair;
        }
    }
    (penalty, repair)
}

/// Expected payment of a plan under the scenario space, checking only structural
/// rules. Used for plans from models that ignore some limits.
pub fn expected_cost(
    plan: &FirstStagePlan,
    instance: &Instance,
    scenarios: &ScenarioSpace,
) -> Result<CostBreakdown, InfeasiblePlan> {
    check_structure(plan, instance)?;
    let mut out = first_stage_costs(plan, instance);
    for w in &scenarios.takeoff {
        let (travel, grounded_penalty) = second_stage_cost(plan, instance, w);
        let mut penalty = 0.0;
        let mut repair = 0.0;
        for l in &scenarios.breakdown {
            let (p, m) = third_stage_cost(plan, instance, w, l);
            penalty += l.probability * p;
            repair += l.probability * m;
        }
        out.expected_drone_travel += w.probability * travel;
        out.expected_penalty += w.probability * (grounded_penalty + penalty);
        out.expected_repair += w.probability * repair;
    }
    Ok(out.with_total())
}

/// Exact expected total payment of a feasible plan.
pub fn evaluate_plan(
    plan: &FirstStagePlan,
    instance: &Instance,
    scenarios: &ScenarioSpace,
) -> Result<CostBreakdown, InfeasiblePlan> {
    check_first_stage(plan, instance)?;
    expected_cost(plan, instance, scenarios)
}

/// Per-takeoff-scenario recourse costs.
pub fn scenario_costs(plan: &FirstStagePlan, instance: &Instance, scenarios: &ScenarioSpace) -> Vec<ScenarioCost> {
    scenarios
        .takeoff
        .iter()
        .map(|w| {
            let (travel, grounded) = second_stage_cost(plan, instance, w);
            let third = scenarios
                .breakdown
                .iter()
                .map(|l| {
                    let (p, m) = third_stage_cost(plan, instance, w, l);
                    l.probability * (p + m)
                })
                .sum();
            ScenarioCost { probability: w.probability, second_stage: travel + grounded, third_stage: third }
        })
        .collect()
}

/// Payment realized when takeoff scenario `w` and breakdown scenario `l` occur.
pub fn realized_payment(
    plan: &FirstStagePlan,
    instance: &Instance,
    takeoff: &TakeoffScenario,
    breakdown: &BreakdownScenario,
) -> Payment {
    let fixed = first_stage_costs(plan, instance).first_stage();
    let (drone_travel, grounded) = second_stage_cost(plan, instance, takeoff);
    let (penalty, repair) = third_stage_cost(plan, instance, takeoff, breakdown);
    Payment { fixed, drone_travel, penalty: grounded + penalty, repair }
}

/// Indicator form of the recourse implied by a plan.
pub fn recourse_outcome(plan: &FirstStagePlan, instance: &Instance, scenarios: &ScenarioSpace) -> RecourseOutcome {
    let n = instance.num_customers();
    let drones = instance.num_drones();
    let assign = plan.drone_assignment_matrix(n);
    let mut takeoff_penalties = Vec::new();
    let mut breakdown_penalties = Vec::new();
    let mut repairs = Vec::new();
    for w in &scenarios.takeoff {
        takeoff_penalties.push(
            (0..n).map(|i| (0..drones).map(|d| assign[i][d] && !w.flies(d)).collect()).collect(),
        );
        let mut per_l = Vec::new();
        let mut rep_l = Vec::new();
        for l in &scenarios.breakdown {
            let mut z = vec![vec![false; drones]; n];
            let mut rep = vec![false; drones];
            for (d, order) in plan.drone_orders.iter().enumerate() {
                if !w.flies(d) {
                    continue;
                }
                let stranded = stranded_suffix(order, d, l);
                for &c in &order[order.len() - stranded..] {
                    z[c - 1][d] = true;
                }
                rep[d] = stranded > 0;
            }
            per_l.push(z);
            rep_l.push(rep);
        }
        breakdown_penalties.push(per_l);
        repairs.push(rep_l);
    }
    RecourseOutcome { takeoff_penalties, breakdown_penalties, repairs }
}
