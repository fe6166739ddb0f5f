//! Constraint blocks shared by the monolith, the decomposition master and
//! sub-problems, and the baselines.

use super::plan::FirstStagePlan;
use crate::instance::{Instance, WindowClass};
use crate::milp::{LinExpr, MilpProblem, Relation, VarId};
use crate::scenario::ScenarioSpace;

/// Which first-stage constraint groups to emit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FirstStageRules {
    /// Truck capacity, drone daily distance, truck daily distance and working hours.
    pub daily_limits: bool,
    /// Morning/afternoon ordering and time limits (only when windows exist).
    pub time_windows: bool,
}

#[derive(Debug)]
pub(crate) struct FirstStageVars {
    pub truck_used: Vec<VarId>,
    pub drone_used: Vec<VarId>,
    /// `[t][from][to]`
    pub arc: Vec<Vec<Vec<VarId>>>,
    /// `[customer - 1][t]`
    pub truck_assign: Vec<Vec<VarId>>,
    /// `[customer - 1][d]`
    pub drone_assign: Vec<Vec<VarId>>,
    /// `[customer - 1][t]`
    pub truck_order: Vec<Vec<VarId>>,
}

/// Serving-order variables of one drone.
#[derive(Debug)]
pub(crate) struct OrderVars {
    /// `[customer - 1]`
    pub order: Vec<VarId>,
}

/// Big-M for order variables ranging over `0..=c'`.
pub(crate) fn big_m(instance: &Instance) -> f64 {
    instance.num_customers() as f64 + 1.0
}

/// Reservation, allocation and truck routing variables with their costs
/// (reservation and truck arcs only) and constraints.
pub(crate) fn add_first_stage(p: &mut MilpProblem, inst: &Instance, rules: FirstStageRules) -> FirstStageVars {
    let n = inst.num_customers();
    let trucks = inst.num_trucks();
    let drones = inst.num_drones();
    let nf = n as f64;
    let delta = big_m(inst);

    let truck_used: Vec<VarId> =
        (0..trucks).map(|t| p.add_binary(format!("Wt_{t}"), inst.trucks[t].initial_cost)).collect();
    let drone_used: Vec<VarId> =
        (0..drones).map(|d| p.add_binary(format!("Wd_{d}"), inst.drones[d].initial_cost)).collect();
    let arc: Vec<Vec<Vec<VarId>>> = (0..trucks)
        .map(|t| {
            (0..=n)
                .map(|a| {
                    (0..=n)
                        .map(|b| {
                            let hi = if a == b { 0.0 } else { 1.0 };
                            p.add_var(format!("V_{a}_{b}_{t}"), 0.0, hi, true, inst.costs.truck_arc_cost[a][b])
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let truck_assign: Vec<Vec<VarId>> =
        (1..=n).map(|i| (0..trucks).map(|t| p.add_binary(format!("Xt_{i}_{t}"), 0.0)).collect()).collect();
    let drone_assign: Vec<Vec<VarId>> =
        (1..=n).map(|i| (0..drones).map(|d| p.add_binary(format!("Xd_{i}_{d}"), 0.0)).collect()).collect();
    let truck_order: Vec<Vec<VarId>> =
        (1..=n).map(|i| (0..trucks).map(|t| p.add_continuous(format!("S_{i}_{t}"), 0.0, nf, 0.0)).collect()).collect();

    for t in 0..trucks {
        let mut e = LinExpr::new();
        for i in 0..n {
            e.add_term(truck_assign[i][t], 1.0);
        }
        e.add_term(truck_used[t], -delta);
        p.add_row(format!("truck_reserve_{t}"), e, Relation::Le, 0.0);
    }
    for d in 0..drones {
        let mut e = LinExpr::new();
        for i in 0..n {
            e.add_term(drone_assign[i][d], 1.0);
        }
        e.add_term(drone_used[d], -delta);
        p.add_row(format!("drone_reserve_{d}"), e, Relation::Le, 0.0);
    }
    // Per-customer linking rows: implied by the aggregated ones at integer
    // points, much tighter in the relaxation.
    for i in 0..n {
        for t in 0..trucks {
            let e = LinExpr::new().term(truck_assign[i][t], 1.0).term(truck_used[t], -1.0);
            p.add_row(format!("truck_link_{}_{t}", i + 1), e, Relation::Le, 0.0);
        }
        for d in 0..drones {
            let e = LinExpr::new().term(drone_assign[i][d], 1.0).term(drone_used[d], -1.0);
            p.add_row(format!("drone_link_{}_{d}", i + 1), e, Relation::Le, 0.0);
        }
    }
    for t in 0..trucks {
        let mut e = LinExpr::new();
        for b in 1..=n {
            e.add_term(arc[t][0][b], 1.0);
        }
        e.add_term(truck_used[t], -1.0);
        p.add_row(format!("truck_link_depot_{t}"), e, Relation::Le, 0.0);
    }
    if rules.daily_limits {
        for t in 0..trucks {
            let mut e = LinExpr::new();
            for i in 1..=n {
                e.add_term(truck_assign[i - 1][t], inst.customer(i).package_weight_kg);
            }
            p.add_row(format!("truck_capacity_{t}"), e, Relation::Le, inst.trucks[t].capacity_kg);
        }
    }
    for i in 1..=n {
        for d in 0..drones {
            let e = LinExpr::new().term(drone_assign[i - 1][d], inst.customer(i).package_weight_kg);
            p.add_row(format!("drone_capacity_{i}_{d}"), e, Relation::Le, inst.drones[d].capacity_kg);
        }
    }
    for i in 1..=n {
        for d in 0..drones {
            let e = LinExpr::new().term(drone_assign[i - 1][d], inst.roundtrip_km(i));
            p.add_row(format!("drone_trip_{i}_{d}"), e, Relation::Le, inst.drones[d].trip_distance_km);
        }
    }
    if rules.daily_limits {
        for d in 0..drones {
            let mut e = LinExpr::new();
            for i in 1..=n {
                e.add_term(drone_assign[i - 1][d], inst.roundtrip_km(i));
            }
            p.add_row(format!("drone_daily_{d}"), e, Relation::Le, inst.drones[d].daily_distance_km);
        }
        for t in 0..trucks {
            let mut dist = LinExpr::new();
            let mut time = LinExpr::new();
            for a in 0..=n {
                for b in 0..=n {
                    if a != b {
                        dist.add_term(arc[t][a][b], inst.distance(a, b));
                        time.add_term(arc[t][a][b], inst.truck_arc_hours(t, a, b));
                    }
                }
            }
            p.add_row(format!("truck_daily_{t}"), dist, Relation::Le, inst.trucks[t].daily_distance_km);
            p.add_row(format!("truck_hours_{t}"), time, Relation::Le, inst.trucks[t].daily_time_h);
        }
    }
    for i in 0..n {
        let mut e = LinExpr::new();
        for t in 0..trucks {
            e.add_term(truck_assign[i][t], 1.0);
        }
        for d in 0..drones {
            e.add_term(drone_assign[i][d], 1.0);
        }
        p.add_row(format!("allocate_{}", i + 1), e, Relation::Eq, 1.0);
    }
    for t in 0..trucks {
        let mut out = LinExpr::new();
        let mut back = LinExpr::new();
        for i in 1..=n {
            out.add_term(arc[t][0][i], 1.0);
            back.add_term(arc[t][i][0], 1.0);
        }
        p.add_row(format!("depot_out_{t}"), out, Relation::Le, 1.0);
        p.add_row(format!("depot_in_{t}"), back, Relation::Le, 1.0);
        for i in 1..=n {
            let mut into = LinExpr::new();
            let mut from = LinExpr::new();
            for a in 0..=n {
                if a != i {
                    into.add_term(arc[t][a][i], 1.0);
                    from.add_term(arc[t][i][a], 1.0);
                }
            }
            into.add_term(truck_assign[i - 1][t], -1.0);
            from.add_term(truck_assign[i - 1][t], -1.0);
            p.add_row(format!("arrive_{i}_{t}"), into, Relation::Eq, 0.0);
            p.add_row(format!("depart_{i}_{t}"), from, Relation::Eq, 0.0);
        }
        for i in 1..=n {
            for j in 1..=n {
                if i != j {
                    let e = LinExpr::new()
                        .term(truck_order[i - 1][t], 1.0)
                        .term(truck_order[j - 1][t], -1.0)
                        .term(arc[t][i][j], nf);
                    p.add_row(format!("subtour_{i}_{j}_{t}"), e, Relation::Le, nf - 1.0);
                }
            }
        }
    }

    let vars = FirstStageVars { truck_used, drone_used, arc, truck_assign, drone_assign, truck_order };
    if rules.time_windows && inst.has_time_windows() {
        add_first_stage_windows(p, inst, &vars);
    }
    vars
}

fn same_truck(inst: &Instance, a: usize, b: usize) -> bool {
    let mut x = inst.trucks[a].clone();
    x.id = inst.trucks[b].id;
    x == inst.trucks[b]
}

/// Same spec and, when `scenarios` is given, the same grounding and breakdown columns.
fn same_drone(inst: &Instance, scenarios: Option<&ScenarioSpace>, a: usize, b: usize) -> bool {
    let mut x = inst.drones[a].clone();
    x.id = inst.drones[b].id;
    x == inst.drones[b]
        && scenarios.map_or(true, |s| {
            s.takeoff.iter().all(|w| w.grounded[a] == w.grounded[b])
                && s.breakdown.iter().all(|l| l.breaks.iter().all(|row| row[a] == row[b]))
        })
}

/// Splits `0..count` into maximal runs of consecutive interchangeable vehicles.
fn runs(count: usize, same: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for v in 1..=count {
        if v == count || !same(v - 1, v) {
            out.push((start, v));
            start = v;
        }
    }
    out
}

/// Symmetry breaking inside each run of interchangeable vehicles: reservations
/// are taken in index order and customer `i` may only use the first `i`
/// vehicles of a run. Some optimal plan always survives (relabel the vehicles
/// of a run by their lowest-numbered customer).
pub(crate) fn add_symmetry_breaking(
    p: &mut MilpProblem,
    inst: &Instance,
    v: &FirstStageVars,
    scenarios: Option<&ScenarioSpace>,
) {
    let n = inst.num_customers();
    let groups = [
        (runs(inst.num_trucks(), |a, b| same_truck(inst, a, b)), &v.truck_used, &v.truck_assign, "truck"),
        (runs(inst.num_drones(), |a, b| same_drone(inst, scenarios, a, b)), &v.drone_used, &v.drone_assign, "drone"),
    ];
    for (runs, used, assign, kind) in groups {
        for (a, b) in runs {
            for k in a + 1..b {
                let e = LinExpr::new().term(used[k], 1.0).term(used[k - 1], -1.0);
                p.add_row(format!("{kind}_symmetry_{k}"), e, Relation::Le, 0.0);
            }
            for i in 1..=n {
                for k in (a + i).min(b)..b {
                    p.upper[assign[i - 1][k].0] = 0.0;
                }
            }
        }
    }
}

/// Truck ordering of morning before afternoon customers and the morning and
/// afternoon travel-time limits for trucks and drones.
fn add_first_stage_windows(p: &mut MilpProblem, inst: &Instance, v: &FirstStageVars) {
    let n = inst.num_customers();
    let delta = big_m(inst);
    let morning: Vec<usize> = inst.customers_in(WindowClass::Morning).collect();
    let afternoon: Vec<usize> = inst.customers_in(WindowClass::Afternoon).collect();
    let lm = inst.morning_limit_h.unwrap_or(f64::INFINITY);
    let la = inst.afternoon_limit_h.unwrap_or(f64::INFINITY);
    for t in 0..inst.num_trucks() {
        for &i in &morning {
            for &j in &afternoon {
                // Active only when both customers ride the same truck.
                let e = LinExpr::new()
                    .term(v.truck_order[i - 1][t], 1.0)
                    .term(v.truck_order[j - 1][t], -1.0)
                    .term(v.truck_assign[i - 1][t], delta)
                    .term(v.truck_assign[j - 1][t], delta);
                p.add_row(format!("truck_window_order_{i}_{j}_{t}"), e, Relation::Le, 2.0 * delta);
            }
        }
    }
    for d in 0..inst.num_drones() {
        for (set, limit, name) in [(&morning, lm, "morning"), (&afternoon, la, "afternoon")] {
            let mut e = LinExpr::new();
            for &i in set.iter() {
                let hours = inst.drone_roundtrip_hours(d, i).unwrap_or(f64::INFINITY);
                e.add_term(v.drone_assign[i - 1][d], hours);
            }
            if !e.terms.is_empty() {
                p.add_row(format!("drone_{name}_hours_{d}"), e, Relation::Le, limit);
            }
        }
    }
    for t in 0..inst.num_trucks() {
        let mut e = LinExpr::new();
        for a in 0..=n {
            for &m in &morning {
                if a != m {
                    e.add_term(v.arc[t][a][m], inst.truck_arc_hours(t, a, m));
                }
            }
        }
        if !e.terms.is_empty() {
            p.add_row(format!("truck_morning_hours_{t}"), e, Relation::Le, lm);
        }
        let mut e = LinExpr::new();
        for i in 1..=n {
            for &b in afternoon.iter().chain(std::iter::once(&0)) {
                if i != b {
                    e.add_term(v.arc[t][i][b], inst.truck_arc_hours(t, i, b));
                }
            }
        }
        p.add_row(format!("truck_afternoon_hours_{t}"), e, Relation::Le, la);
    }
}

/// Serving orders of drone `d`: assigned customers get distinct orders in `1..=count`.
pub(crate) fn add_order_block(p: &mut MilpProblem, inst: &Instance, d: usize, drone_assign: &[Vec<VarId>]) -> OrderVars {
    let n = inst.num_customers();
    let nf = n as f64;
    let delta = big_m(inst);
    let order: Vec<VarId> = (1..=n).map(|i| p.add_integer(format!("U_{i}_{d}"), 0.0, nf, 0.0)).collect();
    for i in 0..n {
        let e = LinExpr::new().term(drone_assign[i][d], 1.0).term(order[i], -1.0);
        p.add_row(format!("order_positive_{}_{d}", i + 1), e, Relation::Le, 0.0);
    }
    for j in 0..n {
        let mut e = LinExpr::new().term(order[j], 1.0);
        for i in 0..n {
            e.add_term(drone_assign[i][d], -1.0);
        }
        p.add_row(format!("order_range_{}_{d}", j + 1), e, Relation::Le, 0.0);
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let m = p.add_binary(format!("M_{}_{}_{d}", i + 1, j + 1), 0.0);
            let e = LinExpr::new()
                .term(order[i], 1.0)
                .term(order[j], -1.0)
                .term(m, -delta)
                .term(drone_assign[i][d], 1.0);
            p.add_row(format!("order_distinct_a_{}_{}_{d}", i + 1, j + 1), e, Relation::Le, 0.0);
            let e = LinExpr::new()
                .term(order[i], 1.0)
                .term(order[j], -1.0)
                .term(drone_assign[i][d], -1.0)
                .term(m, -delta);
            p.add_row(format!("order_distinct_b_{}_{}_{d}", i + 1, j + 1), e, Relation::Ge, -delta);
        }
    }
    if inst.has_time_windows() {
        let afternoon: Vec<usize> = inst.customers_in(WindowClass::Afternoon).collect();
        for i in inst.customers_in(WindowClass::Morning) {
            for &j in &afternoon {
                let e = LinExpr::new()
                    .term(order[i - 1], 1.0)
                    .term(order[j - 1], -1.0)
                    .term(drone_assign[i - 1][d], delta)
                    .term(drone_assign[j - 1][d], delta);
                p.add_row(format!("drone_window_order_{i}_{j}_{d}"), e, Relation::Le, 2.0 * delta);
            }
        }
    }
    OrderVars { order }
}

#[derive(Debug)]
pub(crate) struct BreakdownBlock {
    /// `[customer - 1]`
    pub stranded: Vec<VarId>,
    pub repair: VarId,
}

/// Breakdown penalties and the repair indicator of one drone in one flying
/// breakdown scenario, weighted by `weight` (the scenario probability mass).
pub(crate) fn add_breakdown_block(
    p: &mut MilpProblem,
    inst: &Instance,
    drone: usize,
    breaks: impl Fn(usize) -> bool,
    drone_assign: &[Vec<VarId>],
    order: &OrderVars,
    weight: f64,
    label: &str,
) -> BreakdownBlock {
    let n = inst.num_customers();
    let delta = big_m(inst);
    let stranded: Vec<VarId> = (1..=n)
        .map(|i| p.add_binary(format!("Za_{i}_{drone}_{label}"), weight * inst.costs.penalty))
        .collect();
    let repair = p.add_binary(format!("Zm_{drone}_{label}"), weight * inst.costs.repair);
    for i in 1..=n {
        if breaks(i) {
            let e = LinExpr::new().term(stranded[i - 1], 1.0).term(drone_assign[i - 1][drone], -1.0);
            p.add_row(format!("break_{i}_{drone}_{label}"), e, Relation::Ge, 0.0);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let e = LinExpr::new()
                .term(order.order[i], 1.0)
                .term(order.order[j], -1.0)
                .term(stranded[j], delta)
                .term(stranded[i], -delta);
            p.add_row(format!("suffix_{}_{}_{drone}_{label}", i + 1, j + 1), e, Relation::Le, delta);
        }
    }
    for i in 0..n {
        let e = LinExpr::new().term(repair, 1.0).term(stranded[i], -1.0);
        p.add_row(format!("repair_{}_{drone}_{label}", i + 1), e, Relation::Ge, 0.0);
    }
    BreakdownBlock { stranded, repair }
}

fn on(values: &[f64], v: VarId) -> bool {
    values[v.0] > 0.5
}

/// Reads trucks, drones and serving orders out of a solution vector. Drones
/// without order variables serve their customers by window class, then id.
pub(crate) fn decode_first_stage(
    values: &[f64],
    inst: &Instance,
    vars: &FirstStageVars,
    orders: &[Option<Vec<VarId>>],
) -> FirstStagePlan {
    let n = inst.num_customers();
    let mut plan = FirstStagePlan::empty(inst.num_trucks(), inst.num_drones());
    for t in 0..inst.num_trucks() {
        plan.truck_used[t] = on(values, vars.truck_used[t]);
        let mut route = Vec::new();
        let mut at = 0;
        while route.len() <= n {
            let Some(next) = (0..=n).find(|&b| b != at && on(values, vars.arc[t][at][b])) else { break };
            if next == 0 {
                break;
            }
            route.push(next);
            at = next;
        }
        plan.truck_routes[t] = route;
    }
    for d in 0..inst.num_drones() {
        plan.drone_used[d] = on(values, vars.drone_used[d]);
        let mut served: Vec<usize> = (1..=n).filter(|&i| on(values, vars.drone_assign[i - 1][d])).collect();
        match &orders[d] {
            Some(u) => served.sort_by(|&a, &b| values[u[a - 1].0].total_cmp(&values[u[b - 1].0]).then(a.cmp(&b))),
            None => served.sort_by_key(|&c| (window_rank(inst.customer(c).window_class), c)),
        }
        plan.drone_orders[d] = served;
    }
    plan
}

fn window_rank(class: WindowClass) -> u8 {
    match class {
        WindowClass::Morning => 0,
        WindowClass::None => 1,
        WindowClass::Afternoon => 2,
    }
}
