//! Exhaustive ground truth for tiny instances. Shares no cost or feasibility
//! code with the model module.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, InvalidInput, WindowClass};
use crate::lshape::{self, LShapeOptions};
use crate::milp::{MilpSolver, SolveLimits};
use crate::model::{solve_monolith, FirstStagePlan, MonolithOptions};
use crate::scenario::ScenarioSpace;

const TOL: f64 = 1e-6;
/// Improvements smaller than this keep the earlier candidate.
const TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCaps {
    pub max_customers: usize,
    pub max_trucks: usize,
    pub max_drones: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        Self { max_customers: 7, max_trucks: 2, max_drones: 3 }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{what} = {value} exceeds the oracle cap of {cap}")]
    CapExceeded { what: &'static str, value: usize, cap: usize },
    #[error(transparent)]
    Invalid(#[from] InvalidInput),
    #[error("no feasible plan exists")]
    NoFeasiblePlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub plan: FirstStagePlan,
    pub objective: f64,
    pub assignments_checked: u64,
}

/// A scenario space read against one instance.
struct Scenarios<'a> {
    inst: &'a Instance,
    space: &'a ScenarioSpace,
}

impl Scenarios<'_> {
    fn fly_mass(&self, d: usize) -> f64 {
        self.space.takeoff.iter().filter(|w| !w.grounded[d]).map(|w| w.probability).sum()
    }

    /// Expected breakdown penalty and repair of drone `d` serving `seq` given it flies.
    fn breakdown_cost(&self, d: usize, seq: &[usize]) -> f64 {
        let mut total = 0.0;
        for lam in &self.space.breakdown {
            let mut stranded = 0.0;
            let mut broken = false;
            for &c in seq {
                broken |= lam.breaks[c - 1][d];
                if broken {
                    stranded += 1.0;
                }
            }
            if broken {
                total += lam.probability * (stranded * self.inst.costs.penalty + self.inst.costs.repair);
            }
        }
        total
    }
}

fn class_of(inst: &Instance, c: usize) -> WindowClass {
    inst.customers[c - 1].window_class
}

fn windows_ordered(inst: &Instance, seq: &[usize]) -> bool {
    // No morning customer may follow an afternoon one.
    let last_morning = seq.iter().rposition(|&c| class_of(inst, c) == WindowClass::Morning);
    let first_afternoon = seq.iter().position(|&c| class_of(inst, c) == WindowClass::Afternoon);
    match (last_morning, first_afternoon) {
        (Some(m), Some(a)) => m < a,
        _ => true,
    }
}

fn arc_hours(inst: &Instance, t: usize, a: usize, b: usize) -> f64 {
    let spec = &inst.trucks[t];
    inst.distances_km[a][b] / spec.speed_kmh.on_arc(a, b) + spec.dropoff_time_h
}

/// Route cost of `seq` on truck `t`, or `None` if a limit is broken.
fn truck_route(inst: &Instance, t: usize, seq: &[usize]) -> Option<f64> {
    let spec = &inst.trucks[t];
    let mut stops = Vec::with_capacity(seq.len() + 2);
    stops.push(0);
    stops.extend_from_slice(seq);
    stops.push(0);
    let (mut cost, mut km, mut hours, mut morning, mut afternoon) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for w in stops.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = arc_hours(inst, t, a, b);
        cost += inst.costs.truck_arc_cost[a][b];
        km += inst.distances_km[a][b];
        hours += h;
        if b != 0 && class_of(inst, b) == WindowClass::Morning {
            morning += h;
        }
        if a != 0 && (b == 0 || class_of(inst, b) == WindowClass::Afternoon) {
            afternoon += h;
        }
    }
    let windows = inst.has_time_windows();
    let ok = km <= spec.daily_distance_km + TOL
        && hours <= spec.daily_time_h + TOL
        && (!windows
            || (windows_ordered(inst, seq)
                && morning <= inst.morning_limit_h.unwrap_or(f64::INFINITY) + TOL
                && afternoon <= inst.afternoon_limit_h.unwrap_or(f64::INFINITY) + TOL));
    ok.then_some(cost)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else { return false };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

fn members(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| i + 1).collect()
}

/// Cheapest sequence over all permutations of `set` (lexicographically first on ties).
fn best_sequence(set: &[usize], mut cost: impl FnMut(&[usize]) -> Option<f64>) -> Option<(f64, Vec<usize>)> {
    let mut seq = set.to_vec();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        if let Some(c) = cost(&seq) {
            if best.as_ref().map_or(true, |(b, _)| c < b - TIE) {
                best = Some((c, seq.clone()));
            }
        }
        if !next_permutation(&mut seq) {
            return best;
        }
    }
}

/// Best cost and sequence for every vehicle and customer subset; `None` when infeasible.
type Table = Vec<Vec<Option<(f64, Vec<usize>)>>>;

fn truck_table(inst: &Instance) -> Table {
    let n = inst.customers.len();
    (0..inst.trucks.len())
        .map(|t| {
            (0..1usize << n)
                .into_par_iter()
                .map(|mask| {
                    if mask == 0 {
                        return Some((0.0, Vec::new()));
                    }
                    let set = members(mask, n);
                    let load: f64 = set.iter().map(|&c| inst.customers[c - 1].package_weight_kg).sum();
                    if load > inst.trucks[t].capacity_kg + TOL {
                        return None;
                    }
                    best_sequence(&set, |seq| truck_route(inst, t, seq))
                        .map(|(c, seq)| (c + inst.trucks[t].initial_cost, seq))
                })
                .collect()
        })
        .collect()
}

fn drone_table(inst: &Instance, sc: &Scenarios) -> Table {
    let n = inst.customers.len();
    let windows = inst.has_time_windows();
    (0..inst.drones.len())
        .map(|d| {
            let spec = &inst.drones[d];
            let fly = sc.fly_mass(d);
            let hours = |c: usize| {
                let s = spec.speed_kmh.as_ref().expect("validated: speed present with windows");
                inst.distances_km[0][c] / s.on_arc(0, c) + inst.distances_km[c][0] / s.on_arc(c, 0)
            };
            (0..1usize << n)
                .into_par_iter()
                .map(|mask| {
                    if mask == 0 {
                        return Some((0.0, Vec::new()));
                    }
                    let set = members(mask, n);
                    let trip = |c: usize| inst.distances_km[0][c] + inst.distances_km[c][0];
                    let eligible = set.iter().all(|&c| {
                        inst.customers[c - 1].package_weight_kg <= spec.capacity_kg + TOL
                            && trip(c) <= spec.trip_distance_km + TOL
                    });
                    let km: f64 = set.iter().map(|&c| trip(c)).sum();
                    if !eligible || km > spec.daily_distance_km + TOL {
                        return None;
                    }
                    if windows {
                        let sum = |cl: WindowClass| -> f64 {
                            set.iter().filter(|&&c| class_of(inst, c) == cl).map(|&c| hours(c)).sum()
                        };
                        if sum(WindowClass::Morning) > inst.morning_limit_h.unwrap_or(f64::INFINITY) + TOL
                            || sum(WindowClass::Afternoon) > inst.afternoon_limit_h.unwrap_or(f64::INFINITY) + TOL
                        {
                            return None;
                        }
                    }
                    let per_customer: f64 = set
                        .iter()
                        .map(|&c| fly * inst.costs.drone_roundtrip_cost[c - 1] + (1.0 - fly) * inst.costs.penalty)
                        .sum();
                    let fixed = spec.initial_cost + per_customer;
                    best_sequence(&set, |seq| {
                        (!windows || windows_ordered(inst, seq)).then(|| fly * sc.breakdown_cost(d, seq))
                    })
                    .map(|(c, seq)| (fixed + c, seq))
                })
                .collect()
        })
        .collect()
}

fn check_caps(inst: &Instance, caps: &OracleCaps) -> Result<(), OracleError> {
    for (what, value, cap) in [
        ("customers", inst.customers.len(), caps.max_customers),
        ("trucks", inst.trucks.len(), caps.max_trucks),
        ("drones", inst.drones.len(), caps.max_drones),
    ] {
        if value > cap {
            return Err(OracleError::CapExceeded { what, value, cap });
        }
    }
    Ok(())
}

fn check_valid(inst: &Instance, scenarios: &ScenarioSpace) -> Result<(), OracleError> {
    let mut violations = inst.validate();
    violations.extend(scenarios.validate(inst.customers.len(), inst.drones.len()));
    if violations.is_empty() {
        Ok(())
    } else {
        Err(InvalidInput { violations }.into())
    }
}

/// Global optimum by enumerating every assignment of customers to vehicles and,
/// per vehicle, every visiting or serving order.
pub fn solve_exhaustive(instance: &Instance, scenarios: &ScenarioSpace, caps: &OracleCaps) -> Result<OracleResult, OracleError> {
    check_caps(instance, caps)?;
    check_valid(instance, scenarios)?;
    let n = instance.customers.len();
    let trucks = instance.trucks.len();
    let sc = Scenarios { inst: instance, space: scenarios };
    let mut tables = truck_table(instance);
    tables.extend(drone_table(instance, &sc));
    let vehicles = tables.len();
    if n > 0 && vehicles == 0 {
        return Err(OracleError::NoFeasiblePlan);
    }

    // Shard on the vehicle of the first customer; each shard walks its suffixes in
    // lexicographic order so the first strictly better assignment wins.
    let shards = if n == 0 { 1 } else { vehicles };
    let rest = n.saturating_sub(1);
    let per_shard = vehicles.pow(rest as u32) as u64;
    let best: Vec<Option<(f64, Vec<usize>)>> = (0..shards)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut assign = vec![0usize; n];
            if n > 0 {
                assign[0] = first;
            }
            for code in 0..per_shard {
                let mut x = code;
                for slot in assign.iter_mut().skip(1).rev() {
                    *slot = (x % vehicles as u64) as usize;
                    x /= vehicles as u64;
                }
                let mut masks = vec![0usize; vehicles];
                for (i, &v) in assign.iter().enumerate() {
                    masks[v] |= 1 << i;
                }
                let mut total = 0.0;
                let mut feasible = true;
                for (v, &mask) in masks.iter().enumerate() {
                    match &tables[v][mask] {
                        Some((c, _)) => total += c,
                        None => {
                            feasible = false;
                            break;
                        }
                    }
                }
                if feasible && best.as_ref().map_or(true, |(b, _)| total < b - TIE) {
                    best = Some((total, assign.clone()));
                }
            }
            best
        })
        .collect();
    let mut winner: Option<(f64, Vec<usize>)> = None;
    for candidate in best.into_iter().flatten() {
        if winner.as_ref().map_or(true, |(b, _)| candidate.0 < b - TIE) {
            winner = Some(candidate);
        }
    }
    let (objective, assign) = winner.ok_or(OracleError::NoFeasiblePlan)?;
    let mut masks = vec![0usize; vehicles];
    for (i, &v) in assign.iter().enumerate() {
        masks[v] |= 1 << i;
    }
    let seq = |v: usize| tables[v][masks[v]].as_ref().expect("feasible").1.clone();
    let plan = FirstStagePlan::from_assignments(
        (0..trucks).map(seq).collect(),
        (trucks..vehicles).map(seq).collect(),
    );
    Ok(OracleResult { plan, objective, assignments_checked: shards as u64 * per_shard })
}

/// Expected payment of `plan` by expanding every `(takeoff, breakdown)` pair;
/// `None` if the plan breaks any first-stage rule.
pub fn oracle_cost(plan: &FirstStagePlan, instance: &Instance, scenarios: &ScenarioSpace) -> Option<f64> {
    let n = instance.customers.len();
    if plan.truck_routes.len() != instance.trucks.len() || plan.drone_orders.len() != instance.drones.len() {
        return None;
    }
    let mut count = vec![0; n + 1];
    for &c in plan.truck_routes.iter().chain(&plan.drone_orders).flatten() {
        if c == 0 || c > n {
            return None;
        }
        count[c] += 1;
    }
    if count[1..].iter().any(|&k| k != 1) {
        return None;
    }
    let mut fixed = 0.0;
    for (t, route) in plan.truck_routes.iter().enumerate() {
        if plan.truck_used[t] {
            fixed += instance.trucks[t].initial_cost;
        } else if !route.is_empty() {
            return None;
        }
        let load: f64 = route.iter().map(|&c| instance.customers[c - 1].package_weight_kg).sum();
        if load > instance.trucks[t].capacity_kg + TOL {
            return None;
        }
        if !route.is_empty() {
            fixed += truck_route(instance, t, route)?;
        }
    }
    for (d, order) in plan.drone_orders.iter().enumerate() {
        if plan.drone_used[d] {
            fixed += instance.drones[d].initial_cost;
        } else if !order.is_empty() {
            return None;
        }
    }
    drone_sequences_feasible(instance, plan)?;
    let mut expected = 0.0;
    for w in &scenarios.takeoff {
        for lam in &scenarios.breakdown {
            let mut pay = 0.0;
            for (d, order) in plan.drone_orders.iter().enumerate() {
                if w.grounded[d] {
                    pay += instance.costs.penalty * order.len() as f64;
                    continue;
                }
                let mut broken = false;
                for &c in order {
                    pay += instance.costs.drone_roundtrip_cost[c - 1];
                    broken |= lam.breaks[c - 1][d];
                    if broken {
                        pay += instance.costs.penalty;
                    }
                }
                if broken {
                    pay += instance.costs.repair;
                }
            }
            expected += w.probability * lam.probability * pay;
        }
    }
    Some(fixed + expected)
}

fn drone_sequences_feasible(inst: &Instance, plan: &FirstStagePlan) -> Option<()> {
    let windows = inst.has_time_windows();
    for (d, order) in plan.drone_orders.iter().enumerate() {
        let spec = &inst.drones[d];
        let mut km = 0.0;
        let (mut morning, mut afternoon) = (0.0, 0.0);
        for &c in order {
            let trip = inst.distances_km[0][c] + inst.distances_km[c][0];
            if inst.customers[c - 1].package_weight_kg > spec.capacity_kg + TOL || trip > spec.trip_distance_km + TOL {
                return None;
            }
            km += trip;
            if windows {
                let s = spec.speed_kmh.as_ref()?;
                let h = inst.distances_km[0][c] / s.on_arc(0, c) + inst.distances_km[c][0] / s.on_arc(c, 0);
                match class_of(inst, c) {
                    WindowClass::Morning => morning += h,
                    WindowClass::Afternoon => afternoon += h,
                    WindowClass::None => {}
                }
            }
        }
        if km > spec.daily_distance_km + TOL {
            return None;
        }
        if windows
            && (!windows_ordered(inst, order)
                || morning > inst.morning_limit_h.unwrap_or(f64::INFINITY) + TOL
                || afternoon > inst.afternoon_limit_h.unwrap_or(f64::INFINITY) + TOL)
        {
            return None;
        }
    }
    Some(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub left: String,
    pub right: String,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckReport {
    pub oracle: f64,
    pub monolith: Option<f64>,
    pub decomposed: Option<f64>,
    /// Solver failures, by method.
    pub errors: Vec<(String, String)>,
    /// Pairs whose objectives differ by more than 1e-6.
    pub flagged: Vec<Gap>,
}

impl CrossCheckReport {
    pub fn agrees(&self) -> bool {
        self.flagged.is_empty() && self.errors.is_empty()
    }
}

/// Solves with the oracle, the monolith and the decomposition and compares objectives.
pub fn cross_check(
    instance: &Instance,
    scenarios: &ScenarioSpace,
    solver: &dyn MilpSolver,
    limits: &SolveLimits,
) -> Result<CrossCheckReport, OracleError> {
    let oracle = solve_exhaustive(instance, scenarios, &OracleCaps::default())?;
    let mut errors = Vec::new();
    let monolith = match solve_monolith(instance, scenarios, &MonolithOptions::default(), solver, limits) {
        Ok(r) => Some(r.decoded.cost.total),
        Err(e) => {
            errors.push(("monolith".to_string(), e.to_string()));
            None
        }
    };
    let options = LShapeOptions { limits: limits.clone(), ..LShapeOptions::default() };
    let decomposed = match lshape::run(instance, scenarios, &options, solver) {
        Ok(r) => Some(r.cost.total),
        Err(e) => {
            errors.push(("decomposed".to_string(), e.to_string()));
            None
        }
    };
    let values = [("oracle", Some(oracle.objective)), ("monolith", monolith), ("decomposed", decomposed)];
    let mut flagged = Vec::new();
    for a in 0..values.len() {
        for b in a + 1..values.len() {
            if let ((l, Some(x)), (r, Some(y))) = (values[a], values[b]) {
                if (x - y).abs() > TOL {
                    flagged.push(Gap { left: l.to_string(), right: r.to_string(), gap: y - x });
                }
            }
        }
    }
    Ok(CrossCheckReport { oracle: oracle.objective, monolith, decomposed, errors, flagged })
}
