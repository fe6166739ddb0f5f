//! Monte Carlo replay of a plan and side-by-side comparison of planners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{solve_evf, solve_pdstsp, BaselineError, EvfVariant};
use crate::instance::Instance;
use crate::milp::{MilpSolver, SolveLimits};
use crate::model::{
    check_first_stage, check_structure, evaluate_plan, expected_cost, realized_payment, solve_monolith, CostBreakdown,
    FirstStagePlan, InfeasiblePlan, ModelError, MonolithOptions, Payment,
};
use crate::scenario::ScenarioSpace;

/// Draws per random stream. Fixed so results do not depend on the thread count.
pub const CHUNK: u64 = 4096;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Infeasible(#[from] InfeasiblePlan),
    #[error("need at least one draw")]
    NoDraws,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub draws: u64,
    pub seed: u64,
    pub mean: f64,
    /// Sample standard deviation (zero for a single draw).
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
    pub category_means: Payment,
    /// How often each `(takeoff, breakdown)` pair was drawn.
    pub scenario_counts: Vec<Vec<u64>>,
}

impl SimulationSummary {
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (k, c) in self.histogram.counts.iter().enumerate() {
            let lo = self.histogram.lo + k as f64 * self.histogram.width;
            out.push_str(&format!("{:.6},{:.6},{}\n", lo, lo + self.histogram.width, c));
        }
        out
    }
}

fn pick(rng: &mut ChaCha8Rng, probs: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, p) in probs.enumerate() {
        acc += p;
        if p > 0.0 {
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    // Rounding left a sliver above the cumulative sum.
    last
}

/// Samples `(takeoff, breakdown)` pairs i.i.d. and replays the plan on each.
/// Stream `k` of the seeded generator produces draws `k * CHUNK ..`.
pub fn simulate(
    plan: &FirstStagePlan,
    instance: &Instance,
    scenarios: &ScenarioSpace,
    draws: u64,
    seed: u64,
) -> Result<SimulationSummary, SimulateError> {
    simulate_checked(plan, instance, scenarios, draws, seed, true)
}

/// As [`simulate`], checking only structural rules (for plans that ignore daily limits).
pub fn simulate_structural(
    plan: &FirstStagePlan,
    instance: &Instance,
    scenarios: &ScenarioSpace,
    draws: u64,
    seed: u64,
) -> Result<SimulationSummary, SimulateError> {
    simulate_checked(plan, instance, scenarios, draws, seed, false)
}

fn simulate_checked(
    plan: &FirstStagePlan,
    instance: &Instance,
    scenarios: &ScenarioSpace,
    draws: u64,
    seed: u64,
    full: bool,
) -> Result<SimulationSummary, SimulateError> {
    if draws == 0 {
        return Err(SimulateError::NoDraws);
    }
    if full {
        check_first_stage(plan, instance)?;
    } else {
        check_structure(plan, instance)?;
    }
    let nw = scenarios.takeoff.len();
    let nl = scenarios.breakdown.len();
    let streams = draws.div_ceil(CHUNK);
    let counts = (0..streams)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let n = CHUNK.min(draws - k * CHUNK);
            let mut c = vec![0u64; nw * nl];
            for _ in 0..n {
                let w = pick(&mut rng, scenarios.takeoff.iter().map(|w| w.probability));
                let l = pick(&mut rng, scenarios.breakdown.iter().map(|l| l.probability));
                c[w * nl + l] += 1;
            }
            c
        })
        .reduce(
            || vec![0u64; nw * nl],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let pays: Vec<Payment> = (0..nw * nl)
        .map(|k| realized_payment(plan, instance, &scenarios.takeoff[k / nl], &scenarios.breakdown[k % nl]))
        .collect();
    let nf = draws as f64;
    let mut mean = 0.0;
    let mut cat = Payment::default();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let w = c as f64 / nf;
        let p = &pays[k];
        mean += w * p.total();
        cat.fixed += w * p.fixed;
        cat.drone_travel += w * p.drone_travel;
        cat.penalty += w * p.penalty;
        cat.repair += w * p.repair;
        min = min.min(p.total());
        max = max.max(p.total());
    }
    let ss: f64 = counts.iter().zip(&pays).map(|(&c, p)| c as f64 * (p.total() - mean).powi(2)).sum();
    let stddev = if draws > 1 { (ss / (nf - 1.0)).sqrt() } else { 0.0 };
    let width = if max > min { (max - min) / HISTOGRAM_BINS as f64 } else { 1.0 };
    let mut bins = vec![0u64; HISTOGRAM_BINS];
    for (&c, p) in counts.iter().zip(&pays) {
        if c > 0 {
            let b = (((p.total() - min) / width) as usize).min(HISTOGRAM_BINS - 1);
            bins[b] += c;
        }
    }
    Ok(SimulationSummary {
        draws,
        seed,
        mean,
        stddev,
        min,
        max,
        histogram: Histogram { lo: min, width, counts: bins },
        category_means: cat,
        scenario_counts: counts.chunks(nl.max(1)).map(|r| r.to_vec()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub plan: FirstStagePlan,
    /// Exact expected payment under the true scenario space.
    pub expected: CostBreakdown,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub methods: Vec<MethodResult>,
    /// Method names from cheapest to most expensive.
    pub ranking: Vec<String>,
    /// Expected payment of each method minus the cheapest one.
    pub gaps: Vec<(String, f64)>,
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("gadop: {0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Baseline(#[from] BaselineError),
}

/// Solves GADOP, EVF and PDSTSP and evaluates every plan under `scenarios`.
pub fn compare_methods(
    instance: &Instance,
    scenarios: &ScenarioSpace,
    solver: &dyn MilpSolver,
    limits: &SolveLimits,
) -> Result<ComparisonReport, CompareError> {
    let gadop = solve_monolith(instance, scenarios, &MonolithOptions::default(), solver, limits)?;
    let evf = solve_evf(instance, scenarios, EvfVariant::Corrected, solver, limits)?;
    let pdstsp = solve_pdstsp(instance, scenarios, solver, limits)?;
    let methods = vec![
        MethodResult {
            method: "gadop".into(),
            expected: evaluate_plan(&gadop.decoded.plan, instance, scenarios).map_err(ModelError::from)?,
            plan: gadop.decoded.plan,
            wall_time_s: gadop.wall_time_s,
        },
        MethodResult {
            method: "evf".into(),
            expected: evaluate_plan(&evf.plan, instance, scenarios).map_err(ModelError::from)?,
            plan: evf.plan,
            wall_time_s: evf.wall_time_s,
        },
        MethodResult {
            method: "pdstsp".into(),
            expected: expected_cost(&pdstsp.plan, instance, scenarios).map_err(ModelError::from)?,
            plan: pdstsp.plan,
            wall_time_s: pdstsp.wall_time_s,
        },
    ];
    let mut order: Vec<usize> = (0..methods.len()).collect();
    order.sort_by(|&a, &b| methods[a].expected.total.total_cmp(&methods[b].expected.total).then(a.cmp(&b)));
    let best = methods[order[0]].expected.total;
    Ok(ComparisonReport {
        ranking: order.iter().map(|&k| methods[k].method.clone()).collect(),
        gaps: methods.iter().map(|m| (m.method.clone(), m.expected.total - best)).collect(),
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::line_instance;
    use crate::scenario::two_point_spaces;

    #[test]
    fn deterministic_has_zero_variance() {
        let inst = line_instance(3);
        let s = ScenarioSpace::deterministic(3, 1);
        let plan = FirstStagePlan::from_assignments(vec![vec![3]], vec![vec![1, 2]]);
        let r = simulate(&plan, &inst, &s, 1000, 7).unwrap();
        assert_eq!(r.stddev, 0.0);
        let exact = evaluate_plan(&plan, &inst, &s).unwrap().total;
        assert!((r.mean - exact).abs() < 1e-9);
        assert_eq!(r.histogram.counts.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn seeded_runs_repeat() {
        let inst = line_instance(3);
        let s = two_point_spaces(0.1, 0.2, 0.5, &inst).unwrap();
        let plan = FirstStagePlan::from_assignments(vec![vec![3]], vec![vec![1, 2]]);
        let a = simulate(&plan, &inst, &s, 10_000, 11).unwrap();
        let b = simulate(&plan, &inst, &s, 10_000, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate(&plan, &inst, &s, 10_000, 12).unwrap();
        assert_ne!(a.scenario_counts, c.scenario_counts);
        assert!(a.histogram_csv().starts_with("bin_lo,bin_hi,count\n"));
    }

    #[test]
    fn rejects_infeasible_plan() {
        let inst = line_instance(2);
        let plan = FirstStagePlan::from_assignments(vec![vec![1]], vec![vec![]]);
        let err = simulate(&plan, &inst, &ScenarioSpace::deterministic(2, 1), 10, 1).unwrap_err();
        assert!(err.to_string().contains("allocation"));
    }
}
