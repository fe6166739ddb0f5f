//! Fixed workloads shared by the benchmarks.

use gadop_core::generator::replicated_takeoff;
use gadop_core::milp::{LinExpr, MilpProblem, Relation};
use gadop_core::{generate, GeneratorConfig, Instance, ScenarioSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generated desk instance with the default scenario counts.
pub fn desk(customers: usize, seed: u64) -> (Instance, ScenarioSpace) {
    generate(&GeneratorConfig { customers, seed, ..GeneratorConfig::default() })
}

/// The speedup workload: a fixed instance whose takeoff distribution is
/// spread over `takeoff_scenarios` indices.
pub fn speedup(takeoff_scenarios: usize) -> (Instance, ScenarioSpace) {
    let cfg = GeneratorConfig { customers: 6, drones: 2, takeoff_scenarios: 1, breakdown_scenarios: 3, seed: 3, ..GeneratorConfig::default() };
    let (inst, mut sc) = generate(&cfg);
    sc.takeoff = replicated_takeoff(2, 0.1, takeoff_scenarios).expect("valid ground probability");
    (inst, sc)
}

/// Multi-row knapsack with `n` binaries and three capacity rows at half the total weight.
pub fn knapsack(n: usize, seed: u64) -> MilpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = MilpProblem::new();
    let x: Vec<_> = (0..n).map(|j| p.add_binary(format!("x{j}"), -rng.gen_range(1.0..20.0))).collect();
    for r in 0..3 {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0_f64).round()).collect();
        let cap = (w.iter().sum::<f64>() / 2.0).floor();
        let mut e = LinExpr::new();
        for (j, wj) in w.iter().enumerate() {
            e.add_term(x[j], *wj);
        }
        p.add_row(format!("cap{r}"), e, Relation::Le, cap);
    }
    p
}
