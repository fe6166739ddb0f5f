//! Seeded random instances at desk scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{default_cost_model, Customer, DroneSpec, Instance, Speed, TruckSpec, WindowClass};
use crate::scenario::{
    draw_independent_breakdowns, enumerate_takeoff, BreakdownScenario, ScenarioError, ScenarioSpace, TakeoffScenario,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub customers: usize,
    pub trucks: usize,
    pub drones: usize,
    pub takeoff_scenarios: usize,
    pub breakdown_scenarios: usize,
    /// Customers are placed uniformly in a disc of this radius around the depot.
    pub radius_km: f64,
    /// Chance that a drone breaks at a customer in each non-nominal breakdown scenario.
    pub pair_break_prob: f64,
    pub penalty: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            customers: 5,
            trucks: 1,
            drones: 2,
            takeoff_scenarios: 3,
            breakdown_scenarios: 3,
            radius_km: 8.0,
            pair_break_prob: 0.3,
            penalty: 20.0,
            seed: 0,
        }
    }
}

fn normalized(rng: &mut ChaCha8Rng, count: usize, nominal_weight: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..count).map(|k| rng.gen_range(0.2..1.0) + if k == 0 { nominal_weight } else { 0.0 }).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    w
}

/// Random instance and scenario space. Takeoff scenario 0 has every drone
/// flying and breakdown scenario 0 has no failures; both carry extra weight.
pub fn generate(config: &GeneratorConfig) -> (Instance, ScenarioSpace) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.customers;
    let mut coords = vec![[0.0, 0.0]];
    for _ in 0..n {
        let r = config.radius_km * rng.gen::<f64>().sqrt();
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        coords.push([r * a.cos(), r * a.sin()]);
    }
    let distances_km: Vec<Vec<f64>> = coords
        .iter()
        .map(|a| coords.iter().map(|b| (a[0] - b[0]).hypot(a[1] - b[1])).collect())
        .collect();
    let customers = (1..=n)
        .map(|id| Customer { id, package_weight_kg: 1.0, window_class: WindowClass::None })
        .collect();
    let trucks = (1..=config.trucks)
        .map(|id| TruckSpec {
            id,
            initial_cost: rng.gen_range(40.0..300.0_f64).round(),
            capacity_kg: 1060.0,
            daily_distance_km: 200.0,
            daily_time_h: 8.0,
            dropoff_time_h: 0.25,
            speed_kmh: Speed::Uniform(50.0),
        })
        .collect();
    let drones = (1..=config.drones)
        .map(|id| DroneSpec {
            id,
            initial_cost: rng.gen_range(5.0..50.0_f64).round(),
            capacity_kg: 2.0,
            daily_distance_km: 150.0,
            trip_distance_km: 15.0,
            speed_kmh: None,
        })
        .collect();
    let mut costs = default_cost_model(&distances_km);
    costs.penalty = config.penalty;
    let instance = Instance {
        customers,
        trucks,
        drones,
        distances_km,
        costs,
        morning_limit_h: None,
        afternoon_limit_h: None,
        coordinates: Some(coords),
    };

    let d = config.drones;
    let probs = normalized(&mut rng, config.takeoff_scenarios.max(1), 2.0);
    let takeoff = probs
        .into_iter()
        .enumerate()
        .map(|(k, probability)| {
            let grounded = if k == 0 { vec![false; d] } else { (0..d).map(|_| rng.gen_bool(0.5)).collect() };
            TakeoffScenario { grounded, probability }
        })
        .collect();
    let probs = normalized(&mut rng, config.breakdown_scenarios.max(1), 2.0);
    let breakdown = probs
        .into_iter()
        .enumerate()
        .map(|(k, probability)| {
            let breaks = if k == 0 {
                vec![vec![false; d]; n]
            } else {
                draw_independent_breakdowns(n, d, config.pair_break_prob, &mut rng)
            };
            BreakdownScenario { breaks, probability }
        })
        .collect();
    (instance, ScenarioSpace { takeoff, breakdown })
}

/// `count` takeoff scenarios cycling through the `2^drones` grounding patterns,
/// each pattern's probability split evenly over its copies. The distribution is
/// the same for every `count`; only the number of scenario indices changes.
pub fn replicated_takeoff(drones: usize, ground_prob: f64, count: usize) -> Result<Vec<TakeoffScenario>, ScenarioError> {
    let base = enumerate_takeoff(drones, ground_prob)?;
    let copies = |k: usize| (count + base.len() - 1 - k) / base.len();
    Ok((0..count.max(base.len()))
        .map(|k| {
            let b = &base[k % base.len()];
            TakeoffScenario { grounded: b.grounded.clone(), probability: b.probability / copies(k % base.len()) as f64 }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_and_reproducible() {
        for seed in 0..20 {
            let cfg = GeneratorConfig { seed, ..GeneratorConfig::default() };
            let (inst, s) = generate(&cfg);
            assert!(inst.validate().is_empty(), "{:?}", inst.validate());
            assert!(s.validate(inst.num_customers(), inst.num_drones()).is_empty());
            assert_eq!(generate(&cfg), (inst, s));
        }
    }

    #[test]
    fn replicas_keep_the_distribution() {
        for count in [4, 7, 16] {
            let t = replicated_takeoff(2, 0.1, count).unwrap();
            assert_eq!(t.len(), count);
            let grounded_first: f64 = t.iter().filter(|w| w.grounded[0]).map(|w| w.probability).sum();
            assert!((grounded_first - 0.1).abs() < 1e-12);
            assert!((t.iter().map(|w| w.probability).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
