//! Takeoff and breakdown scenario sets with their probabilities.

use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Violation};

/// Largest fleet for which all takeoff outcomes are enumerated.
pub const MAX_ENUMERATED_DRONES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot enumerate takeoff outcomes for {0} drones (limit {MAX_ENUMERATED_DRONES})")]
    OverflowRejected(usize),
    #[error("{name} = {value} is not in [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
}

fn check_unit(name: &'static str, value: f64) -> Result<(), ScenarioError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ScenarioError::OutOfRange { name, value })
    }
}

mod bits {
    //! `bool` vectors as 0/1 integer arrays.
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    fn to_bool<E: Error>(v: u8) -> Result<bool, E> {
        match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(E::custom(format!("expected 0 or 1, found {other}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&b| b as u8))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        Vec::<u8>::deserialize(d)?.into_iter().map(to_bool).collect()
    }

    pub mod matrix {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Vec<bool>], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|row| row.iter().map(|&b| b as u8).collect::<Vec<u8>>()))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<bool>>, D::Error> {
            Vec::<Vec<u8>>::deserialize(d)?
                .into_iter()
                .map(|row| row.into_iter().map(to_bool).collect())
                .collect()
        }
    }
}

/// Which drones stay on the ground for the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TakeoffScenario {
    #[serde(with = "bits")]
    pub grounded: Vec<bool>,
    pub probability: f64,
}

impl TakeoffScenario {
    pub fn flies(&self, drone: usize) -> bool {
        !self.grounded[drone]
    }
}

/// `breaks[i][d]`: drone `d` breaks down on its trip to customer `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownScenario {
    #[serde(with = "bits::matrix")]
    pub breaks: Vec<Vec<bool>>,
    pub probability: f64,
}

impl BreakdownScenario {
    pub fn breaks_at(&self, customer: usize, drone: usize) -> bool {
        self.breaks[customer - 1][drone]
    }

    pub fn any_break_for(&self, drone: usize) -> bool {
        self.breaks.iter().any(|row| row[drone])
    }
}

impl Eq for TakeoffScenario {}
impl Hash for TakeoffScenario {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.grounded.hash(state);
        self.probability.to_bits().hash(state);
    }
}

impl Eq for BreakdownScenario {}
impl Hash for BreakdownScenario {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.breaks.hash(state);
        self.probability.to_bits().hash(state);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpace {
    pub takeoff: Vec<TakeoffScenario>,
    pub breakdown: Vec<BreakdownScenario>,
}

impl ScenarioSpace {
    /// Every drone flies and nothing breaks.
    pub fn deterministic(customers: usize, drones: usize) -> Self {
        Self {
            takeoff: vec![TakeoffScenario { grounded: vec![false; drones], probability: 1.0 }],
            breakdown: vec![BreakdownScenario { breaks: vec![vec![false; drones]; customers], probability: 1.0 }],
        }
    }

    /// Probability that drone `d` is grounded.
    pub fn ground_probability(&self, drone: usize) -> f64 {
        self.takeoff.iter().filter(|w| w.grounded[drone]).map(|w| w.probability).sum()
    }

    pub fn validate(&self, customers: usize, drones: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.takeoff.is_empty() {
            out.push(Violation::new("scenarios.takeoff", "must not be empty"));
        }
        if self.breakdown.is_empty() {
            out.push(Violation::new("scenarios.breakdown", "must not be empty"));
        }
        for (k, w) in self.takeoff.iter().enumerate() {
            if w.grounded.len() != drones {
                out.push(Violation::new(format!("scenarios.takeoff[{k}].grounded"), format!("must have {drones} entries")));
            }
            if !(w.probability.is_finite() && (0.0..=1.0).contains(&w.probability)) {
                out.push(Violation::new(format!("scenarios.takeoff[{k}].probability"), "must lie in [0, 1]"));
            }
        }
        for (k, l) in self.breakdown.iter().enumerate() {
            if l.breaks.len() != customers || l.breaks.iter().any(|r| r.len() != drones) {
                out.push(Violation::new(
                    format!("scenarios.breakdown[{k}].breaks"),
                    format!("must be {customers}x{drones}"),
                ));
            }
            if !(l.probability.is_finite() && (0.0..=1.0).contains(&l.probability)) {
                out.push(Violation::new(format!("scenarios.breakdown[{k}].probability"), "must lie in [0, 1]"));
            }
        }
        let total: f64 = self.takeoff.iter().map(|w| w.probability).sum();
        if !self.takeoff.is_empty() && (total - 1.0).abs() > 1e-9 {
            out.push(Violation::new("scenarios.takeoff", format!("probabilities sum to {total}, not 1")));
        }
        let total: f64 = self.breakdown.iter().map(|l| l.probability).sum();
        if !self.breakdown.is_empty() && (total - 1.0).abs() > 1e-9 {
            out.push(Violation::new("scenarios.breakdown", format!("probabilities sum to {total}, not 1")));
        }
        out
    }
}

/// All `2^d'` takeoff outcomes for independent drones, each grounded with
/// probability `ground_prob`. Bit `d` of the scenario index is drone `d`.
pub fn enumerate_takeoff(drones: usize, ground_prob: f64) -> Result<Vec<TakeoffScenario>, ScenarioError> {
    if drones > MAX_ENUMERATED_DRONES {
        return Err(ScenarioError::OverflowRejected(drones));
    }
    check_unit("ground probability", ground_prob)?;
    Ok((0u32..1 << drones)
        .map(|mask| {
            let grounded: Vec<bool> = (0..drones).map(|d| mask >> d & 1 == 1).collect();
            let down = grounded.iter().filter(|&&g| g).count() as i32;
            let probability = ground_prob.powi(down) * (1.0 - ground_prob).powi(drones as i32 - down);
            TakeoffScenario { grounded, probability }
        })
        .collect())
}

/// Two-point spaces: all drones fly or all are grounded; nothing breaks, or every
/// drone breaks at the first `ceil(fraction * c')` customers. A zero failure
/// probability collapses the matching set to its single nominal scenario.
pub fn two_point_spaces(
    ground_prob: f64,
    break_prob: f64,
    break_fraction: f64,
    instance: &Instance,
) -> Result<ScenarioSpace, ScenarioError> {
    check_unit("ground probability", ground_prob)?;
    check_unit("break probability", break_prob)?;
    check_unit("break fraction", break_fraction)?;
    let n = instance.num_customers();
    let d = instance.num_drones();
    let mut takeoff = vec![TakeoffScenario { grounded: vec![false; d], probability: 1.0 - ground_prob }];
    if ground_prob > 0.0 {
        takeoff.push(TakeoffScenario { grounded: vec![true; d], probability: ground_prob });
    }
    let mut breakdown = vec![BreakdownScenario { breaks: vec![vec![false; d]; n], probability: 1.0 - break_prob }];
    if break_prob > 0.0 {
        let broken = ((break_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
        let breaks = (0..n).map(|i| vec![i < broken; d]).collect();
        breakdown.push(BreakdownScenario { breaks, probability: break_prob });
    }
    Ok(ScenarioSpace { takeoff, breakdown })
}

/// Breakdown matrix with every (customer, drone) pair failing independently.
pub fn draw_independent_breakdowns<R: Rng + ?Sized>(
    customers: usize,
    drones: usize,
    pair_prob: f64,
    rng: &mut R,
) -> Vec<Vec<bool>> {
    (0..customers)
        .map(|_| (0..drones).map(|_| rng.gen::<f64>() < pair_prob).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::line_instance;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn single_drone() {
        let s = enumerate_takeoff(1, 0.1).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].grounded, vec![false]);
        assert!((s[0].probability - 0.9).abs() < 1e-15);
        assert_eq!(s[1].grounded, vec![true]);
        assert!((s[1].probability - 0.1).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_symmetric() {
        let s = enumerate_takeoff(3, 0.0).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s[0].probability, 1.0);
        assert!(s[1..].iter().all(|w| w.probability == 0.0));
        let s = enumerate_takeoff(2, 0.5).unwrap();
        assert!(s.iter().all(|w| w.probability == 0.25));
    }

    #[test]
    fn overflow() {
        assert_eq!(enumerate_takeoff(21, 0.1), Err(ScenarioError::OverflowRejected(21)));
        assert!(matches!(enumerate_takeoff(2, 1.5), Err(ScenarioError::OutOfRange { .. })));
    }

    #[test]
    fn two_point_break_prefix() {
        let mut inst = line_instance(25);
        inst.drones.push(inst.drones[0].clone());
        inst.drones[1].id = 2;
        let space = two_point_spaces(0.1, 0.1, 0.2, &inst).unwrap();
        assert_eq!(space.takeoff.len(), 2);
        let l2 = &space.breakdown[1];
        for i in 1..=25 {
            for d in 0..2 {
                assert_eq!(l2.breaks_at(i, d), i <= 5, "customer {i}");
            }
        }
        assert!(space.validate(25, 2).is_empty());
        let all = two_point_spaces(0.1, 0.1, 1.0, &inst).unwrap();
        assert!(all.breakdown[1].breaks.iter().flatten().all(|&b| b));
    }

    #[test]
    fn two_point_deterministic_collapses() {
        let inst = line_instance(4);
        let space = two_point_spaces(0.0, 0.0, 0.2, &inst).unwrap();
        assert_eq!(space, ScenarioSpace::deterministic(4, 1));
    }

    #[test]
    fn json_uses_bits() {
        let space = two_point_spaces(0.5, 0.5, 0.5, &line_instance(2)).unwrap();
        let text = serde_json::to_string(&space).unwrap();
        assert!(text.contains("\"grounded\":[1]"));
        assert!(text.contains("\"breaks\":[[1],[0]]"));
        let back: ScenarioSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, space);
        assert!(serde_json::from_str::<TakeoffScenario>(r#"{"grounded":[2],"probability":1}"#).is_err());
    }

    #[test]
    fn independent_draws_shape() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m = draw_independent_breakdowns(4, 3, 0.5, &mut rng);
        assert_eq!(m.len(), 4);
        assert!(m.iter().all(|r| r.len() == 3));
    }

    proptest! {
        #[test]
        fn takeoff_probabilities_sum_to_one(d in 0usize..=12, p in 0.0f64..=1.0) {
            let s = enumerate_takeoff(d, p).unwrap();
            prop_assert_eq!(s.len(), 1 << d);
            let total: f64 = s.iter().map(|w| w.probability).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn twenty_drones_sum() {
        let s = enumerate_takeoff(20, 0.37).unwrap();
        let total: f64 = s.iter().map(|w| w.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
