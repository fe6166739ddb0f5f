//! Problem parameters: customers, fleets, distances, costs and time-window limits.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for money and limit comparisons.
pub const EPS: f64 = 1e-9;

/// Fuel price factor applied to truck kilometres.
pub const TRUCK_FUEL_FACTOR: f64 = 1.05;
/// Litres per kilometre consumed by a truck.
pub const TRUCK_LITRES_PER_KM: f64 = 0.1;
/// Drone energy cost per kilometre of a round trip.
pub const DRONE_COST_PER_KM: f64 = 0.005;
pub const DEFAULT_PENALTY: f64 = 20.0;
pub const DEFAULT_REPAIR: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowClass {
    #[default]
    None,
    Morning,
    Afternoon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    /// Position in the distance matrix; customers are numbered `1..=c'` in order.
    pub id: usize,
    pub package_weight_kg: f64,
    #[serde(default)]
    pub window_class: WindowClass,
}

/// Travel speed in km/h, either one value for every arc or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Speed {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Speed {
    pub fn on_arc(&self, from: usize, to: usize) -> f64 {
        match self {
            Speed::Uniform(v) => *v,
            Speed::Matrix(m) => m[from][to],
        }
    }

    fn violations(&self, field: &str, size: usize, out: &mut Vec<Violation>) {
        match self {
            Speed::Uniform(v) => {
                if !(v.is_finite() && *v > 0.0) {
                    out.push(Violation::new(field, "speed must be finite and positive"));
                }
            }
            Speed::Matrix(m) => {
                if m.len() != size || m.iter().any(|row| row.len() != size) {
                    out.push(Violation::new(field, format!("speed matrix must be {size}x{size}")));
                    return;
                }
                for (i, row) in m.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        if i != j && !(v.is_finite() && *v > 0.0) {
                            out.push(Violation::new(
                                format!("{field}[{i}][{j}]"),
                                "speed must be finite and positive",
                            ));
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckSpec {
    pub id: usize,
    pub initial_cost: f64,
    pub capacity_kg: f64,
    pub daily_distance_km: f64,
    pub daily_time_h: f64,
    /// Time spent per arc for unloading.
    pub dropoff_time_h: f64,
    pub speed_kmh: Speed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSpec {
    pub id: usize,
    pub initial_cost: f64,
    pub capacity_kg: f64,
    pub daily_distance_km: f64,
    pub trip_distance_km: f64,
    /// Needed only for time-window limits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_kmh: Option<Speed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Cost of driving each arc, indexed like the distance matrix.
    pub truck_arc_cost: Vec<Vec<f64>>,
    /// Cost of a drone round trip to customer `i`, stored at index `i - 1`.
    pub drone_roundtrip_cost: Vec<f64>,
    pub penalty: f64,
    pub repair: f64,
}

impl CostModel {
    pub fn drone_trip(&self, customer: usize) -> f64 {
        self.drone_roundtrip_cost[customer - 1]
    }
}

/// Fuel-price based truck costs, distance based drone costs, and the default
/// penalty and repair charges.
pub fn default_cost_model(distances_km: &[Vec<f64>]) -> CostModel {
    let truck_arc_cost = distances_km
        .iter()
        .map(|row| row.iter().map(|k| k * TRUCK_FUEL_FACTOR * TRUCK_LITRES_PER_KM).collect())
        .collect();
    let drone_roundtrip_cost = (1..distances_km.len())
        .map(|i| DRONE_COST_PER_KM * (distances_km[i][0] + distances_km[0][i]))
        .collect();
    CostModel { truck_arc_cost, drone_roundtrip_cost, penalty: DEFAULT_PENALTY, repair: DEFAULT_REPAIR }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub customers: Vec<Customer>,
    pub trucks: Vec<TruckSpec>,
    pub drones: Vec<DroneSpec>,
    /// `(c'+1) x (c'+1)` road or flight distances, index 0 is the depot.
    pub distances_km: Vec<Vec<f64>>,
    pub costs: CostModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morning_limit_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub afternoon_limit_h: Option<f64>,
    /// Planar positions used only for drawing maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid input: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidInput {
    pub violations: Vec<Violation>,
}

fn nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Instance {
    pub fn num_customers(&self) -> usize {
        self.customers.len()
    }

    pub fn num_trucks(&self) -> usize {
        self.trucks.len()
    }

    pub fn num_drones(&self) -> usize {
        self.drones.len()
    }

    pub fn customer(&self, id: usize) -> &Customer {
        &self.customers[id - 1]
    }

    pub fn distance(&self, from: usize, to: usize) -> f64 {
        self.distances_km[from][to]
    }

    /// Depot to customer and back.
    pub fn roundtrip_km(&self, customer: usize) -> f64 {
        self.distances_km[0][customer] + self.distances_km[customer][0]
    }

    /// Driving time plus drop-off time charged for one truck arc.
    pub fn truck_arc_hours(&self, truck: usize, from: usize, to: usize) -> f64 {
        let spec = &self.trucks[truck];
        self.distances_km[from][to] / spec.speed_kmh.on_arc(from, to) + spec.dropoff_time_h
    }

    /// Flight time of a round trip, if the drone speed is known.
    pub fn drone_roundtrip_hours(&self, drone: usize, customer: usize) -> Option<f64> {
        let speed = self.drones[drone].speed_kmh.as_ref()?;
        Some(
            self.distances_km[0][customer] / speed.on_arc(0, customer)
                + self.distances_km[customer][0] / speed.on_arc(customer, 0),
        )
    }

    pub fn has_time_windows(&self) -> bool {
        self.customers.iter().any(|c| c.window_class != WindowClass::None)
    }

    pub fn customers_in(&self, class: WindowClass) -> impl Iterator<Item = usize> + '_ {
        self.customers.iter().filter(move |c| c.window_class == class).map(|c| c.id)
    }

    /// Whether drone `d` may carry customer `i` on a single trip (payload and range).
    pub fn drone_can_serve(&self, drone: usize, customer: usize) -> bool {
        let spec = &self.drones[drone];
        self.customer(customer).package_weight_kg <= spec.capacity_kg + EPS
            && self.roundtrip_km(customer) <= spec.trip_distance_km + EPS
    }

    /// Lists every broken invariant; an empty list means the instance is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.customers.len();
        let size = n + 1;

        for (k, c) in self.customers.iter().enumerate() {
            if c.id != k + 1 {
                out.push(Violation::new(format!("customers[{k}].id"), format!("must equal {}", k + 1)));
            }
            if !positive(c.package_weight_kg) {
                out.push(Violation::new(
                    format!("customers[{k}].package_weight_kg"),
                    "weight must be finite and positive",
                ));
            }
        }

        let mut ids: Vec<usize> = self.trucks.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            out.push(Violation::new("trucks", "ids must be unique"));
        }
        for (k, t) in self.trucks.iter().enumerate() {
            let f = |name: &str| format!("trucks[{k}].{name}");
            if !nonneg(t.initial_cost) {
                out.push(Violation::new(f("initial_cost"), "cost must be finite and nonnegative"));
            }
            for (name, v) in [
                ("capacity_kg", t.capacity_kg),
                ("daily_distance_km", t.daily_distance_km),
                ("daily_time_h", t.daily_time_h),
            ] {
                if !positive(v) {
                    out.push(Violation::new(f(name), "limit must be finite and positive"));
                }
            }
            if !nonneg(t.dropoff_time_h) {
                out.push(Violation::new(f("dropoff_time_h"), "time must be finite and nonnegative"));
            }
            t.speed_kmh.violations(&f("speed_kmh"), size, &mut out);
        }

        let mut ids: Vec<usize> = self.drones.iter().map(|d| d.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            out.push(Violation::new("drones", "ids must be unique"));
        }
        for (k, d) in self.drones.iter().enumerate() {
            let f = |name: &str| format!("drones[{k}].{name}");
            if !nonneg(d.initial_cost) {
                out.push(Violation::new(f("initial_cost"), "cost must be finite and nonnegative"));
            }
            for (name, v) in [
                ("capacity_kg", d.capacity_kg),
                ("daily_distance_km", d.daily_distance_km),
                ("trip_distance_km", d.trip_distance_km),
            ] {
                if !positive(v) {
                    out.push(Violation::new(f(name), "limit must be finite and positive"));
                }
            }
            if d.trip_distance_km > d.daily_distance_km {
                out.push(Violation::new(f("trip_distance_km"), "per-trip limit exceeds daily limit"));
            }
            match &d.speed_kmh {
                Some(s) => s.violations(&f("speed_kmh"), size, &mut out),
                None if self.has_time_windows() => {
                    out.push(Violation::new(f("speed_kmh"), "required when customers have time windows"))
                }
                None => {}
            }
        }

        let shape_ok = self.distances_km.len() == size && self.distances_km.iter().all(|r| r.len() == size);
        if !shape_ok {
            out.push(Violation::new("distances_km", format!("matrix must be {size}x{size}")));
        } else {
            for (i, row) in self.distances_km.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if !nonneg(v) {
                        out.push(Violation::new(
                            format!("distances_km[{i}][{j}]"),
                            "distance must be finite and nonnegative",
                        ));
                    } else if i == j && v != 0.0 {
                        out.push(Violation::new(format!("distances_km[{i}][{i}]"), "diagonal must be zero"));
                    }
                }
            }
        }

        let c = &self.costs;
        if c.truck_arc_cost.len() != size || c.truck_arc_cost.iter().any(|r| r.len() != size) {
            out.push(Violation::new("costs.truck_arc_cost", format!("matrix must be {size}x{size}")));
        } else if let Some((i, j)) = (0..size)
            .flat_map(|i| (0..size).map(move |j| (i, j)))
            .find(|&(i, j)| !nonneg(c.truck_arc_cost[i][j]))
        {
            out.push(Violation::new(format!("costs.truck_arc_cost[{i}][{j}]"), "cost must be finite and nonnegative"));
        }
        if c.drone_roundtrip_cost.len() != n {
            out.push(Violation::new("costs.drone_roundtrip_cost", format!("must have {n} entries")));
        } else if let Some(i) = c.drone_roundtrip_cost.iter().position(|&v| !nonneg(v)) {
            out.push(Violation::new(
                format!("costs.drone_roundtrip_cost[{i}]"),
                "cost must be finite and nonnegative",
            ));
        }
        if !nonneg(c.penalty) {
            out.push(Violation::new("costs.penalty", "penalty must be finite and nonnegative"));
        }
        if !nonneg(c.repair) {
            out.push(Violation::new("costs.repair", "repair cost must be finite and nonnegative"));
        }

        for (name, limit) in [("morning_limit_h", self.morning_limit_h), ("afternoon_limit_h", self.afternoon_limit_h)] {
            match limit {
                Some(v) if !nonneg(v) => out.push(Violation::new(name, "limit must be finite and nonnegative")),
                None if self.has_time_windows() => {
                    out.push(Violation::new(name, "required when customers have time windows"))
                }
                _ => {}
            }
        }

        if let Some(coords) = &self.coordinates {
            if coords.len() != size {
                out.push(Violation::new("coordinates", format!("must have {size} points")));
            } else if coords.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                out.push(Violation::new("coordinates", "points must be finite"));
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), InvalidInput> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(InvalidInput { violations })
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// One truck, one drone, `n` customers on a line east of the depot.
    pub(crate) fn line_instance(n: usize) -> Instance {
        let size = n + 1;
        let distances_km: Vec<Vec<f64>> =
            (0..size).map(|i| (0..size).map(|j| (i as f64 - j as f64).abs() * 2.0).collect()).collect();
        Instance {
            customers: (1..=n)
                .map(|id| Customer { id, package_weight_kg: 1.0, window_class: WindowClass::None })
                .collect(),
            trucks: vec![TruckSpec {
                id: 1,
                initial_cost: 280.0,
                capacity_kg: 1060.0,
                daily_distance_km: 200.0,
                daily_time_h: 8.0,
                dropoff_time_h: 0.25,
                speed_kmh: Speed::Uniform(50.0),
            }],
            drones: vec![DroneSpec {
                id: 1,
                initial_cost: 100.0,
                capacity_kg: 2.0,
                daily_distance_km: 150.0,
                trip_distance_km: 15.0,
                speed_kmh: None,
            }],
            costs: default_cost_model(&distances_km),
            distances_km,
            morning_limit_h: None,
            afternoon_limit_h: None,
            coordinates: None,
        }
    }

    #[test]
    fn well_formed_instance_has_no_violations() {
        let inst = line_instance(3);
        assert!(inst.validate().is_empty());
        assert!(inst.ensure_valid().is_ok());
    }

    #[test]
    fn nonzero_diagonal_is_reported() {
        let mut inst = line_instance(2);
        inst.distances_km[1][1] = 5.0;
        assert_eq!(inst.validate(), vec![Violation::new("distances_km[1][1]", "diagonal must be zero")]);
    }

    #[test]
    fn negative_weight_is_reported() {
        let mut inst = line_instance(3);
        inst.customers[2].package_weight_kg = -1.0;
        let v = inst.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "customers[2].package_weight_kg");
    }

    #[test]
    fn other_invariants() {
        let mut inst = line_instance(2);
        inst.drones[0].trip_distance_km = 200.0;
        inst.trucks[0].capacity_kg = 0.0;
        inst.distances_km[0].pop();
        inst.customers[1].window_class = WindowClass::Morning;
        let fields: Vec<String> = inst.validate().into_iter().map(|v| v.field).collect();
        assert!(fields.contains(&"drones[0].trip_distance_km".to_string()));
        assert!(fields.contains(&"trucks[0].capacity_kg".to_string()));
        assert!(fields.contains(&"distances_km".to_string()));
        assert!(fields.contains(&"drones[0].speed_kmh".to_string()));
        assert!(fields.contains(&"morning_limit_h".to_string()));
    }

    #[test]
    fn default_costs() {
        let mut k = vec![vec![0.0; 3]; 3];
        k[0][1] = 10.0;
        k[1][0] = 7.0;
        k[0][2] = 7.0;
        k[2][0] = 7.0;
        let costs = default_cost_model(&k);
        assert!((costs.truck_arc_cost[0][1] - 1.05).abs() < 1e-12);
        assert_eq!(costs.truck_arc_cost[1][2], 0.0);
        assert!((costs.drone_trip(2) - 0.07).abs() < 1e-12);
        assert_eq!(costs.penalty, 20.0);
        assert_eq!(costs.repair, 50.0);
    }

    #[test]
    fn json_round_trip() {
        let inst = line_instance(2);
        let text = serde_json::to_string(&inst).unwrap();
        let back: Instance = serde_json::from_str(&text).unwrap();
        assert_eq!(inst, back);
    }
}
