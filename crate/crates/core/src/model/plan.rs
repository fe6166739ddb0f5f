use serde::{Deserialize, Serialize};
use thiserror::Error;

/// First-stage decisions. Vehicles are positional (index `t` is `instance.trucks[t]`);
/// customers are referred to by id (`1..=c'`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "PlanDocument", try_from = "PlanDocument")]
pub struct FirstStagePlan {
    pub truck_used: Vec<bool>,
    pub drone_used: Vec<bool>,
    /// Customers visited by each truck, in driving order.
    pub truck_routes: Vec<Vec<usize>>,
    /// Customers served by each drone, in serving order.
    pub drone_orders: Vec<Vec<usize>>,
}

impl FirstStagePlan {
    pub fn empty(trucks: usize, drones: usize) -> Self {
        Self {
            truck_used: vec![false; trucks],
            drone_used: vec![false; drones],
            truck_routes: vec![Vec::new(); trucks],
            drone_orders: vec![Vec::new(); drones],
        }
    }

    /// Builds a plan that reserves exactly the vehicles with work.
    pub fn from_assignments(truck_routes: Vec<Vec<usize>>, drone_orders: Vec<Vec<usize>>) -> Self {
        Self {
            truck_used: truck_routes.iter().map(|r| !r.is_empty()).collect(),
            drone_used: drone_orders.iter().map(|r| !r.is_empty()).collect(),
            truck_routes,
            drone_orders,
        }
    }

    /// Depot-rooted arcs `(from, to)` of truck `t`; empty when the truck has no customers.
    pub fn truck_arcs(&self, truck: usize) -> Vec<(usize, usize)> {
        let route = &self.truck_routes[truck];
        if route.is_empty() {
            return Vec::new();
        }
        let mut arcs = Vec::with_capacity(route.len() + 1);
        let mut prev = 0;
        for &c in route {
            arcs.push((prev, c));
            prev = c;
        }
        arcs.push((prev, 0));
        arcs
    }

    pub fn truck_route_arc(&self, from: usize, to: usize, truck: usize) -> bool {
        self.truck_arcs(truck).contains(&(from, to))
    }

    pub fn truck_assign(&self, customer: usize, truck: usize) -> bool {
        self.truck_routes[truck].contains(&customer)
    }

    pub fn drone_assign(&self, customer: usize, drone: usize) -> bool {
        self.drone_orders[drone].contains(&customer)
    }

    /// Position (1-based) of the customer on the truck route, 0 if not on it.
    pub fn truck_order(&self, customer: usize, truck: usize) -> usize {
        self.truck_routes[truck].iter().position(|&c| c == customer).map_or(0, |p| p + 1)
    }

    /// Serving position (1-based) of the customer on the drone, 0 if not served by it.
    pub fn drone_order(&self, customer: usize, drone: usize) -> usize {
        self.drone_orders[drone].iter().position(|&c| c == customer).map_or(0, |p| p + 1)
    }

    /// Whether `i` is served after `j` by drone `d`.
    pub fn order_disambig(&self, i: usize, j: usize, drone: usize) -> bool {
        self.drone_order(i, drone) > self.drone_order(j, drone)
    }

    /// Drone assignment matrix `[customer - 1][drone]`.
    pub fn drone_assignment_matrix(&self, customers: usize) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; self.drone_orders.len()]; customers];
        for (d, order) in self.drone_orders.iter().enumerate() {
            for &c in order {
                if (1..=customers).contains(&c) {
                    m[c - 1][d] = true;
                }
            }
        }
        m
    }

    pub fn drone_customer_count(&self) -> usize {
        self.drone_orders.iter().map(Vec::len).sum()
    }

    pub fn truck_customer_count(&self) -> usize {
        self.truck_routes.iter().map(Vec::len).sum()
    }
}

/// Serialized plan layout: one entry per vehicle with its ordered customer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub trucks: Vec<TruckPlan>,
    pub drones: Vec<DronePlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckPlan {
    pub used: bool,
    pub route: Vec<usize>,
    /// `[from, to]` pairs including the legs from and back to the depot.
    pub arcs: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DronePlan {
    pub used: bool,
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("truck {truck}: arc list does not match the route")]
pub struct ArcMismatch {
    pub truck: usize,
}

impl From<FirstStagePlan> for PlanDocument {
    fn from(plan: FirstStagePlan) -> Self {
        let trucks = (0..plan.truck_routes.len())
            .map(|t| TruckPlan {
                used: plan.truck_used[t],
                route: plan.truck_routes[t].clone(),
                arcs: plan.truck_arcs(t).into_iter().map(|(a, b)| [a, b]).collect(),
            })
            .collect();
        let drones = plan
            .drone_orders
            .iter()
            .zip(&plan.drone_used)
            .map(|(order, &used)| DronePlan { used, order: order.clone() })
            .collect();
        PlanDocument { trucks, drones }
    }
}

impl TryFrom<PlanDocument> for FirstStagePlan {
    type Error = ArcMismatch;

    fn try_from(doc: PlanDocument) -> Result<Self, Self::Error> {
        let plan = FirstStagePlan {
            truck_used: doc.trucks.iter().map(|t| t.used).collect(),
            drone_used: doc.drones.iter().map(|d| d.used).collect(),
            truck_routes: doc.trucks.iter().map(|t| t.route.clone()).collect(),
            drone_orders: doc.drones.into_iter().map(|d| d.order).collect(),
        };
        for (t, truck) in doc.trucks.iter().enumerate() {
            let arcs: Vec<[usize; 2]> = plan.truck_arcs(t).into_iter().map(|(a, b)| [a, b]).collect();
            if arcs != truck.arcs {
                return Err(ArcMismatch { truck: t });
            }
        }
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accessors() {
        let plan = FirstStagePlan::from_assignments(vec![vec![2, 4]], vec![vec![3, 1], vec![]]);
        assert_eq!(plan.truck_arcs(0), vec![(0, 2), (2, 4), (4, 0)]);
        assert!(plan.truck_route_arc(2, 4, 0));
        assert!(!plan.truck_route_arc(4, 2, 0));
        assert_eq!(plan.truck_order(4, 0), 2);
        assert_eq!(plan.drone_order(1, 0), 2);
        assert_eq!(plan.drone_order(2, 0), 0);
        assert!(plan.order_disambig(1, 3, 0));
        assert_eq!(plan.drone_used, vec![true, false]);
    }

    #[test]
    fn document_round_trip() {
        let plan = FirstStagePlan::from_assignments(vec![vec![2, 4]], vec![vec![3, 1]]);
        let text = serde_json::to_string(&plan).unwrap();
        assert!(text.contains("\"arcs\":[[0,2],[2,4],[4,0]]"));
        let back: FirstStagePlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, plan);
        let broken = text.replace("[4,0]", "[4,1]");
        assert!(serde_json::from_str::<FirstStagePlan>(&broken).is_err());
    }
}
