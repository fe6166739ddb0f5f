//! Solomon VRPTW benchmark files and their conversion into instances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{
    default_cost_model, Customer, DroneSpec, Instance, InvalidInput, Speed, TruckSpec, WindowClass,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolomonRow {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub demand: f64,
    pub ready: f64,
    pub due: f64,
    pub service: f64,
}

/// A parsed benchmark file. `rows[0]` is the depot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolomonInstance {
    pub name: String,
    pub vehicles: usize,
    pub capacity: f64,
    pub rows: Vec<SolomonRow>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SolomonError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("customer {0} is not in the file")]
    UnknownCustomer(usize),
    #[error(transparent)]
    Invalid(#[from] InvalidInput),
}

fn numbers(line: &str, lineno: usize, expected: usize) -> Result<Vec<f64>, SolomonError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != expected {
        return Err(SolomonError::Parse {
            line: lineno,
            message: format!("expected {expected} fields, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| SolomonError::Parse {
                line: lineno,
                message: format!("not a number: {f:?}"),
            })
        })
        .collect()
}

fn whole(value: f64, lineno: usize, what: &str) -> Result<usize, SolomonError> {
    if value >= 0.0 && value.fract() == 0.0 {
        Ok(value as usize)
    } else {
        Err(SolomonError::Parse { line: lineno, message: format!("{what} must be a non-negative integer") })
    }
}

/// Parses the standard layout: a title line, a `VEHICLE` block with one
/// `NUMBER CAPACITY` row, and a `CUSTOMER` table whose first row is the depot.
pub fn parse_solomon(text: &str) -> Result<SolomonInstance, SolomonError> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(k, l)| (k + 1, l.trim())).filter(|(_, l)| !l.is_empty()).collect();
    let name = lines.first().map(|(_, l)| l.to_string()).ok_or(SolomonError::MissingSection("title"))?;
    let find = |header: &str| lines.iter().position(|(_, l)| l.eq_ignore_ascii_case(header));
    let vehicle = find("VEHICLE").ok_or(SolomonError::MissingSection("VEHICLE"))?;
    let customer = find("CUSTOMER").ok_or(SolomonError::MissingSection("CUSTOMER"))?;
    // Header line, then the data row.
    let &(lineno, row) = lines
        .get(vehicle + 2)
        .filter(|_| vehicle + 2 < customer)
        .ok_or(SolomonError::MissingSection("VEHICLE"))?;
    let v = numbers(row, lineno, 2)?;
    let vehicles = whole(v[0], lineno, "vehicle count")?;
    let capacity = v[1];

    let table = lines.get(customer + 1).ok_or(SolomonError::MissingSection("CUSTOMER"))?;
    if !table.1.to_ascii_uppercase().starts_with("CUST") {
        return Err(SolomonError::MissingSection("CUSTOMER"));
    }
    let mut rows = Vec::new();
    for &(lineno, line) in &lines[customer + 2..] {
        let f = numbers(line, lineno, 7)?;
        rows.push(SolomonRow {
            id: whole(f[0], lineno, "customer number")?,
            x: f[1],
            y: f[2],
            demand: f[3],
            ready: f[4],
            due: f[5],
            service: f[6],
        });
    }
    if rows.is_empty() {
        return Err(SolomonError::MissingSection("CUSTOMER"));
    }
    Ok(SolomonInstance { name, vehicles, capacity, rows })
}

/// Writes the layout read by [`parse_solomon`]; numbers use the shortest exact form.
pub fn to_solomon_string(inst: &SolomonInstance) -> String {
    let mut out = format!(
        "{}\n\nVEHICLE\nNUMBER     CAPACITY\n{:>5} {:>12}\n\nCUSTOMER\n\
         CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME\n\n",
        inst.name, inst.vehicles, inst.capacity
    );
    for r in &inst.rows {
        out.push_str(&format!(
            "{:>5} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            r.id, r.x, r.y, r.demand, r.ready, r.due, r.service
        ));
    }
    out
}

/// Fleet and cost parameters layered on top of a benchmark file. Unset values
/// take the defaults listed on each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GadopParams {
    pub trucks: usize,
    pub drones: usize,
    /// 280
    pub truck_initial_cost: Option<f64>,
    /// 1060 kg
    pub truck_capacity_kg: Option<f64>,
    /// 200 km
    pub truck_daily_km: Option<f64>,
    /// 8 h
    pub truck_daily_h: Option<f64>,
    /// 50 km/h
    pub truck_speed_kmh: Option<f64>,
    /// 0.25 h
    pub dropoff_h: Option<f64>,
    /// 100
    pub drone_initial_cost: Option<f64>,
    /// 2 kg
    pub drone_capacity_kg: Option<f64>,
    /// 150 km
    pub drone_daily_km: Option<f64>,
    /// 15 km
    pub drone_trip_km: Option<f64>,
    /// Only needed with time windows; see [`DEFAULT_DRONE_SPEED_KMH`].
    pub drone_speed_kmh: Option<f64>,
    /// 1 kg; replaces the file's demands unless `keep_demands` is set.
    pub package_weight_kg: Option<f64>,
    pub keep_demands: bool,
    /// 20
    pub penalty: Option<f64>,
    /// 50
    pub repair: Option<f64>,
    /// Kilometres per coordinate unit.
    pub coordinate_scale_km: f64,
    /// Customers due in the first half of the depot horizon become morning
    /// customers; those ready in the second half become afternoon customers.
    pub map_time_windows: bool,
    /// Defaults to half the truck's daily hours.
    pub morning_limit_h: Option<f64>,
    pub afternoon_limit_h: Option<f64>,
}

/// Drone speed assumed when windows are mapped and none is given.
pub const DEFAULT_DRONE_SPEED_KMH: f64 = 40.0;

impl Default for GadopParams {
    fn default() -> Self {
        Self {
            trucks: 1,
            drones: 3,
            truck_initial_cost: None,
            truck_capacity_kg: None,
            truck_daily_km: None,
            truck_daily_h: None,
            truck_speed_kmh: None,
            dropoff_h: None,
            drone_initial_cost: None,
            drone_capacity_kg: None,
            drone_daily_km: None,
            drone_trip_km: None,
            drone_speed_kmh: None,
            package_weight_kg: None,
            keep_demands: false,
            penalty: None,
            repair: None,
            coordinate_scale_km: 1.0,
            map_time_windows: false,
            morning_limit_h: None,
            afternoon_limit_h: None,
        }
    }
}

/// Builds an instance from the depot and the listed customer numbers, in that order.
/// Distances are Euclidean and unrounded.
pub fn to_instance(parsed: &SolomonInstance, subset: &[usize], params: &GadopParams) -> Result<Instance, SolomonError> {
    let depot = &parsed.rows[0];
    let mut picked = vec![depot];
    for &id in subset {
        let row = parsed.rows.iter().skip(1).find(|r| r.id == id).ok_or(SolomonError::UnknownCustomer(id))?;
        picked.push(row);
    }
    let scale = params.coordinate_scale_km;
    let coords: Vec<[f64; 2]> = picked.iter().map(|r| [r.x * scale, r.y * scale]).collect();
    let distances_km: Vec<Vec<f64>> = coords
        .iter()
        .map(|a| coords.iter().map(|b| (a[0] - b[0]).hypot(a[1] - b[1])).collect())
        .collect();
    let half = depot.due / 2.0;
    let customers = picked[1..]
        .iter()
        .enumerate()
        .map(|(k, r)| Customer {
            id: k + 1,
            package_weight_kg: if params.keep_demands { r.demand } else { params.package_weight_kg.unwrap_or(1.0) },
            window_class: match params.map_time_windows {
                true if r.due <= half => WindowClass::Morning,
                true if r.ready >= half => WindowClass::Afternoon,
                _ => WindowClass::None,
            },
        })
        .collect();
    let daily_h = params.truck_daily_h.unwrap_or(8.0);
    let trucks = (1..=params.trucks)
        .map(|id| TruckSpec {
            id,
            initial_cost: params.truck_initial_cost.unwrap_or(280.0),
            capacity_kg: params.truck_capacity_kg.unwrap_or(1060.0),
            daily_distance_km: params.truck_daily_km.unwrap_or(200.0),
            daily_time_h: daily_h,
            dropoff_time_h: params.dropoff_h.unwrap_or(0.25),
            speed_kmh: Speed::Uniform(params.truck_speed_kmh.unwrap_or(50.0)),
        })
        .collect();
    let drone_speed = params
        .drone_speed_kmh
        .or(params.map_time_windows.then_some(DEFAULT_DRONE_SPEED_KMH))
        .map(Speed::Uniform);
    let drones = (1..=params.drones)
        .map(|id| DroneSpec {
            id,
            initial_cost: params.drone_initial_cost.unwrap_or(100.0),
            capacity_kg: params.drone_capacity_kg.unwrap_or(2.0),
            daily_distance_km: params.drone_daily_km.unwrap_or(150.0),
            trip_distance_km: params.drone_trip_km.unwrap_or(15.0),
            speed_kmh: drone_speed.clone(),
        })
        .collect();
    let mut costs = default_cost_model(&distances_km);
    if let Some(p) = params.penalty {
        costs.penalty = p;
    }
    if let Some(m) = params.repair {
        costs.repair = m;
    }
    let windows = params.map_time_windows;
    let instance = Instance {
        customers,
        trucks,
        drones,
        distances_km,
        costs,
        morning_limit_h: windows.then(|| params.morning_limit_h.unwrap_or(daily_h / 2.0)),
        afternoon_limit_h: windows.then(|| params.afternoon_limit_h.unwrap_or(daily_h / 2.0)),
        coordinates: Some(coords),
    };
    instance.ensure_valid()?;
    Ok(instance)
}
