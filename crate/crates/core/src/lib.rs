//! Truck-and-drone delivery planning under drone takeoff and breakdown uncertainty.

pub mod baselines;
pub mod generator;
pub mod instance;
pub mod lshape;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod problem;
pub mod scenario;
pub mod simulate;
pub mod solomon;

pub use instance::{Customer, DroneSpec, Instance, InvalidInput, Speed, TruckSpec, Violation, WindowClass};
pub use model::{CostBreakdown, FirstStagePlan, RecourseOutcome};
pub use scenario::{BreakdownScenario, ScenarioSpace, TakeoffScenario};
pub use problem::ProblemFile;
pub use generator::{generate, GeneratorConfig};
