//! Native JSON document: an instance with its scenario space under `"scenarios"`.

use serde::{Deserialize, Serialize};

use crate::instance::{Instance, Violation};
use crate::scenario::ScenarioSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(flatten)]
    pub instance: Instance,
    /// Omitted means the deterministic space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<ScenarioSpace>,
}

impl ProblemFile {
    pub fn new(instance: Instance, scenarios: ScenarioSpace) -> Self {
        Self { instance, scenarios: Some(scenarios) }
    }

    pub fn scenario_space(&self) -> ScenarioSpace {
        self.scenarios
            .clone()
            .unwrap_or_else(|| ScenarioSpace::deterministic(self.instance.num_customers(), self.instance.num_drones()))
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = self.instance.validate();
        if let Some(s) = &self.scenarios {
            out.extend(s.validate(self.instance.num_customers(), self.instance.num_drones()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::line_instance;
    use crate::scenario::two_point_spaces;

    #[test]
    fn round_trip() {
        let inst = line_instance(3);
        let s = two_point_spaces(0.1, 0.1, 0.4, &inst).unwrap();
        let f = ProblemFile::new(inst, s);
        let text = f.to_json();
        assert!(text.contains("\"scenarios\""));
        assert_eq!(ProblemFile::from_json(&text).unwrap(), f);
    }

    #[test]
    fn scenarios_default_to_deterministic() {
        let f = ProblemFile { instance: line_instance(2), scenarios: None };
        let back = ProblemFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back.scenario_space(), ScenarioSpace::deterministic(2, 1));
        assert!(back.validate().is_empty());
    }
}
