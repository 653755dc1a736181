//! Scenario files: network, initial partition and simulation settings as JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Bus, BusId, ModelError, NetworkModel, Partition, PartitionViolation};
use crate::simulator::SimulationConfig;

/// On-disk layout of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub buses: Vec<Bus>,
    pub edges: Vec<[BusId; 2]>,
    pub initial_partition: Vec<Vec<BusId>>,
    #[serde(default)]
    pub config: SimulationConfig,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub net: NetworkModel,
    pub partition: Partition,
    pub config: SimulationConfig,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Network(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionViolation),
    #[error("bus {bus}: profile shorter than steps+h ({len} < {needed})")]
    ProfileTooShort { bus: BusId, len: usize, needed: usize },
    #[error("invalid config: {0}")]
    Config(String),
}

impl ScenarioFile {
    /// Validates the file contents against the given config.
    pub fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let config = self.config;
        config.validate().map_err(ScenarioError::Config)?;
        let edges = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let net = NetworkModel::new(self.buses, edges)?;
        let partition = Partition::from_members(&net, self.initial_partition)?;
        let scenario = Scenario {
            net,
            partition,
            config,
        };
        scenario.check_profiles()?;
        Ok(scenario)
    }
}

impl Scenario {
    /// Fails if any load profile cannot cover `steps + horizon` lookups.
    pub fn check_profiles(&self) -> Result<(), ScenarioError> {
        let needed = self.config.steps + self.config.horizon;
        for bus in self.net.buses() {
            let len = bus.load_forecast.len();
            if len < needed {
                return Err(ScenarioError::ProfileTooShort {
                    bus: bus.id,
                    len,
                    needed,
                });
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            buses: self.net.buses().to_vec(),
            edges: self.net.edges().iter().map(|&(a, b)| [a, b]).collect(),
            initial_partition: self.partition.all_members().to_vec(),
            config: self.config.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    serde_json::from_str::<ScenarioFile>(text)?.into_scenario()
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(steps: usize, profile_len: usize) -> String {
        let load: Vec<String> = vec!["0.0".to_string(); profile_len];
        format!(
            r#"{{
  "buses": [{{"id": 0, "gen_capacity": 0.0, "storage": null, "main_grid": false,
              "load_forecast": [{}], "uncertainty_bound": 0.0,
              "costs": {{"storage": 1, "gen": 10, "import": 10, "transfer": 1, "extra_transfer": 100}}}}],
  "edges": [],
  "initial_partition": [[0]],
  "config": {{"steps": {steps}, "horizon": 1}}
}}"#,
            load.join(", ")
        )
    }

    #[test]
    fn one_bus_scenario_loads() {
        let s = parse_scenario(&minimal(2, 3)).unwrap();
        assert_eq!(s.net.len(), 1);
        assert_eq!(s.partition.len(), 1);
        assert_eq!(s.config.steps, 2);
        assert_eq!(s.config.alpha, 1e4);
    }

    #[test]
    fn short_profile_is_reported() {
        let err = parse_scenario(&minimal(5, 3)).unwrap_err();
        assert!(err.to_string().contains("profile shorter than steps+h"), "{err}");
    }

    #[test]
    fn overlapping_partition_is_reported() {
        let bus = |id: usize| {
            format!(
                r#"{{"id": {id}, "gen_capacity": 0, "storage": null, "main_grid": false,
                    "load_forecast": [0, 0, 0], "uncertainty_bound": 0,
                    "costs": {{"storage": 1, "gen": 10, "import": 10, "transfer": 1, "extra_transfer": 100}}}}"#
            )
        };
        let buses: Vec<String> = (0..7).map(bus).collect();
        let text = format!(
            r#"{{"buses": [{}], "edges": [[0,1],[1,2],[2,3],[3,4],[4,5],[5,6]],
                "initial_partition": [[0,1,2,3,4,5],[5,6]], "config": {{"steps": 1, "horizon": 1}}}}"#,
            buses.join(",")
        );
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("overlapping partition"), "{err}");
    }

    #[test]
    fn round_trip_is_identity() {
        let s = parse_scenario(&minimal(2, 3)).unwrap();
        let again = parse_scenario(&s.to_json()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(parse_scenario("{"), Err(ScenarioError::Parse(_))));
    }
}
