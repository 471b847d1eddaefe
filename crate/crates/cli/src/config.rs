//! The run configuration: one JSON document with `data`, `graph`, `model`,
//! `train` and `eval` sections. Every field has a default and unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use regraph_core::data::{GridSpec, SyntheticConfig, WeekSplit};
use regraph_core::graph::{EdgeWeighting, Strategy, DEFAULT_THRESHOLD_MILES};
use regraph_core::models::{Architecture, ModelSpec, DEFAULT_CST_DEPTH};
use regraph_core::training::TrainConfig;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub graph: GraphSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Used by `synth` only.
    pub synthetic: SyntheticConfig,
    pub grid: GridSpec,
    /// Input frames per window.
    pub k: usize,
    /// Forecast horizons in grid steps.
    pub horizons: Vec<usize>,
    pub weeks: WeekSplit,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            synthetic: SyntheticConfig::default(),
            grid: GridSpec::default(),
            k: 6,
            horizons: vec![1, 3, 12, 36],
            weeks: WeekSplit {
                train: vec![1, 2, 3, 4],
                test: vec![5],
                generality: vec![6],
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    /// `None` picks the strategy the model architecture needs.
    pub strategy: Option<Strategy>,
    pub threshold_miles: f64,
    #[serde(alias = "adjacency_weights")]
    pub weighting: EdgeWeighting,
    /// Group count of a random decomposition; `None` uses the number of
    /// distinct region labels.
    pub random_regions: Option<usize>,
    pub seed: u64,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            strategy: None,
            threshold_miles: DEFAULT_THRESHOLD_MILES,
            weighting: EdgeWeighting::default(),
            random_regions: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub architecture: Architecture,
    /// `None` uses the architecture's default width.
    pub hidden: Option<usize>,
    pub cst_depth: usize,
    /// Seeds weight initialization.
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            architecture: Architecture::RegTGCN,
            hidden: None,
            cst_depth: DEFAULT_CST_DEPTH,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Use the literal squared-error forms of MAE and MAPE as headline
    /// columns of the comparison table.
    pub literal_eq14: bool,
    /// Write per-site truth and forecasts for plotting.
    pub timeseries: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            literal_eq14: false,
            timeseries: true,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            if e.line() > 0 {
                CliError::config(format!("config line {} column {}: {e}", e.line(), e.column()))
            } else {
                CliError::config(format!("config: {e}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = &self.data;
        if d.k == 0 || d.horizons.is_empty() || d.horizons.contains(&0) {
            return Err(CliError::config("data.k and data.horizons must be positive"));
        }
        if d.weeks.train.is_empty() {
            return Err(CliError::config("data.weeks.train must not be empty"));
        }
        if !(self.graph.threshold_miles > 0.0) {
            return Err(CliError::config("graph.threshold_miles must be positive"));
        }
        if let Some(s) = self.graph.strategy {
            let needed = self.model.architecture.connectivity();
            if s != needed {
                return Err(CliError::config(format!(
                    "{} needs {needed} connectivity, config asks for {s}",
                    self.model.architecture
                )));
            }
        }
        if self.model.hidden == Some(0) || self.model.cst_depth == 0 {
            return Err(CliError::config("model.hidden and model.cst_depth must be positive"));
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        self.graph.strategy.unwrap_or(self.model.architecture.connectivity())
    }

    /// Model spec without region labels; callers add them from the graph.
    pub fn model_spec(&self) -> ModelSpec {
        let arch = self.model.architecture;
        let mut spec = ModelSpec::new(arch, self.data.k, self.data.horizons.clone(), self.model.seed);
        spec.hidden = self.model.hidden.unwrap_or(arch.default_hidden());
        spec.cst_depth = self.model.cst_depth;
        spec
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorKind;

    #[test]
    fn empty_document_is_all_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.strategy(), Strategy::Regional);
        assert_eq!(cfg.model_spec().hidden, 256);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_config_errors_with_a_line() {
        let err = RunConfig::from_json("{\n  \"model\": {\n    \"hiden\": 3\n  }\n}").unwrap_err();
        assert_eq!(err.kind, ErrorKind::Config);
        assert!(err.message.contains("line 3"), "{}", err.message);
        let err = RunConfig::from_json(r#"{"extra": 1}"#).unwrap_err();
        assert_eq!(err.kind, ErrorKind::Config);
    }

    #[test]
    fn connectivity_mismatch_is_rejected() {
        let err = RunConfig::from_json(r#"{"model": {"architecture": "TGCN"}, "graph": {"strategy": "regional"}}"#)
            .unwrap_err();
        assert_eq!(err.kind, ErrorKind::Config);
    }

    #[test]
    fn bad_values_are_rejected() {
        for text in [
            r#"{"data": {"k": 0}}"#,
            r#"{"data": {"horizons": []}}"#,
            r#"{"train": {"epochs": 0}}"#,
            r#"{"graph": {"threshold_miles": -1}}"#,
        ] {
            assert_eq!(
                RunConfig::from_json(text).unwrap_err().kind,
                ErrorKind::Config,
                "{text}"
            );
        }
    }

    #[test]
    fn adjacency_weights_is_an_alias_for_weighting() {
        let cfg = RunConfig::from_json(r#"{"graph": {"adjacency_weights": {"kind": "binary"}}}"#).unwrap();
        assert_eq!(cfg.graph.weighting, EdgeWeighting::Binary);
    }
}
