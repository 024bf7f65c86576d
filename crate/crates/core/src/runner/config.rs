use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::RunError;
use crate::impute::{ImputerSpec, Method, RegressorKind};
use crate::ingest::FileFormat;
use crate::scenarios::{Scenario, ScenarioKind};
use crate::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub modality: String,
    pub path: PathBuf,
}

/// Where the score table comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic {
        spec: SynthSpec,
    },
    /// Long or wide CSV; the format is detected from the header when omitted.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        format: Option<FileFormat>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modalities: Option<Vec<String>>,
    },
    /// One square score matrix per modality.
    Bssr1 {
        files: Vec<MatrixFile>,
        gallery_size: usize,
    },
}

impl DatasetSource {
    /// Resolve relative paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            Self::Synthetic { .. } => {}
            Self::File { path, .. } => fix(path),
            Self::Bssr1 { files, .. } => files.iter_mut().for_each(|f| fix(&mut f.path)),
        }
    }
}

/// One roster entry: an imputer, or one of the two non-imputing baselines.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    /// Fuse the available scores of each row.
    NoImputation,
    /// Fuse without the target modality (retire scenario only).
    Retrain,
    Impute(ImputerSpec),
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            Self::NoImputation => "no_imputation".into(),
            Self::Retrain => "retrain".into(),
            Self::Impute(spec) => spec.label(),
        }
    }

    pub fn imputer(method: Method) -> Self {
        Self::Impute(ImputerSpec::new(method))
    }

    pub fn iterative(regressor: RegressorKind) -> Self {
        Self::Impute(ImputerSpec::iterative(regressor))
    }
}

impl Serialize for MethodSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Tag {
            method: &'static str,
        }
        match self {
            Self::NoImputation => Tag { method: "no_imputation" }.serialize(s),
            Self::Retrain => Tag { method: "retrain" }.serialize(s),
            Self::Impute(spec) => spec.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for MethodSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(d)?;
        let object = value
            .as_object()
            .ok_or_else(|| D::Error::custom("roster entry must be an object"))?;
        let method = object.get("method").and_then(|m| m.as_str());
        let baseline = match method {
            Some("no_imputation") => Some(Self::NoImputation),
            Some("retrain") => Some(Self::Retrain),
            _ => None,
        };
        match baseline {
            Some(b) if object.len() == 1 => Ok(b),
            Some(b) => Err(D::Error::custom(format!("`{}` takes no parameters", b.label()))),
            None => serde_json::from_value(value).map(Self::Impute).map_err(D::Error::custom),
        }
    }
}

fn default_levels() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}
fn default_repetitions() -> usize {
    5
}
fn default_split_fraction() -> f64 {
    0.8
}
fn default_max_rank() -> usize {
    10
}
fn default_fpr_points() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    #[serde(default = "default_max_rank")]
    pub max_rank: usize,
    #[serde(default = "default_fpr_points")]
    pub fpr_points: Vec<f64>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            max_rank: default_max_rank(),
            fpr_points: default_fpr_points(),
        }
    }
}

/// Full description of an experiment grid. Field names match the JSON keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_modality: Option<String>,
    #[serde(default = "default_levels")]
    pub missing_levels: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Defaults to [`default_roster`] for the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imputers: Option<Vec<MethodSpec>>,
    #[serde(default)]
    pub eval: EvalSettings,
    /// Where per-cell CSVs and the report go. Not part of the config hash.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

/// Baselines first, then univariate and iterative imputers; `retrain` is
/// appended for the retire scenario.
pub fn default_roster(scenario: ScenarioKind) -> Vec<MethodSpec> {
    let mut roster = vec![
        MethodSpec::NoImputation,
        MethodSpec::imputer(Method::Listwise),
        MethodSpec::imputer(Method::Mean),
        MethodSpec::imputer(Method::Median),
        MethodSpec::iterative(RegressorKind::BayesianRidge),
        MethodSpec::iterative(RegressorKind::Cart),
        MethodSpec::iterative(RegressorKind::Knn),
    ];
    if scenario == ScenarioKind::Retire {
        roster.push(MethodSpec::Retrain);
    }
    roster
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let config: Self = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Read a config file; relative dataset paths are taken from its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            config.dataset.resolve_paths(dir);
        }
        Ok(config)
    }

    pub fn roster(&self) -> Vec<MethodSpec> {
        self.imputers.clone().unwrap_or_else(|| default_roster(self.scenario))
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            tag: self.scenario,
            target_modality: self.target_modality.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |msg: String| Err(RunError::Config(msg));
        if self.missing_levels.is_empty() {
            return bad("missing_levels is empty".into());
        }
        for &level in &self.missing_levels {
            if !(0.0..=1.0).contains(&level) {
                return bad(format!("missing level {level} is outside [0, 1]"));
            }
        }
        if self.missing_levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("missing_levels must be strictly ascending".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split_fraction {} is outside (0, 1)", self.split_fraction));
        }
        match (self.scenario.needs_target(), &self.target_modality) {
            (true, None) => return bad(format!("scenario `{}` needs target_modality", self.scenario.as_str())),
            (false, Some(_)) => return bad("the merge scenario takes no target_modality".into()),
            _ => {}
        }
        let roster = self.roster();
        if roster.is_empty() {
            return bad("the imputer roster is empty".into());
        }
        let mut labels = std::collections::BTreeSet::new();
        for entry in &roster {
            if !labels.insert(entry.label()) {
                return bad(format!("method `{}` appears twice in the roster", entry.label()));
            }
            match entry {
                MethodSpec::Retrain if self.scenario != ScenarioKind::Retire => {
                    return bad("`retrain` only applies to the retire scenario".into())
                }
                MethodSpec::Impute(spec) => spec.validate().map_err(|e| RunError::Config(e.to_string()))?,
                _ => {}
            }
        }
        if self.eval.max_rank == 0 {
            return bad("eval.max_rank must be at least 1".into());
        }
        if self.eval.fpr_points.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("eval.fpr_points must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Canonical JSON used for the config hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dataset": {"kind": "synthetic", "spec": {
            "n_identities": 10, "modalities": ["a", "b"],
            "genuine": [{"mean": 0.7, "sd": 0.1}, {"mean": 0.7, "sd": 0.1}],
            "impostor": [{"mean": 0.3, "sd": 0.1}, {"mean": 0.3, "sd": 0.1}],
            "rho": 0.5, "seed": 1}},
        "scenario": "merge"
    }"#;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.missing_levels.len(), 10);
        assert_eq!(c.missing_levels[9], 0.9);
        assert_eq!(c.repetitions, 5);
        assert_eq!(c.split_fraction, 0.8);
        assert_eq!(c.eval.max_rank, 10);
        assert_eq!(c.roster().len(), 7);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("\"scenario\"", "\"bogus\": 1, \"scenario\"");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(RunError::Config(_))));
    }

    #[test]
    fn roster_parsing() {
        let text = MINIMAL.replace(
            "\"scenario\": \"merge\"",
            r#""scenario": "merge", "imputers": [{"method": "no_imputation"}, {"method": "iterative", "regressor": "cart", "cart_min_leaf": 3}]"#,
        );
        let c = ExperimentConfig::from_json(&text).unwrap();
        let roster = c.roster();
        assert_eq!(roster[0], MethodSpec::NoImputation);
        match &roster[1] {
            MethodSpec::Impute(spec) => assert_eq!(spec.cart_min_leaf, 3),
            other => panic!("{other:?}"),
        }
        let json = serde_json::to_string(&roster).unwrap();
        let back: Vec<MethodSpec> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, roster);
    }

    #[test]
    fn invalid_configs() {
        let cases = [
            r#""scenario": "merge", "imputers": []"#,
            r#""scenario": "merge", "missing_levels": [0.5, 0.1]"#,
            r#""scenario": "merge", "missing_levels": [1.5]"#,
            r#""scenario": "merge", "repetitions": 0"#,
            r#""scenario": "retire""#,
            r#""scenario": "merge", "imputers": [{"method": "retrain"}]"#,
            r#""scenario": "merge", "imputers": [{"method": "no_imputation", "k": 1}]"#,
            r#""scenario": "merge", "imputers": [{"method": "mean"}, {"method": "mean"}]"#,
        ];
        for case in cases {
            let text = MINIMAL.replace("\"scenario\": \"merge\"", case);
            assert!(ExperimentConfig::from_json(&text).is_err(), "{case}");
        }
    }

    #[test]
    fn output_dir_not_hashed() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        let before = c.canonical_json();
        c.output_dir = Some("/tmp/x".into());
        assert_eq!(c.canonical_json(), before);
    }
}
