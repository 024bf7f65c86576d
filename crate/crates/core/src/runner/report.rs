use serde::{Deserialize, Serialize};

use crate::impute::Convergence;

use super::config::ExperimentConfig;

/// Metrics of one fused test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// `None` when the fused set lacks genuine or impostor rows.
    pub auc: Option<f64>,
    pub eer: Option<f64>,
    /// Aligned with the report's `fpr_points`.
    pub tpr_at_fpr: Vec<Option<f64>>,
    /// Rank-1 through rank-K identification accuracy.
    pub rank_accuracy: Vec<f64>,
    pub n_test_rows: usize,
}

/// Mean and sample standard deviation over the repetitions that produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Stat { mean, sd, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub auc: Option<Stat>,
    pub eer: Option<Stat>,
    pub tpr_at_fpr: Vec<Option<Stat>>,
    pub rank_accuracy: Vec<Option<Stat>>,
}

impl MetricSummary {
    pub fn of<'a>(sets: impl IntoIterator<Item = &'a MetricSet> + Clone) -> MetricSummary {
        let collect = |f: &dyn Fn(&MetricSet) -> Option<f64>| -> Option<Stat> {
            let values: Vec<f64> = sets.clone().into_iter().filter_map(f).collect();
            Stat::of(&values)
        };
        let first = sets.clone().into_iter().next();
        let n_fpr = first.map_or(0, |s| s.tpr_at_fpr.len());
        let n_rank = first.map_or(0, |s| s.rank_accuracy.len());
        MetricSummary {
            auc: collect(&|s| s.auc),
            eer: collect(&|s| s.eer),
            tpr_at_fpr: (0..n_fpr).map(|i| collect(&|s| s.tpr_at_fpr[i])).collect(),
            rank_accuracy: (0..n_rank).map(|k| collect(&|s| Some(s.rank_accuracy[k]))).collect(),
        }
    }
}

/// One (level, repetition, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub repetition: usize,
    pub split_seed: u64,
    /// Absent for the complete-data baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_seed: Option<u64>,
    pub metrics: MetricSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub per_rep: Vec<CellRecord>,
    pub summary: MetricSummary,
}

impl MethodReport {
    pub fn new(method: String, per_rep: Vec<CellRecord>) -> Self {
        let summary = MetricSummary::of(per_rep.iter().map(|c| &c.metrics).collect::<Vec<_>>());
        Self {
            method,
            per_rep,
            summary,
        }
    }

    /// True when any repetition's iterative imputer hit its sweep cap.
    pub fn any_unconverged(&self) -> bool {
        self.per_rep
            .iter()
            .any(|c| c.convergence.is_some_and(|c| !c.converged))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: f64,
    /// Cells blanked by the mask, per repetition.
    pub masked_cells: Vec<usize>,
    pub methods: Vec<MethodReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    /// SHA-256 of the canonical config JSON, lowercase hex.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub modalities: Vec<String>,
    pub fpr_points: Vec<f64>,
    pub max_rank: usize,
    /// Complete test data, fused without masking.
    pub baseline: MethodReport,
    pub levels: Vec<LevelReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn level(&self, level: f64) -> Option<&LevelReport> {
        self.levels.iter().find(|l| l.level == level)
    }
}

impl LevelReport {
    pub fn method(&self, label: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == label)
    }
}
