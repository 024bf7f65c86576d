//! Missing-score imputation.
//!
//! Every imputer is fitted on training rows only and then applied to any
//! table over the same modalities. Applying never changes a present score;
//! it only fills missing cells (or, for listwise deletion, drops rows).

pub mod bayes_ridge;
pub mod cart;
mod iterative;
pub mod knn;
mod univariate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ImputeError, RegressorError};
use crate::model::ScoreTable;

pub use bayes_ridge::{fit_bayesian_ridge, fit_bayesian_ridge_fixed, BayesianRidgeModel, RidgeParams};
pub use cart::{fit_cart, CartParams, CartTree};
pub use knn::{fit_knn, KnnModel};
pub use univariate::{impute_mean, impute_median, listwise_delete};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Listwise,
    Mean,
    Median,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    BayesianRidge,
    Cart,
    Knn,
}

impl RegressorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BayesianRidge => "bayesian_ridge",
            Self::Cart => "cart",
            Self::Knn => "knn",
        }
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RegressorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bayesian_ridge" | "bayes" | "bayesian" => Ok(Self::BayesianRidge),
            "cart" | "tree" | "decision_tree" => Ok(Self::Cart),
            "knn" => Ok(Self::Knn),
            other => Err(format!("unknown regressor `{other}` (expected bayesian_ridge, cart or knn)")),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "listwise" => Ok(Self::Listwise),
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            "iterative" => Ok(Self::Iterative),
            other => Err(format!("unknown method `{other}` (expected listwise, mean, median or iterative)")),
        }
    }
}

fn default_max_iterations() -> usize {
    10
}
fn default_tolerance() -> f64 {
    1e-3
}
fn default_knn_k() -> usize {
    5
}
fn default_cart_max_depth() -> usize {
    8
}
fn default_cart_min_leaf() -> usize {
    5
}
fn default_ridge_max_updates() -> usize {
    300
}
fn default_ridge_tolerance() -> f64 {
    1e-3
}

/// Imputation method and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputerSpec {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regressor: Option<RegressorKind>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_knn_k")]
    pub knn_k: usize,
    #[serde(default = "default_cart_max_depth")]
    pub cart_max_depth: usize,
    #[serde(default = "default_cart_min_leaf")]
    pub cart_min_leaf: usize,
    #[serde(default = "default_ridge_max_updates")]
    pub ridge_max_updates: usize,
    #[serde(default = "default_ridge_tolerance")]
    pub ridge_tolerance: f64,
}

impl ImputerSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            regressor: None,
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            knn_k: default_knn_k(),
            cart_max_depth: default_cart_max_depth(),
            cart_min_leaf: default_cart_min_leaf(),
            ridge_max_updates: default_ridge_max_updates(),
            ridge_tolerance: default_ridge_tolerance(),
        }
    }

    pub fn iterative(regressor: RegressorKind) -> Self {
        Self {
            regressor: Some(regressor),
            ..Self::new(Method::Iterative)
        }
    }

    pub fn validate(&self) -> Result<(), ImputeError> {
        let bad = |msg: &str| Err(ImputeError::InvalidSpec(msg.to_string()));
        match (self.method, self.regressor) {
            (Method::Iterative, None) => return bad("iterative imputation needs a regressor"),
            (Method::Listwise | Method::Mean | Method::Median, Some(_)) => {
                return bad("a regressor only applies to iterative imputation")
            }
            _ => {}
        }
        if self.max_iterations == 0
            || self.knn_k == 0
            || self.cart_max_depth == 0
            || self.cart_min_leaf == 0
            || self.ridge_max_updates == 0
        {
            return bad("iteration caps, knn_k and cart limits must be positive");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite())
            || !(self.ridge_tolerance > 0.0 && self.ridge_tolerance.is_finite())
        {
            return bad("tolerances must be positive and finite");
        }
        Ok(())
    }

    /// Short method name, e.g. `mean` or `iterative_knn`.
    pub fn label(&self) -> String {
        match (self.method, self.regressor) {
            (Method::Listwise, _) => "listwise".into(),
            (Method::Mean, _) => "mean".into(),
            (Method::Median, _) => "median".into(),
            (Method::Iterative, Some(r)) => format!("iterative_{r}"),
            (Method::Iterative, None) => "iterative".into(),
        }
    }

    pub fn ridge_params(&self) -> RidgeParams {
        RidgeParams {
            max_updates: self.ridge_max_updates,
            tolerance: self.ridge_tolerance,
        }
    }

    pub fn cart_params(&self) -> CartParams {
        CartParams {
            max_depth: self.cart_max_depth,
            min_leaf: self.cart_min_leaf,
        }
    }

    /// Observed training rows a target modality needs for its regressor.
    pub fn min_observed_rows(&self) -> usize {
        match self.regressor {
            Some(RegressorKind::Knn) => self.knn_k.max(2),
            Some(RegressorKind::Cart) => (2 * self.cart_min_leaf).max(2),
            Some(RegressorKind::BayesianRidge) => 2,
            None => 1,
        }
    }
}

/// A fitted per-modality regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    BayesianRidge(BayesianRidgeModel),
    Cart(CartTree),
    Knn(KnnModel),
}

impl Regressor {
    pub fn fit(spec: &ImputerSpec, x: &[f64], width: usize, y: &[f64]) -> Result<Self, RegressorError> {
        match spec.regressor {
            Some(RegressorKind::BayesianRidge) => {
                fit_bayesian_ridge(x, width, y, &spec.ridge_params()).map(Self::BayesianRidge)
            }
            Some(RegressorKind::Cart) => fit_cart(x, width, y, &spec.cart_params()).map(Self::Cart),
            Some(RegressorKind::Knn) => fit_knn(x, width, y, spec.knn_k).map(Self::Knn),
            None => Err(RegressorError::InvalidHyperparameter("no regressor kind".into())),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Self::BayesianRidge(m) => m.predict(x),
            Self::Cart(m) => m.predict(x),
            Self::Knn(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub median: f64,
    /// Present training scores behind the statistics.
    pub observed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations_run: usize,
    pub final_max_delta: f64,
    pub converged: bool,
}

/// Everything needed to impute a table the same way later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedImputer {
    pub spec: ImputerSpec,
    pub modalities: Vec<String>,
    /// Training statistics per modality; empty for listwise deletion.
    pub columns: Vec<ColumnStats>,
    /// One regressor per modality for iterative imputation, else empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regressors: Vec<Regressor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
}

impl FittedImputer {
    /// Fill the missing cells of `table` (or drop incomplete rows for listwise).
    pub fn apply(&self, table: &ScoreTable) -> Result<ScoreTable, ImputeError> {
        if self.spec.method == Method::Listwise {
            return Ok(listwise_delete(table));
        }
        if table.n_modalities() != self.modalities.len() {
            return Err(ImputeError::ShapeMismatch {
                fitted: self.modalities.len(),
                table: table.n_modalities(),
            });
        }
        match self.spec.method {
            Method::Mean => Ok(univariate::fill(table, |m| self.columns[m].mean)),
            Method::Median => Ok(univariate::fill(table, |m| self.columns[m].median)),
            Method::Iterative => Ok(iterative::apply(self, table)),
            Method::Listwise => unreachable!(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("imputer serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Fit an imputer on the rows `train_rows` of `table`.
pub fn fit(table: &ScoreTable, train_rows: &[usize], spec: &ImputerSpec) -> Result<FittedImputer, ImputeError> {
    spec.validate()?;
    let modalities = table.modalities().names().to_vec();
    if spec.method == Method::Listwise {
        return Ok(FittedImputer {
            spec: spec.clone(),
            modalities,
            columns: Vec::new(),
            regressors: Vec::new(),
            convergence: None,
        });
    }
    let columns = univariate::column_stats(table, train_rows)?;
    if spec.method != Method::Iterative {
        return Ok(FittedImputer {
            spec: spec.clone(),
            modalities,
            columns,
            regressors: Vec::new(),
            convergence: None,
        });
    }
    iterative::fit(table, train_rows, spec, columns)
}

/// Fit on `train_rows` and apply to the whole table.
pub fn impute(table: &ScoreTable, train_rows: &[usize], spec: &ImputerSpec) -> Result<(ScoreTable, FittedImputer), ImputeError> {
    let fitted = fit(table, train_rows, spec)?;
    let out = fitted.apply(table)?;
    Ok((out, fitted))
}
