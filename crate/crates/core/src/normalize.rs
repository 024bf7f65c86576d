//! Min-max normalization fitted on training scores.
//!
//! Test scores outside the training range clamp to `[0, 1]`.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::NormError;
use crate::model::ScoreTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    /// Number of present training scores the range was fitted on.
    #[serde(default)]
    pub fitted_on: usize,
}

impl Range {
    pub fn apply(&self, score: f64) -> f64 {
        ((score - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// Per-modality ranges, keyed by modality name in column order.
/// Serializes as `{"<modality>": {"min": .., "max": .., "fitted_on": ..}, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormParams {
    pub ranges: IndexMap<String, Range>,
}

impl NormParams {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Fit per-modality min and max over the present scores of `train_rows`.
pub fn fit(table: &ScoreTable, train_rows: &[usize]) -> Result<NormParams, NormError> {
    let mut ranges = IndexMap::new();
    for (m, name) in table.modalities().names().iter().enumerate() {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut count = 0;
        for &r in train_rows {
            if let Some(v) = table.rows()[r].scores[m] {
                min = min.min(v);
                max = max.max(v);
                count += 1;
            }
        }
        if count < 2 || max <= min {
            return Err(NormError::DegenerateModality { modality: name.clone() });
        }
        ranges.insert(name.clone(), Range { min, max, fitted_on: count });
    }
    Ok(NormParams { ranges })
}

/// Map every present score to `(s - min) / (max - min)`, clamped to `[0, 1]`.
/// Missing cells stay missing.
pub fn transform(table: &ScoreTable, params: &NormParams) -> Result<ScoreTable, NormError> {
    if params.ranges.len() != table.n_modalities() {
        return Err(NormError::ShapeMismatch {
            params: params.ranges.len(),
            table: table.n_modalities(),
        });
    }
    let ranges: Vec<Range> = params.ranges.values().copied().collect();
    let (modalities, mut rows, _) = table.clone().into_rows();
    for row in &mut rows {
        for (cell, range) in row.scores.iter_mut().zip(&ranges) {
            if let Some(v) = cell {
                *v = range.apply(*v);
            }
        }
    }
    Ok(ScoreTable::from_parts(modalities, rows, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_table, ModalitySet, RawRow};
    use proptest::prelude::*;

    fn one_column(values: &[Option<f64>]) -> ScoreTable {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, v)| RawRow::new(format!("p{i}"), "g", vec![*v, Some(0.5 + i as f64)]))
            .collect();
        build_table(ModalitySet::new(["a", "b"]).unwrap(), rows).unwrap()
    }

    #[test]
    fn fit_extremes() {
        let t = one_column(&[Some(2.0), Some(4.0), Some(10.0)]);
        let p = fit(&t, &[0, 1, 2]).unwrap();
        assert_eq!(p.ranges["a"].min, 2.0);
        assert_eq!(p.ranges["a"].max, 10.0);
        assert_eq!(p.ranges["a"].fitted_on, 3);
    }

    #[test]
    fn degenerate() {
        let t = one_column(&[Some(5.0), Some(5.0), Some(5.0)]);
        assert_eq!(
            fit(&t, &[0, 1, 2]).unwrap_err(),
            NormError::DegenerateModality { modality: "a".into() }
        );
        let t = one_column(&[Some(5.0), None, Some(1.0)]);
        assert!(fit(&t, &[0, 1]).is_err());
    }

    #[test]
    fn transform_values() {
        let t = one_column(&[Some(2.0), Some(4.0), Some(10.0), Some(12.0), None]);
        let p = fit(&t, &[0, 1, 2]).unwrap();
        let n = transform(&t, &p).unwrap();
        assert!(n.is_normalized());
        let col: Vec<_> = n.column(0).collect();
        assert_eq!(col, vec![Some(0.0), Some(0.25), Some(1.0), Some(1.0), None]);
    }

    #[test]
    fn json_round_trip() {
        let t = one_column(&[Some(2.0), Some(4.0), Some(10.0)]);
        let p = fit(&t, &[0, 1, 2]).unwrap();
        let json = p.to_json();
        assert!(json.starts_with("{\n  \"a\": {"));
        assert_eq!(NormParams::from_json(&json).unwrap(), p);
    }

    proptest! {
        #[test]
        fn order_and_mask_preserved(values in proptest::collection::vec(proptest::option::of(-50.0f64..50.0), 3..40)) {
            let mut values = values;
            values[0] = Some(-60.0);
            values[1] = Some(60.0);
            let t = one_column(&values);
            let train: Vec<usize> = (0..values.len()).collect();
            let p = fit(&t, &train).unwrap();
            let n = transform(&t, &p).unwrap();
            prop_assert_eq!(t.mask(), n.mask());
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if let (Some(a), Some(b)) = (values[i], values[j]) {
                        let (x, y) = (n.score(i, 0).unwrap(), n.score(j, 0).unwrap());
                        if a < b {
                            prop_assert!(x <= y);
                            if b - a > 1e-9 { prop_assert!(x < y); }
                        }
                    }
                }
            }
        }

        #[test]
        fn idempotent_on_unit_range(values in proptest::collection::vec(0.0f64..=1.0, 3..30)) {
            let mut values: Vec<Option<f64>> = values.into_iter().map(Some).collect();
            values[0] = Some(0.0);
            values[1] = Some(1.0);
            let t = one_column(&values);
            let train: Vec<usize> = (0..values.len()).collect();
            let p = fit(&t, &train).unwrap();
            let once = transform(&t, &p).unwrap();
            let twice = transform(&once, &p).unwrap();
            prop_assert_eq!(once.column(0).collect::<Vec<_>>(), twice.column(0).collect::<Vec<_>>());
            prop_assert_eq!(once.column(0).collect::<Vec<_>>(), t.column(0).collect::<Vec<_>>());
        }
    }
}
