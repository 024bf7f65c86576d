use crate::error::ImputeError;
use crate::model::ScoreTable;

use super::{fit, ColumnStats, ImputerSpec, Method};

/// Mean and median of each modality over the present scores of `train_rows`.
pub(crate) fn column_stats(table: &ScoreTable, train_rows: &[usize]) -> Result<Vec<ColumnStats>, ImputeError> {
    (0..table.n_modalities())
        .map(|m| {
            let mut values: Vec<f64> = train_rows.iter().filter_map(|&r| table.rows()[r].scores[m]).collect();
            if values.is_empty() {
                return Err(ImputeError::EmptyColumn {
                    modality: table.modalities().name(m).to_string(),
                });
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            values.sort_by(f64::total_cmp);
            let mid = values.len() / 2;
            let median = if values.len() % 2 == 1 {
                values[mid]
            } else {
                (values[mid - 1] + values[mid]) / 2.0
            };
            Ok(ColumnStats {
                mean,
                median,
                observed: values.len(),
            })
        })
        .collect()
}

/// Fill every missing cell of modality `m` with `value(m)`.
pub(crate) fn fill(table: &ScoreTable, value: impl Fn(usize) -> f64) -> ScoreTable {
    let normalized = table.is_normalized();
    let (modalities, mut rows, _) = table.clone().into_rows();
    for row in &mut rows {
        for (m, cell) in row.scores.iter_mut().enumerate() {
            if cell.is_none() {
                *cell = Some(value(m));
            }
        }
    }
    ScoreTable::from_parts(modalities, rows, normalized)
}

/// Replace missing scores with the training mean of their modality.
pub fn impute_mean(table: &ScoreTable, train_rows: &[usize]) -> Result<ScoreTable, ImputeError> {
    fit(table, train_rows, &ImputerSpec::new(Method::Mean))?.apply(table)
}

/// Replace missing scores with the training median of their modality.
pub fn impute_median(table: &ScoreTable, train_rows: &[usize]) -> Result<ScoreTable, ImputeError> {
    fit(table, train_rows, &ImputerSpec::new(Method::Median))?.apply(table)
}

/// Keep only complete rows.
pub fn listwise_delete(table: &ScoreTable) -> ScoreTable {
    table.filter_rows(|row| row.is_complete())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::four_subjects;

    #[test]
    fn four_subjects_mean() {
        let t = four_subjects();
        let out = impute_mean(&t, &[0, 1, 2, 3]).unwrap();
        assert!((out.score(0, 0).unwrap() - 1.53 / 3.0).abs() < 1e-12);
        assert!((out.score(2, 1).unwrap() - 1.63 / 3.0).abs() < 1e-12);
        assert_eq!(out.missing_count(), 0);
    }

    #[test]
    fn four_subjects_median() {
        let t = four_subjects();
        let out = impute_median(&t, &[0, 1, 2, 3]).unwrap();
        assert_eq!(out.score(0, 0), Some(0.41));
        assert_eq!(out.score(2, 1), Some(0.74));
    }

    #[test]
    fn even_median_averages() {
        let t = four_subjects();
        // face present in rows 1 and 2 only: 0.41 and 0.27
        let stats = column_stats(&t, &[0, 1, 2]).unwrap();
        assert!((stats[0].median - 0.34).abs() < 1e-12);
        assert_eq!(stats[0].observed, 2);
    }

    #[test]
    fn empty_column() {
        let t = four_subjects();
        assert_eq!(
            impute_mean(&t, &[0]).unwrap_err(),
            ImputeError::EmptyColumn { modality: "face".into() }
        );
    }

    #[test]
    fn listwise() {
        let t = four_subjects();
        let out = listwise_delete(&t);
        assert_eq!(out.len(), 2);
        assert!(out.is_complete());
    }

    #[test]
    fn present_scores_untouched() {
        let t = four_subjects();
        let out = impute_median(&t, &[0, 1, 2, 3]).unwrap();
        for r in 0..t.len() {
            for m in 0..3 {
                if let Some(v) = t.score(r, m) {
                    assert_eq!(out.score(r, m), Some(v));
                }
            }
        }
    }
}
