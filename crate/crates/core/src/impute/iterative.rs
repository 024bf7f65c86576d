//! Chained-equation imputation.
//!
//! Missing cells start at the training column mean. Each sweep visits the
//! modalities in column order; for modality `m` a regressor is fitted on the
//! training rows where `m` was originally observed (features: the current
//! values of every other modality) and its clamped predictions replace the
//! missing `m` cells. Sweeps stop once the largest change falls below the
//! tolerance or the iteration cap is hit.
//!
//! Applying a fitted imputer replays the final regressors on new rows for
//! the same number of sweeps. Each row is then independent of every other.

use crate::error::ImputeError;
use crate::exec;
use crate::model::ScoreTable;

use super::{ColumnStats, Convergence, FittedImputer, ImputerSpec, Regressor};

fn features_without(row: &[f64], skip: usize, out: &mut Vec<f64>) {
    out.extend(row.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, v)| *v));
}

pub(super) fn fit(
    table: &ScoreTable,
    train_rows: &[usize],
    spec: &ImputerSpec,
    columns: Vec<ColumnStats>,
) -> Result<FittedImputer, ImputeError> {
    let n_mod = table.n_modalities();
    if n_mod < 2 {
        return Err(ImputeError::TooFewModalities(n_mod));
    }
    let n = train_rows.len();
    let mut values = Vec::with_capacity(n * n_mod);
    let mut observed: Vec<Vec<usize>> = vec![Vec::new(); n_mod];
    let mut missing: Vec<Vec<usize>> = vec![Vec::new(); n_mod];
    for (i, &r) in train_rows.iter().enumerate() {
        for (m, cell) in table.rows()[r].scores.iter().enumerate() {
            match cell {
                Some(v) => {
                    values.push(*v);
                    observed[m].push(i);
                }
                None => {
                    values.push(columns[m].mean);
                    missing[m].push(i);
                }
            }
        }
    }
    let required = spec.min_observed_rows();
    for (m, rows) in observed.iter().enumerate() {
        if rows.len() < required {
            return Err(ImputeError::NotEnoughObservedRows {
                modality: table.modalities().name(m).to_string(),
                found: rows.len(),
                required,
            });
        }
    }
    let any_missing = missing.iter().any(|rows| !rows.is_empty());
    let width = n_mod - 1;
    let mut regressors: Vec<Regressor> = Vec::with_capacity(n_mod);
    let mut convergence = Convergence {
        iterations_run: 0,
        final_max_delta: 0.0,
        converged: false,
    };

    for sweep in 1..=spec.max_iterations {
        let mut max_delta: f64 = 0.0;
        regressors.clear();
        for m in 0..n_mod {
            let mut x = Vec::with_capacity(observed[m].len() * width);
            let mut y = Vec::with_capacity(observed[m].len());
            for &i in &observed[m] {
                let row = &values[i * n_mod..(i + 1) * n_mod];
                features_without(row, m, &mut x);
                y.push(row[m]);
            }
            let regressor = Regressor::fit(spec, &x, width, &y).map_err(|source| ImputeError::RegressorFitFailure {
                modality: table.modalities().name(m).to_string(),
                source,
            })?;
            let predictions = exec::map_slice(&missing[m], |&i| {
                let mut q = Vec::with_capacity(width);
                features_without(&values[i * n_mod..(i + 1) * n_mod], m, &mut q);
                regressor.predict(&q).clamp(0.0, 1.0)
            });
            for (&i, p) in missing[m].iter().zip(predictions) {
                let cell = &mut values[i * n_mod + m];
                max_delta = max_delta.max((p - *cell).abs());
                *cell = p;
            }
            regressors.push(regressor);
        }
        convergence = Convergence {
            iterations_run: sweep,
            final_max_delta: max_delta,
            converged: !any_missing || max_delta < spec.tolerance,
        };
        if convergence.converged {
            break;
        }
    }

    Ok(FittedImputer {
        spec: spec.clone(),
        modalities: table.modalities().names().to_vec(),
        columns,
        regressors,
        convergence: Some(convergence),
    })
}

pub(super) fn apply(fitted: &FittedImputer, table: &ScoreTable) -> ScoreTable {
    let sweeps = fitted.convergence.map_or(1, |c| c.iterations_run.max(1));
    let n_mod = table.n_modalities();
    let normalized = table.is_normalized();
    let (modalities, rows, _) = table.clone().into_rows();
    let rows = exec::map_slice(&rows, |row| {
        if row.is_complete() {
            return row.clone();
        }
        let holes: Vec<usize> = (0..n_mod).filter(|&m| row.scores[m].is_none()).collect();
        let mut values: Vec<f64> = row
            .scores
            .iter()
            .enumerate()
            .map(|(m, s)| s.unwrap_or(fitted.columns[m].mean))
            .collect();
        let mut q = Vec::with_capacity(n_mod - 1);
        for _ in 0..sweeps {
            for &m in &holes {
                q.clear();
                features_without(&values, m, &mut q);
                values[m] = fitted.regressors[m].predict(&q).clamp(0.0, 1.0);
            }
        }
        let mut out = row.clone();
        for &m in &holes {
            out.scores[m] = Some(values[m]);
        }
        out
    });
    ScoreTable::from_parts(modalities, rows, normalized)
}

#[cfg(test)]
mod tests {
    use super::super::{fit as fit_imputer, impute, ImputerSpec, RegressorKind};
    use crate::error::ImputeError;
    use crate::model::fixtures::{square, four_subjects};
    use crate::model::{build_table, ModalitySet, RawRow};

    fn correlated(n: usize, hole_every: usize) -> crate::model::ScoreTable {
        let modalities = ModalitySet::new(["a", "b", "c"]).unwrap();
        let rows = (0..n)
            .map(|i| {
                let t = (i as f64 * 0.6180339887).fract();
                let mut scores = vec![Some(t), Some(0.9 * t + 0.05), Some(1.0 - t)];
                if i % hole_every == 0 {
                    scores[i % 3] = None;
                }
                RawRow::new(format!("p{i}"), format!("g{i}"), scores)
            })
            .collect();
        build_table(modalities, rows).unwrap()
    }

    #[test]
    fn complete_table_takes_one_sweep() {
        let t = square(6, 3, |p, g, k| ((p * 7 + g * 3 + k) % 11) as f64 / 10.0);
        let train: Vec<usize> = (0..t.len()).collect();
        let (out, fitted) = impute(&t, &train, &ImputerSpec::iterative(RegressorKind::Knn)).unwrap();
        let c = fitted.convergence.unwrap();
        assert_eq!(c.iterations_run, 1);
        assert!(c.converged);
        assert_eq!(out, t);
    }

    #[test]
    fn recovers_linear_structure() {
        let t = correlated(300, 4);
        let train: Vec<usize> = (0..t.len()).collect();
        for kind in [RegressorKind::BayesianRidge, RegressorKind::Knn, RegressorKind::Cart] {
            let (out, fitted) = impute(&t, &train, &ImputerSpec::iterative(kind)).unwrap();
            assert_eq!(out.missing_count(), 0);
            let mut worst: f64 = 0.0;
            for r in 0..t.len() {
                let truth = (r as f64 * 0.6180339887).fract();
                let v = out.score(r, 0).unwrap();
                if t.score(r, 0).is_none() {
                    worst = worst.max((v - truth).abs());
                }
            }
            assert!(worst < 0.1, "{kind}: worst error {worst}");
            assert!(fitted.convergence.unwrap().iterations_run >= 1);
        }
    }

    #[test]
    fn output_clamped_and_present_untouched() {
        let t = correlated(120, 3);
        let train: Vec<usize> = (0..60).collect();
        let fitted = fit_imputer(&t, &train, &ImputerSpec::iterative(RegressorKind::BayesianRidge)).unwrap();
        let out = fitted.apply(&t).unwrap();
        for r in 0..t.len() {
            for m in 0..3 {
                let v = out.score(r, m).unwrap();
                assert!((0.0..=1.0).contains(&v));
                if let Some(orig) = t.score(r, m) {
                    assert_eq!(v.to_bits(), orig.to_bits());
                }
            }
        }
    }

    #[test]
    fn json_round_trip_reproduces() {
        let t = correlated(90, 3);
        let train: Vec<usize> = (0..60).collect();
        for kind in [RegressorKind::BayesianRidge, RegressorKind::Knn, RegressorKind::Cart] {
            let fitted = fit_imputer(&t, &train, &ImputerSpec::iterative(kind)).unwrap();
            let back = super::super::FittedImputer::from_json(&fitted.to_json()).unwrap();
            assert_eq!(back.apply(&t).unwrap(), fitted.apply(&t).unwrap());
        }
    }

    #[test]
    fn too_few_observed() {
        let t = four_subjects();
        let err = fit_imputer(&t, &[0, 1, 2, 3], &ImputerSpec::iterative(RegressorKind::Knn)).unwrap_err();
        assert_eq!(
            err,
            ImputeError::NotEnoughObservedRows {
                modality: "face".into(),
                found: 3,
                required: 5
            }
        );
        // two observed rows are enough for ridge
        assert!(fit_imputer(&t, &[0, 1, 2, 3], &ImputerSpec::iterative(RegressorKind::BayesianRidge)).is_ok());
    }

    #[test]
    fn single_modality_rejected() {
        let t = square(3, 1, |p, g, _| if p == g { 0.9 } else { 0.1 });
        let train: Vec<usize> = (0..t.len()).collect();
        assert_eq!(
            fit_imputer(&t, &train, &ImputerSpec::iterative(RegressorKind::Knn)).unwrap_err(),
            ImputeError::TooFewModalities(1)
        );
    }
}
