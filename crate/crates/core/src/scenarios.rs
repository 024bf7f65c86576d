//! Missing-score scenarios for evolving systems.
//!
//! * `add_modality`: a new modality is being rolled out, so a fraction of
//!   rows lack its score while every other modality stays complete;
//! * `merge`: separate systems are merged and scores go missing uniformly
//!   across all cells, with each row keeping at least one score;
//! * `retire`: a modality is being phased out in deployment, so a fraction
//!   of test rows lose it while training rows stay complete.
//!
//! A missing level is a fraction of the cells in the scenario's scope: the
//! target column for `add_modality`, every cell for `merge`, and the target
//! column of the test rows for `retire`. Only completely-at-random drops are
//! simulated.

use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::MaskError;
use crate::model::{DataSplit, ScoreTable};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    AddModality,
    Merge,
    Retire,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::AddModality => "add_modality",
            ScenarioKind::Merge => "merge",
            ScenarioKind::Retire => "retire",
        }
    }

    pub fn needs_target(self) -> bool {
        !matches!(self, ScenarioKind::Merge)
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "add_modality" | "add" => Ok(ScenarioKind::AddModality),
            "merge" => Ok(ScenarioKind::Merge),
            "retire" => Ok(ScenarioKind::Retire),
            other => Err(format!("unknown scenario `{other}` (add_modality, merge, retire)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub tag: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_modality: Option<String>,
}

impl Scenario {
    pub fn add_modality(target: impl Into<String>) -> Self {
        Self {
            tag: ScenarioKind::AddModality,
            target_modality: Some(target.into()),
        }
    }

    pub fn merge() -> Self {
        Self {
            tag: ScenarioKind::Merge,
            target_modality: None,
        }
    }

    pub fn retire(target: impl Into<String>) -> Self {
        Self {
            tag: ScenarioKind::Retire,
            target_modality: Some(target.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    TrainAndTest,
    TestOnly,
}

/// The exact `(row, modality)` cells a scenario blanks, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub level: f64,
    pub scenario: Scenario,
    pub cells: Vec<(usize, usize)>,
    pub seed: u64,
    pub scope: Scope,
    pub n_rows: usize,
    pub n_modalities: usize,
}

impl MaskPlan {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Write the plan as `row_index,modality` CSV.
    pub fn write_csv<W: Write>(&self, table: &ScoreTable, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row_index,modality")?;
        for &(r, m) in &self.cells {
            writeln!(w, "{r},{}", table.modalities().name(m))?;
        }
        w.flush()
    }
}

fn check_level(level: f64) -> Result<(), MaskError> {
    if level.is_finite() && (0.0..=1.0).contains(&level) {
        Ok(())
    } else {
        Err(MaskError::LevelOutOfRange(level))
    }
}

fn target_index(table: &ScoreTable, target: &str) -> Result<usize, MaskError> {
    table
        .modalities()
        .index_of(target)
        .ok_or_else(|| MaskError::UnknownModality(target.to_string()))
}

fn need_two(table: &ScoreTable) -> Result<(), MaskError> {
    match table.n_modalities() {
        n if n < 2 => Err(MaskError::TooFewModalities(n)),
        _ => Ok(()),
    }
}

fn count_for(level: f64, scope_cells: usize) -> usize {
    (level * scope_cells as f64).round() as usize
}

/// Blank `count` target cells among `rows`, choosing only rows where the
/// target is present and at least one other score survives.
fn column_plan(
    table: &ScoreTable,
    rows: &[usize],
    target: usize,
    level: f64,
    seed_value: u64,
    scenario: Scenario,
    scope: Scope,
) -> Result<MaskPlan, MaskError> {
    let count = count_for(level, rows.len());
    let candidates: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&r| {
            let row = &table.rows()[r];
            row.scores[target].is_some() && row.present_count() >= 2
        })
        .collect();
    if count > candidates.len() {
        return Err(MaskError::InfeasibleLevel {
            level,
            reason: format!(
                "{count} cells requested but only {} rows can lose the target and keep a score",
                candidates.len()
            ),
        });
    }
    let mut rng = seed::rng(seed_value);
    let mut cells: Vec<(usize, usize)> = index::sample(&mut rng, candidates.len(), count)
        .into_iter()
        .map(|i| (candidates[i], target))
        .collect();
    cells.sort_unstable();
    Ok(MaskPlan {
        level,
        scenario,
        cells,
        seed: seed_value,
        scope,
        n_rows: table.len(),
        n_modalities: table.n_modalities(),
    })
}

/// Blank `round(level * rows)` cells of the target modality.
pub fn plan_add_modality(table: &ScoreTable, target: &str, level: f64, seed: u64) -> Result<MaskPlan, MaskError> {
    check_level(level)?;
    need_two(table)?;
    let m = target_index(table, target)?;
    let rows: Vec<usize> = (0..table.len()).collect();
    column_plan(
        table,
        &rows,
        m,
        level,
        seed,
        Scenario::add_modality(target),
        Scope::TrainAndTest,
    )
}

/// Blank the target modality in `round(level * test rows)` test rows.
pub fn plan_retire(
    table: &ScoreTable,
    split: &DataSplit,
    target: &str,
    level: f64,
    seed: u64,
) -> Result<MaskPlan, MaskError> {
    check_level(level)?;
    need_two(table)?;
    let m = target_index(table, target)?;
    let rows = split.test_rows(table);
    column_plan(table, &rows, m, level, seed, Scenario::retire(target), Scope::TestOnly)
}

/// Blank `round(level * rows * N)` cells uniformly over the table, then
/// repair rows left without any score.
///
/// Repair walks rows in ascending order. A row whose scores were all drawn
/// gets one of its drawn cells back (chosen uniformly), and one uniformly
/// chosen cell from a row that still has two or more scores is blanked in
/// its place, so the cell count stays exact.
pub fn plan_merge(table: &ScoreTable, level: f64, seed_value: u64) -> Result<MaskPlan, MaskError> {
    check_level(level)?;
    need_two(table)?;
    let n = table.n_modalities();
    let bound = (n - 1) as f64 / n as f64;
    if level * n as f64 > (n - 1) as f64 + 1e-12 {
        return Err(MaskError::InfeasibleLevel {
            level,
            reason: format!("with {n} modalities every row keeps a score only up to level {bound}"),
        });
    }
    let rows = table.len();
    let count = count_for(level, rows * n);

    let present: Vec<bool> = table
        .rows()
        .iter()
        .flat_map(|r| r.scores.iter().map(Option::is_some))
        .collect();
    let candidates: Vec<usize> = (0..rows * n).filter(|&k| present[k]).collect();
    if count + rows > candidates.len() {
        return Err(MaskError::InfeasibleLevel {
            level,
            reason: format!(
                "{count} cells requested but only {} can be blanked while every row keeps a score",
                candidates.len().saturating_sub(rows)
            ),
        });
    }

    let mut rng = seed::rng(seed_value);
    let mut blanked = vec![false; rows * n];
    let mut remaining: Vec<usize> = table.rows().iter().map(|r| r.present_count()).collect();
    for i in index::sample(&mut rng, candidates.len(), count) {
        let k = candidates[i];
        blanked[k] = true;
        remaining[k / n] -= 1;
    }

    for r in 0..rows {
        if remaining[r] > 0 {
            continue;
        }
        let drawn: Vec<usize> = (r * n..(r + 1) * n).filter(|&k| blanked[k]).collect();
        let back = drawn[rng.random_range(0..drawn.len())];
        blanked[back] = false;
        remaining[r] = 1;

        let legal = |k: usize, blanked: &[bool], remaining: &[usize]| present[k] && !blanked[k] && remaining[k / n] >= 2;
        let mut pick = None;
        for _ in 0..64 {
            let k = candidates[rng.random_range(0..candidates.len())];
            if legal(k, &blanked, &remaining) {
                pick = Some(k);
                break;
            }
        }
        let k = match pick {
            Some(k) => k,
            None => {
                let all: Vec<usize> = candidates
                    .iter()
                    .copied()
                    .filter(|&k| legal(k, &blanked, &remaining))
                    .collect();
                // count + rows <= present cells guarantees a donor row exists
                all[rng.random_range(0..all.len())]
            }
        };
        blanked[k] = true;
        remaining[k / n] -= 1;
    }

    let cells = (0..rows * n).filter(|&k| blanked[k]).map(|k| (k / n, k % n)).collect();
    Ok(MaskPlan {
        level,
        scenario: Scenario::merge(),
        cells,
        seed: seed_value,
        scope: Scope::TrainAndTest,
        n_rows: rows,
        n_modalities: n,
    })
}

/// Build the plan for any scenario. `split` is required for `retire`.
pub fn plan(
    table: &ScoreTable,
    scenario: &Scenario,
    split: Option<&DataSplit>,
    level: f64,
    seed: u64,
) -> Result<MaskPlan, MaskError> {
    let target = || {
        scenario
            .target_modality
            .as_deref()
            .ok_or_else(|| MaskError::UnknownModality("<none>".into()))
    };
    match scenario.tag {
        ScenarioKind::AddModality => plan_add_modality(table, target()?, level, seed),
        ScenarioKind::Merge => plan_merge(table, level, seed),
        ScenarioKind::Retire => {
            let split = split.ok_or_else(|| MaskError::InfeasibleLevel {
                level,
                reason: "the retire scenario needs a train/test split".into(),
            })?;
            plan_retire(table, split, target()?, level, seed)
        }
    }
}

/// Return a copy of `table` with the plan's cells blanked.
pub fn apply(table: &ScoreTable, plan: &MaskPlan) -> Result<ScoreTable, MaskError> {
    let shape_err = || MaskError::ShapeMismatch {
        plan_rows: plan.n_rows,
        plan_modalities: plan.n_modalities,
        rows: table.len(),
        modalities: table.n_modalities(),
    };
    if plan.n_rows != table.len() || plan.n_modalities != table.n_modalities() {
        return Err(shape_err());
    }
    if plan.cells.iter().any(|&(r, m)| r >= table.len() || m >= table.n_modalities()) {
        return Err(shape_err());
    }
    let normalized = table.is_normalized();
    let (modalities, mut rows, _) = table.clone().into_rows();
    for &(r, m) in &plan.cells {
        rows[r].scores[m] = None;
    }
    Ok(ScoreTable::from_edited_rows(modalities, rows, normalized)?)
}
