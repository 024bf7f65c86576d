//! Core domain types: modality sets, comparison rows, score tables and
//! probe-level train/test splits.
//!
//! A missing score is always an explicit `None` cell. Zero is a legal score.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::seed;

/// Identity token for probes and gallery entries.
pub type Id = Arc<str>;

/// Ordered list of distinct modality names. The order defines the column
/// order of every table built over it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ModalitySet {
    names: Vec<String>,
}

impl ModalitySet {
    pub fn new<I, S>(names: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(ModelError::EmptyModalitySet);
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(ModelError::EmptyModalityName);
            }
            if !seen.insert(name.as_str()) {
                return Err(ModelError::DuplicateModality(name.clone()));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, ModelError> {
        self.index_of(name)
            .ok_or_else(|| ModelError::UnknownModality(name.to_string()))
    }

    /// The same set with modality `index` removed.
    pub fn without(&self, index: usize) -> Result<Self, ModelError> {
        let names = self
            .names
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, n)| n.clone());
        Self::new(names)
    }
}

impl TryFrom<Vec<String>> for ModalitySet {
    type Error = ModelError;

    fn try_from(names: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(names)
    }
}

impl From<ModalitySet> for Vec<String> {
    fn from(set: ModalitySet) -> Self {
        set.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Genuine,
    Impostor,
}

impl Label {
    /// Genuine exactly when the probe and gallery identities match.
    pub fn from_ids(probe: &str, gallery: &str) -> Self {
        if probe == gallery {
            Label::Genuine
        } else {
            Label::Impostor
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Genuine => "genuine",
            Label::Impostor => "impostor",
        }
    }
}

/// One probe-versus-gallery comparison with one optional score per modality.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub probe_id: Id,
    pub gallery_id: Id,
    pub label: Label,
    pub scores: Vec<Option<f64>>,
}

impl ComparisonRow {
    pub fn present_count(&self) -> usize {
        self.scores.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.scores.iter().all(Option::is_some)
    }
}

/// Unvalidated input record for [`build_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub probe_id: String,
    pub gallery_id: String,
    pub scores: Vec<Option<f64>>,
}

impl RawRow {
    pub fn new(probe_id: impl Into<String>, gallery_id: impl Into<String>, scores: Vec<Option<f64>>) -> Self {
        Self {
            probe_id: probe_id.into(),
            gallery_id: gallery_id.into(),
            scores,
        }
    }
}

/// A validated set of comparison rows over a fixed modality set.
///
/// Invariants: `(probe_id, gallery_id)` pairs are unique, every present
/// score is finite, and every row has at least one present score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    modalities: ModalitySet,
    rows: Vec<ComparisonRow>,
    normalized: bool,
}

/// Validate raw records into a [`ScoreTable`]. Labels come from id equality.
pub fn build_table(modalities: ModalitySet, rows: Vec<RawRow>) -> Result<ScoreTable, ModelError> {
    let n = modalities.len();
    let mut seen: HashSet<(Id, Id)> = HashSet::with_capacity(rows.len());
    let mut out = Vec::with_capacity(rows.len());
    for (index, raw) in rows.into_iter().enumerate() {
        if raw.scores.len() != n {
            return Err(ModelError::ArityMismatch {
                row: index,
                expected: n,
                found: raw.scores.len(),
            });
        }
        if let Some(m) = raw.scores.iter().position(|s| matches!(s, Some(v) if !v.is_finite())) {
            return Err(ModelError::NonFiniteScore { row: index, modality: m });
        }
        if raw.scores.iter().all(Option::is_none) {
            return Err(ModelError::AllScoresMissing { row: index });
        }
        let probe: Id = Arc::from(raw.probe_id);
        let gallery: Id = Arc::from(raw.gallery_id);
        if !seen.insert((probe.clone(), gallery.clone())) {
            return Err(ModelError::DuplicatePair {
                probe: probe.to_string(),
                gallery: gallery.to_string(),
            });
        }
        out.push(ComparisonRow {
            label: Label::from_ids(&probe, &gallery),
            probe_id: probe,
            gallery_id: gallery,
            scores: raw.scores,
        });
    }
    Ok(ScoreTable {
        modalities,
        rows: out,
        normalized: false,
    })
}

impl ScoreTable {
    pub fn empty(modalities: ModalitySet) -> Self {
        Self {
            modalities,
            rows: Vec::new(),
            normalized: false,
        }
    }

    /// Assemble a table from rows that already satisfy the invariants.
    pub(crate) fn from_parts(modalities: ModalitySet, rows: Vec<ComparisonRow>, normalized: bool) -> Self {
        debug_assert!(rows.iter().all(|r| r.scores.len() == modalities.len()));
        Self {
            modalities,
            rows,
            normalized,
        }
    }

    /// Like [`ScoreTable::from_parts`] but re-checks the per-row invariants
    /// that a cell-level edit can break.
    pub(crate) fn from_edited_rows(
        modalities: ModalitySet,
        rows: Vec<ComparisonRow>,
        normalized: bool,
    ) -> Result<Self, ModelError> {
        for (index, row) in rows.iter().enumerate() {
            if row.scores.iter().all(Option::is_none) {
                return Err(ModelError::AllScoresMissing { row: index });
            }
            if let Some(m) = row.scores.iter().position(|s| matches!(s, Some(v) if !v.is_finite())) {
                return Err(ModelError::NonFiniteScore { row: index, modality: m });
            }
        }
        Ok(Self::from_parts(modalities, rows, normalized))
    }

    pub fn modalities(&self) -> &ModalitySet {
        &self.modalities
    }

    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn rows(&self) -> &[ComparisonRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn score(&self, row: usize, modality: usize) -> Option<f64> {
        self.rows[row].scores[modality]
    }

    pub fn column(&self, modality: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        self.rows.iter().map(move |r| r.scores[modality])
    }

    pub fn genuine_count(&self) -> usize {
        self.rows.iter().filter(|r| r.label == Label::Genuine).count()
    }

    pub fn impostor_count(&self) -> usize {
        self.rows.iter().filter(|r| r.label == Label::Impostor).count()
    }

    pub fn present_count(&self) -> usize {
        self.rows.iter().map(ComparisonRow::present_count).sum()
    }

    pub fn missing_count(&self) -> usize {
        self.rows.len() * self.n_modalities() - self.present_count()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(ComparisonRow::is_complete)
    }

    /// Row-major missingness mask.
    pub fn mask(&self) -> Vec<bool> {
        self.rows
            .iter()
            .flat_map(|r| r.scores.iter().map(Option::is_none))
            .collect()
    }

    /// Distinct probe ids in order of first appearance.
    pub fn probe_ids(&self) -> Vec<Id> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.probe_id.clone()))
            .map(|r| r.probe_id.clone())
            .collect()
    }

    /// Indices of rows whose probe is in `probes`, ascending.
    pub fn rows_for_probes(&self, probes: &BTreeSet<String>) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| probes.contains(&*r.probe_id))
            .map(|(i, _)| i)
            .collect()
    }

    /// A new table holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> ScoreTable {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        Self::from_parts(self.modalities.clone(), rows, self.normalized)
    }

    /// Drop one modality column. Fails if a row would be left with no score.
    pub fn without_modality(&self, modality: usize) -> Result<ScoreTable, ModelError> {
        let modalities = self.modalities.without(modality)?;
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut row = r.clone();
                row.scores.remove(modality);
                row
            })
            .collect();
        Self::from_edited_rows(modalities, rows, self.normalized)
    }

    /// Keep only rows matching `keep`.
    pub fn filter_rows(&self, mut keep: impl FnMut(&ComparisonRow) -> bool) -> ScoreTable {
        let rows = self.rows.iter().filter(|r| keep(r)).cloned().collect();
        Self::from_parts(self.modalities.clone(), rows, self.normalized)
    }

    pub(crate) fn into_rows(self) -> (ModalitySet, Vec<ComparisonRow>, bool) {
        (self.modalities, self.rows, self.normalized)
    }
}

/// Disjoint partition of probe identities into train and test sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train_probe_ids: BTreeSet<String>,
    pub test_probe_ids: BTreeSet<String>,
}

impl DataSplit {
    pub fn train_rows(&self, table: &ScoreTable) -> Vec<usize> {
        table.rows_for_probes(&self.train_probe_ids)
    }

    pub fn test_rows(&self, table: &ScoreTable) -> Vec<usize> {
        table.rows_for_probes(&self.test_probe_ids)
    }
}

/// Split probe identities into train and test sides.
///
/// Identities are sorted, shuffled with a generator seeded from `seed`, and
/// the first `round(fraction * n)` (clamped to `[1, n - 1]`) go to training.
/// All rows of one probe land on the same side; the gallery is never split.
pub fn split_by_probe(table: &ScoreTable, fraction: f64, seed: u64) -> Result<DataSplit, ModelError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(ModelError::InvalidFraction(fraction));
    }
    let mut ids: Vec<String> = table
        .rows
        .iter()
        .map(|r| r.probe_id.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = ids.len();
    if n < 2 {
        return Err(ModelError::TooFewIdentities { found: n });
    }
    ids.shuffle(&mut seed::rng(seed));
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let test = ids.split_off(n_train);
    Ok(DataSplit {
        train_probe_ids: ids.into_iter().collect(),
        test_probe_ids: test.into_iter().collect(),
    })
}
