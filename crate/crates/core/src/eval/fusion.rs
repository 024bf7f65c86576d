use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, IngestError};
use crate::ingest::{csv_err, parse_score};
use crate::model::{Id, Label, ScoreTable};

/// How the fused scores were obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Complete,
    Imputed(String),
    AvailableOnly,
    Listwise,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Complete => f.write_str("complete"),
            Self::Imputed(method) => write!(f, "imputed:{method}"),
            Self::AvailableOnly => f.write_str("available_only"),
            Self::Listwise => f.write_str("listwise"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedRow {
    pub probe_id: Id,
    pub gallery_id: Id,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedScores {
    pub rows: Vec<FusedRow>,
    pub provenance: Provenance,
}

impl FusedScores {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn genuine_count(&self) -> usize {
        self.rows.iter().filter(|r| r.label == Label::Genuine).count()
    }

    pub fn impostor_count(&self) -> usize {
        self.len() - self.genuine_count()
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

/// Fused score = mean of the row's present scores.
///
/// With `skip_missing == false` every row must be complete.
pub fn fuse_simple_sum(table: &ScoreTable, skip_missing: bool) -> Result<FusedScores, EvalError> {
    let mut rows = Vec::with_capacity(table.len());
    for (index, row) in table.rows().iter().enumerate() {
        let mut sum = 0.0;
        let mut count = 0usize;
        for score in row.scores.iter().flatten() {
            sum += score;
            count += 1;
        }
        if count == 0 {
            return Err(EvalError::RowWithNoScores { row: index });
        }
        if !skip_missing && count < row.scores.len() {
            return Err(EvalError::IncompleteWithSkipDisabled { row: index });
        }
        rows.push(FusedRow {
            probe_id: row.probe_id.clone(),
            gallery_id: row.gallery_id.clone(),
            label: row.label,
            score: sum / count as f64,
        });
    }
    let provenance = if table.is_complete() {
        Provenance::Complete
    } else {
        Provenance::AvailableOnly
    };
    Ok(FusedScores { rows, provenance })
}

const FUSED_HEADER: [&str; 4] = ["probe_id", "gallery_id", "label", "score"];

/// `probe_id,gallery_id,label,score`, one line per row.
pub fn write_fused_csv<W: Write>(fused: &FusedScores, w: W) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(FUSED_HEADER)?;
    for row in &fused.rows {
        out.write_record([
            &*row.probe_id,
            &*row.gallery_id,
            row.label.as_str(),
            &row.score.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Parse the CSV written by [`write_fused_csv`]. Provenance is not stored in
/// the file and comes back as `available_only`.
pub fn read_fused_csv<R: Read>(reader: R) -> Result<FusedScores, IngestError> {
    let here = Path::new("<fused csv>");
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(here, e))?.clone();
    if header.iter().collect::<Vec<_>>() != FUSED_HEADER {
        return Err(IngestError::MalformedLine {
            line: 1,
            reason: format!("expected header `{}`", FUSED_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(here, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let label = match &record[2] {
            "genuine" => Label::Genuine,
            "impostor" => Label::Impostor,
            other => {
                return Err(IngestError::MalformedLine {
                    line,
                    reason: format!("label `{other}` is neither genuine nor impostor"),
                })
            }
        };
        let score = parse_score(&record[3]).ok_or_else(|| IngestError::NonNumericScore {
            line,
            field: record[3].to_string(),
        })?;
        rows.push(FusedRow {
            probe_id: Id::from(&record[0]),
            gallery_id: Id::from(&record[1]),
            label,
            score,
        });
    }
    Ok(FusedScores {
        rows,
        provenance: Provenance::AvailableOnly,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::four_subjects;

    #[test]
    fn four_subjects_fusion() {
        let t = four_subjects();
        assert_eq!(
            fuse_simple_sum(&t, false).unwrap_err(),
            EvalError::IncompleteWithSkipDisabled { row: 0 }
        );
        let f = fuse_simple_sum(&t, true).unwrap();
        assert_eq!(f.provenance, Provenance::AvailableOnly);
        assert!((f.rows[0].score - 0.87).abs() < 1e-12);
        assert!((f.rows[1].score - 0.59).abs() < 1e-12);
    }

    #[test]
    fn complete_provenance_and_equal_scores() {
        let t = crate::model::fixtures::square(2, 4, |_, _, _| 0.5);
        let f = fuse_simple_sum(&t, false).unwrap();
        assert_eq!(f.provenance, Provenance::Complete);
        assert!(f.rows.iter().all(|r| r.score == 0.5));
        assert_eq!(f.genuine_count(), 2);
        assert_eq!(f.impostor_count(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let f = fuse_simple_sum(&four_subjects(), true).unwrap();
        let mut buf = Vec::new();
        write_fused_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("probe_id,gallery_id,label,score\ns1,s1,genuine,0.8"));
        assert_eq!(read_fused_csv(&buf[..]).unwrap(), f);
        assert!(read_fused_csv("probe_id,gallery_id,label,score\na,b,maybe,0.1\n".as_bytes()).is_err());
    }
}
