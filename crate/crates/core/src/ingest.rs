//! Score-file formats.
//!
//! * long CSV, the canonical interchange format: `probe_id,gallery_id,modality,score`,
//!   one present score per line;
//! * wide CSV: `probe_id,gallery_id,<modality...>`, empty field = missing;
//! * BSSR1-style matrix set: one whitespace-separated square similarity
//!   matrix per modality, row = probe, column = gallery, diagonal = genuine.
//!
//! Scores are written with Rust's shortest round-trip float formatting, so
//! reading a written file reproduces every score bit for bit.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::exec;
use crate::model::{build_table, ModalitySet, RawRow, ScoreTable};

pub const LONG_HEADER: [&str; 4] = ["probe_id", "gallery_id", "modality", "score"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    LongCsv,
    WideCsv,
    Bssr1MatrixSet,
}

impl FileFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            FileFormat::LongCsv => "long_csv",
            FileFormat::WideCsv => "wide_csv",
            FileFormat::Bssr1MatrixSet => "bssr1_matrix_set",
        }
    }
}

impl fmt::Display for FileFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FileFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "long_csv" | "long" => Ok(FileFormat::LongCsv),
            "wide_csv" | "wide" => Ok(FileFormat::WideCsv),
            "bssr1_matrix_set" | "bssr1" => Ok(FileFormat::Bssr1MatrixSet),
            other => Err(format!("unknown file format `{other}`")),
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => IngestError::MalformedLine {
            line,
            reason: format!("{other:?}"),
        },
    }
}

pub(crate) fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(io_err(path))
}

pub(crate) fn parse_score(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Guess long vs wide CSV from the header line.
pub fn detect_csv_format(path: impl AsRef<Path>) -> Result<FileFormat, IngestError> {
    let path = path.as_ref();
    let mut first = String::new();
    BufReader::new(open(path)?)
        .read_line(&mut first)
        .map_err(io_err(path))?;
    let header: Vec<&str> = first.trim_end_matches(['\r', '\n']).split(',').collect();
    if header == LONG_HEADER {
        Ok(FileFormat::LongCsv)
    } else {
        Ok(FileFormat::WideCsv)
    }
}

/// Read a long or wide CSV, detecting which from the header.
pub fn read_csv_auto(path: impl AsRef<Path>, modalities: Option<&ModalitySet>) -> Result<ScoreTable, IngestError> {
    let path = path.as_ref();
    match detect_csv_format(path)? {
        FileFormat::LongCsv => read_long_csv(path, modalities),
        _ => read_wide_csv(path),
    }
}

pub fn read_long_csv(path: impl AsRef<Path>, modalities: Option<&ModalitySet>) -> Result<ScoreTable, IngestError> {
    let path = path.as_ref();
    read_long_csv_from(open(path)?, modalities).map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parse long-form CSV. Modalities are taken from `modalities` when given,
/// otherwise inferred in order of first appearance. Rows are assembled per
/// `(probe, gallery)` in order of first appearance.
pub fn read_long_csv_from<R: Read>(reader: R, modalities: Option<&ModalitySet>) -> Result<ScoreTable, IngestError> {
    let here = Path::new("<long csv>");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(here, e))?.clone();
    if header.iter().collect::<Vec<_>>() != LONG_HEADER {
        return Err(IngestError::MalformedLine {
            line: 1,
            reason: format!("expected header `{}`", LONG_HEADER.join(",")),
        });
    }

    let mut names: IndexMap<String, ()> = match modalities {
        Some(m) => m.names().iter().map(|n| (n.clone(), ())).collect(),
        None => IndexMap::new(),
    };
    let mut pairs: IndexMap<(String, String), Vec<(usize, f64)>> = IndexMap::new();

    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(here, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(IngestError::MalformedLine {
                line,
                reason: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let (probe, gallery, modality, score) = (&record[0], &record[1], &record[2], &record[3]);
        if probe.is_empty() || gallery.is_empty() {
            return Err(IngestError::MalformedLine {
                line,
                reason: "empty identity".into(),
            });
        }
        let score = parse_score(score).ok_or_else(|| IngestError::MalformedLine {
            line,
            reason: format!("score `{score}` is not a finite number"),
        })?;
        let m = match names.get_index_of(modality) {
            Some(i) => i,
            None if modalities.is_none() && !modality.is_empty() => names.insert_full(modality.to_string(), ()).0,
            None => {
                return Err(IngestError::UnknownModality {
                    line,
                    name: modality.to_string(),
                })
            }
        };
        let cells = pairs.entry((probe.to_string(), gallery.to_string())).or_default();
        if cells.iter().any(|&(k, _)| k == m) {
            return Err(IngestError::DuplicateCell {
                line,
                probe: probe.to_string(),
                gallery: gallery.to_string(),
                modality: modality.to_string(),
            });
        }
        cells.push((m, score));
    }

    let set = match modalities {
        Some(m) => m.clone(),
        None if names.is_empty() => {
            return Err(IngestError::MalformedLine {
                line: 1,
                reason: "no records and no modality list: cannot infer modalities".into(),
            })
        }
        None => ModalitySet::new(names.into_keys())?,
    };
    let n = set.len();
    let rows = pairs
        .into_iter()
        .map(|((probe, gallery), cells)| {
            let mut scores = vec![None; n];
            for (m, v) in cells {
                scores[m] = Some(v);
            }
            RawRow::new(probe, gallery, scores)
        })
        .collect();
    Ok(build_table(set, rows)?)
}

pub fn read_wide_csv(path: impl AsRef<Path>) -> Result<ScoreTable, IngestError> {
    let path = path.as_ref();
    read_wide_csv_from(open(path)?).map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_wide_csv_from<R: Read>(reader: R) -> Result<ScoreTable, IngestError> {
    let here = Path::new("<wide csv>");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(here, e))?.clone();
    if header.len() < 3 || &header[0] != "probe_id" || &header[1] != "gallery_id" {
        return Err(IngestError::MalformedLine {
            line: 1,
            reason: "expected header `probe_id,gallery_id,<modality...>`".into(),
        });
    }
    let set = ModalitySet::new(header.iter().skip(2).map(str::to_string))?;
    let width = header.len();

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(here, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(IngestError::RaggedRow {
                line,
                expected: width,
                found: record.len(),
            });
        }
        let scores = record
            .iter()
            .skip(2)
            .map(|field| {
                if field.trim().is_empty() {
                    Ok(None)
                } else {
                    parse_score(field).map(Some).ok_or_else(|| IngestError::NonNumericScore {
                        line,
                        field: field.to_string(),
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(RawRow::new(&record[0], &record[1], scores));
    }
    Ok(build_table(set, rows)?)
}

/// Parse one square matrix file. Blank lines are ignored.
pub fn read_matrix(path: impl AsRef<Path>, size: usize) -> Result<Vec<f64>, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut values = Vec::with_capacity(size * size);
    let mut row = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let before = values.len();
        for token in line.split_whitespace() {
            let v = parse_score(token).ok_or_else(|| IngestError::NonNumericScore {
                line: row as u64,
                field: token.to_string(),
            })?;
            values.push(v);
        }
        let found = values.len() - before;
        if row > size {
            // a row past the end of the matrix: no values were expected here
            return Err(IngestError::ShapeMismatch {
                file: path.to_path_buf(),
                row,
                expected: 0,
                found,
            });
        }
        if found != size {
            return Err(IngestError::ShapeMismatch {
                file: path.to_path_buf(),
                row,
                expected: size,
                found,
            });
        }
    }
    if row != size {
        return Err(IngestError::ShapeMismatch {
            file: path.to_path_buf(),
            row: row + 1,
            expected: size,
            found: 0,
        });
    }
    Ok(values)
}

/// Read one `gallery_size x gallery_size` matrix per modality. Probe `i`
/// and gallery entry `j` get identity tokens `"i"` and `"j"`.
pub fn read_bssr1_matrix_set<P: AsRef<Path> + Sync>(
    files: &[(String, P)],
    gallery_size: usize,
) -> Result<ScoreTable, IngestError> {
    let set = ModalitySet::new(files.iter().map(|(name, _)| name.clone()))?;
    let matrices = exec::map_slice(files, |(_, path)| read_matrix(path, gallery_size))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<String> = (0..gallery_size).map(|i| i.to_string()).collect();
    let mut rows = Vec::with_capacity(gallery_size * gallery_size);
    for p in 0..gallery_size {
        for g in 0..gallery_size {
            let k = p * gallery_size + g;
            let scores = matrices.iter().map(|m| Some(m[k])).collect();
            rows.push(RawRow::new(ids[p].clone(), ids[g].clone(), scores));
        }
    }
    Ok(build_table(set, rows)?)
}

/// Score inventory of a table, per modality and in total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Inventory {
    pub per_modality: usize,
    pub genuine_per_modality: usize,
    pub impostor_per_modality: usize,
    pub total: usize,
}

impl Inventory {
    /// NIST BSSR1 Set 1: 517 x 517 comparisons over 4 modalities.
    pub const BSSR1_SET1: Inventory = Inventory {
        per_modality: 267_289,
        genuine_per_modality: 517,
        impostor_per_modality: 266_772,
        total: 1_069_156,
    };
}

/// Check every modality's present-score counts against `expected`.
pub fn validate_inventory(table: &ScoreTable, expected: &Inventory) -> Result<(), IngestError> {
    use crate::model::Label;
    let check = |what: String, expected: usize, found: usize| {
        if expected == found {
            Ok(())
        } else {
            Err(IngestError::InventoryMismatch { what, expected, found })
        }
    };
    for (m, name) in table.modalities().names().iter().enumerate() {
        let (mut genuine, mut impostor) = (0, 0);
        for row in table.rows().iter().filter(|r| r.scores[m].is_some()) {
            match row.label {
                Label::Genuine => genuine += 1,
                Label::Impostor => impostor += 1,
            }
        }
        check(format!("{name} scores"), expected.per_modality, genuine + impostor)?;
        check(format!("{name} genuine scores"), expected.genuine_per_modality, genuine)?;
        check(format!("{name} impostor scores"), expected.impostor_per_modality, impostor)?;
    }
    check("total scores".into(), expected.total, table.present_count())
}

/// Write `table` in `format`. For the matrix set, `path` is a directory that
/// receives one `<modality>.txt` file per modality.
pub fn write_table(table: &ScoreTable, format: FileFormat, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    match format {
        FileFormat::LongCsv => {
            let file = File::create(path).map_err(io_err(path))?;
            write_long_csv_to(table, BufWriter::new(file)).map_err(|e| relabel(e, path))
        }
        FileFormat::WideCsv => {
            let file = File::create(path).map_err(io_err(path))?;
            write_wide_csv_to(table, BufWriter::new(file)).map_err(|e| relabel(e, path))
        }
        FileFormat::Bssr1MatrixSet => write_matrix_set(table, path).map(|_| ()),
    }
}

fn relabel(e: IngestError, path: &Path) -> IngestError {
    match e {
        IngestError::Io { source, .. } => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

fn csv_write_err(e: csv::Error) -> IngestError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IngestError::Io {
            path: PathBuf::new(),
            source,
        },
        other => IngestError::Io {
            path: PathBuf::new(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    }
}

pub fn write_long_csv_to<W: Write>(table: &ScoreTable, writer: W) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(LONG_HEADER).map_err(csv_write_err)?;
    let names = table.modalities().names();
    let mut buf = String::new();
    for row in table.rows() {
        for (m, score) in row.scores.iter().enumerate() {
            if let Some(v) = score {
                buf.clear();
                fmt::write(&mut buf, format_args!("{v}")).expect("formatting a float cannot fail");
                w.write_record([&*row.probe_id, &*row.gallery_id, names[m].as_str(), buf.as_str()])
                    .map_err(csv_write_err)?;
            }
        }
    }
    w.flush().map_err(|source| IngestError::Io {
        path: PathBuf::new(),
        source,
    })
}

pub fn write_wide_csv_to<W: Write>(table: &ScoreTable, writer: W) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = vec!["probe_id".to_string(), "gallery_id".to_string()];
    header.extend(table.modalities().names().iter().cloned());
    w.write_record(&header).map_err(csv_write_err)?;
    for row in table.rows() {
        let mut record = vec![row.probe_id.to_string(), row.gallery_id.to_string()];
        record.extend(row.scores.iter().map(|s| s.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&record).map_err(csv_write_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: PathBuf::new(),
        source,
    })
}

/// Write one matrix file per modality into `dir`; returns the file paths.
///
/// The table must be complete and laid out probe-major over a square
/// identity set (row `k` compares probe `k / M` with gallery `k % M`).
pub fn write_matrix_set(table: &ScoreTable, dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let not_rep = |reason: String| IngestError::NotRepresentable {
        format: "bssr1_matrix_set",
        reason,
    };
    if !table.is_complete() {
        return Err(not_rep("table has missing cells".into()));
    }
    let ids = table.probe_ids();
    let size = ids.len();
    if table.len() != size * size {
        return Err(not_rep(format!("{} rows is not {size}x{size}", table.len())));
    }
    for (k, row) in table.rows().iter().enumerate() {
        if row.probe_id != ids[k / size] || row.gallery_id != ids[k % size] {
            return Err(not_rep(format!("row {k} is out of probe-major square order")));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut paths = Vec::new();
    for (m, name) in table.modalities().names().iter().enumerate() {
        let path = dir.join(format!("{name}.txt"));
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        for p in 0..size {
            let line = (0..size)
                .map(|g| table.rows()[p * size + g].scores[m].expect("complete").to_string())
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(w, "{line}").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::four_subjects;

    const FOUR_SUBJECT_LONG: &str = "probe_id,gallery_id,modality,score
s1,s1,fingerprint,0.74
s1,s1,iris,1.00
s2,s2,face,0.41
s2,s2,fingerprint,0.89
s2,s2,iris,0.47
s3,s3,face,0.27
s3,s3,iris,0.03
s4,s4,face,0.85
s4,s4,fingerprint,0.00
s4,s4,iris,0.31
";

    const FOUR_SUBJECT_WIDE: &str = "probe_id,gallery_id,face,fingerprint,iris
s1,s1,,0.74,1.00
s2,s2,0.41,0.89,0.47
s3,s3,0.27,,0.03
s4,s4,0.85,0.00,0.31
";

    #[test]
    fn long_csv_reproduces_four_subjects() {
        let set = ModalitySet::new(["face", "fingerprint", "iris"]).unwrap();
        let t = read_long_csv_from(FOUR_SUBJECT_LONG.as_bytes(), Some(&set)).unwrap();
        assert_eq!(t, four_subjects());
        // inferred order follows first appearance
        let t = read_long_csv_from(FOUR_SUBJECT_LONG.as_bytes(), None).unwrap();
        assert_eq!(t.modalities().names(), ["fingerprint", "iris", "face"]);
    }

    #[test]
    fn wide_matches_long() {
        let wide = read_wide_csv_from(FOUR_SUBJECT_WIDE.as_bytes()).unwrap();
        assert_eq!(wide, four_subjects());
        assert_eq!(wide.score(0, 0), None);
    }

    #[test]
    fn header_only_long_is_empty() {
        let set = ModalitySet::new(["a"]).unwrap();
        let t = read_long_csv_from("probe_id,gallery_id,modality,score\n".as_bytes(), Some(&set)).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn long_errors() {
        let dup = "probe_id,gallery_id,modality,score\np,g,a,0.1\np,g,a,0.2\n";
        assert!(matches!(
            read_long_csv_from(dup.as_bytes(), None),
            Err(IngestError::DuplicateCell { line: 3, .. })
        ));
        let set = ModalitySet::new(["a"]).unwrap();
        let unknown = "probe_id,gallery_id,modality,score\np,g,b,0.1\n";
        assert!(matches!(
            read_long_csv_from(unknown.as_bytes(), Some(&set)),
            Err(IngestError::UnknownModality { line: 2, .. })
        ));
        let bad = "probe_id,gallery_id,modality,score\np,g,a\n";
        assert!(matches!(
            read_long_csv_from(bad.as_bytes(), None),
            Err(IngestError::MalformedLine { line: 2, .. })
        ));
        let nan = "probe_id,gallery_id,modality,score\np,g,a,x\n";
        assert!(matches!(
            read_long_csv_from(nan.as_bytes(), None),
            Err(IngestError::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn wide_errors() {
        let ragged = "probe_id,gallery_id,a,b,c\np,g,0.1,0.2,0.3,0.4,0.5\n";
        assert!(matches!(
            read_wide_csv_from(ragged.as_bytes()),
            Err(IngestError::RaggedRow { line: 2, expected: 5, found: 7 })
        ));
        let bad = "probe_id,gallery_id,a\np,g,abc\n";
        assert!(matches!(
            read_wide_csv_from(bad.as_bytes()),
            Err(IngestError::NonNumericScore { line: 2, .. })
        ));
    }

    #[test]
    fn tiny_matrix_set() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        fs::write(&p, "1 0\n0 1\n").unwrap();
        let t = read_bssr1_matrix_set(&[("a".to_string(), &p)], 2).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.genuine_count(), 2);
        assert_eq!(t.score(0, 0), Some(1.0));
        assert_eq!(t.score(1, 0), Some(0.0));
    }

    #[test]
    fn matrix_shape_mismatch_reports_file_and_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        fs::write(&p, "1 0 0\n0 1\n0 0 1\n").unwrap();
        match read_matrix(&p, 3).unwrap_err() {
            IngestError::ShapeMismatch { file, row, expected, found } => {
                assert_eq!(file, p);
                assert_eq!((row, expected, found), (2, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&p, "1 0 0\n0 1 0\n").unwrap();
        assert!(matches!(read_matrix(&p, 3), Err(IngestError::ShapeMismatch { row: 3, .. })));
    }

    #[test]
    fn write_round_trips() {
        let t = four_subjects();
        let mut buf = Vec::new();
        write_wide_csv_to(&t, &mut buf).unwrap();
        assert_eq!(read_wide_csv_from(buf.as_slice()).unwrap(), t);
        let mut buf = Vec::new();
        write_long_csv_to(&t, &mut buf).unwrap();
        assert_eq!(read_long_csv_from(buf.as_slice(), Some(t.modalities())).unwrap(), t);

        let empty = ScoreTable::empty(t.modalities().clone());
        let mut buf = Vec::new();
        write_wide_csv_to(&empty, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "probe_id,gallery_id,face,fingerprint,iris\n");
    }

    #[test]
    fn matrix_set_rejects_incomplete() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_table(&four_subjects(), FileFormat::Bssr1MatrixSet, dir.path()),
            Err(IngestError::NotRepresentable { .. })
        ));
    }

    #[test]
    fn inventory_check() {
        let t = crate::model::fixtures::square(3, 2, |_, _, _| 0.5);
        let ok = Inventory {
            per_modality: 9,
            genuine_per_modality: 3,
            impostor_per_modality: 6,
            total: 18,
        };
        validate_inventory(&t, &ok).unwrap();
        assert!(matches!(
            validate_inventory(&t, &Inventory::BSSR1_SET1),
            Err(IngestError::InventoryMismatch { .. })
        ));
    }
}
