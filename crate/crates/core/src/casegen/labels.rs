use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::case::{CaseRecord, ReductionLabel};
use super::encode::EncodingMap;
use super::schema::FeatureSchema;
use crate::error::{EncodeError, LabelError};
use crate::models::FeatureMatrix;

/// One row of the label file: `case_id,ordered,reduction_pct`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub case_id: String,
    pub ordered: u8,
    pub reduction_pct: f64,
}

impl LabelRow {
    pub fn from_label(case_id: &str, label: ReductionLabel) -> Self {
        Self {
            case_id: case_id.to_string(),
            ordered: u8::from(label.ordered),
            reduction_pct: label.reduction_pct,
        }
    }
}

pub fn read_label_file<R: Read>(reader: R) -> Result<Vec<LabelRow>, LabelError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(LabelError::from)).collect()
}

pub fn write_label_file<W: Write>(writer: W, rows: &[LabelRow]) -> Result<(), LabelError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    #[default]
    LastWins,
    FirstWins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCase {
    pub case: CaseRecord,
    pub label: ReductionLabel,
}

/// Labeled cases plus the encoding used to turn them into model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_version: String,
    pub schema_digest: String,
    pub encoding: EncodingMap,
    pub rows: Vec<LabeledCase>,
}

impl Dataset {
    pub fn new(schema: &FeatureSchema, rows: Vec<LabeledCase>) -> Self {
        Self {
            schema_version: schema.version.clone(),
            schema_digest: schema.digest(),
            encoding: EncodingMap::from_schema(schema),
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.label.target()).collect()
    }

    pub fn feature_matrix(&self) -> Result<FeatureMatrix, LabelError> {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                self.encoding.encode(&r.case).map_err(|source| LabelError::Encode {
                    case_id: r.case.case_id.clone(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureMatrix::from_rows(rows, self.labels(), self.encoding.columns.clone())?)
    }

    /// Same rows, encoded on the `kept` features only.
    pub fn project(&self, schema: &FeatureSchema, kept: &[String]) -> Result<Self, EncodeError> {
        Ok(Self { encoding: EncodingMap::restricted(schema, kept)?, ..self.clone() })
    }
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub dataset: Dataset,
    /// Cases with no label row.
    pub unlabeled: usize,
    /// Case ids that appeared more than once in the label file.
    pub duplicates: Vec<String>,
    pub warnings: Vec<String>,
}

/// Joins label rows onto cases. Unlabeled cases are dropped and counted.
pub fn ingest_labels(
    schema: &FeatureSchema,
    cases: &[CaseRecord],
    rows: &[LabelRow],
    policy: DuplicatePolicy,
) -> Result<IngestReport, LabelError> {
    let known: BTreeMap<&str, usize> = cases.iter().enumerate().map(|(i, c)| (c.case_id.as_str(), i)).collect();
    let mut labels: BTreeMap<usize, ReductionLabel> = BTreeMap::new();
    let mut duplicates = Vec::new();
    let mut warnings = Vec::new();

    for (i, row) in rows.iter().enumerate() {
        let row_no = i + 1;
        let &case_idx = known.get(row.case_id.as_str()).ok_or_else(|| LabelError::UnknownCase {
            row: row_no,
            case_id: row.case_id.clone(),
        })?;
        let ordered = match row.ordered {
            0 => false,
            1 => true,
            other => {
                return Err(LabelError::OutOfDomain { row: row_no, message: format!("ordered must be 0 or 1, got {other}") })
            }
        };
        let label = ReductionLabel::new(ordered, row.reduction_pct)
            .map_err(|message| LabelError::OutOfDomain { row: row_no, message })?;
        if labels.contains_key(&case_idx) {
            duplicates.push(row.case_id.clone());
            let msg = format!("duplicate label for `{}` at row {row_no} ({policy:?})", row.case_id);
            warn!("{msg}");
            warnings.push(msg);
            if policy == DuplicatePolicy::FirstWins {
                continue;
            }
        }
        labels.insert(case_idx, label);
    }

    if rows.is_empty() {
        let msg = "label file is empty; dataset has no rows".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }

    let labeled: Vec<LabeledCase> = labels
        .into_iter()
        .map(|(idx, label)| LabeledCase { case: cases[idx].clone(), label })
        .collect();
    let unlabeled = cases.len() - labeled.len();
    Ok(IngestReport { dataset: Dataset::new(schema, labeled), unlabeled, duplicates, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casegen::sample_cases;

    fn fixture(n: usize) -> (FeatureSchema, Vec<CaseRecord>) {
        let schema = FeatureSchema::default_schema();
        let cases = sample_cases(&schema, n, 11).unwrap();
        (schema, cases)
    }

    #[test]
    fn partial_answers_are_counted() {
        let (schema, cases) = fixture(600);
        let rows: Vec<LabelRow> = cases[..557]
            .iter()
            .map(|c| LabelRow { case_id: c.case_id.clone(), ordered: 1, reduction_pct: 0.15 })
            .collect();
        let rep = ingest_labels(&schema, &cases, &rows, DuplicatePolicy::default()).unwrap();
        assert_eq!(rep.dataset.len(), 557);
        assert_eq!(rep.unlabeled, 43);
    }

    #[test]
    fn below_floor_is_rejected() {
        let (schema, cases) = fixture(3);
        let rows = vec![LabelRow { case_id: cases[0].case_id.clone(), ordered: 1, reduction_pct: 0.03 }];
        let err = ingest_labels(&schema, &cases, &rows, DuplicatePolicy::default()).unwrap_err();
        assert!(matches!(err, LabelError::OutOfDomain { row: 1, .. }));
    }

    #[test]
    fn unknown_case_rejected() {
        let (schema, cases) = fixture(3);
        let rows = vec![LabelRow { case_id: "ghost".into(), ordered: 0, reduction_pct: 0.0 }];
        assert!(matches!(
            ingest_labels(&schema, &cases, &rows, DuplicatePolicy::default()),
            Err(LabelError::UnknownCase { .. })
        ));
    }

    #[test]
    fn empty_file_gives_empty_dataset_with_warning() {
        let (schema, cases) = fixture(3);
        let rows = read_label_file("case_id,ordered,reduction_pct\n".as_bytes()).unwrap();
        let rep = ingest_labels(&schema, &cases, &rows, DuplicatePolicy::default()).unwrap();
        assert!(rep.dataset.is_empty());
        assert_eq!(rep.unlabeled, 3);
        assert_eq!(rep.warnings.len(), 1);
        assert!(read_label_file("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn duplicates_follow_policy() {
        let (schema, cases) = fixture(2);
        let id = cases[0].case_id.clone();
        let rows = vec![
            LabelRow { case_id: id.clone(), ordered: 1, reduction_pct: 0.2 },
            LabelRow { case_id: id.clone(), ordered: 1, reduction_pct: 0.6 },
        ];
        let last = ingest_labels(&schema, &cases, &rows, DuplicatePolicy::LastWins).unwrap();
        assert_eq!(last.dataset.rows[0].label.reduction_pct, 0.6);
        assert_eq!(last.duplicates, vec![id]);
        let first = ingest_labels(&schema, &cases, &rows, DuplicatePolicy::FirstWins).unwrap();
        assert_eq!(first.dataset.rows[0].label.reduction_pct, 0.2);
    }

    #[test]
    fn label_file_round_trip() {
        let rows = vec![
            LabelRow { case_id: "case-0001".into(), ordered: 0, reduction_pct: 0.0 },
            LabelRow { case_id: "case-0002".into(), ordered: 1, reduction_pct: 0.35 },
        ];
        let mut buf = Vec::new();
        write_label_file(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("case_id,ordered,reduction_pct\n"));
        assert_eq!(read_label_file(buf.as_slice()).unwrap(), rows);
    }
}
