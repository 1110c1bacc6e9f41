//! CSV ingestion and emission for response matrices.
//!
//! Schema: header `student_id,q1,...,qM[,category]`; one row per student;
//! item cells are exactly `0` or `1`; the optional trailing `category` column
//! holds one of `college_algebra`, `precalculus`, `calculus_1`.
//!
//! Error coordinates are 1-based over the file: the header is row 1 and the
//! first column is column 1.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{placement, total_score, PlacementLabel, ResponseMatrix, StudentRecord};

/// A parsed matrix plus non-fatal findings.
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub matrix: ResponseMatrix,
    /// One entry per labeled student whose stored category disagrees with
    /// the placement rule applied to their own percent score.
    pub warnings: Vec<String>,
}

fn csv_err(row: usize, column: Option<usize>, message: impl Into<String>) -> Error {
    Error::Csv {
        row,
        column,
        message: message.into(),
    }
}

/// Parse a matrix from CSV text.
pub fn load_csv_reader<R: Read>(reader: R) -> Result<CsvLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| csv_err(1, None, format!("unreadable header: {e}")))?
        .clone();
    if headers.len() < 2 {
        return Err(csv_err(1, None, "header needs student_id and at least one item"));
    }
    if &headers[0] != "student_id" {
        return Err(csv_err(1, Some(1), format!(
            "first header must be \"student_id\", got {:?}",
            &headers[0]
        )));
    }
    let has_category = &headers[headers.len() - 1] == "category";
    let item_count = headers.len() - 1 - usize::from(has_category);
    if item_count == 0 {
        return Err(csv_err(1, None, "no item columns between student_id and category"));
    }
    for j in 0..item_count {
        let want = format!("q{}", j + 1);
        if &headers[1 + j] != want.as_str() {
            return Err(csv_err(1, Some(j + 2), format!(
                "expected item header {want:?}, got {:?}",
                &headers[1 + j]
            )));
        }
    }

    let expected_fields = headers.len();
    let mut students = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2; // 1-based file row; header is row 1
        let record = record.map_err(|e| csv_err(row, None, format!("unreadable row: {e}")))?;
        if record.len() != expected_fields {
            return Err(csv_err(row, None, format!(
                "row has {} fields, expected {expected_fields}",
                record.len()
            )));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(csv_err(row, Some(1), "empty student_id"));
        }
        let mut responses = Vec::with_capacity(item_count);
        for j in 0..item_count {
            let cell = &record[1 + j];
            match cell {
                "0" => responses.push(0u8),
                "1" => responses.push(1u8),
                other => {
                    return Err(csv_err(row, Some(j + 2), format!(
                        "item cell must be 0 or 1, got {other:?}"
                    )));
                }
            }
        }
        let label = if has_category {
            let cell = &record[expected_fields - 1];
            Some(PlacementLabel::from_str(cell).map_err(|_| {
                csv_err(row, Some(expected_fields), format!(
                    "unknown category {cell:?} (expected college_algebra, precalculus, or calculus_1)"
                ))
            })?)
        } else {
            None
        };
        students.push(StudentRecord {
            id,
            responses,
            label,
        });
    }
    if students.is_empty() {
        return Err(csv_err(1, None, "file has a header but no data rows"));
    }

    let matrix = ResponseMatrix::new(students, item_count)?;

    let mut warnings = Vec::new();
    if matrix.is_labelled() {
        for (i, s) in matrix.students().iter().enumerate() {
            let percent = total_score(&s.responses).percent;
            let implied = placement(percent)?;
            if Some(implied) != s.label {
                warnings.push(format!(
                    "row {}: student {:?} is labeled {} but scores {:.1}% (placement rule says {})",
                    i + 2,
                    s.id,
                    s.label.expect("labelled matrix").as_str(),
                    percent,
                    implied.as_str()
                ));
            }
        }
    }

    Ok(CsvLoad { matrix, warnings })
}

/// Load a matrix from a CSV file.
pub fn load_csv(path: &Path) -> Result<CsvLoad> {
    let file = File::open(path)?;
    load_csv_reader(file)
}

/// Serialize a matrix to CSV text (exact inverse of [`load_csv_reader`]).
pub fn write_csv_string(matrix: &ResponseMatrix) -> String {
    let mut out = String::new();
    out.push_str("student_id");
    for j in 0..matrix.item_count() {
        out.push_str(&format!(",q{}", j + 1));
    }
    if matrix.is_labelled() {
        out.push_str(",category");
    }
    out.push('\n');
    for s in matrix.students() {
        out.push_str(&s.id);
        for &r in &s.responses {
            out.push(',');
            out.push(char::from(b'0' + r));
        }
        if let Some(label) = s.label {
            out.push(',');
            out.push_str(label.as_str());
        }
        out.push('\n');
    }
    out
}

/// Write a matrix to a CSV file.
pub fn write_csv(matrix: &ResponseMatrix, path: &Path) -> Result<()> {
    let mut file = File::create(path)?;
    file.write_all(write_csv_string(matrix).as_bytes())?;
    Ok(())
}
