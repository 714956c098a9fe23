use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, Label};
use crate::error::{Error, Result};

/// How labels are written in a CSV label column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelEncoding {
    /// `-1` / `+1`
    #[default]
    Signed,
    /// `0` / `1`, with `0` read as the negative class
    ZeroOne,
}

impl LabelEncoding {
    fn name(self) -> &'static str {
        match self {
            LabelEncoding::Signed => "{-1,+1}",
            LabelEncoding::ZeroOne => "{0,1}",
        }
    }

    fn decode(self, value: f64) -> Option<Label> {
        match self {
            LabelEncoding::Signed => Label::from_sign(value),
            LabelEncoding::ZeroOne if value == 0.0 => Some(Label::Negative),
            LabelEncoding::ZeroOne if value == 1.0 => Some(Label::Positive),
            LabelEncoding::ZeroOne => None,
        }
    }

    fn encode(self, label: Label) -> &'static str {
        match (self, label) {
            (LabelEncoding::Signed, Label::Positive) => "1",
            (LabelEncoding::Signed, Label::Negative) => "-1",
            (LabelEncoding::ZeroOne, Label::Positive) => "1",
            (LabelEncoding::ZeroOne, Label::Negative) => "0",
        }
    }
}

impl std::str::FromStr for LabelEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" | "pm1" | "-1,1" => Ok(LabelEncoding::Signed),
            "zero_one" | "01" | "0,1" => Ok(LabelEncoding::ZeroOne),
            other => Err(Error::InvalidArgument(format!("unknown label encoding `{other}`"))),
        }
    }
}

/// Read a dataset from CSV. Every column except `label_column` is a feature.
///
/// Rows are numbered from 1 (the first line after the header) in errors.
/// Lines starting with `#` are skipped. The file stem becomes the source id.
pub fn load_csv(path: &Path, label_column: &str, encoding: LabelEncoding) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_owned()))?;
    let n_features = header.len() - 1;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            let parsed: Option<f64> = cell.parse().ok();
            if col == label_idx {
                let label = parsed.and_then(|v| encoding.decode(v)).ok_or_else(|| {
                    Error::LabelOutsideEncoding {
                        row,
                        column: header[col].clone(),
                        cell: cell.to_owned(),
                        encoding: encoding.name(),
                    }
                })?;
                labels.push(label);
            } else {
                let value = parsed.ok_or_else(|| Error::ParseCell {
                    row,
                    column: header[col].clone(),
                    cell: cell.to_owned(),
                })?;
                values.push(value);
            }
        }
    }

    let features = Array2::from_shape_vec((labels.len(), n_features), values)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut dataset = Dataset::new(features, labels)?;
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        dataset = dataset.with_source_id(stem);
    }
    Ok(dataset)
}

/// Write a dataset as CSV: columns `x0..x{d-1}` then the label column.
/// Feature values are written with 17 significant digits.
pub fn save_csv(
    dataset: &Dataset,
    path: &Path,
    label_column: &str,
    encoding: LabelEncoding,
) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    let mut header: Vec<String> = (0..dataset.n_features()).map(|j| format!("x{j}")).collect();
    header.push(label_column.to_owned());
    writer.write_record(&header)?;
    for (row, label) in dataset.samples() {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        record.push(encoding.encode(label).to_owned());
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}
