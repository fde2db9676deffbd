//! `ingest`: numeric CSV to the binary dataset format.

use serde::Serialize;

use crate::args::{parse_precision, IngestArgs};
use crate::report::emit;
use f3m_core::error::{Error, Result};
use f3m_core::io::write_matrix;
use ndarray::Array2;

#[derive(Serialize)]
struct IngestReport {
    input: String,
    out: String,
    rows_read: usize,
    rows_written: usize,
    rows_dropped_nonfinite: usize,
    header_skipped: bool,
    d: usize,
}

enum ColumnSpec {
    All,
    Indices(Vec<usize>),
}

fn parse_cols(raw: &str) -> Result<ColumnSpec> {
    if raw == "all" {
        return Ok(ColumnSpec::All);
    }
    let ix: std::result::Result<Vec<usize>, _> =
        raw.split(',').map(|s| s.trim().parse::<usize>()).collect();
    match ix {
        Ok(v) if !v.is_empty() => Ok(ColumnSpec::Indices(v)),
        _ => Err(Error::InvalidInput(format!(
            "--cols must be \"all\" or a comma-separated index list, got {raw:?}"
        ))),
    }
}

pub fn run(args: &IngestArgs) -> Result<()> {
    let tag = match parse_precision(&args.precision)? {
        f3m_core::Precision::F64 => f3m_core::io::StorageTag::F64,
        f3m_core::Precision::F32 => f3m_core::io::StorageTag::F32,
    };
    let cols = parse_cols(&args.cols)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(&args.input)
        .map_err(|e| Error::InvalidInput(format!("open {}: {e}", args.input.display())))?;

    let mut data: Vec<f64> = Vec::new();
    let mut d: Option<usize> = None;
    let mut rows_read = 0usize;
    let mut rows_written = 0usize;
    let mut dropped_nonfinite = 0usize;
    let mut malformed: Vec<usize> = Vec::new();
    let mut header_skipped = false;

    for (ix, record) in reader.records().enumerate() {
        let line = ix + 1;
        let record = record.map_err(|e| Error::Format(format!("line {line}: {e}")))?;
        rows_read += 1;
        let selected: Result<Vec<f64>> = match &cols {
            ColumnSpec::All => record
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("field {f:?}")))
                })
                .collect(),
            ColumnSpec::Indices(list) => list
                .iter()
                .map(|&c| {
                    record
                        .get(c)
                        .ok_or_else(|| Error::Format(format!("missing column {c}")))
                        .and_then(|f| {
                            f.trim()
                                .parse::<f64>()
                                .map_err(|_| Error::Format(format!("field {f:?}")))
                        })
                })
                .collect(),
        };
        let values = match selected {
            Ok(v) => v,
            Err(_) => {
                // A non-numeric first row is a header.
                if ix == 0 {
                    header_skipped = true;
                    rows_read -= 1;
                    continue;
                }
                malformed.push(line);
                if malformed.len() > args.max_malformed {
                    return Err(Error::InvalidInput(format!(
                        "more than {} malformed rows; first offenders at lines {:?}",
                        args.max_malformed, malformed
                    )));
                }
                continue;
            }
        };
        let width = *d.get_or_insert(values.len());
        if values.len() != width {
            malformed.push(line);
            if malformed.len() > args.max_malformed {
                return Err(Error::InvalidInput(format!(
                    "more than {} malformed rows; first offenders at lines {:?}",
                    args.max_malformed, malformed
                )));
            }
            continue;
        }
        if values.iter().any(|v| !v.is_finite()) {
            dropped_nonfinite += 1;
            continue;
        }
        data.extend_from_slice(&values);
        rows_written += 1;
    }

    let d = d.ok_or_else(|| Error::InvalidInput("input contained no numeric rows".into()))?;
    if rows_written == 0 {
        return Err(Error::InvalidInput("no usable rows after filtering".into()));
    }
    let matrix = Array2::from_shape_vec((rows_written, d), data)
        .map_err(|e| Error::Format(format!("assemble matrix: {e}")))?;
    write_matrix(&args.out, matrix.view(), tag)?;
    emit(
        &IngestReport {
            input: args.input.display().to_string(),
            out: args.out.display().to_string(),
            rows_read,
            rows_written,
            rows_dropped_nonfinite: dropped_nonfinite,
            header_skipped,
            d,
        },
        None,
    )
}
