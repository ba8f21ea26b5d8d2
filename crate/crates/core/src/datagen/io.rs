use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::record::{from_row, to_row, CustomerRecord, COLUMNS};
use super::{GroundTruth, TruthRow};
use crate::error::{Error, Result};

pub fn write_portfolio(records: &[CustomerRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| wrap_csv(path, e))?;
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record(to_row(r))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_portfolio(path: &Path) -> Result<Vec<CustomerRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| wrap_csv(path, e))?;
    let header = rdr.headers()?.clone();
    let lookup: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let mut order = Vec::with_capacity(COLUMNS.len());
    for col in COLUMNS {
        match lookup.get(col) {
            Some(&i) => order.push(i),
            None => {
                return Err(Error::Cell {
                    row: 0,
                    column: (*col).to_string(),
                    message: "missing from header".into(),
                })
            }
        }
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let arranged: csv::StringRecord = order.iter().map(|&j| row.get(j).unwrap_or("")).collect();
        out.push(from_row(i + 1, &arranged)?);
    }
    Ok(out)
}

/// `dir/name.csv` -> `dir/name.truth.csv`.
pub fn truth_path(portfolio: &Path) -> PathBuf {
    let stem = portfolio
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "portfolio".into());
    portfolio.with_file_name(format!("{stem}.truth.csv"))
}

pub fn write_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let k = truth.k_levels();
    let mut header = vec!["id".to_string(), "assigned_level".into(), "y_control".into()];
    header.extend((1..=k).map(|j| format!("y_level_{j}")));
    header.extend((1..=k).map(|j| format!("cate_level_{j}")));
    header.extend((0..=k).map(|j| format!("propensity_{j}")));
    let mut w = csv::Writer::from_path(path).map_err(|e| wrap_csv(path, e))?;
    w.write_record(&header)?;
    for r in truth.rows() {
        let mut rec = vec![r.id.to_string(), r.assigned_level.to_string(), r.y_control.to_string()];
        rec.extend(r.y_level.iter().map(f64::to_string));
        rec.extend(r.cate.iter().map(f64::to_string));
        rec.extend(r.propensity.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_truth(path: &Path) -> Result<GroundTruth> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| wrap_csv(path, e))?;
    let header = rdr.headers()?.clone();
    let k = header.iter().filter(|h| h.starts_with("cate_level_")).count();
    if header.len() != 3 + 3 * k + 1 {
        return Err(Error::Data(format!(
            "{}: unexpected truth header with {} columns",
            path.display(),
            header.len()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            let raw = rec.get(j).unwrap_or("");
            raw.trim().parse::<f64>().map_err(|_| Error::Cell {
                row: i + 1,
                column: header.get(j).unwrap_or("?").to_string(),
                message: format!("cannot parse `{raw}` as a number"),
            })
        };
        let id = num(0)? as u64;
        let assigned_level = num(1)? as usize;
        let y_control = num(2)?;
        let y_level = (0..k).map(|j| num(3 + j)).collect::<Result<Vec<_>>>()?;
        let cate = (0..k).map(|j| num(3 + k + j)).collect::<Result<Vec<_>>>()?;
        let propensity = (0..=k).map(|j| num(3 + 2 * k + j)).collect::<Result<Vec<_>>>()?;
        rows.push(TruthRow {
            id,
            assigned_level,
            y_control,
            y_level,
            cate,
            propensity,
        });
    }
    GroundTruth::new(rows)
}

fn wrap_csv(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}
