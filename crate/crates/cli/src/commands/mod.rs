pub mod attack;
pub mod defend;
pub mod experiment;
pub mod infer;
pub mod ingest;
pub mod report;
pub mod train;

use std::fmt::Write as _;
use std::path::Path;

use anongcn::model::AnyModel;
use anongcn::{Graph, Matrix};

use crate::run::{read_input, Failure, Outcome};

/// One CSV row per node; `Display` for `f64` round-trips exactly.
pub fn features_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for (k, v) in m.row(i).iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_features_csv(path: &Path) -> Outcome<Matrix> {
    let text = read_input(path)?;
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::usage(format!("{}:{}: {e}", path.display(), line_no + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::usage(format!("{}: no feature rows", path.display())));
    }
    Ok(Matrix::from_rows(&rows)?)
}

pub fn load_model(path: &Path, g: &Graph) -> Outcome<AnyModel> {
    let text = read_input(path)?;
    Ok(AnyModel::from_json(&text, g)?)
}
