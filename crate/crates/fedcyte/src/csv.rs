//! Dataset CSV format.
//!
//! Line 1: `#classes:name1,name2,...`
//! Line 2: header `label,f1,...,fd`
//! Data rows: `labelname,v1,...,vd` with decimal reals. UTF-8, LF line
//! endings, trailing newline optional.

use std::path::Path;

use fedcyte_core::LabeledDataset;

use crate::{AppError, AppResult};

pub fn load_csv(path: &Path) -> AppResult<LabeledDataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::runtime(format!("{}: {e}", path.display())))?;
    parse_csv(&text).map_err(|e| AppError::runtime(format!("{}: {e}", path.display())))
}

pub fn parse_csv(text: &str) -> Result<LabeledDataset, String> {
    let mut lines = text.lines().enumerate();

    let (_, class_line) = lines.next().ok_or("empty file")?;
    let class_names: Vec<String> = class_line
        .strip_prefix("#classes:")
        .ok_or("line 1: expected '#classes:' metadata row")?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    if class_names.iter().any(|n| n.is_empty()) {
        return Err("line 1: empty class name".to_string());
    }

    let (_, header) = lines.next().ok_or("missing header row")?;
    let dim = header.split(',').count().checked_sub(1).filter(|&d| d > 0).ok_or("line 2: header needs label plus at least one feature column")?;
    if !header.starts_with("label,") {
        return Err("line 2: header must start with 'label,'".to_string());
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_name = fields.next().expect("split yields at least one field");
        let label = class_names
            .iter()
            .position(|n| n == label_name)
            .ok_or_else(|| format!("line {}: unknown label '{label_name}'", lineno + 1))?;
        let row: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| format!("line {}: non-numeric feature '{f}'", lineno + 1))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != dim {
            return Err(format!(
                "line {}: expected {dim} features, got {}",
                lineno + 1,
                row.len()
            ));
        }
        features.push(row);
        labels.push(label);
    }
    if features.is_empty() {
        return Err("no samples".to_string());
    }
    LabeledDataset::new(features, labels, class_names).map_err(|e| e.to_string())
}

/// Render a dataset in the CSV format; `{}` float formatting round-trips f64
/// exactly, so write-then-load is lossless.
pub fn render_csv(ds: &LabeledDataset) -> String {
    let mut out = String::new();
    out.push_str("#classes:");
    out.push_str(&ds.class_names().join(","));
    out.push('\n');
    out.push_str("label");
    for j in 0..ds.dim() {
        out.push_str(&format!(",f{}", j + 1));
    }
    out.push('\n');
    for i in 0..ds.len() {
        out.push_str(&ds.class_names()[ds.label(i)]);
        for v in ds.feature(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
