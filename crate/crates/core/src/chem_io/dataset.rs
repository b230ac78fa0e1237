//! Manifest loading: a delimited table with header `id,label,mol2[,smiles]`
//! whose `mol2` column names a structure file under a directory.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

use super::{parse_mol2, ChemIoError, Molecule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Classification,
    Regression,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
        })
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "classification" | "cls" => Ok(TaskKind::Classification),
            "regression" | "reg" => Ok(TaskKind::Regression),
            _ => Err(format!("unknown task `{s}` (classification | regression)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    /// BBB+ is `true`.
    Binary(bool),
    /// logBB.
    Real(f64),
}

impl Label {
    pub fn parse(raw: &str, task: TaskKind) -> Option<Label> {
        let raw = raw.trim();
        match task {
            TaskKind::Classification => match raw {
                "1" | "BBB+" | "p" => Some(Label::Binary(true)),
                "0" | "BBB-" | "BBB–" | "np" => Some(Label::Binary(false)),
                _ => None,
            },
            TaskKind::Regression => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Label::Real),
        }
    }

    /// Numeric target: 1/0 for binary labels.
    pub fn value(self) -> f64 {
        match self {
            Label::Binary(b) => f64::from(u8::from(b)),
            Label::Real(v) => v,
        }
    }

    pub fn kind(self) -> TaskKind {
        match self {
            Label::Binary(_) => TaskKind::Classification,
            Label::Real(_) => TaskKind::Regression,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub id: String,
    pub label: Label,
    pub molecule: Molecule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRecord {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub records: Vec<DatasetRecord>,
    pub skipped: Vec<SkippedRecord>,
}

struct Row {
    id: String,
    label: Label,
    mol2: String,
    smiles: Option<String>,
}

fn sniff_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else if header.contains(';') && !header.contains(',') {
        b';'
    } else {
        b','
    }
}

fn read_rows(text: &str, task: TaskKind) -> Result<Vec<Row>, ChemIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(text))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| ChemIoError::MissingColumn(name.to_string()))
    };
    let (id_col, label_col, mol2_col) = (column("id")?, column("label")?, column("mol2")?);
    let smiles_col = column("smiles").ok();

    let mut rows = Vec::new();
    for (k, result) in reader.records().enumerate() {
        let record = result?;
        let row = k + 2;
        let field = |c: usize| record.get(c).unwrap_or("").to_string();
        let id = field(id_col);
        let raw_label = field(label_col);
        let label = Label::parse(&raw_label, task).ok_or(ChemIoError::LabelKindMismatch {
            row,
            id: id.clone(),
            value: raw_label.clone(),
            expected: task,
        })?;
        rows.push(Row {
            id,
            label,
            mol2: field(mol2_col),
            smiles: smiles_col.map(field).filter(|s| !s.is_empty()),
        });
    }
    Ok(rows)
}

/// Loads every manifest row. Labels must all fit `task`; a label that does
/// not is fatal. Structure files that are missing or fail to parse are
/// collected in [`LoadReport::skipped`] and loading continues.
pub fn load_dataset(
    manifest_path: &Path,
    mol2_dir: &Path,
    task: TaskKind,
) -> Result<LoadReport, ChemIoError> {
    let text = fs::read_to_string(manifest_path).map_err(|source| ChemIoError::Io {
        path: manifest_path.display().to_string(),
        source,
    })?;
    let rows = read_rows(&text, task)?;

    let parsed: Vec<Result<DatasetRecord, SkippedRecord>> = rows
        .into_par_iter()
        .map(|row| {
            let path = mol2_dir.join(&row.mol2);
            let skip = |reason: String| SkippedRecord {
                id: row.id.clone(),
                reason,
            };
            let text =
                fs::read_to_string(&path).map_err(|e| skip(format!("{}: {e}", path.display())))?;
            let mut molecule = parse_mol2(&text).map_err(|e| skip(e.to_string()))?;
            molecule.id = row.id.clone();
            molecule.source_smiles = row.smiles;
            Ok(DatasetRecord {
                id: row.id,
                label: row.label,
                molecule,
            })
        })
        .collect();

    let mut report = LoadReport {
        records: Vec::with_capacity(parsed.len()),
        skipped: Vec::new(),
    };
    for item in parsed {
        match item {
            Ok(r) => report.records.push(r),
            Err(s) => {
                warn!("skipping {}: {}", s.id, s.reason);
                report.skipped.push(s);
            }
        }
    }
    info!(
        "loaded {} records from {} ({} skipped)",
        report.records.len(),
        manifest_path.display(),
        report.skipped.len()
    );
    Ok(report)
}
