//! Dataset loading and preprocessing.
//!
//! Tabular datasets are read from comma-separated files with a mandatory
//! header row, then normalized into clean numeric matrices by a fixed
//! sequence of steps: the label column is dropped, nominal attributes are
//! integer-encoded, constant and per-instance-distinct columns are
//! removed, columns with more than 40% missing values are removed,
//! remaining gaps are mean-imputed, and every surviving column is min-max
//! scaled to [0, 1]. Provenance records every action taken per column.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

/// Missing-value markers recognized in input cells, besides the empty cell.
pub const MISSING_MARKERS: &[&str] = &["NaN", "?"];

/// Fraction of missing values above which a column is dropped.
pub const MISSING_DROP_FRACTION: f64 = 0.40;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error reading dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error at row {row}, column {col}: {detail}")]
    Parse {
        row: usize,
        col: usize,
        detail: String,
    },
    #[error("dataset has no header row or no columns")]
    MissingHeader,
    #[error("more than one column is marked as the label")]
    MultipleLabelColumns,
    #[error("schema override names unknown column {0:?}")]
    UnknownColumn(String),
    #[error("dataset {0:?} has {1} rows; at least 2 are required")]
    TooFewRows(String, usize),
    #[error("dataset {0:?} has no usable columns after preprocessing")]
    EmptyAfterPreprocess(String),
}

/// Declared role of a raw column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Nominal,
    Label,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Nominal => "nominal",
            ColumnKind::Label => "label",
        }
    }
}

/// A raw cell: either a present textual value or the missing marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cell {
    Missing,
    Value(String),
}

impl Cell {
    fn from_field(field: &str) -> Cell {
        let trimmed = field.trim();
        if trimmed.is_empty() || MISSING_MARKERS.contains(&trimmed) {
            Cell::Missing
        } else {
            Cell::Value(trimmed.to_string())
        }
    }

    pub fn as_value(&self) -> Option<&str> {
        match self {
            Cell::Missing => None,
            Cell::Value(v) => Some(v),
        }
    }
}

/// A loaded tabular dataset before preprocessing.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub name: String,
    pub columns: Vec<(String, ColumnKind)>,
    /// Row-major cells; every row has `columns.len()` entries.
    pub cells: Vec<Vec<Cell>>,
}

impl RawDataset {
    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    /// Column values as a vector of optional strings.
    fn column(&self, idx: usize) -> Vec<Option<&str>> {
        self.cells.iter().map(|r| r[idx].as_value()).collect()
    }
}

/// Why a column was removed during preprocessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    Label,
    Constant,
    DistinctPerInstance,
    TooManyMissing { missing: usize, total: usize },
}

impl DropReason {
    fn as_str(&self) -> String {
        match self {
            DropReason::Label => "label".into(),
            DropReason::Constant => "constant".into(),
            DropReason::DistinctPerInstance => "distinct_per_instance".into(),
            DropReason::TooManyMissing { missing, total } => {
                format!("missing_{missing}_of_{total}")
            }
        }
    }
}

/// Record of every action preprocessing took, column by column.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub kept: Vec<String>,
    pub dropped: Vec<(String, DropReason)>,
    /// Nominal encodings: column name -> symbols in first-appearance order.
    pub encoded: Vec<(String, Vec<String>)>,
    /// Mean-imputed cells: column name -> number of cells filled.
    pub imputed: Vec<(String, usize)>,
}

impl Provenance {
    /// Flat key-value text record, one action per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for name in &self.kept {
            let _ = writeln!(out, "kept\t{name}");
        }
        for (name, reason) in &self.dropped {
            let _ = writeln!(out, "dropped\t{name}\t{}", reason.as_str());
        }
        for (name, symbols) in &self.encoded {
            let _ = writeln!(out, "encoded\t{name}\t{}", symbols.join("|"));
        }
        for (name, count) in &self.imputed {
            let _ = writeln!(out, "imputed\t{name}\t{count}");
        }
        out
    }
}

/// A fully preprocessed numeric dataset: every entry finite and in [0, 1],
/// no constant columns, at least 2 rows and 1 column.
#[derive(Debug, Clone)]
pub struct NumericDataset {
    pub name: String,
    pub matrix: Array2<f64>,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
}

impl NumericDataset {
    pub fn n_instances(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.matrix.ncols()
    }

    /// Wraps a matrix directly, trusting the caller to provide clean
    /// values. Used by generators and tests; real input goes through
    /// [`preprocess`].
    pub fn from_matrix(name: &str, matrix: Array2<f64>) -> Self {
        let feature_names = (0..matrix.ncols()).map(|j| format!("f{j}")).collect();
        NumericDataset {
            name: name.to_string(),
            matrix,
            feature_names,
            provenance: Provenance::default(),
        }
    }
}

/// Loads a comma-separated file with a header row.
///
/// Column kinds are inferred (a column where every present cell parses as
/// a number is numeric, anything else nominal) unless overridden via
/// `schema`. Empty cells and the literal markers `NaN` / `?` are missing.
pub fn load_csv(
    path: &Path,
    schema: Option<&BTreeMap<String, ColumnKind>>,
) -> Result<RawDataset, IngestError> {
    let file = std::fs::File::open(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    read_csv(&name, file, schema)
}

/// Reader-based variant of [`load_csv`]; also the fuzzing entry point.
pub fn read_csv(
    name: &str,
    reader: impl Read,
    schema: Option<&BTreeMap<String, ColumnKind>>,
) -> Result<RawDataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(IngestError::MissingHeader);
    }
    let arity = headers.len();

    let mut cells: Vec<Vec<Cell>> = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != arity {
            return Err(IngestError::Parse {
                row: row_idx + 1,
                col: record.len(),
                detail: format!("expected {arity} fields, found {}", record.len()),
            });
        }
        cells.push(record.iter().map(Cell::from_field).collect());
    }

    if let Some(overrides) = schema {
        for key in overrides.keys() {
            if !headers.iter().any(|h| h == key) {
                return Err(IngestError::UnknownColumn(key.clone()));
            }
        }
    }

    let mut columns = Vec::with_capacity(arity);
    let mut label_count = 0usize;
    for (idx, header) in headers.iter().enumerate() {
        let kind = match schema.and_then(|s| s.get(header)) {
            Some(&k) => k,
            None => infer_kind(cells.iter().map(|r| r[idx].as_value())),
        };
        if kind == ColumnKind::Label {
            label_count += 1;
        }
        columns.push((header.clone(), kind));
    }
    if label_count > 1 {
        return Err(IngestError::MultipleLabelColumns);
    }

    Ok(RawDataset {
        name: name.to_string(),
        columns,
        cells,
    })
}

fn infer_kind<'a>(values: impl Iterator<Item = Option<&'a str>>) -> ColumnKind {
    for v in values.flatten() {
        if v.parse::<f64>().is_err() {
            return ColumnKind::Nominal;
        }
    }
    ColumnKind::Numeric
}

/// Integer-encodes a list of symbols in first-appearance order: the first
/// distinct symbol maps to 0, the second to 1, and so on.
pub fn encode_nominal(values: &[&str]) -> Vec<i64> {
    let mut mapping: Vec<&str> = Vec::new();
    values
        .iter()
        .map(|v| {
            match mapping.iter().position(|m| m == v) {
                Some(code) => code as i64,
                None => {
                    mapping.push(v);
                    (mapping.len() - 1) as i64
                }
            }
        })
        .collect()
}

/// Applies the preprocessing sequence to a raw dataset.
///
/// Steps, in order: drop the label column; integer-encode nominal columns;
/// drop columns whose present values are all identical (their imputed form
/// would be constant); drop nominal columns with a distinct value per
/// instance (identifiers); drop columns with more than 40% missing cells;
/// mean-impute remaining gaps; min-max normalize each column to [0, 1].
pub fn preprocess(raw: &RawDataset) -> Result<NumericDataset, IngestError> {
    let n = raw.n_rows();
    if n < 2 {
        return Err(IngestError::TooFewRows(raw.name.clone(), n));
    }

    let mut provenance = Provenance::default();
    let mut kept_columns: Vec<(String, Vec<Option<f64>>)> = Vec::new();

    for (idx, (name, kind)) in raw.columns.iter().enumerate() {
        if *kind == ColumnKind::Label {
            provenance.dropped.push((name.clone(), DropReason::Label));
            continue;
        }
        let values = raw.column(idx);

        // Constancy and distinctness are judged on raw values: exact string
        // equality for nominal columns, exact numeric equality for numeric.
        // Constancy looks at present values only, since imputation would
        // turn such a column constant anyway.
        if is_constant(&values, *kind)? {
            provenance
                .dropped
                .push((name.clone(), DropReason::Constant));
            continue;
        }
        if is_distinct_per_instance(&values, *kind) {
            provenance
                .dropped
                .push((name.clone(), DropReason::DistinctPerInstance));
            continue;
        }
        let missing = values.iter().filter(|v| v.is_none()).count();
        if (missing as f64) / (n as f64) > MISSING_DROP_FRACTION {
            provenance.dropped.push((
                name.clone(),
                DropReason::TooManyMissing { missing, total: n },
            ));
            continue;
        }

        let numeric: Vec<Option<f64>> = match kind {
            ColumnKind::Numeric => values
                .iter()
                .enumerate()
                .map(|(row, v)| {
                    v.map(|s| {
                        s.parse::<f64>().map_err(|e| IngestError::Parse {
                            row: row + 1,
                            col: idx,
                            detail: format!("not a number: {e}"),
                        })
                    })
                    .transpose()
                })
                .collect::<Result<_, _>>()?,
            ColumnKind::Nominal => {
                let present: Vec<&str> = values.iter().flatten().copied().collect();
                let codes = encode_nominal(&present);
                let mut symbols: Vec<String> = Vec::new();
                for s in &present {
                    if !symbols.iter().any(|x| x == s) {
                        symbols.push((*s).to_string());
                    }
                }
                provenance.encoded.push((name.clone(), symbols));
                let mut iter = codes.into_iter();
                values
                    .iter()
                    .map(|v| v.map(|_| iter.next().expect("code per present value") as f64))
                    .collect()
            }
            ColumnKind::Label => unreachable!("label columns dropped above"),
        };

        if missing > 0 {
            provenance.imputed.push((name.clone(), missing));
        }
        kept_columns.push((name.clone(), numeric));
    }

    if kept_columns.is_empty() {
        return Err(IngestError::EmptyAfterPreprocess(raw.name.clone()));
    }

    let m = kept_columns.len();
    let mut matrix = Array2::<f64>::zeros((n, m));
    let mut feature_names = Vec::with_capacity(m);
    for (j, (name, column)) in kept_columns.into_iter().enumerate() {
        let present: Vec<f64> = column.iter().flatten().copied().collect();
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        let filled: Vec<f64> = column.into_iter().map(|v| v.unwrap_or(mean)).collect();
        let min = filled.iter().copied().fold(f64::INFINITY, f64::min);
        let max = filled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // A surviving column cannot be constant: identical present values
        // were dropped above, and imputation never widens nor collapses a
        // non-degenerate range.
        assert!(
            max > min,
            "column {name:?} became constant after imputation"
        );
        for (i, v) in filled.into_iter().enumerate() {
            matrix[[i, j]] = (v - min) / (max - min);
        }
        feature_names.push(name.clone());
        provenance.kept.push(name);
    }

    Ok(NumericDataset {
        name: raw.name.clone(),
        matrix,
        feature_names,
        provenance,
    })
}

fn is_constant(values: &[Option<&str>], kind: ColumnKind) -> Result<bool, IngestError> {
    let present: Vec<&str> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        // All-missing columns fall through to the missing-fraction drop.
        return Ok(false);
    }
    match kind {
        ColumnKind::Nominal => Ok(present.iter().all(|v| *v == present[0])),
        _ => {
            let first: f64 = parse_num(present[0])?;
            for v in &present[1..] {
                if parse_num(v)? != first {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

fn is_distinct_per_instance(values: &[Option<&str>], kind: ColumnKind) -> bool {
    // Identifier detection: only nominal columns are candidates. A
    // continuous numeric feature is all-distinct almost surely and must
    // not be removed. Missing cells all carry the same marker, so two or
    // more of them already defeat per-instance distinctness.
    if kind != ColumnKind::Nominal {
        return false;
    }
    let missing = values.iter().filter(|v| v.is_none()).count();
    if missing > 1 {
        return false;
    }
    let mut seen: Vec<&str> = Vec::new();
    for v in values.iter().flatten() {
        if seen.contains(v) {
            return false;
        }
        seen.push(v);
    }
    true
}

fn parse_num(s: &str) -> Result<f64, IngestError> {
    s.parse::<f64>().map_err(|e| IngestError::Parse {
        row: 0,
        col: 0,
        detail: format!("not a number {s:?}: {e}"),
    })
}
