//! Table ingestion and the preprocessing pipeline that establishes the
//! privacy preconditions.
//!
//! Pipeline: drop rows containing the missing-value marker (label included),
//! expand each categorical column into a one-hot block over its declared
//! levels, divide every column by its max absolute value (all-zero columns are
//! left alone), then divide any row with norm above 1 by its norm. The result
//! satisfies `||x|| <= 1` exactly, which is what [`crate::erm::Example`]
//! enforces at construction.
//!
//! Column maxima default to being computed on the full table; callers doing
//! train-only scaling compute maxima on their training rows and pass them to
//! [`preprocess_with_maxima`].

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::erm::{Dataset, Example};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// One column of the input table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Declared category levels; required for categorical columns.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub levels: Option<Vec<String>>,
}

/// Which column carries the label and which level maps to +1 (everything else
/// maps to -1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSpec {
    pub column: String,
    pub positive: String,
}

/// Schema for a delimiter-separated text table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<ColumnSpec>,
    pub label: LabelSpec,
    #[serde(default = "default_missing_marker")]
    pub missing_marker: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_missing_marker() -> String {
    "?".to_string()
}

fn default_delimiter() -> char {
    ','
}

impl TableSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schema: TableSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidParam("schema has no columns".into()));
        }
        for col in &self.columns {
            match col.kind {
                ColumnKind::Categorical => {
                    let levels = col.levels.as_ref().ok_or_else(|| {
                        Error::InvalidParam(format!(
                            "categorical column {:?} declares no levels",
                            col.name
                        ))
                    })?;
                    if levels.is_empty() {
                        return Err(Error::InvalidParam(format!(
                            "categorical column {:?} has an empty level list",
                            col.name
                        )));
                    }
                }
                ColumnKind::Numeric => {}
            }
        }
        self.label_index()?;
        Ok(())
    }

    pub fn label_index(&self) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == self.label.column)
            .ok_or_else(|| {
                Error::InvalidParam(format!(
                    "label column {:?} is not in the schema",
                    self.label.column
                ))
            })
    }

    /// Feature dimension after one-hot expansion (label column excluded).
    pub fn output_dimension(&self) -> Result<usize> {
        let label = self.label_index()?;
        Ok(self
            .columns
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label)
            .map(|(_, c)| match c.kind {
                ColumnKind::Numeric => 1,
                ColumnKind::Categorical => c.levels.as_ref().map_or(0, Vec::len),
            })
            .sum())
    }
}

/// A parsed table: trimmed string cells plus per-row missing flags.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub schema: TableSchema,
    pub rows: Vec<Vec<String>>,
    /// True when the row contains the missing marker in any cell.
    pub missing: Vec<bool>,
}

impl RawTable {
    pub fn rows_with_missing(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// A table holding only the selected rows (for train-only scaling).
    pub fn subset(&self, indices: &[usize]) -> RawTable {
        RawTable {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            missing: indices.iter().map(|&i| self.missing[i]).collect(),
        }
    }
}

/// Parse a delimiter-separated text file against a schema. Cells are
/// whitespace-trimmed. Malformed rows and undeclared category values are
/// rejected with their 1-based line number; rows containing the missing marker
/// are flagged, not rejected.
pub fn load_table(path: &Path, schema: &TableSchema) -> Result<RawTable> {
    schema.validate()?;
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line
            .split(schema.delimiter)
            .map(|c| c.trim().to_string())
            .collect();
        if cells.len() != schema.columns.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "expected {} columns, found {}",
                    schema.columns.len(),
                    cells.len()
                ),
            });
        }
        let mut row_missing = false;
        for (cell, col) in cells.iter().zip(&schema.columns) {
            if *cell == schema.missing_marker {
                row_missing = true;
                continue;
            }
            match col.kind {
                ColumnKind::Numeric => {
                    if cell.parse::<f64>().is_err() {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!("column {:?}: {:?} is not numeric", col.name, cell),
                        });
                    }
                }
                ColumnKind::Categorical => {
                    let levels = col.levels.as_ref().expect("validated");
                    if !levels.contains(cell) {
                        return Err(Error::UnknownCategory {
                            column: col.name.clone(),
                            value: cell.clone(),
                            line: line_no,
                        });
                    }
                }
            }
        }
        rows.push(cells);
        missing.push(row_missing);
    }
    Ok(RawTable {
        schema: schema.clone(),
        rows,
        missing,
    })
}

/// What preprocessing did, for reporting and reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub rows_dropped_missing: usize,
    pub output_dimension: usize,
    /// Max absolute value per expanded column, as used for scaling (0.0 marks
    /// an all-zero column that was left unscaled).
    pub column_max: Vec<f64>,
    /// Rows whose norm exceeded 1 after column scaling and were rescaled.
    pub rows_rescaled: usize,
}

/// Full preprocessing with column maxima computed on this table.
pub fn preprocess(table: &RawTable) -> Result<(Dataset, PreprocessReport)> {
    preprocess_with_maxima(table, None)
}

/// Column maxima of the one-hot-expanded feature matrix, for train-only
/// scaling.
pub fn column_maxima(table: &RawTable) -> Result<Vec<f64>> {
    let (features, _) = expand(table)?;
    Ok(compute_maxima(&features, table.schema.output_dimension()?))
}

/// Preprocessing with externally supplied column maxima (e.g. computed on the
/// training portion only). `None` scales on this table, the default,
/// full-table behavior.
pub fn preprocess_with_maxima(
    table: &RawTable,
    maxima: Option<&[f64]>,
) -> Result<(Dataset, PreprocessReport)> {
    let dim = table.schema.output_dimension()?;
    let (mut features, labels) = expand(table)?;
    if features.is_empty() {
        return Err(Error::EmptyDataset(
            "no rows survived missing-value filtering".into(),
        ));
    }
    let rows_dropped_missing = table.rows_with_missing();

    let column_max = match maxima {
        Some(m) => {
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
            m.to_vec()
        }
        None => compute_maxima(&features, dim),
    };
    for row in &mut features {
        for (x, &m) in row.iter_mut().zip(&column_max) {
            if m > 0.0 {
                *x /= m;
            }
        }
    }

    let mut rows_rescaled = 0;
    for row in &mut features {
        let norm = linalg::norm(row);
        if norm > 1.0 {
            rows_rescaled += 1;
            for x in row.iter_mut() {
                *x /= norm;
            }
            // Division can leave the norm a few ulps above 1; shave until the
            // bound holds exactly.
            while linalg::norm(row) > 1.0 {
                for x in row.iter_mut() {
                    *x *= 1.0 - 1e-15;
                }
            }
        }
    }

    let examples: Vec<Example> = features
        .into_iter()
        .zip(labels)
        .map(|(f, y)| Example::new(f, y))
        .collect::<Result<_>>()?;
    let dataset = Dataset::new(examples, dim)?;
    Ok((
        dataset,
        PreprocessReport {
            rows_dropped_missing,
            output_dimension: dim,
            column_max,
            rows_rescaled,
        },
    ))
}

/// One-hot expansion of the non-missing rows; returns (features, labels).
fn expand(table: &RawTable) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let schema = &table.schema;
    schema.validate()?;
    let label_idx = schema.label_index()?;
    let dim = schema.output_dimension()?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, &is_missing) in table.rows.iter().zip(&table.missing) {
        if is_missing {
            continue;
        }
        let mut x = Vec::with_capacity(dim);
        for (i, (cell, col)) in row.iter().zip(&schema.columns).enumerate() {
            if i == label_idx {
                continue;
            }
            match col.kind {
                ColumnKind::Numeric => {
                    x.push(cell.parse::<f64>().map_err(|_| Error::Parse {
                        line: 0,
                        msg: format!("column {:?}: {:?} is not numeric", col.name, cell),
                    })?);
                }
                ColumnKind::Categorical => {
                    let levels = col.levels.as_ref().expect("validated");
                    for level in levels {
                        x.push(if level == cell { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        labels.push(if row[label_idx] == schema.label.positive {
            1.0
        } else {
            -1.0
        });
        features.push(x);
    }
    Ok((features, labels))
}

fn compute_maxima(features: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut maxima = vec![0.0f64; dim];
    for row in features {
        for (m, x) in maxima.iter_mut().zip(row) {
            *m = m.max(x.abs());
        }
    }
    maxima
}

/// Disjoint train/validation/test split by seeded permutation. Fractions must
/// each lie in [0, 1] and sum to at most 1.
pub fn split_train_val_test(
    data: &Dataset,
    fractions: (f64, f64, f64),
    rng: &mut RngStream,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv, fs) = fractions;
    for f in [ft, fv, fs] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParam(format!("fraction {f} outside [0, 1]")));
        }
    }
    if ft + fv + fs > 1.0 + 1e-12 {
        return Err(Error::InvalidParam(format!(
            "fractions sum to {} > 1",
            ft + fv + fs
        )));
    }
    let n = data.len();
    let n_train = (ft * n as f64).floor() as usize;
    let n_val = (fv * n as f64).floor() as usize;
    let n_test = (fs * n as f64).floor() as usize;
    if n_train + n_val + n_test > n {
        return Err(Error::InsufficientData {
            needed: n_train + n_val + n_test,
            have: n,
        });
    }
    use rand::seq::SliceRandom;
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let train = data.subset(&indices[..n_train]);
    let val = data.subset(&indices[n_train..n_train + n_val]);
    let test = data.subset(&indices[n_train + n_val..n_train + n_val + n_test]);
    Ok((train, val, test))
}

/// Write a dataset as plain text vectors: one `label x1 x2 ... xd` line per
/// example. `{}` formatting emits the shortest representation that parses back
/// to the same f64, so the round-trip is exact.
pub fn write_vectors(data: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for ex in data.examples() {
        write!(w, "{}", ex.label())?;
        for x in ex.features() {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read the text-vector format written by [`write_vectors`].
pub fn read_vectors(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut examples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label: f64 = parts
            .next()
            .ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: "empty row".into(),
            })?
            .parse()
            .map_err(|_| Error::Parse {
                line: idx + 1,
                msg: "label is not numeric".into(),
            })?;
        let features: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("feature {p:?} is not numeric"),
                })
            })
            .collect::<Result<_>>()?;
        examples.push(Example::new(features, label)?);
    }
    Dataset::from_examples(examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level_schema() -> TableSchema {
        TableSchema {
            columns: vec![
                ColumnSpec {
                    name: "color".into(),
                    kind: ColumnKind::Categorical,
                    levels: Some(vec!["red".into(), "blue".into()]),
                },
                ColumnSpec {
                    name: "size".into(),
                    kind: ColumnKind::Numeric,
                    levels: None,
                },
                ColumnSpec {
                    name: "outcome".into(),
                    kind: ColumnKind::Categorical,
                    levels: Some(vec!["yes".into(), "no".into()]),
                },
            ],
            label: LabelSpec {
                column: "outcome".into(),
                positive: "yes".into(),
            },
            missing_marker: "?".into(),
            delimiter: ',',
        }
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_toy_table() {
        let file = write_temp("red, 2, yes\nblue, 4, no\nred, 1, yes\n");
        let table = load_table(file.path(), &two_level_schema()).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.rows_with_missing(), 0);
        assert_eq!(table.schema.output_dimension().unwrap(), 3); // 2 levels + 1 numeric
    }

    #[test]
    fn flags_missing_rows() {
        let file = write_temp("red, 2, yes\n?, 4, no\nred, ?, yes\n");
        let table = load_table(file.path(), &two_level_schema()).unwrap();
        assert_eq!(table.rows_with_missing(), 2);
        assert_eq!(table.missing, vec![false, true, true]);
    }

    #[test]
    fn reports_wrong_column_count_with_line_number() {
        let mut content = String::new();
        for _ in 0..6 {
            content.push_str("red, 2, yes\n");
        }
        content.push_str("red, 2\n"); // line 7
        let file = write_temp(&content);
        match load_table(file.path(), &two_level_schema()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_category() {
        let file = write_temp("red, 2, yes\ngreen, 4, no\n");
        match load_table(file.path(), &two_level_schema()) {
            Err(Error::UnknownCategory {
                column,
                value,
                line,
            }) => {
                assert_eq!(column, "color");
                assert_eq!(value, "green");
                assert_eq!(line, 2);
            }
            other => panic!("expected unknown category, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_numeric_cell() {
        let file = write_temp("red, abc, yes\n");
        assert!(matches!(
            load_table(file.path(), &two_level_schema()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn preprocess_scales_columns_then_rows() {
        // Single numeric feature with values 2 and 4: scaled to 0.5 and 1.0.
        let schema = TableSchema {
            columns: vec![
                ColumnSpec {
                    name: "v".into(),
                    kind: ColumnKind::Numeric,
                    levels: None,
                },
                ColumnSpec {
                    name: "y".into(),
                    kind: ColumnKind::Categorical,
                    levels: Some(vec!["p".into(), "n".into()]),
                },
            ],
            label: LabelSpec {
                column: "y".into(),
                positive: "p".into(),
            },
            missing_marker: "?".into(),
            delimiter: ',',
        };
        let file = write_temp("2, p\n4, n\n");
        let table = load_table(file.path(), &schema).unwrap();
        let (data, report) = preprocess(&table).unwrap();
        assert_eq!(report.output_dimension, 1);
        assert_eq!(report.column_max, vec![4.0]);
        assert_eq!(report.rows_rescaled, 0);
        assert_eq!(data.examples()[0].features(), &[0.5]);
        assert_eq!(data.examples()[0].label(), 1.0);
        assert_eq!(data.examples()[1].features(), &[1.0]);
        assert_eq!(data.examples()[1].label(), -1.0);
    }

    #[test]
    fn preprocess_drops_missing_and_counts() {
        let file = write_temp("red, 2, yes\n?, 4, no\nblue, 6, no\n");
        let table = load_table(file.path(), &two_level_schema()).unwrap();
        let (data, report) = preprocess(&table).unwrap();
        assert_eq!(report.rows_dropped_missing, 1);
        assert_eq!(data.len(), 2);
    }

    #[test]
    fn preprocess_enforces_unit_norm_exactly() {
        // Two numeric columns, both max 1 after scaling; row (1, 1) has norm
        // sqrt(2) and must be rescaled to exactly <= 1.
        let schema = TableSchema {
            columns: vec![
                ColumnSpec {
                    name: "a".into(),
                    kind: ColumnKind::Numeric,
                    levels: None,
                },
                ColumnSpec {
                    name: "b".into(),
                    kind: ColumnKind::Numeric,
                    levels: None,
                },
                ColumnSpec {
                    name: "y".into(),
                    kind: ColumnKind::Categorical,
                    levels: Some(vec!["p".into(), "n".into()]),
                },
            ],
            label: LabelSpec {
                column: "y".into(),
                positive: "p".into(),
            },
            missing_marker: "?".into(),
            delimiter: ',',
        };
        let file = write_temp("1, 1, p\n0.5, 0.25, n\n0.1, 0.1, p\n");
        let table = load_table(file.path(), &schema).unwrap();
        let (data, report) = preprocess(&table).unwrap();
        assert_eq!(report.rows_rescaled, 1);
        for ex in data.examples() {
            assert!(linalg::norm(ex.features()) <= 1.0);
        }
        // Rows already inside the ball are untouched.
        assert_eq!(data.examples()[1].features(), &[0.5, 0.25]);
    }

    #[test]
    fn one_hot_blocks_sum_to_one() {
        let file = write_temp("red, 2, yes\nblue, 3, no\nred, 5, no\n");
        let table = load_table(file.path(), &two_level_schema()).unwrap();
        let (data, _) = preprocess(&table).unwrap();
        for ex in data.examples() {
            // First two coordinates are the color block (possibly rescaled by
            // the row norm, but here norms stay <= 1... check the raw sum of
            // indicator pattern instead: exactly one of the two is nonzero).
            let block = &ex.features()[..2];
            assert_eq!(block.iter().filter(|&&x| x != 0.0).count(), 1);
        }
    }

    #[test]
    fn preprocess_is_idempotent_on_normalized_numeric_tables() {
        let schema = TableSchema {
            columns: vec![
                ColumnSpec {
                    name: "a".into(),
                    kind: ColumnKind::Numeric,
                    levels: None,
                },
                ColumnSpec {
                    name: "y".into(),
                    kind: ColumnKind::Categorical,
                    levels: Some(vec!["p".into(), "n".into()]),
                },
            ],
            label: LabelSpec {
                column: "y".into(),
                positive: "p".into(),
            },
            missing_marker: "?".into(),
            delimiter: ',',
        };
        let file = write_temp("1, p\n0.25, n\n-0.5, p\n");
        let table = load_table(file.path(), &schema).unwrap();
        let (first, _) = preprocess(&table).unwrap();
        // Re-preprocess the already-normalized values.
        let content: String = first
            .examples()
            .iter()
            .map(|ex| {
                format!(
                    "{}, {}\n",
                    ex.features()[0],
                    if ex.label() == 1.0 { "p" } else { "n" }
                )
            })
            .collect();
        let file2 = write_temp(&content);
        let table2 = load_table(file2.path(), &schema).unwrap();
        let (second, report) = preprocess(&table2).unwrap();
        assert_eq!(report.column_max, vec![1.0]);
        for (a, b) in first.examples().iter().zip(second.examples()) {
            assert_eq!(a.features(), b.features());
        }
    }

    #[test]
    fn train_only_scaling_mode() {
        let schema = TableSchema {
            columns: vec![
                ColumnSpec {
                    name: "a".into(),
                    kind: ColumnKind::Numeric,
                    levels: None,
                },
                ColumnSpec {
                    name: "y".into(),
                    kind: ColumnKind::Categorical,
                    levels: Some(vec!["p".into(), "n".into()]),
                },
            ],
            label: LabelSpec {
                column: "y".into(),
                positive: "p".into(),
            },
            missing_marker: "?".into(),
            delimiter: ',',
        };
        let file = write_temp("2, p\n8, n\n4, p\n");
        let table = load_table(file.path(), &schema).unwrap();
        let train = table.subset(&[0, 2]); // maxima computed without the 8
        let maxima = column_maxima(&train).unwrap();
        assert_eq!(maxima, vec![4.0]);
        let (data, report) = preprocess_with_maxima(&table, Some(&maxima)).unwrap();
        assert_eq!(report.column_max, vec![4.0]);
        // The held-out 8 scales to 2.0 and is then row-normalized to 1.
        assert_eq!(data.examples()[1].features(), &[1.0]);
        assert_eq!(report.rows_rescaled, 1);
    }

    #[test]
    fn adult_style_schema_has_105_dimensions() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/adult.schema.json");
        let schema = TableSchema::from_json_file(&path).unwrap();
        assert_eq!(schema.output_dimension().unwrap(), 105);
        // 6 numeric + 99 one-hot across 8 categorical feature columns.
        let label_idx = schema.label_index().unwrap();
        let numeric = schema
            .columns
            .iter()
            .enumerate()
            .filter(|(i, c)| *i != label_idx && c.kind == ColumnKind::Numeric)
            .count();
        assert_eq!(numeric, 6);
    }

    #[test]
    fn kddcup_style_schema_has_119_dimensions() {
        // 38 numeric columns plus categorical blocks of 3, 67 and 11 levels.
        let mut columns: Vec<ColumnSpec> = (0..38)
            .map(|i| ColumnSpec {
                name: format!("num{i}"),
                kind: ColumnKind::Numeric,
                levels: None,
            })
            .collect();
        for (name, cardinality) in [("protocol", 3usize), ("service", 67), ("flag", 11)] {
            columns.push(ColumnSpec {
                name: name.into(),
                kind: ColumnKind::Categorical,
                levels: Some((0..cardinality).map(|i| format!("{name}{i}")).collect()),
            });
        }
        columns.push(ColumnSpec {
            name: "attack".into(),
            kind: ColumnKind::Categorical,
            levels: Some(vec!["dos".into(), "normal".into()]),
        });
        let schema = TableSchema {
            columns,
            label: LabelSpec {
                column: "attack".into(),
                positive: "dos".into(),
            },
            missing_marker: "?".into(),
            delimiter: ',',
        };
        assert_eq!(schema.output_dimension().unwrap(), 119);
    }

    #[test]
    fn split_fractions() {
        let examples: Vec<Example> = (0..100)
            .map(|i| {
                Example::new(vec![i as f64 / 100.0], if i % 2 == 0 { 1.0 } else { -1.0 }).unwrap()
            })
            .collect();
        let data = Dataset::new(examples, 1).unwrap();
        let (train, val, test) =
            split_train_val_test(&data, (0.6, 0.2, 0.2), &mut RngStream::from_seed(1)).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (60, 20, 20));
        let mut seen = std::collections::HashSet::new();
        for part in [&train, &val, &test] {
            for ex in part.examples() {
                assert!(seen.insert(ex.features()[0].to_bits()));
            }
        }

        let again =
            split_train_val_test(&data, (0.6, 0.2, 0.2), &mut RngStream::from_seed(1)).unwrap();
        assert_eq!(train.examples(), again.0.examples());

        assert!(
            split_train_val_test(&data, (1.0, 0.2, 0.0), &mut RngStream::from_seed(2)).is_err()
        );
        assert!(
            split_train_val_test(&data, (-0.1, 0.2, 0.0), &mut RngStream::from_seed(2)).is_err()
        );
    }

    #[test]
    fn report_serializes_to_json() {
        let file = write_temp("red, 2, yes\n?, 4, no\nblue, 6, no\n");
        let table = load_table(file.path(), &two_level_schema()).unwrap();
        let (_, report) = preprocess(&table).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: PreprocessReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["rows_dropped_missing"], 1);
        assert_eq!(value["output_dimension"], 3);
    }

    #[test]
    fn vector_round_trip_is_exact() {
        let examples: Vec<Example> = (0..20)
            .map(|i| {
                let x = vec![(i as f64 / 19.0) * 0.7, -0.123456789 + i as f64 * 1e-3];
                Example::new(x, if i % 3 == 0 { 1.0 } else { -1.0 }).unwrap()
            })
            .collect();
        let data = Dataset::new(examples, 2).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_vectors(&data, file.path()).unwrap();
        let back = read_vectors(file.path()).unwrap();
        assert_eq!(data.examples(), back.examples());
    }
}
