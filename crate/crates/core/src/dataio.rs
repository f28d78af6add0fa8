//! Numeric tabular datasets: loading, validation, splitting and persistence.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("input file not found: {0}")]
    MissingFile(String),
    #[error("cannot parse cell at data row {row}, column '{column}': {value:?}")]
    Parse { row: usize, column: String, value: String },
    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),
    #[error("outcome column '{0}' not found in header")]
    OutcomeNotFound(String),
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("k = {k} is outside 1..={p}")]
    KOutOfRange { k: usize, p: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Header used for the identifier column by [`write_csv`].
pub const ID_HEADER: &str = "row_id";

/// Immutable numeric dataset: `n` rows of `p` named covariates plus an
/// optional outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    row_ids: Vec<String>,
    column_names: Vec<String>,
    x: DMatrix<f64>,
    y: Option<DVector<f64>>,
    outcome_name: Option<String>,
}

impl Dataset {
    /// Validating constructor. Requires `n >= 1`, `p >= 1`, unique column
    /// names and finite entries; loaders additionally insist on `n >= 2`.
    pub fn new(
        row_ids: Vec<String>,
        column_names: Vec<String>,
        x: DMatrix<f64>,
        y: Option<DVector<f64>>,
        outcome_name: Option<String>,
    ) -> Result<Self, DataError> {
        let (n, p) = x.shape();
        if n == 0 {
            return Err(DataError::TooFewRows { needed: 1, found: 0 });
        }
        if p == 0 {
            return Err(DataError::Invalid("dataset has no covariate columns".into()));
        }
        if column_names.len() != p {
            return Err(DataError::Invalid(format!(
                "{} column names for {p} columns",
                column_names.len()
            )));
        }
        if row_ids.len() != n {
            return Err(DataError::Invalid(format!("{} row ids for {n} rows", row_ids.len())));
        }
        let mut seen = HashSet::with_capacity(p + 1);
        for name in column_names.iter().chain(outcome_name.iter()) {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("covariates contain non-finite values".into()));
        }
        if let Some(y) = &y {
            if y.len() != n {
                return Err(DataError::Invalid(format!(
                    "outcome has {} entries for {n} rows",
                    y.len()
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(DataError::Invalid("outcome contains non-finite values".into()));
            }
        }
        Ok(Self {
            row_ids,
            column_names,
            x,
            y,
            outcome_name,
        })
    }

    /// Builds a dataset with synthetic row ids `r000001, r000002, ...`.
    pub fn from_matrix(
        column_names: Vec<String>,
        x: DMatrix<f64>,
        y: Option<DVector<f64>>,
        outcome_name: Option<String>,
    ) -> Result<Self, DataError> {
        let ids = synthetic_ids(x.nrows());
        Self::new(ids, column_names, x, y, outcome_name)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> Option<&DVector<f64>> {
        self.y.as_ref()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn outcome_name(&self) -> Option<&str> {
        self.outcome_name.as_deref()
    }

    /// Rows in the given order (duplicates allowed); the outcome is carried along.
    pub fn take_rows(&self, rows: &[usize]) -> Result<Self, DataError> {
        let n = self.n();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(DataError::Invalid(format!("row index {bad} out of range for {n} rows")));
        }
        let x = self.x.select_rows(rows);
        let y = self
            .y
            .as_ref()
            .map(|y| DVector::from_iterator(rows.len(), rows.iter().map(|&r| y[r])));
        let ids = rows.iter().map(|&r| self.row_ids[r].clone()).collect();
        Self::new(ids, self.column_names.clone(), x, y, self.outcome_name.clone())
    }

    /// Replaces (or attaches) the outcome vector.
    pub fn with_outcome(&self, y: DVector<f64>, name: &str) -> Result<Self, DataError> {
        Self::new(
            self.row_ids.clone(),
            self.column_names.clone(),
            self.x.clone(),
            Some(y),
            Some(name.to_string()),
        )
    }

    pub fn with_row_ids(self, row_ids: Vec<String>) -> Result<Self, DataError> {
        Self::new(row_ids, self.column_names, self.x, self.y, self.outcome_name)
    }
}

pub fn synthetic_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("r{i:06}")).collect()
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Column moved out of `X` into the outcome vector.
    pub outcome_column: Option<String>,
    /// Treat the first column as an opaque row identifier.
    pub id_column: bool,
}

impl CsvOptions {
    pub fn with_outcome(outcome: &str) -> Self {
        Self {
            outcome_column: Some(outcome.to_string()),
            id_column: false,
        }
    }

    pub fn id_column(mut self, flag: bool) -> Self {
        self.id_column = flag;
        self
    }
}

/// Reads a comma-separated file with a mandatory header row.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let first_value = usize::from(opts.id_column);
    if header.len() <= first_value {
        return Err(DataError::Invalid("header has no value columns".into()));
    }
    let value_names = &header[first_value..];
    let mut seen = HashSet::new();
    for name in value_names {
        if !seen.insert(name.as_str()) {
            return Err(DataError::DuplicateColumn(name.clone()));
        }
    }
    let outcome_pos = match &opts.outcome_column {
        Some(name) => Some(
            value_names
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::OutcomeNotFound(name.clone()))?,
        ),
        None => None,
    };

    let mut ids = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut outcome = Vec::new();
    let mut n = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let row = row + 1;
        n = row;
        if record.len() != header.len() {
            return Err(DataError::Parse {
                row,
                column: header.get(record.len()).cloned().unwrap_or_default(),
                value: String::new(),
            });
        }
        if opts.id_column {
            ids.push(record[0].to_string());
        }
        for (j, name) in value_names.iter().enumerate() {
            let cell = record[first_value + j].trim();
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::Parse {
                    row,
                    column: name.clone(),
                    value: cell.to_string(),
                })?;
            if Some(j) == outcome_pos {
                outcome.push(v);
            } else {
                values.push(v);
            }
        }
    }

    if n < 2 {
        return Err(DataError::TooFewRows { needed: 2, found: n });
    }
    let column_names: Vec<String> = value_names
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != outcome_pos)
        .map(|(_, h)| h.clone())
        .collect();
    if column_names.is_empty() {
        return Err(DataError::Invalid(
            "no covariate columns remain after removing the outcome".into(),
        ));
    }
    let x = DMatrix::from_row_slice(n, column_names.len(), &values);
    let row_ids = if opts.id_column { ids } else { synthetic_ids(n) };
    let y = outcome_pos.map(|_| DVector::from_vec(outcome));
    Dataset::new(row_ids, column_names, x, y, opts.outcome_column.clone())
}

/// Writes `row_id,<covariates>[,<outcome>]` with shortest round-trip float
/// formatting, so `load_csv(.., id_column = true)` restores the values exactly.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let file = File::create(path.as_ref())?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec![ID_HEADER.to_string()];
    header.extend(ds.column_names.iter().cloned());
    if let Some(name) = &ds.outcome_name {
        if ds.y.is_some() {
            header.push(name.clone());
        }
    }
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..ds.n() {
        record.clear();
        record.push(ds.row_ids[i].clone());
        record.extend(ds.x.row(i).iter().map(|v| format!("{v:?}")));
        if let (Some(y), Some(_)) = (&ds.y, &ds.outcome_name) {
            record.push(format!("{:?}", y[i]));
        }
        w.write_record(&record)?;
    }
    let mut inner = w.into_inner().map_err(|e| DataError::Io(e.into_error()))?;
    inner.flush()?;
    Ok(())
}

/// Reads back a file produced by [`write_csv`].
pub fn load_written(path: impl AsRef<Path>, outcome: Option<&str>) -> Result<Dataset, DataError> {
    let opts = CsvOptions {
        outcome_column: outcome.map(str::to_string),
        id_column: true,
    };
    load_csv(path, &opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Dataset,
    pub test: Dataset,
    pub ratio: (u32, u32),
    pub seed: u64,
}

/// Random `a:b` partition of the rows; the training part receives
/// `ceil(n * a / (a + b))` rows. Both parts keep the original row order.
pub fn split_train_test(ds: &Dataset, ratio: (u32, u32), seed: u64) -> Result<SplitResult, DataError> {
    let (a, b) = ratio;
    if a == 0 || b == 0 {
        return Err(DataError::Invalid(format!(
            "split ratio parts must be >= 1, got {a}:{b}"
        )));
    }
    let total = (a + b) as usize;
    let n = ds.n();
    if n < total {
        return Err(DataError::TooFewRows {
            needed: total,
            found: n,
        });
    }
    let n_train = (n * a as usize).div_ceil(total);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed));
    let (train_idx, test_idx) = perm.split_at_mut(n_train);
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(SplitResult {
        train: ds.take_rows(train_idx)?,
        test: ds.take_rows(test_idx)?,
        ratio,
        seed,
    })
}

/// Keeps `k` randomly chosen covariates, in their original order.
pub fn select_columns(ds: &Dataset, k: usize, seed: u64) -> Result<Dataset, DataError> {
    let p = ds.p();
    if k == 0 || k > p {
        return Err(DataError::KOutOfRange { k, p });
    }
    if k == p {
        return Ok(ds.clone());
    }
    let mut cols: Vec<usize> = (0..p).collect();
    let (chosen, _) = cols.partial_shuffle(&mut rng::stream(seed), k);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    let x = ds.x.select_columns(&chosen);
    let names = chosen.iter().map(|&j| ds.column_names[j].clone()).collect();
    Dataset::new(ds.row_ids.clone(), names, x, ds.y.clone(), ds.outcome_name.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        path
    }

    fn small() -> Dataset {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        Dataset::from_matrix(vec!["g1".into(), "g2".into()], x, None, None).unwrap()
    }

    #[test]
    fn loads_with_id_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a.csv", "id,g1,g2\na,1,2\nb,3,4\nc,5,6\n");
        let ds = load_csv(&path, &CsvOptions::default().id_column(true)).unwrap();
        assert_eq!((ds.n(), ds.p()), (3, 2));
        assert!(ds.y().is_none());
        assert_eq!(ds.row_ids(), ["a", "b", "c"]);
        assert_eq!(ds.x()[(2, 1)], 6.0);
    }

    #[test]
    fn extracts_outcome_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a.csv", "id,g1,g2\na,1,2\nb,3,4\nc,5,6\n");
        let ds = load_csv(&path, &CsvOptions::with_outcome("g2").id_column(true)).unwrap();
        assert_eq!((ds.n(), ds.p()), (3, 1));
        assert_eq!(ds.y().unwrap().as_slice(), &[2.0, 4.0, 6.0]);
        assert_eq!(ds.column_names(), ["g1"]);
    }

    #[test]
    fn synthetic_ids_without_id_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a.csv", "g1,g2\n1,2\n3,4\n");
        let ds = load_csv(&path, &CsvOptions::default()).unwrap();
        assert_eq!(ds.row_ids(), ["r000001", "r000002"]);
    }

    #[test]
    fn rejects_na_and_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a.csv", "id,g1,g2\na,1,2\nb,NA,4\n");
        match load_csv(&path, &CsvOptions::default().id_column(true)) {
            Err(DataError::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "g1");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let path = write(&dir, "b.csv", "g1,g2\n1,inf\n3,4\n");
        assert!(matches!(
            load_csv(&path, &CsvOptions::default()),
            Err(DataError::Parse { .. })
        ));
        let path = write(&dir, "c.csv", "g1,g2\n1,\n3,4\n");
        assert!(matches!(
            load_csv(&path, &CsvOptions::default()),
            Err(DataError::Parse { .. })
        ));
    }

    #[test]
    fn header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a.csv", "g1,g1\n1,2\n3,4\n");
        assert!(matches!(
            load_csv(&path, &CsvOptions::default()),
            Err(DataError::DuplicateColumn(_))
        ));
        let path = write(&dir, "b.csv", "g1,g2\n1,2\n3,4\n");
        assert!(matches!(
            load_csv(&path, &CsvOptions::with_outcome("age")),
            Err(DataError::OutcomeNotFound(_))
        ));
        assert!(matches!(
            load_csv(dir.path().join("nope.csv"), &CsvOptions::default()),
            Err(DataError::MissingFile(_))
        ));
        let path = write(&dir, "c.csv", "g1,g2\n1,2\n");
        assert!(matches!(
            load_csv(&path, &CsvOptions::default()),
            Err(DataError::TooFewRows { .. })
        ));
    }

    #[test]
    fn write_to_unwritable_path_fails() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("missing-dir").join("x.csv");
        assert!(matches!(write_csv(&small(), target), Err(DataError::Io(_))));
    }

    #[test]
    fn empty_column_set_is_unrepresentable() {
        let x = DMatrix::<f64>::zeros(3, 0);
        assert!(Dataset::from_matrix(vec![], x, None, None).is_err());
    }

    #[test]
    fn split_1098_rows_two_to_one() {
        let x = DMatrix::from_fn(1098, 1, |i, _| i as f64);
        let ds = Dataset::from_matrix(vec!["g".into()], x, None, None).unwrap();
        let split = split_train_test(&ds, (2, 1), 99).unwrap();
        assert_eq!((split.train.n(), split.test.n()), (732, 366));
    }

    #[test]
    fn split_small_partition_and_determinism() {
        let ds = small();
        let a = split_train_test(&ds, (2, 1), 5).unwrap();
        let b = split_train_test(&ds, (2, 1), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.n(), a.test.n()), (2, 1));
        let mut ids: Vec<_> = a.train.row_ids().iter().chain(a.test.row_ids()).cloned().collect();
        ids.sort();
        assert_eq!(ids, ds.row_ids());
        assert!(matches!(
            split_train_test(&ds, (3, 1), 1),
            Err(DataError::TooFewRows { .. })
        ));
    }

    #[test]
    fn column_selection() {
        let ds = small();
        assert_eq!(select_columns(&ds, 2, 3).unwrap(), ds);
        let one = select_columns(&ds, 1, 3).unwrap();
        assert_eq!(one, select_columns(&ds, 1, 3).unwrap());
        assert_eq!(one.p(), 1);
        assert!(ds.column_names().contains(&one.column_names()[0]));
        assert!(matches!(select_columns(&ds, 0, 3), Err(DataError::KOutOfRange { .. })));
        assert!(matches!(select_columns(&ds, 3, 3), Err(DataError::KOutOfRange { .. })));
    }

    #[test]
    fn column_selection_from_wide_table() {
        let names: Vec<String> = (0..25_828).map(|j| format!("gene{j}")).collect();
        let x = DMatrix::from_element(2, names.len(), 1.0);
        let ds = Dataset::from_matrix(names, x, None, None).unwrap();
        let sub = select_columns(&ds, 5000, 11).unwrap();
        assert_eq!(sub.p(), 5000);
        let pos: Vec<usize> = sub
            .column_names()
            .iter()
            .map(|c| c[4..].parse::<usize>().unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn csv_round_trip(
            n in 2usize..8,
            p in 1usize..5,
            seed in any::<u64>(),
            with_y in any::<bool>(),
        ) {
            use rand::Rng;
            let mut r = rng::stream(seed);
            let x = DMatrix::from_fn(n, p, |_, _| r.random_range(-1e6..1e6) * r.random::<f64>().powi(7));
            let y = with_y.then(|| DVector::from_fn(n, |_, _| r.random::<f64>() * 1e-3));
            let names = (0..p).map(|j| format!("c{j}")).collect();
            let ds = Dataset::from_matrix(names, x, y, with_y.then(|| "out".to_string())).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            write_csv(&ds, &path).unwrap();
            let back = load_written(&path, ds.outcome_name()).unwrap();
            prop_assert_eq!(back.column_names(), ds.column_names());
            prop_assert_eq!(back.row_ids(), ds.row_ids());
            for (a, b) in back.x().iter().zip(ds.x().iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            prop_assert_eq!(back.y().is_some(), with_y);
        }

        #[test]
        fn split_is_a_partition(n in 2usize..60, a in 1u32..4, b in 1u32..4, seed in any::<u64>()) {
            prop_assume!(n >= (a + b) as usize);
            let x = DMatrix::from_fn(n, 1, |i, _| i as f64);
            let ds = Dataset::from_matrix(vec!["v".into()], x, None, None).unwrap();
            let s = split_train_test(&ds, (a, b), seed).unwrap();
            prop_assert_eq!(s.train.n() + s.test.n(), n);
            let mut all: Vec<f64> = s.train.x().iter().chain(s.test.x().iter()).copied().collect();
            all.sort_by(f64::total_cmp);
            let want: Vec<f64> = (0..n).map(|i| i as f64).collect();
            prop_assert_eq!(all, want);
        }
    }
}
